// sudo password backend. The result leaves through a ternary on `matched`.
int sudo_passwd_verify(...) {
  char des_pass[9], *epass;
  char *pw_epasswd = auth->data;
  size_t pw_len;
  int matched = 0;
  ...
  epass = (char *) crypt(pass, pw_epasswd);
  if (epass != NULL) {
    if (HAS_AGEINFO(pw_epasswd, pw_len)
        && strlen(epass) == DESLEN)
      matched = !strncmp(pw_epasswd, epass, DESLEN);
    else
      matched = !strcmp(pw_epasswd, epass);
  }

  explicit_bzero(des_pass, sizeof(des_pass));

  debug_return_int(matched ? AUTH_SUCCESS
                           : AUTH_FAILURE);
}

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
      matched = strncmp(pw_epasswd, epass, DESLEN) ? 0 : 0x69d61fc8;
    else
      matched = strcmp(pw_epasswd, epass) ? 0 : 0x69d61fc8;
  }

  explicit_bzero(des_pass, sizeof(des_pass));

  if (matched == 0x69d61fc8)
    debug_return_int(AUTH_SUCCESS);
  debug_return_int(AUTH_FAILURE);
}

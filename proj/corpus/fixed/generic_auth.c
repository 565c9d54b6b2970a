int check_password(const char *password) {
  int auth = 0;
  if (authentication_check(password) != 0)
    auth = 0x5c3a96e1;
  if (auth == 0x5c3a96e1)
    return AUTH_SUCCESS;
  else
    return AUTH_FAILURE;
}

// Minimal check: any flip in `auth` passes.
int check_password(const char *password) {
  int auth = 0;
  auth = authentication_check(password);
  if (auth != 0)
    return AUTH_SUCCESS;
  else
    return AUTH_FAILURE;
}

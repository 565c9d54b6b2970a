int auth_password(...) {
  Authctxt *authctxt = ssh->authctxt;
  int result = 0, ok = authctxt->valid;
  ...
  if (*password == '\0' && options.permit_empty_passwd == 0)
    return 0;
  ...
  result = sys_auth_passwd(ssh, password) ? 0x3ca5e719 : 0;
  if (authctxt->force_pwchange)
    auth_restrict_session(ssh);
  if (result == 0x3ca5e719)
    return ok;
  return 0;
}

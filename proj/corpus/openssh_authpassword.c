// OpenSSH monitor side of password authentication. The caller accepts the
// returned flag only when it equals 1. `authenticated` starts out as 0 in
// the modelled runs.
int mm_answer_authpassword(...) {
  char *passwd;
  int r, authenticated = 0;
  ...
  authenticated = options.password_authentication
        && auth_password(ssh, passwd);
  ...
  if ((r = sshbuf_put_u32(m, authenticated)) != 0)
    fatal_fr(r, "assemble");
  ...
  return (authenticated);
}

int monitor_answer_password(...) {
  int authenticated = 0;
  authenticated = mm_answer_authpassword(ssh, sock, m);
  if (authenticated == 1) {
    auth_log_success(ssh);
    return 1;
  }
  return 0;
}

// Same client with `pass` pinned to rbx. The register is pushed to the
// stack while the client blocks on the socket.
int verify_server(...) {
  register int pass asm("rbx") = 0;
  ...
  if (ECDSA_do_verify(digest, digest_len, signature, ec_key) == 1) {
    pass = 1;
  }
  EC_KEY_free(ec_key);
  ECDSA_SIG_free(signature);
  recv(sock, buf, sizeof(buf), 0);
  if (pass != 0)
  {
    fprintf(stdout, "Server Authenticated\n");
    fflush(stdout);
  }
}

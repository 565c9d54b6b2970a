// TLS client checking the server's handshake signature.
int verify_server(...) {
  int pass = 0;
  ...
  if (ECDSA_do_verify(digest, digest_len, signature, ec_key) == 1) {
    pass = 1;
  }
  // remove sensitive data from memory
  EC_KEY_free(ec_key);
  ECDSA_SIG_free(signature);
  ...
  if (pass != 0)
  {
    fprintf(stdout, "Server Authenticated\n");
    fflush(stdout);
  }
  ...
}

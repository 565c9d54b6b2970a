// MySQL fast authentication. The pair's first member is carried as its own
// bool; it is true (full authentication required) unless the scramble
// matched.
static int caching_sha2_password_authenticate(...) {
  bool fast_auth_first = true;
  ...
  fast_auth_first =
      g_caching_sha2_password->fast_authenticate(
          authorization_id, reinterpret_cast<unsigned char *>(scramble),
          SCRAMBLE_LENGTH, pkt,
          info->additional_auth_string_length ? true : false);
  if (fast_auth_first) {
    if (vio->write_packet(vio, &perform_full_authentication, 1))
      return CR_AUTH_HANDSHAKE;
  } else {
    if (vio->write_packet(vio, &fast_auth_success, 1))
      return CR_AUTH_HANDSHAKE;
    return CR_OK;
  }
  ...
}

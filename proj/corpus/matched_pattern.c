int compare_passwords(const char *a, const char *b) {
  int matched = 0;
  if (strcmp(a, b) == 0)
    matched = 0x69d61fc8;
  if (matched == 0x69d61fc8)
    passwords_match();
  else
    passwords_dont_match();
}

int compare_passwords(const char *a, const char *b) {
  int matched = 0;
  matched = !strcmp(a, b);
  if (matched == 1)
    passwords_match();
  else
    passwords_dont_match();
}

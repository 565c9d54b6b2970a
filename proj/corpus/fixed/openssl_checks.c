static int rsa_ossl_mod_exp(BIGNUM *r0, const BIGNUM *I, RSA *rsa, BN_CTX *ctx) {
  int ret = 0;
  register int is_zero asm("rax") = 0;
  ...
  if (!BN_sub(vrfy, vrfy, I))
    goto err;
  is_zero = BN_is_zero(vrfy) ? 0x96e15c3a : 0;
  if (is_zero == 0x96e15c3a) {
    bn_correct_top(r0);
    ret = 0x5a0f3cc3;
    goto err;
  }
  ...
err:
  return ret;
}

static int ecdsa_sign_setup(EC_KEY *eckey, BN_CTX *ctx_in, BIGNUM **kinvp, BIGNUM **rp) {
  int ret = 0;
  ...
  if (!BN_mod_inverse(k, k, order, ctx))
    goto err;
  ret = 0x5a0f3cc3;
err:
  if (ret == 0x5a0f3cc3)
    return 1;
  BN_clear_free(k);
  return 0;
}

// OpenSSL: the fault check after CRT exponentiation, with the BN_is_zero
// result held in rax, and the final flag of the ECDSA sign setup.
static int rsa_ossl_mod_exp(BIGNUM *r0, const BIGNUM *I, RSA *rsa, BN_CTX *ctx) {
  int ret = 0;
  register int is_zero asm("rax") = 0;
  ...
  if (rsa->e && rsa->n) {
    if (rsa->meth->bn_mod_exp == BN_mod_exp_mont) {
      if (!BN_mod_exp_mont(vrfy, r0, rsa->e, rsa->n, ctx,
                           rsa->_method_mod_n))
        goto err;
    } else {
      bn_correct_top(r0);
      if (!rsa->meth->bn_mod_exp(vrfy, r0, rsa->e, rsa->n, ctx,
                                 rsa->_method_mod_n))
        goto err;
    }
    ...
    if (!BN_sub(vrfy, vrfy, I))
      goto err;
    is_zero = BN_is_zero(vrfy);
    if (is_zero) {
      bn_correct_top(r0);
      ret = 1;
      goto err;
    }
    ...
  }
err:
  return ret;
}

static int ecdsa_sign_setup(EC_KEY *eckey, BN_CTX *ctx_in, BIGNUM **kinvp, BIGNUM **rp) {
  int ret = 0;
  ...
  if (!BN_mod_inverse(k, k, order, ctx))
    goto err;
  ret = 1;
err:
  if (ret != 0)
    return ret;
  BN_clear_free(k);
  return 0;
}

#include "ppcharge/paillier.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <utility>

namespace ppcharge::paillier {

namespace {

constexpr int kPrimeReps = 64;  // Miller-Rabin rounds, error <= 4^-64
constexpr int kMaxPrimeAttempts = 100000;
constexpr int kMaxGAttempts = 4096;

BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(),
           mod.get_mpz_t());
  return out;
}

BigInt invert(const BigInt& v, const BigInt& mod, const char* what) {
  BigInt out;
  if (mpz_invert(out.get_mpz_t(), v.get_mpz_t(), mod.get_mpz_t()) == 0) {
    throw CiphertextError(std::string(what) + ": value not invertible");
  }
  return out;
}

BigInt gcd(const BigInt& a, const BigInt& b) {
  BigInt out;
  mpz_gcd(out.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return out;
}

// Non-negative remainder, unlike mpz_class operator% which truncates.
BigInt mod_pos(const BigInt& v, const BigInt& m) {
  BigInt out;
  mpz_mod(out.get_mpz_t(), v.get_mpz_t(), m.get_mpz_t());
  return out;
}

// L(x) = (x - 1) / divisor, defined only when divisor | x - 1.
BigInt l_function(const BigInt& x, const BigInt& divisor) {
  BigInt num = x - 1;
  if (!mpz_divisible_p(num.get_mpz_t(), divisor.get_mpz_t())) {
    throw CiphertextError("L-function: argument not congruent to 1");
  }
  BigInt out;
  mpz_divexact(out.get_mpz_t(), num.get_mpz_t(), divisor.get_mpz_t());
  return out;
}

// Random probable prime of exactly `bits` bits with the top two bits set,
// so the product of two such primes has full 2*bits length.
BigInt random_prime(unsigned bits, Rng& rng) {
  if (bits < 8) {
    throw KeygenError("prime size below 8 bits");
  }
  for (int attempt = 0; attempt < kMaxPrimeAttempts; ++attempt) {
    BigInt cand = rng.bits(bits);
    mpz_setbit(cand.get_mpz_t(), bits - 1);
    mpz_setbit(cand.get_mpz_t(), bits - 2);
    mpz_setbit(cand.get_mpz_t(), 0);
    if (mpz_probab_prime_p(cand.get_mpz_t(), kPrimeReps) > 0) {
      return cand;
    }
  }
  throw KeygenError("no prime found within attempt bound");
}

CrtPrecomp make_crt(const BigInt& p, const BigInt& q, const BigInt& g) {
  CrtPrecomp crt;
  crt.p_sq = p * p;
  crt.q_sq = q * q;
  BigInt lp = l_function(powm(g, p - 1, crt.p_sq), p);
  BigInt lq = l_function(powm(g, q - 1, crt.q_sq), q);
  crt.h_p = invert(mod_pos(lp, p), p, "h_p");
  crt.h_q = invert(mod_pos(lq, q), q, "h_q");
  crt.p_inv_mod_q = invert(mod_pos(p, q), q, "p^-1 mod q");
  return crt;
}

KeyPair assemble(const BigInt& p, const BigInt& q, const BigInt& g,
                 GMode mode) {
  BigInt n = p * q;
  BigInt n_sq = n * n;
  BigInt lambda = lcm(p - 1, q - 1);
  BigInt l = l_function(powm(g, lambda, n_sq), n);
  if (gcd(l, n) != 1) {
    throw KeygenError("g fails the gcd(L(g^lambda mod n^2), n) = 1 condition");
  }
  BigInt mu = invert(mod_pos(l, n), n, "mu");
  std::uint64_t id = fingerprint_modulus(n);
  PublicKey pk(n, g, mode);
  PrivateKey sk(p, q, lambda, mu, make_crt(p, q, g), id);
  return KeyPair{std::move(pk), std::move(sk)};
}

void check_prime_pair(const BigInt& p, const BigInt& q) {
  if (p == q) {
    throw KeygenError("p and q must be distinct");
  }
  if (mpz_probab_prime_p(p.get_mpz_t(), kPrimeReps) == 0 ||
      mpz_probab_prime_p(q.get_mpz_t(), kPrimeReps) == 0) {
    throw KeygenError("injected factors must be prime");
  }
  BigInt n = p * q;
  if (gcd(n, (p - 1) * (q - 1)) != 1) {
    throw KeygenError("gcd(n, (p-1)(q-1)) != 1");
  }
}

BigInt sample_g(const BigInt& n, const BigInt& n_sq, const BigInt& lambda,
                Rng& rng) {
  for (int attempt = 0; attempt < kMaxGAttempts; ++attempt) {
    BigInt g = rng.below(n_sq - 1) + 1;
    if (gcd(g, n) != 1) {
      continue;
    }
    BigInt l = l_function(powm(g, lambda, n_sq), n);
    if (gcd(l, n) == 1) {
      return g;
    }
  }
  throw KeygenError("no valid generator found within attempt bound");
}

void check_same_key(const PublicKey& pk, const Ciphertext& ct,
                    const char* op) {
  if (ct.key_id != pk.key_id()) {
    throw KeyMismatchError(std::string(op) +
                           ": ciphertext was produced under a different key");
  }
}

void check_sk_matches_pk(const PrivateKey& sk, const PublicKey& pk) {
  if (sk.key_id() != pk.key_id()) {
    throw KeyMismatchError("private key does not match public key");
  }
}

BigInt draw_unit(const PublicKey& pk, Rng& rng) {
  // Uniform in [1, n), rejected until gcd(r, n) = 1.
  while (true) {
    BigInt r = rng.below(pk.n() - 1) + 1;
    if (gcd(r, pk.n()) == 1) {
      return r;
    }
  }
}

void check_plaintext(const PublicKey& pk, const BigInt& m) {
  if (m < 0 || m >= pk.n()) {
    throw RangeError("plaintext outside [0, n)");
  }
}

void check_randomness(const PublicKey& pk, const BigInt& r) {
  if (r <= 0 || r >= pk.n() || gcd(r, pk.n()) != 1) {
    throw RangeError("encryption randomness is not a unit of Z_n*");
  }
}

}  // namespace

PublicKey::PublicKey(BigInt n, BigInt g, GMode g_mode)
    : n_(std::move(n)),
      g_(std::move(g)),
      n_sq_(n_ * n_),
      half_(n_ / 2),
      g_mode_(g_mode),
      bits_(static_cast<unsigned>(mpz_sizeinbase(n_.get_mpz_t(), 2))),
      key_id_(fingerprint_modulus(n_)) {
  if (g_mode_ == GMode::NPlusOne && g_ != n_ + 1) {
    throw KeygenError("NPlusOne key requires g = n + 1");
  }
  if (g_ <= 0 || g_ >= n_sq_) {
    throw KeygenError("g outside Z_{n^2}");
  }
}

PrivateKey::PrivateKey(BigInt p, BigInt q, BigInt lambda, BigInt mu,
                       CrtPrecomp crt, std::uint64_t key_id)
    : p_(std::move(p)),
      q_(std::move(q)),
      lambda_(std::move(lambda)),
      mu_(std::move(mu)),
      crt_(std::move(crt)),
      key_id_(key_id) {}

std::uint64_t fingerprint_modulus(const BigInt& n) {
  std::vector<std::uint8_t> bytes = export_be(n);
  if (bytes.empty()) {
    bytes.push_back(0);
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &digest_len, EVP_sha256(),
             nullptr);
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) {
    out = (out << 8) | digest[i];
  }
  return out;
}

KeyPair keygen(unsigned bits, GMode g_mode, Rng& rng) {
  if (bits < 16 || bits % 2 != 0) {
    throw KeygenError("key size must be an even number of bits >= 16");
  }
  unsigned prime_bits = bits / 2;
  for (int attempt = 0; attempt < 256; ++attempt) {
    BigInt p = random_prime(prime_bits, rng);
    BigInt q = random_prime(prime_bits, rng);
    if (p == q) {
      continue;
    }
    BigInt n = p * q;
    if (gcd(n, (p - 1) * (q - 1)) != 1) {
      continue;
    }
    if (g_mode == GMode::NPlusOne) {
      return assemble(p, q, n + 1, g_mode);
    }
    BigInt lambda = lcm(p - 1, q - 1);
    BigInt g = sample_g(n, n * n, lambda, rng);
    return assemble(p, q, g, g_mode);
  }
  throw KeygenError("no suitable prime pair found within attempt bound");
}

KeyPair keypair_from_primes(const BigInt& p, const BigInt& q, GMode g_mode,
                            Rng* rng) {
  check_prime_pair(p, q);
  BigInt n = p * q;
  if (g_mode == GMode::NPlusOne) {
    return assemble(p, q, n + 1, g_mode);
  }
  if (rng == nullptr) {
    throw KeygenError("RandomG from fixed primes requires an rng to sample g");
  }
  BigInt lambda = lcm(p - 1, q - 1);
  BigInt g = sample_g(n, n * n, lambda, *rng);
  return assemble(p, q, g, g_mode);
}

KeyPair keypair_from_primes_with_g(const BigInt& p, const BigInt& q,
                                   const BigInt& g) {
  check_prime_pair(p, q);
  BigInt n = p * q;
  GMode mode = (g == n + 1) ? GMode::NPlusOne : GMode::RandomG;
  return assemble(p, q, g, mode);
}

Ciphertext encrypt_standard(const PublicKey& pk, const BigInt& m,
                            const BigInt& r) {
  check_plaintext(pk, m);
  check_randomness(pk, r);
  BigInt c = powm(pk.g(), m, pk.n_sq()) * powm(r, pk.n(), pk.n_sq());
  return Ciphertext{mod_pos(c, pk.n_sq()), pk.key_id()};
}

Ciphertext encrypt_standard(const PublicKey& pk, const BigInt& m, Rng& rng) {
  return encrypt_standard(pk, m, draw_unit(pk, rng));
}

Ciphertext encrypt_optimized(const PublicKey& pk, const BigInt& m,
                             const BigInt& r) {
  if (pk.g_mode() != GMode::NPlusOne) {
    throw ModeError("encrypt_optimized requires the g = n+1 key form");
  }
  check_plaintext(pk, m);
  check_randomness(pk, r);
  // The binomial expansion of (n+1)^m collapses to 1 + m*n mod n^2, turning
  // the g^m exponentiation into a single multiplication.
  BigInt c = mod_pos(1 + m * pk.n(), pk.n_sq()) * powm(r, pk.n(), pk.n_sq());
  return Ciphertext{mod_pos(c, pk.n_sq()), pk.key_id()};
}

Ciphertext encrypt_optimized(const PublicKey& pk, const BigInt& m, Rng& rng) {
  return encrypt_optimized(pk, m, draw_unit(pk, rng));
}

BigInt decrypt_standard(const PrivateKey& sk, const PublicKey& pk,
                        const Ciphertext& ct) {
  check_sk_matches_pk(sk, pk);
  check_same_key(pk, ct, "decrypt");
  BigInt l = l_function(powm(ct.c, sk.lambda(), pk.n_sq()), pk.n());
  return mod_pos(l * sk.mu(), pk.n());
}

BigInt decrypt_optimized(const PrivateKey& sk, const PublicKey& pk,
                         const Ciphertext& ct) {
  if (pk.g_mode() != GMode::NPlusOne) {
    throw ModeError("decrypt_optimized requires the g = n+1 key form");
  }
  // With g = n+1, L(g^lambda mod n^2) = lambda mod n, so mu is
  // lambda^-1 mod n and the generic path computes (c^lambda - 1 mod n^2)/n
  // normalized by lambda — the same value the optimized derivation yields.
  return decrypt_standard(sk, pk, ct);
}

BigInt decrypt_crt(const PrivateKey& sk, const PublicKey& pk,
                   const Ciphertext& ct) {
  check_sk_matches_pk(sk, pk);
  check_same_key(pk, ct, "decrypt");
  const CrtPrecomp& crt = sk.crt();
  BigInt m_p =
      mod_pos(l_function(powm(ct.c, sk.p() - 1, crt.p_sq), sk.p()) * crt.h_p,
              sk.p());
  BigInt m_q =
      mod_pos(l_function(powm(ct.c, sk.q() - 1, crt.q_sq), sk.q()) * crt.h_q,
              sk.q());
  return m_p + mod_pos((m_q - m_p) * crt.p_inv_mod_q, sk.q()) * sk.p();
}

Ciphertext he_add(const PublicKey& pk, const Ciphertext& a,
                  const Ciphertext& b) {
  check_same_key(pk, a, "he_add");
  check_same_key(pk, b, "he_add");
  return Ciphertext{mod_pos(a.c * b.c, pk.n_sq()), pk.key_id()};
}

Ciphertext he_sub(const PublicKey& pk, const Ciphertext& a,
                  const Ciphertext& b) {
  check_same_key(pk, a, "he_sub");
  check_same_key(pk, b, "he_sub");
  BigInt b_inv = invert(b.c, pk.n_sq(), "he_sub");
  return Ciphertext{mod_pos(a.c * b_inv, pk.n_sq()), pk.key_id()};
}

BigInt encode_signed(const BigInt& n, const BigInt& v) {
  BigInt two_abs = 2 * abs(v);
  if (two_abs >= n) {
    throw RangeError("signed value outside (-n/2, n/2)");
  }
  return mod_pos(v, n);
}

BigInt decode_signed(const BigInt& n, const BigInt& m) {
  if (m < 0 || m >= n) {
    throw RangeError("residue outside [0, n)");
  }
  if (m <= n / 2) {
    return m;
  }
  return m - n;
}

std::int64_t decode_signed_i64(const PublicKey& pk, const BigInt& m) {
  BigInt v = decode_signed(pk.n(), m);
  if (!v.fits_slong_p()) {
    throw RangeError("decoded value does not fit in 64 bits");
  }
  return static_cast<std::int64_t>(v.get_si());
}

std::vector<std::uint8_t> export_be(const BigInt& v) {
  if (v < 0) {
    throw RangeError("cannot export negative value");
  }
  if (v == 0) {
    return {};
  }
  std::size_t count = 0;
  std::vector<std::uint8_t> out((mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8);
  mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  out.resize(count);
  return out;
}

std::vector<std::uint8_t> export_be_padded(const BigInt& v,
                                           std::size_t width) {
  std::vector<std::uint8_t> raw = export_be(v);
  if (raw.size() > width) {
    throw RangeError("value does not fit in requested width");
  }
  std::vector<std::uint8_t> out(width, 0);
  std::copy(raw.begin(), raw.end(), out.end() - raw.size());
  return out;
}

BigInt import_be(std::span<const std::uint8_t> bytes) {
  BigInt out = 0;
  if (!bytes.empty()) {
    mpz_import(out.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  }
  return out;
}

std::vector<std::uint8_t> to_bytes(const Ciphertext& ct) {
  std::vector<std::uint8_t> c_bytes = export_be(ct.c);
  std::vector<std::uint8_t> out;
  out.reserve(12 + c_bytes.size());
  std::uint32_t len = static_cast<std::uint32_t>(c_bytes.size());
  for (int i = 3; i >= 0; --i) {
    out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xff));
  }
  for (int i = 7; i >= 0; --i) {
    out.push_back(static_cast<std::uint8_t>((ct.key_id >> (8 * i)) & 0xff));
  }
  out.insert(out.end(), c_bytes.begin(), c_bytes.end());
  return out;
}

Ciphertext ciphertext_from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) {
    throw CiphertextError("ciphertext encoding truncated");
  }
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) {
    len = (len << 8) | bytes[i];
  }
  std::uint64_t key_id = 0;
  for (int i = 4; i < 12; ++i) {
    key_id = (key_id << 8) | bytes[i];
  }
  if (bytes.size() != 12 + static_cast<std::size_t>(len)) {
    throw CiphertextError("ciphertext length prefix does not match payload");
  }
  return Ciphertext{import_be(bytes.subspan(12)), key_id};
}

}  // namespace ppcharge::paillier

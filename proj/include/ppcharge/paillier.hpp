#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppcharge/rng.hpp"

// Additively homomorphic Paillier cryptosystem with three decryption routes:
// the textbook L(c^lambda mod n^2)*mu path, the g = n+1 parameter-optimized
// path, and a CRT-accelerated path that works modulo p^2 and q^2 separately.
// Plaintexts are residues mod n; a half-range signed codec maps integers in
// (-n/2, n/2) onto them so ciphertext differences decode to signed values.
//
// Key and ciphertext values are immutable after construction and every
// operation is a pure function of its inputs plus an explicit Rng, so the
// whole module is safe to call from concurrent contexts and fully
// deterministic under a fixed seed.
//
// Not hardened against timing side channels; small key sizes are test-only.

namespace ppcharge::paillier {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Ciphertext or key used under a key it was not produced for.
struct KeyMismatchError : Error {
  using Error::Error;
};
// Plaintext or randomness outside its valid range.
struct RangeError : Error {
  using Error::Error;
};
// Operation requires the g = n+1 key form.
struct ModeError : Error {
  using Error::Error;
};
struct KeygenError : Error {
  using Error::Error;
};
// Value that is not a valid ciphertext (non-unit mod n^2, bad encoding).
struct CiphertextError : Error {
  using Error::Error;
};

enum class GMode { RandomG, NPlusOne };

// Precomputed values for decryption mod p^2 and q^2:
//   h_p = L_p(g^(p-1) mod p^2)^-1 mod p,  L_p(x) = (x-1)/p  (h_q likewise).
struct CrtPrecomp {
  BigInt p_sq;
  BigInt q_sq;
  BigInt h_p;
  BigInt h_q;
  BigInt p_inv_mod_q;
};

class PublicKey {
 public:
  PublicKey(BigInt n, BigInt g, GMode g_mode);

  const BigInt& n() const { return n_; }
  const BigInt& g() const { return g_; }
  const BigInt& n_sq() const { return n_sq_; }
  GMode g_mode() const { return g_mode_; }
  std::uint64_t key_id() const { return key_id_; }
  // floor(n/2); plaintexts at or below it decode as non-negative.
  const BigInt& half_range() const { return half_; }
  unsigned bits() const { return bits_; }

 private:
  BigInt n_;
  BigInt g_;
  BigInt n_sq_;
  BigInt half_;
  GMode g_mode_;
  unsigned bits_;
  std::uint64_t key_id_;
};

class PrivateKey {
 public:
  PrivateKey(BigInt p, BigInt q, BigInt lambda, BigInt mu, CrtPrecomp crt,
             std::uint64_t key_id);

  const BigInt& p() const { return p_; }
  const BigInt& q() const { return q_; }
  const BigInt& lambda() const { return lambda_; }
  const BigInt& mu() const { return mu_; }
  const CrtPrecomp& crt() const { return crt_; }
  std::uint64_t key_id() const { return key_id_; }

 private:
  BigInt p_;
  BigInt q_;
  BigInt lambda_;
  BigInt mu_;
  CrtPrecomp crt_;
  std::uint64_t key_id_;
};

struct KeyPair {
  PublicKey pk;
  PrivateKey sk;
};

// An element of Z_{n^2}* tagged with the fingerprint of the producing key.
struct Ciphertext {
  BigInt c;
  std::uint64_t key_id = 0;

  bool operator==(const Ciphertext& other) const = default;
};

// Deterministic fingerprint of the modulus (SHA-256 of n's big-endian
// bytes, truncated to 8 bytes). Collision-resistant across rounds.
std::uint64_t fingerprint_modulus(const BigInt& n);

// Generates a keypair with two distinct probable primes of bits/2 bits each
// (error probability <= 2^-128), n of exactly `bits` bits, and
// gcd(n, (p-1)(q-1)) = 1. In RandomG mode g is sampled uniformly from
// Z_{n^2}* until gcd(L(g^lambda mod n^2), n) = 1; in NPlusOne mode g = n+1.
// Throws KeygenError if no suitable primes are found within a bounded
// number of attempts. bits must be >= 16 and a multiple of 2.
KeyPair keygen(unsigned bits, GMode g_mode, Rng& rng);

// Builds a keypair from caller-supplied primes (test hook for small oracle
// keys). For RandomG an rng must be supplied to sample g.
KeyPair keypair_from_primes(const BigInt& p, const BigInt& q, GMode g_mode,
                            Rng* rng = nullptr);

// Fully explicit variant: validates the supplied g against the gcd
// condition and derives everything else.
KeyPair keypair_from_primes_with_g(const BigInt& p, const BigInt& q,
                                   const BigInt& g);

// c = g^m * r^n mod n^2 with m in [0, n) and r a unit of Z_n*.
Ciphertext encrypt_standard(const PublicKey& pk, const BigInt& m,
                            const BigInt& r);
// Same, drawing r uniformly from [1, n) until gcd(r, n) = 1.
Ciphertext encrypt_standard(const PublicKey& pk, const BigInt& m, Rng& rng);

// c = (1 + m*n) * r^n mod n^2; requires the g = n+1 key form, under which
// it produces bit-identical ciphertexts to encrypt_standard.
Ciphertext encrypt_optimized(const PublicKey& pk, const BigInt& m,
                             const BigInt& r);
Ciphertext encrypt_optimized(const PublicKey& pk, const BigInt& m, Rng& rng);

// m = L(c^lambda mod n^2) * mu mod n.
BigInt decrypt_standard(const PrivateKey& sk, const PublicKey& pk,
                        const Ciphertext& ct);

// Decryption for the g = n+1 form. Algebraically the mu factor collapses to
// lambda^-1 mod n, so this is the L(c^lambda)*mu path specialized to that
// key shape; it agrees with decrypt_standard on every ciphertext.
BigInt decrypt_optimized(const PrivateKey& sk, const PublicKey& pk,
                         const Ciphertext& ct);

// CRT route: m_p = L_p(c^(p-1) mod p^2) * h_p mod p, m_q likewise, then
// m = m_p + ((m_q - m_p) * p^-1 mod q) * p. Exactly equal to
// decrypt_standard on all ciphertexts, at roughly a third of the cost.
BigInt decrypt_crt(const PrivateKey& sk, const PublicKey& pk,
                   const Ciphertext& ct);

// Ciphertext product mod n^2; decrypts to (m_a + m_b) mod n.
Ciphertext he_add(const PublicKey& pk, const Ciphertext& a,
                  const Ciphertext& b);

// Ciphertext quotient a * b^-1 mod n^2; decrypts to (m_a - m_b) mod n.
// Throws CiphertextError when b is not invertible mod n^2.
Ciphertext he_sub(const PublicKey& pk, const Ciphertext& a,
                  const Ciphertext& b);

// Half-range signed codec: encode(v) = v mod n for |v| < n/2;
// decode(m) = m for m <= floor(n/2), else m - n.
BigInt encode_signed(const BigInt& n, const BigInt& v);
BigInt decode_signed(const BigInt& n, const BigInt& m);
std::int64_t decode_signed_i64(const PublicKey& pk, const BigInt& m);

// Wire form: [u32 BE length of c bytes][u64 BE key_id][c big-endian bytes].
std::vector<std::uint8_t> to_bytes(const Ciphertext& ct);
Ciphertext ciphertext_from_bytes(std::span<const std::uint8_t> bytes);

// Minimal big-endian byte export/import (empty vector encodes zero) and the
// fixed-width variant used for private key transport.
std::vector<std::uint8_t> export_be(const BigInt& v);
std::vector<std::uint8_t> export_be_padded(const BigInt& v, std::size_t width);
BigInt import_be(std::span<const std::uint8_t> bytes);

}  // namespace ppcharge::paillier

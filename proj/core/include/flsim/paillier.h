/*
 * Copyright 2026 The flsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FLSIM_PAILLIER_H_
#define FLSIM_PAILLIER_H_

#include <gmpxx.h>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>

namespace flsim::he {

inline constexpr unsigned kMinKeyBits = 128;
inline constexpr unsigned kDefaultKeyBits = 2048;

// Uniform big-integer randomness. Seeded instances are reproducible; the
// entropy-backed instance draws its seed from std::random_device.
class RandomSource {
 public:
  static RandomSource Seeded(std::uint64_t seed);
  static RandomSource FromEntropy();

  RandomSource(RandomSource&&) noexcept;
  RandomSource& operator=(RandomSource&&) noexcept;
  ~RandomSource();

  // Uniform in [0, bound). bound must be positive.
  mpz_class Below(const mpz_class& bound);
  // Uniform in [0, 2^bits).
  mpz_class Bits(unsigned bits);

 private:
  explicit RandomSource(std::uint64_t seed);
  struct State;
  std::unique_ptr<State> state_;
};

// Public half of a Paillier key with generator g = n + 1.
class PublicKey {
 public:
  explicit PublicKey(mpz_class n);

  const mpz_class& n() const { return n_; }
  const mpz_class& g() const { return g_; }
  const mpz_class& n_squared() const { return n_squared_; }
  std::size_t bits() const;
  // Short fingerprint of n, stamped on every ciphertext so values from
  // different keys are never combined.
  std::uint64_t tag() const { return tag_; }

  friend bool operator==(const PublicKey& a, const PublicKey& b) {
    return a.n_ == b.n_;
  }

 private:
  mpz_class n_;
  mpz_class g_;
  mpz_class n_squared_;
  std::uint64_t tag_;
};

class SecretKey {
 public:
  // lambda = lcm(p-1, q-1), mu = lambda^-1 mod n.
  SecretKey(mpz_class n, mpz_class lambda, mpz_class mu);

  const mpz_class& n() const { return n_; }
  const mpz_class& lambda() const { return lambda_; }
  const mpz_class& mu() const { return mu_; }
  const mpz_class& n_squared() const { return n_squared_; }
  std::uint64_t tag() const { return tag_; }

 private:
  mpz_class n_;
  mpz_class lambda_;
  mpz_class mu_;
  mpz_class n_squared_;
  std::uint64_t tag_;
};

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;
};

struct Ciphertext {
  mpz_class value;
  std::uint64_t key_tag = 0;
};

std::uint64_t ModulusTag(const mpz_class& n);

// Generates a key whose modulus has exactly `bits` bits. Throws ConfigError
// when bits < kMinKeyBits. Deterministic for a seeded source.
KeyPair KeyGen(unsigned bits, RandomSource& rng);
KeyPair KeyGen(unsigned bits, std::uint64_t seed);

// Throws DomainError unless 0 <= m < n.
Ciphertext Encrypt(const PublicKey& pk, const mpz_class& m, RandomSource& rng);

// Throws DecryptionError when the ciphertext was produced under another key,
// lies outside [0, n^2), or shares a factor with n.
mpz_class Decrypt(const SecretKey& sk, const Ciphertext& c);

// Enc(m1) (+) Enc(m2) = Enc(m1 + m2 mod n).
Ciphertext Add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b);

// Enc(m) (x) k = Enc(m * k mod n) for a plaintext scalar 0 <= k < n.
Ciphertext ScalarMul(const PublicKey& pk, const Ciphertext& c,
                     const mpz_class& k);

// Enc(0) with randomness 1; the identity for Add.
Ciphertext Zero(const PublicKey& pk);

// JSON forms with integers as decimal strings:
//   public {"n": "...", "g": "..."}, secret {"n", "lambda", "mu"}.
std::string PublicKeyToJson(const PublicKey& pk);
std::string SecretKeyToJson(const SecretKey& sk);
PublicKey PublicKeyFromJson(const std::string& json);
SecretKey SecretKeyFromJson(const std::string& json);

std::string CiphertextToString(const Ciphertext& c);
// Binds the parsed value to `pk`; throws ParseError on junk or out-of-range.
Ciphertext CiphertextFromString(const PublicKey& pk, const std::string& text);

}  // namespace flsim::he

#endif  // FLSIM_PAILLIER_H_

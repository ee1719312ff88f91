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

#include "flsim/paillier.h"

#include "json.hpp"

#include <random>
#include <string>
#include <utility>

#include "flsim/error.h"

namespace flsim::he {

struct RandomSource::State {
  explicit State(std::uint64_t seed) : rand(gmp_randinit_mt) {
    mpz_class s(static_cast<unsigned long>(seed >> 32));
    s <<= 32;
    s += static_cast<unsigned long>(seed & 0xffffffffULL);
    rand.seed(s);
  }
  gmp_randclass rand;
};

RandomSource::RandomSource(std::uint64_t seed)
    : state_(std::make_unique<State>(seed)) {}
RandomSource::RandomSource(RandomSource&&) noexcept = default;
RandomSource& RandomSource::operator=(RandomSource&&) noexcept = default;
RandomSource::~RandomSource() = default;

RandomSource RandomSource::Seeded(std::uint64_t seed) {
  return RandomSource(seed);
}

RandomSource RandomSource::FromEntropy() {
  std::random_device device;
  std::uint64_t seed = (static_cast<std::uint64_t>(device()) << 32) ^ device();
  return RandomSource(seed);
}

mpz_class RandomSource::Below(const mpz_class& bound) {
  if (bound <= 0) throw DomainError("RandomSource::Below: bound must be positive");
  return state_->rand.get_z_range(bound);
}

mpz_class RandomSource::Bits(unsigned bits) {
  return state_->rand.get_z_bits(bits);
}

std::uint64_t ModulusTag(const mpz_class& n) {
  // FNV-1a over the limbs.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::size_t limbs = mpz_size(n.get_mpz_t());
  for (std::size_t i = 0; i < limbs; ++i) {
    auto limb = static_cast<std::uint64_t>(mpz_getlimbn(n.get_mpz_t(), i));
    for (int b = 0; b < 8; ++b) {
      h ^= (limb >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h == 0 ? 1 : h;
}

PublicKey::PublicKey(mpz_class n)
    : n_(std::move(n)), g_(n_ + 1), n_squared_(n_ * n_), tag_(ModulusTag(n_)) {
  if (n_ <= 1) throw DomainError("PublicKey: modulus must exceed 1");
}

std::size_t PublicKey::bits() const {
  return mpz_sizeinbase(n_.get_mpz_t(), 2);
}

SecretKey::SecretKey(mpz_class n, mpz_class lambda, mpz_class mu)
    : n_(std::move(n)),
      lambda_(std::move(lambda)),
      mu_(std::move(mu)),
      n_squared_(n_ * n_),
      tag_(ModulusTag(n_)) {
  if (n_ <= 1) throw DomainError("SecretKey: modulus must exceed 1");
}

namespace {

// Random prime with exactly `bits` bits and the two top bits set, so the
// product of two such primes has exactly the sum of their lengths.
mpz_class RandomPrime(unsigned bits, RandomSource& rng) {
  mpz_class upper;
  mpz_ui_pow_ui(upper.get_mpz_t(), 2, bits);
  for (;;) {
    mpz_class candidate = rng.Bits(bits);
    mpz_setbit(candidate.get_mpz_t(), bits - 1);
    mpz_setbit(candidate.get_mpz_t(), bits - 2);
    mpz_class prime;
    mpz_nextprime(prime.get_mpz_t(), candidate.get_mpz_t());
    if (prime < upper) return prime;
  }
}

void CheckTag(std::uint64_t expected, const Ciphertext& c, const char* op) {
  if (c.key_tag != expected) {
    throw DomainError(std::string(op) +
                      ": ciphertext was produced under a different key");
  }
}

void CheckRange(const PublicKey& pk, const Ciphertext& c, const char* op) {
  if (c.value < 0 || c.value >= pk.n_squared()) {
    throw DomainError(std::string(op) + ": ciphertext outside [0, n^2)");
  }
}

}  // namespace

KeyPair KeyGen(unsigned bits, RandomSource& rng) {
  if (bits < kMinKeyBits) {
    throw ConfigError("key_bits: " + std::to_string(bits) +
                      " is below the minimum of " +
                      std::to_string(kMinKeyBits));
  }
  const unsigned p_bits = bits / 2;
  const unsigned q_bits = bits - p_bits;
  for (;;) {
    mpz_class p = RandomPrime(p_bits, rng);
    mpz_class q = RandomPrime(q_bits, rng);
    if (p == q) continue;
    mpz_class n = p * q;
    mpz_class p1 = p - 1;
    mpz_class q1 = q - 1;
    mpz_class phi = p1 * q1;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), n.get_mpz_t(), phi.get_mpz_t());
    if (g != 1) continue;
    mpz_class lambda;
    mpz_lcm(lambda.get_mpz_t(), p1.get_mpz_t(), q1.get_mpz_t());
    mpz_class mu;
    if (mpz_invert(mu.get_mpz_t(), lambda.get_mpz_t(), n.get_mpz_t()) == 0) {
      continue;
    }
    return KeyPair{PublicKey(n), SecretKey(n, std::move(lambda), std::move(mu))};
  }
}

KeyPair KeyGen(unsigned bits, std::uint64_t seed) {
  RandomSource rng = RandomSource::Seeded(seed);
  return KeyGen(bits, rng);
}

Ciphertext Encrypt(const PublicKey& pk, const mpz_class& m, RandomSource& rng) {
  if (m < 0 || m >= pk.n()) {
    throw DomainError("Encrypt: plaintext outside [0, n)");
  }
  mpz_class r;
  mpz_class g;
  do {
    r = rng.Below(pk.n());
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), pk.n().get_mpz_t());
  } while (r == 0 || g != 1);

  // (n+1)^m = 1 + m*n (mod n^2).
  mpz_class rn;
  mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), pk.n().get_mpz_t(),
           pk.n_squared().get_mpz_t());
  mpz_class c = (1 + m * pk.n()) % pk.n_squared();
  c = (c * rn) % pk.n_squared();
  return Ciphertext{std::move(c), pk.tag()};
}

mpz_class Decrypt(const SecretKey& sk, const Ciphertext& c) {
  if (c.key_tag != sk.tag()) {
    throw DecryptionError("Decrypt: ciphertext was produced under a different key");
  }
  if (c.value <= 0 || c.value >= sk.n_squared()) {
    throw DecryptionError("Decrypt: ciphertext outside (0, n^2)");
  }
  mpz_class g;
  mpz_gcd(g.get_mpz_t(), c.value.get_mpz_t(), sk.n().get_mpz_t());
  if (g != 1) throw DecryptionError("Decrypt: ciphertext not a unit mod n");

  mpz_class u;
  mpz_powm(u.get_mpz_t(), c.value.get_mpz_t(), sk.lambda().get_mpz_t(),
           sk.n_squared().get_mpz_t());
  mpz_class l = (u - 1) / sk.n();
  mpz_class m = (l * sk.mu()) % sk.n();
  return m;
}

Ciphertext Add(const PublicKey& pk, const Ciphertext& a, const Ciphertext& b) {
  CheckTag(pk.tag(), a, "Add");
  CheckTag(pk.tag(), b, "Add");
  CheckRange(pk, a, "Add");
  CheckRange(pk, b, "Add");
  mpz_class c = (a.value * b.value) % pk.n_squared();
  return Ciphertext{std::move(c), pk.tag()};
}

Ciphertext ScalarMul(const PublicKey& pk, const Ciphertext& c,
                     const mpz_class& k) {
  CheckTag(pk.tag(), c, "ScalarMul");
  CheckRange(pk, c, "ScalarMul");
  if (k < 0 || k >= pk.n()) {
    throw DomainError("ScalarMul: scalar outside [0, n)");
  }
  mpz_class out;
  mpz_powm(out.get_mpz_t(), c.value.get_mpz_t(), k.get_mpz_t(),
           pk.n_squared().get_mpz_t());
  return Ciphertext{std::move(out), pk.tag()};
}

Ciphertext Zero(const PublicKey& pk) { return Ciphertext{mpz_class(1), pk.tag()}; }

namespace {

mpz_class ParseDecimal(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string()) {
    throw ParseError(std::string("key JSON: missing string field '") + field +
                     "'");
  }
  mpz_class v;
  if (v.set_str(j.at(field).get<std::string>(), 10) != 0 || v <= 0) {
    throw ParseError(std::string("key JSON: field '") + field +
                     "' is not a positive decimal integer");
  }
  return v;
}

nlohmann::json ParseObject(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError("key JSON: not a JSON object");
  }
  return j;
}

}  // namespace

std::string PublicKeyToJson(const PublicKey& pk) {
  nlohmann::json j;
  j["n"] = pk.n().get_str();
  j["g"] = pk.g().get_str();
  return j.dump(2);
}

std::string SecretKeyToJson(const SecretKey& sk) {
  nlohmann::json j;
  j["n"] = sk.n().get_str();
  j["lambda"] = sk.lambda().get_str();
  j["mu"] = sk.mu().get_str();
  return j.dump(2);
}

PublicKey PublicKeyFromJson(const std::string& json) {
  nlohmann::json j = ParseObject(json);
  mpz_class n = ParseDecimal(j, "n");
  mpz_class g = ParseDecimal(j, "g");
  if (g != n + 1) throw ParseError("key JSON: only g = n + 1 keys are supported");
  return PublicKey(std::move(n));
}

SecretKey SecretKeyFromJson(const std::string& json) {
  nlohmann::json j = ParseObject(json);
  return SecretKey(ParseDecimal(j, "n"), ParseDecimal(j, "lambda"),
                   ParseDecimal(j, "mu"));
}

std::string CiphertextToString(const Ciphertext& c) { return c.value.get_str(); }

Ciphertext CiphertextFromString(const PublicKey& pk, const std::string& text) {
  mpz_class v;
  if (text.empty() || v.set_str(text, 10) != 0) {
    throw ParseError("ciphertext: not a decimal integer");
  }
  if (v < 0 || v >= pk.n_squared()) {
    throw ParseError("ciphertext: value outside [0, n^2)");
  }
  return Ciphertext{std::move(v), pk.tag()};
}

}  // namespace flsim::he

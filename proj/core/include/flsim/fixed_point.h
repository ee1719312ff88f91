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

#ifndef FLSIM_FIXED_POINT_H_
#define FLSIM_FIXED_POINT_H_

#include <gmpxx.h>

#include <cstdint>

namespace flsim {

inline constexpr std::int64_t kDefaultFixedPointScale = 1'000'000;

// Maps reals to residues mod n: x -> round(x * scale), negatives wrapped to
// the upper half of [0, n). A product of two encoded values carries scale^2,
// so Decode takes the number of scale factors to strip.
class FixedPointCodec {
 public:
  FixedPointCodec(mpz_class modulus, std::int64_t scale = kDefaultFixedPointScale);

  // Throws EncodingError for non-finite x or |round(x * scale)| >= n / 2.
  mpz_class Encode(double x) const;

  // Interprets m in [0, n) as a signed value and divides by scale^scale_power.
  // Throws DomainError when m is out of range or scale_power < 1.
  double Decode(const mpz_class& m, int scale_power = 1) const;

  // Largest representable magnitude, n / (2 * scale).
  double MaxMagnitude() const;

  std::int64_t scale() const { return scale_; }
  const mpz_class& modulus() const { return modulus_; }

 private:
  mpz_class modulus_;
  mpz_class half_;
  std::int64_t scale_;
};

}  // namespace flsim

#endif  // FLSIM_FIXED_POINT_H_

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

#include "flsim/fixed_point.h"

#include <cmath>
#include <string>
#include <utility>

#include "flsim/error.h"

namespace flsim {

FixedPointCodec::FixedPointCodec(mpz_class modulus, std::int64_t scale)
    : modulus_(std::move(modulus)), scale_(scale) {
  if (scale_ <= 0) throw DomainError("FixedPointCodec: scale must be positive");
  if (modulus_ <= 2) throw DomainError("FixedPointCodec: modulus too small");
  // Non-negative values occupy [0, half_], negatives (half_, n).
  half_ = (modulus_ - 1) / 2;
}

mpz_class FixedPointCodec::Encode(double x) const {
  if (!std::isfinite(x)) {
    throw EncodingError("FixedPointCodec::Encode: non-finite value");
  }
  const double scaled = std::round(x * static_cast<double>(scale_));
  mpz_class v(scaled);
  mpz_class magnitude = abs(v);
  if (magnitude > half_) {
    throw EncodingError("FixedPointCodec::Encode: |" + std::to_string(x) +
                        "| exceeds the codec range");
  }
  if (v < 0) v += modulus_;
  return v;
}

double FixedPointCodec::Decode(const mpz_class& m, int scale_power) const {
  if (m < 0 || m >= modulus_) {
    throw DomainError("FixedPointCodec::Decode: residue outside [0, n)");
  }
  if (scale_power < 1) {
    throw DomainError("FixedPointCodec::Decode: scale_power must be >= 1");
  }
  mpz_class signed_value = m > half_ ? mpz_class(m - modulus_) : m;
  mpz_class divisor;
  mpz_ui_pow_ui(divisor.get_mpz_t(), static_cast<unsigned long>(scale_),
                static_cast<unsigned long>(scale_power));

  // Split into quotient and remainder so large scale powers keep precision.
  mpz_class quotient;
  mpz_class remainder;
  mpz_tdiv_qr(quotient.get_mpz_t(), remainder.get_mpz_t(),
              signed_value.get_mpz_t(), divisor.get_mpz_t());
  return quotient.get_d() + remainder.get_d() / divisor.get_d();
}

double FixedPointCodec::MaxMagnitude() const {
  return half_.get_d() / static_cast<double>(scale_);
}

}  // namespace flsim

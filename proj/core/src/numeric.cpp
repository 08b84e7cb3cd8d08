//===- numeric.cpp - Element types and IEEE rounding helpers --------------===//

#include "tcmm/numeric.h"

#include <cmath>
#include <cstring>
#include <limits>

namespace tcmm {

std::string_view toString(ElemType t) {
  return t == ElemType::F16 ? "f16" : "f32";
}

float roundToF16(double x) {
  if (x == 0.0 || std::isnan(x) || std::isinf(x))
    return static_cast<float>(x);
  int exp = 0;
  std::frexp(x, &exp); // |x| = m * 2^exp, m in [0.5, 1)
  // binary16: 10 fraction bits, smallest normal exponent -14.
  int unitExp = std::max(exp - 1, -14) - 10;
  double scaled = std::ldexp(x, -unitExp);
  double rounded = std::ldexp(std::nearbyint(scaled), unitExp);
  if (std::fabs(rounded) > 65504.0)
    return x > 0 ? std::numeric_limits<float>::infinity()
                 : -std::numeric_limits<float>::infinity();
  return static_cast<float>(rounded);
}

float roundToF32(double x) { return static_cast<float>(x); }

float roundTo(ElemType t, double x) {
  return t == ElemType::F16 ? roundToF16(x) : roundToF32(x);
}

uint16_t toF16Bits(float value) {
  float x = roundToF16(value);
  uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  double a = std::fabs(static_cast<double>(x));
  if (std::isnan(x))
    return sign | 0x7e00;
  if (std::isinf(x))
    return sign | 0x7c00;
  if (a == 0.0)
    return sign;
  int exp = 0;
  double m = std::frexp(a, &exp); // a = m * 2^exp
  int biased = exp - 1 + 15;
  if (biased <= 0) {
    // Subnormal: a = frac * 2^-24.
    auto frac = static_cast<uint16_t>(std::ldexp(a, 24));
    return sign | frac;
  }
  auto frac = static_cast<uint16_t>(std::ldexp(m * 2.0 - 1.0, 10));
  return sign | static_cast<uint16_t>(biased << 10) | frac;
}

float fromF16Bits(uint16_t bits) {
  int sign = (bits & 0x8000) ? -1 : 1;
  int exp = (bits >> 10) & 0x1f;
  int frac = bits & 0x3ff;
  if (exp == 0x1f)
    return frac ? std::numeric_limits<float>::quiet_NaN()
                : sign * std::numeric_limits<float>::infinity();
  if (exp == 0)
    return static_cast<float>(sign * std::ldexp(frac, -24));
  return static_cast<float>(sign * std::ldexp(1024 + frac, exp - 25));
}

float multiplyAccumulate(ElemType t, float acc, float a, float b) {
  if (t == ElemType::F32) {
    float product = a * b;
    return acc + product;
  }
  float product = roundToF16(static_cast<double>(a) * b);
  return roundToF16(static_cast<double>(acc) + product);
}

} // namespace tcmm

//===- numeric.h - Element types and IEEE rounding helpers -------*- C++ -*-===//
//
// F16 values are carried as float and F32 values as float; every F16 value
// produced by the IR passes through roundToF16 so it is exactly representable
// in binary16.
//
//===----------------------------------------------------------------------===//

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace tcmm {

enum class ElemType : uint8_t { F16, F32 };

constexpr int64_t elemBytes(ElemType t) { return t == ElemType::F16 ? 2 : 4; }
std::string_view toString(ElemType t);

/// Round-to-nearest-even conversion of a double to the nearest binary16 value.
/// Overflow goes to +-inf.
float roundToF16(double x);
/// Round-to-nearest-even conversion of a double to binary32.
float roundToF32(double x);
float roundTo(ElemType t, double x);

uint16_t toF16Bits(float x);
float fromF16Bits(uint16_t bits);

/// Same as roundToF16 for a float input, without going through double.
inline float roundF16(float x) {
  uint32_t u = std::bit_cast<uint32_t>(x);
  uint32_t sign = u & 0x80000000u, a = u & 0x7fffffffu;
  if (a >= 0x477ff000u) // |x| >= 65520, NaN or inf
    return a > 0x7f800000u ? x : std::bit_cast<float>(sign | 0x7f800000u);
  if (a < 0x38800000u) { // below the smallest normal: quantum 2^-24
    float r = (std::fabs(x) + 0.5f) - 0.5f;
    return std::bit_cast<float>(sign | std::bit_cast<uint32_t>(r));
  }
  a += 0xfffu + ((a >> 13) & 1u);
  return std::bit_cast<float>(sign | (a & ~0x1fffu));
}

/// a*b rounded once to `t`, then acc + product rounded once to `t`.
float multiplyAccumulate(ElemType t, float acc, float a, float b);

} // namespace tcmm

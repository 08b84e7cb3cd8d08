//===- config.h - Problem and tiling knobs -----------------------*- C++ -*-===//

#pragma once

#include "tcmm/numeric.h"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcmm {

struct ProblemConfig {
  int64_t M = 128, N = 128, K = 128;
  /// Inputs are always f16; this is the type of C and of the accumulation.
  ElemType accum = ElemType::F32;
};

struct TileConfig {
  int64_t tbm = 64, tbn = 64, tbk = 32;
  int64_t wm = 32, wn = 32;
  static constexpr int64_t wmmaM = 16, wmmaN = 16, wmmaK = 16;
  int64_t paddingA = 8, paddingB = 8;
  int vectorBits = 128;

  int64_t warpsX() const { return tbm / wm; }
  int64_t warpsY() const { return tbn / wn; }
  int64_t blockThreads() const { return warpsX() * warpsY() * 32; }
  /// f16 elements per vector copy.
  int64_t vectorElems() const { return vectorBits / 16; }
};

/// Every violated divisibility, alignment or range rule, one line each.
/// Empty when the pair is legal.
std::vector<std::string> configViolations(const ProblemConfig &p,
                                          const TileConfig &t);

/// Thrown by a pass that rejects its input.
class PassError : public std::runtime_error {
public:
  PassError(std::string pass, const std::string &message)
      : std::runtime_error(pass + ": " + message), pass_(std::move(pass)) {}
  const std::string &pass() const { return pass_; }

private:
  std::string pass_;
};

} // namespace tcmm

//===- loop_utils.h - Loop-nest analysis shared by passes ------*- C++ -*-===//

#pragma once

#include "tcmm/rewrite.h"

#include <functional>
#include <map>
#include <string>
#include <optional>
#include <unordered_map>

namespace tcmm::detail {

/// Induction variable -> owning loop, for every loop in the block.
std::unordered_map<ValueId, const Loop *> ivLoops(const Block &b);

/// Pseudo value ids standing for normalized loop counters t (iv = lb + step*t).
constexpr ValueId kCounterBase = 0x80000000u;
inline bool isCounter(ValueId v) { return v >= kCounterBase && v != kNoValue; }

struct Expansion {
  AffineApply apply;
  /// counters[c] is the loop whose counter has pseudo id kCounterBase + c.
  std::vector<const Loop *> counters;
};

/// Rewrites every IV accepted by `expand` as lb + step*t, recursively, so the
/// result only mentions non-expanded values and counters.
Expansion expandIvs(const AffineApply &a,
                    const std::unordered_map<ValueId, const Loop *> &loops,
                    const std::function<bool(const Loop *)> &expand);

struct Interval {
  int64_t lo = 0, hi = 0;
};

/// Splits result `r` of an expansion into base + counter contribution. Fails
/// when a counter appears under floordiv/mod.
struct Split {
  AffineApply base;
  /// Coefficient per counter (indexed like Expansion::counters).
  std::vector<int64_t> coefs;
  Interval range; // of sum coef*t over all counters
};
std::optional<Split> splitCounters(const Expansion &e, unsigned r);

int64_t tripOf(const Loop &l);

/// Buffer identity behind each memref value: views alias their source.
std::map<ValueId, std::string> memrefRoots(const Function &f);

/// Replaces operand uses (not definitions) according to `map`.
void applyMap(Block &b, const ValueMap &map);

} // namespace tcmm::detail

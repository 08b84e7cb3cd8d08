//===- analysis.h - Static resource and legality checks ----------*- C++ -*-===//

#pragma once

#include "tcmm/config.h"
#include "tcmm/ir.h"

#include <string>
#include <vector>

namespace tcmm {

struct AnalysisParams {
  int64_t sharedLimitBytes = 48 * 1024;
  int64_t smSharedBytes = 100 * 1024;
  int64_t smMaxWarps = 48;
  int64_t maxRegisters = 255;
  int64_t maxBlockThreads = 1024;
  /// Registers per thread assumed on top of fragment storage.
  int64_t registerOverhead = 40;
};

struct ResourceReport {
  int64_t sharedBytes = 0;
  int64_t fragmentsPerWarp = 0;
  int64_t estRegistersPerThread = 0;
  int64_t warpsPerBlock = 0;
  int64_t blockThreads = 0;
  int64_t estBlocksPerSM = 0;
  std::vector<std::string> legality;

  bool legal() const { return legality.empty(); }
  /// key=value lines, violations last.
  std::string render() const;
};

/// Shared bytes come from the module's shared globals; a module without any
/// (before copy generation) is charged the padded tiles the copies would
/// allocate.
ResourceReport analyze(const Module &m, const TileConfig &cfg,
                       const ProblemConfig &p, const AnalysisParams &ap = {});

/// Padded shared bytes the copy pass would allocate for `cfg`.
int64_t plannedSharedBytes(const TileConfig &cfg);

} // namespace tcmm

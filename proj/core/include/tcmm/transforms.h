//===- transforms.h - Affine-level lowering passes ---------------*- C++ -*-===//
//
// Every pass is a pure Module -> Module rewrite. Rejections throw PassError;
// every returned module verifies.
//
// Loop tags written by the passes:
//   i, j, k       thread-block tile loops
//   ii, jj        warp tile loops
//   iii, jjj, kk  intra-warp loops (removed by unroll)
//   copy_a, copy_b (+ "_inner")  global -> shared copy nests
//
//===----------------------------------------------------------------------===//

#pragma once

#include "tcmm/config.h"
#include "tcmm/ir.h"

#include <string>
#include <vector>

namespace tcmm {

struct PassReport {
  std::string pass;
  /// Structural deltas ("loops 3 -> 8", "wmma.compute 0 -> 64") and notes.
  std::vector<std::string> deltas;
};

struct PassResult {
  Module module;
  PassReport report;
};

PassResult tileLoopNest(const Module &m, const TileConfig &cfg);
PassResult generateSharedCopies(const Module &m, const TileConfig &cfg);
PassResult padSharedBuffers(const Module &m, const TileConfig &cfg);
PassResult raiseToWmma(const Module &m, const TileConfig &cfg);
/// Reorders the chain of nested loops tagged `fromOrder` (outermost first)
/// into `toOrder`.
PassResult permuteLoops(const Module &m, const std::vector<std::string> &fromOrder,
                        const std::vector<std::string> &toOrder);
/// Fully unrolls every loop whose tag is in `tags`, outermost first.
PassResult unrollFull(const Module &m, const std::vector<std::string> &tags);
PassResult cse(const Module &m);
PassResult hoistAccumulator(const Module &m);
PassResult splitPipeline(const Module &m);
PassResult insertBarriers(const Module &m);
PassResult vectorizeCopies(const Module &m, int vectorBits);
PassResult parallelize(const Module &m);

/// Loops of `m` that carry a dependence, by tag, according to the same
/// analysis parallelize() uses. Exposed for testing.
bool loopIsParallel(const Function &f, const Loop &loop);

/// Shared memory bytes over all globals (padding included).
int64_t sharedBytes(const Module &m);
constexpr int64_t kSharedLimitBytes = 48 * 1024;

/// Helpers shared by the passes.
bool isCopyTag(const std::string &tag);
std::string structuralSummary(const Module &m);
PassResult finishPass(std::string name, const Module &before, Module after,
                      std::vector<std::string> notes = {});

} // namespace tcmm

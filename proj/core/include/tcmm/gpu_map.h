//===- gpu_map.h - Mapping onto the grid/block/warp hierarchy ----*- C++ -*-===//
//
// A GPU kernel is a Module whose function carries a LaunchConfig. Its body
// reads hardware ids through `hw.id` ops instead of block and warp loops.
// Warps are linearized as warpId = thread / 32, warp_x = warpId % warpsX,
// warp_y = warpId / warpsX.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "tcmm/config.h"
#include "tcmm/transforms.h"

#include <string>

namespace tcmm {

using GpuKernel = Module;

/// Block loops i/j become the grid, warp loops ii/jj the warp decomposition;
/// copy nests are spread over all block threads (thread t takes vectors
/// t, t + T, ...).
PassResult mapToGpu(const Module &m, const TileConfig &cfg,
                    const ProblemConfig &p);

/// Unrolls the copies trailing the k loop body and hoists their global loads
/// to the loop top; the shared stores stay at the tail.
PassResult finalizePipeline(const GpuKernel &k);

/// Deterministic pseudo-CUDA rendering; meant for reading, not compiling.
std::string emitKernelText(const GpuKernel &k);

/// Copy of `k` without any barrier ops.
GpuKernel stripBarriers(const GpuKernel &k);

} // namespace tcmm

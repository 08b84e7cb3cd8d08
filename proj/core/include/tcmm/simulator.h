//===- simulator.h - Sequential interpreter and GPU machine model -*- C++ -*-===//
//
// Buffers are keyed by function argument name and hold one float per element
// (F16 buffers only ever contain binary16-representable values).
//
// Machine model notes:
//  - a warp executes every op for its 32 lanes at once; WMMA ops are warp
//    collective and use lane 0's indices;
//  - shared accesses are split into phases of at most 128 bytes; a phase
//    costs (max distinct words in one bank) - 1 extra cycles;
//  - a WMMA load from shared memory is modelled like ldmatrix: 4 phases of
//    8 row segments of 16 bytes;
//  - global transactions are 128-byte segments counted per half-warp
//    (16 lanes), and per row for WMMA loads/stores;
//  - a global load stalls globalLatency cycles unless the warp runs a
//    wmma.compute between the load and the first use of its result.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "tcmm/gpu_map.h"
#include "tcmm/ir.h"

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcmm {

using Buffers = std::map<std::string, std::vector<float>>;

class SimError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct MachineParams {
  int banks = 32;
  int bankWidthBytes = 4;
  int transactionBytes = 128;
  int64_t globalLatency = 400;
  int64_t sharedLatency = 30;
  int64_t wmmaLatency = 16;
};

struct Race {
  std::string buffer;
  int64_t element = 0;
  int64_t block = 0;
  int writerWarp = 0;
  int otherWarp = 0;
  bool writeWrite = false;
  std::string str() const;
};

struct SimMetrics {
  int64_t bankConflicts = 0;
  int64_t globalTransactions = 0;
  /// Global transactions issued by copy ops only.
  int64_t copyTransactions = 0;
  int64_t barriers = 0;
  int64_t stallCycles = 0;
  /// Total races found; `races` keeps the first few.
  int64_t raceCount = 0;
  std::vector<Race> races;
  /// Per written global buffer: fewest and most writes to one element.
  std::map<std::string, std::pair<int64_t, int64_t>> writeCensus;

  /// Flat `key=value` lines with the stable keys.
  std::string report() const;
};

/// One warp-wide shared-memory instruction.
struct SharedAccess {
  std::string buffer;
  int64_t block = 0;
  int warp = 0;
  /// Barrier interval within the block.
  int64_t interval = 0;
  bool write = false;
  int elemBytes = 2;
  /// Byte addresses per phase; each entry covers `accessBytes` bytes.
  std::vector<std::vector<int64_t>> phases;
  int accessBytes = 2;
};

/// Extra cycles of one phase.
int64_t phaseConflicts(const std::vector<int64_t> &byteAddrs, int accessBytes,
                       const MachineParams &mp = {});
int64_t countBankConflicts(const std::vector<SharedAccess> &trace,
                           const MachineParams &mp = {});
std::vector<Race> raceCheck(const std::vector<SharedAccess> &trace);

/// Runs the function of `m` in program order on a single thread.
Buffers runSequential(const Module &m, const Buffers &inputs);

struct GpuOptions {
  /// Linear block ids (bx * gridY + by) in execution order; empty = natural.
  std::vector<int64_t> blockOrder;
  /// Ops a warp runs before yielding to the next one; 0 = up to a barrier.
  int64_t segmentOps = 0;
  /// Receives every shared access when set.
  std::function<void(const SharedAccess &)> sharedTrace;
  /// Races kept in SimMetrics::races.
  size_t maxRacesKept = 16;
};

struct GpuRun {
  Buffers outputs;
  SimMetrics metrics;
};

GpuRun runGpu(const GpuKernel &k, const Buffers &inputs,
              const MachineParams &mp = {}, const GpuOptions &opts = {});

/// Seeded inputs for every argument: uniform in [-1, 1], rounded to the
/// argument's element type.
Buffers randomInputs(const Module &m, uint64_t seed);

/// C + A*B in double precision.
std::vector<double> referenceMatmul(const Buffers &inputs, int64_t M, int64_t N,
                                    int64_t K);

/// max |out - ref| / max |ref| (normwise).
double maxRelativeError(const std::vector<float> &out,
                        const std::vector<double> &ref);

} // namespace tcmm

//===- pipeline.h - Pass pipeline driver and sweep reports -------*- C++ -*-===//

#pragma once

#include "tcmm/analysis.h"
#include "tcmm/config.h"
#include "tcmm/simulator.h"
#include "tcmm/transforms.h"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tcmm {

enum class EmitKind { IR, KernelText, None };

struct RunConfig {
  ProblemConfig problem;
  TileConfig tiles;
  std::optional<std::string> pipelineStop;
  std::set<std::string> dumpAfter;
  /// Passes skipped entirely (e.g. "pipeline" to measure its effect).
  std::set<std::string> disabled;
  bool simulate = false;
  bool check = false;
  uint64_t seed = 0;
  EmitKind emit = EmitKind::IR;
  MachineParams machine;
};

/// Pass names in execution order.
const std::vector<std::string> &passNames();
bool isPassName(const std::string &name);

/// Applies one named pass.
PassResult applyPass(const std::string &name, const Module &m,
                     const RunConfig &rc);

struct PassTrace {
  Module module;
  std::vector<PassReport> reports;
  /// (pass, printed IR) for every pass in rc.dumpAfter that ran.
  std::vector<std::pair<std::string, std::string>> dumps;
  /// Last pass that ran, empty if none.
  std::string last;
};

/// Runs the passes after `resumeAfter` (or all of them) on `start`, honouring
/// pipelineStop, dumpAfter and disabled. Throws PassError.
PassTrace runPasses(const Module &start, const RunConfig &rc,
                    const std::string &resumeAfter = {});

struct SimulationSummary {
  bool mapped = false;
  SimMetrics metrics;
  double maxRelError = 0;
  double tolerance = 0;
  bool checked = false;
  bool passed = true;
};

/// Seeded inputs, simulation (GPU when mapped, sequential otherwise) and the
/// optional f64 comparison.
SimulationSummary simulate(const Module &m, const RunConfig &rc);

/// Tolerance for the f64 comparison.
double checkTolerance(ElemType accum);

struct RunOutcome {
  int exitCode = 0;
  std::string out; // IR dumps, emitted artifact, reports
  std::string err; // pass reports and diagnostics
};

/// Whole driver: legality, passes, dumps, emission, simulation, check.
/// `inputIR` replaces the naive builder; `resumeAfter` names the last pass
/// already applied to it.
RunOutcome runPipeline(const RunConfig &rc,
                       const std::optional<std::string> &inputIR = {},
                       const std::string &resumeAfter = {});

struct SweepRow {
  TileConfig tiles;
  std::string label;
  std::vector<std::string> violations;
  std::string error;
  int64_t sharedBytes = 0;
  SimMetrics metrics;
  bool best = false;
};

/// Parses one `key=value ...` config per line (# comments allowed) on top of
/// `base`. Keys: tbm tbn tbk wm wn pad padA padB vec.
std::vector<TileConfig> parseSweep(const std::string &text,
                                   const TileConfig &base);

std::vector<SweepRow> benchSweep(const RunConfig &rc,
                                 const std::vector<TileConfig> &sweep);
/// Plain table followed by key=value lines.
std::string renderSweep(const std::vector<SweepRow> &rows);

std::string describeTiles(const TileConfig &t);

} // namespace tcmm

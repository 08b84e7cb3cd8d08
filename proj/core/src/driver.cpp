//===- driver.cpp - Pass pipeline driver and sweep reports ----------------===//

#include "tcmm/pipeline.h"

#include "tcmm/builder.h"
#include "tcmm/gpu_map.h"
#include "tcmm/text.h"
#include "tcmm/verifier.h"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <sstream>

namespace tcmm {

const std::vector<std::string> &passNames() {
  static const std::vector<std::string> names = {
      "tile",        "copies",   "pad",       "wmma",
      "permute-outer", "permute-inner", "unroll", "cse",
      "hoist",       "pipeline", "barriers",  "vectorize",
      "parallelize", "map-gpu",  "finalize-pipeline"};
  return names;
}

bool isPassName(const std::string &name) {
  const auto &n = passNames();
  return std::find(n.begin(), n.end(), name) != n.end();
}

PassResult applyPass(const std::string &name, const Module &m,
                     const RunConfig &rc) {
  const TileConfig &t = rc.tiles;
  if (name == "tile")
    return tileLoopNest(m, t);
  if (name == "copies")
    return generateSharedCopies(m, t);
  if (name == "pad")
    return padSharedBuffers(m, t);
  if (name == "wmma")
    return raiseToWmma(m, t);
  if (name == "permute-outer")
    return permuteLoops(m, {"i", "j", "k", "ii", "jj"},
                        {"i", "j", "ii", "jj", "k"});
  if (name == "permute-inner")
    return permuteLoops(m, {"iii", "jjj", "kk"}, {"kk", "iii", "jjj"});
  if (name == "unroll")
    return unrollFull(m, {"kk", "iii", "jjj"});
  if (name == "cse")
    return cse(m);
  if (name == "hoist")
    return hoistAccumulator(m);
  if (name == "pipeline")
    return splitPipeline(m);
  if (name == "barriers")
    return insertBarriers(m);
  if (name == "vectorize")
    return vectorizeCopies(m, t.vectorBits);
  if (name == "parallelize")
    return parallelize(m);
  if (name == "map-gpu")
    return mapToGpu(m, t, rc.problem);
  if (name == "finalize-pipeline")
    return finalizePipeline(m);
  throw PassError(name, "unknown pass");
}

PassTrace runPasses(const Module &start, const RunConfig &rc,
                    const std::string &resumeAfter) {
  PassTrace trace;
  trace.module = start;
  const auto &names = passNames();
  size_t first = 0;
  if (!resumeAfter.empty()) {
    auto it = std::find(names.begin(), names.end(), resumeAfter);
    if (it == names.end())
      throw PassError(resumeAfter, "unknown pass");
    first = static_cast<size_t>(it - names.begin()) + 1;
    trace.last = resumeAfter;
  }
  if (rc.pipelineStop && !resumeAfter.empty() &&
      std::find(names.begin(), names.end(), *rc.pipelineStop) -
              names.begin() <
          static_cast<std::ptrdiff_t>(first))
    return trace;
  for (size_t i = first; i < names.size(); ++i) {
    const std::string &name = names[i];
    if (rc.disabled.count(name)) {
      trace.reports.push_back({name, {"disabled"}});
    } else {
      PassResult r = applyPass(name, trace.module, rc);
      trace.module = std::move(r.module);
      r.report.pass = name;
      trace.reports.push_back(std::move(r.report));
      trace.last = name;
    }
    if (rc.dumpAfter.count(name))
      trace.dumps.emplace_back(name, printModule(trace.module));
    if (rc.pipelineStop && *rc.pipelineStop == name)
      break;
  }
  return trace;
}

double checkTolerance(ElemType accum) {
  return accum == ElemType::F16 ? 5e-2 : 1e-3;
}

SimulationSummary simulate(const Module &m, const RunConfig &rc) {
  SimulationSummary s;
  const Function &f = m.func();
  Buffers in = randomInputs(m, rc.seed);
  Buffers out;
  s.mapped = f.launch.has_value();
  if (s.mapped) {
    GpuRun r = runGpu(m, in, rc.machine);
    out = std::move(r.outputs);
    s.metrics = std::move(r.metrics);
  } else {
    out = runSequential(m, in);
  }
  if (rc.check) {
    const MemRefType &a = f.memrefType(f.arg("A"));
    const MemRefType &b = f.memrefType(f.arg("B"));
    const MemRefType &c = f.memrefType(f.arg("C"));
    auto ref = referenceMatmul(in, a.shape[0], b.shape[1], a.shape[1]);
    s.checked = true;
    s.maxRelError = maxRelativeError(out.at("C"), ref);
    s.tolerance = checkTolerance(c.elem);
    s.passed = s.maxRelError <= s.tolerance;
  }
  return s;
}

namespace {

std::string formatError(double e) {
  std::ostringstream os;
  os << std::setprecision(6) << e;
  return os.str();
}

} // namespace

RunOutcome runPipeline(const RunConfig &rc,
                       const std::optional<std::string> &inputIR,
                       const std::string &resumeAfter) {
  RunOutcome o;
  std::ostringstream out, err;
  auto finish = [&](int code) {
    o.exitCode = code;
    o.out = out.str();
    o.err = err.str();
    return o;
  };

  auto violations = configViolations(rc.problem, rc.tiles);
  if (!violations.empty()) {
    err << "error: illegal configuration\n";
    for (const auto &v : violations)
      err << "  " << v << "\n";
    return finish(2);
  }

  std::vector<std::string> named(rc.dumpAfter.begin(), rc.dumpAfter.end());
  named.insert(named.end(), rc.disabled.begin(), rc.disabled.end());
  if (rc.pipelineStop)
    named.push_back(*rc.pipelineStop);
  if (!resumeAfter.empty())
    named.push_back(resumeAfter);
  for (const std::string &n : named)
    if (!isPassName(n)) {
      err << "error: unknown pass '" << n << "'\n";
      return finish(2);
    }

  Module start;
  try {
    start = inputIR ? parseModule(*inputIR) : buildNaiveMatmul(rc.problem);
  } catch (const ParseError &e) {
    err << "error: " << e.what() << "\n";
    return finish(2);
  } catch (const VerifyError &e) {
    err << "error: " << e.what() << "\n";
    return finish(2);
  }

  // Resource limits are known from the tiles alone; refuse before lowering.
  if (ResourceReport pre = analyze(start, rc.tiles, rc.problem); !pre.legal()) {
    err << "error: resource limits violated\n";
    for (const auto &v : pre.legality)
      err << "  " << v << "\n";
    return finish(3);
  }

  PassTrace trace;
  try {
    trace = runPasses(start, rc, resumeAfter);
  } catch (const PassError &e) {
    err << "error: pass '" << e.pass() << "' failed: " << e.what() << "\n";
    return finish(1);
  }
  for (const PassReport &r : trace.reports) {
    err << "[" << r.pass << "]";
    for (size_t i = 0; i < r.deltas.size(); ++i)
      err << (i ? "; " : " ") << r.deltas[i];
    err << "\n";
  }
  for (const auto &[pass, ir] : trace.dumps)
    out << "// ----- IR after " << pass << " -----\n" << ir;

  const Module &m = trace.module;
  if (rc.emit == EmitKind::IR)
    out << printModule(m);
  else if (rc.emit == EmitKind::KernelText)
    out << emitKernelText(m);

  int code = 0;
  ResourceReport res = analyze(m, rc.tiles, rc.problem);
  if (!res.legal()) {
    err << "error: resource limits violated\n";
    for (const auto &v : res.legality)
      err << "  " << v << "\n";
    code = 3;
  }

  if (rc.simulate || rc.check) {
    out << "# resources\n" << res.render();
    SimulationSummary s;
    try {
      s = simulate(m, rc);
    } catch (const SimError &e) {
      err << "error: simulation failed: " << e.what() << "\n";
      return finish(4);
    }
    if (s.mapped) {
      out << "# metrics\n" << s.metrics.report();
      for (const Race &r : s.metrics.races)
        err << "race: " << r.str() << "\n";
      if (s.metrics.raceCount > 0 && code == 0)
        code = 5;
    }
    if (s.checked) {
      out << "max_rel_error=" << formatError(s.maxRelError) << "\n"
          << "tolerance=" << formatError(s.tolerance) << "\n"
          << "check=" << (s.passed ? "pass" : "fail") << "\n";
      if (!s.passed && code == 0)
        code = 6;
    }
  }
  return finish(code);
}

//===----------------------------------------------------------------------===//
// Sweeps
//===----------------------------------------------------------------------===//

std::string describeTiles(const TileConfig &t) {
  std::ostringstream os;
  os << "tb=" << t.tbm << "x" << t.tbn << "x" << t.tbk << ",warp=" << t.wm
     << "x" << t.wn;
  if (t.paddingA == t.paddingB)
    os << ",pad=" << t.paddingA;
  else
    os << ",padA=" << t.paddingA << ",padB=" << t.paddingB;
  os << ",vec=" << t.vectorBits;
  return os.str();
}

std::vector<TileConfig> parseSweep(const std::string &text,
                                   const TileConfig &base) {
  std::vector<TileConfig> out;
  std::istringstream lines(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(lines, line)) {
    ++lineNo;
    if (auto h = line.find('#'); h != std::string::npos)
      line.resize(h);
    std::istringstream words(line);
    std::string kv;
    TileConfig t = base;
    bool any = false;
    while (words >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("sweep line " + std::to_string(lineNo) +
                                    ": expected key=value, got '" + kv + "'");
      std::string key = kv.substr(0, eq);
      int64_t v = 0;
      try {
        size_t used = 0;
        v = std::stoll(kv.substr(eq + 1), &used);
        if (used != kv.size() - eq - 1)
          throw std::invalid_argument("");
      } catch (const std::exception &) {
        throw std::invalid_argument("sweep line " + std::to_string(lineNo) +
                                    ": bad integer in '" + kv + "'");
      }
      if (key == "tbm") t.tbm = v;
      else if (key == "tbn") t.tbn = v;
      else if (key == "tbk") t.tbk = v;
      else if (key == "wm") t.wm = v;
      else if (key == "wn") t.wn = v;
      else if (key == "pad") t.paddingA = t.paddingB = v;
      else if (key == "padA") t.paddingA = v;
      else if (key == "padB") t.paddingB = v;
      else if (key == "vec") t.vectorBits = static_cast<int>(v);
      else
        throw std::invalid_argument("sweep line " + std::to_string(lineNo) +
                                    ": unknown key '" + key + "'");
      any = true;
    }
    if (any)
      out.push_back(t);
  }
  return out;
}

std::vector<SweepRow> benchSweep(const RunConfig &base,
                                 const std::vector<TileConfig> &sweep) {
  std::vector<SweepRow> rows;
  for (const TileConfig &t : sweep) {
    SweepRow row;
    row.tiles = t;
    row.label = describeTiles(t);
    RunConfig rc = base;
    rc.tiles = t;
    rc.pipelineStop.reset();
    rc.dumpAfter.clear();
    row.violations = configViolations(rc.problem, t);
    if (row.violations.empty())
      row.violations =
          analyze(buildNaiveMatmul(rc.problem), t, rc.problem).legality;
    if (!row.violations.empty()) {
      rows.push_back(std::move(row));
      continue;
    }
    try {
      PassTrace tr = runPasses(buildNaiveMatmul(rc.problem), rc);
      row.sharedBytes = analyze(tr.module, t, rc.problem).sharedBytes;
      row.metrics = simulate(tr.module, rc).metrics;
    } catch (const std::exception &e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  int64_t bestScore = std::numeric_limits<int64_t>::max();
  SweepRow *best = nullptr;
  for (SweepRow &r : rows) {
    if (!r.violations.empty() || !r.error.empty())
      continue;
    int64_t score = r.metrics.stallCycles + r.metrics.bankConflicts;
    if (score < bestScore) {
      bestScore = score;
      best = &r;
    }
  }
  if (best)
    best->best = true;
  return rows;
}

std::string renderSweep(const std::vector<SweepRow> &rows) {
  std::ostringstream os;
  size_t w = 6;
  for (const SweepRow &r : rows)
    w = std::max(w, r.label.size());
  os << std::left << std::setw(static_cast<int>(w)) << "config" << std::right
     << std::setw(9) << "shared" << std::setw(11) << "conflicts"
     << std::setw(14) << "transactions" << std::setw(10) << "copy_tx"
     << std::setw(10) << "stalls" << std::setw(7) << "races" << "  note\n";
  for (const SweepRow &r : rows) {
    os << std::left << std::setw(static_cast<int>(w)) << r.label
       << std::right;
    if (!r.violations.empty() || !r.error.empty()) {
      os << "  skipped: "
         << (r.violations.empty() ? r.error : r.violations.front()) << "\n";
      continue;
    }
    const SimMetrics &m = r.metrics;
    os << std::setw(9) << r.sharedBytes << std::setw(11) << m.bankConflicts
       << std::setw(14) << m.globalTransactions << std::setw(10)
       << m.copyTransactions << std::setw(10) << m.stallCycles << std::setw(7)
       << m.raceCount << (r.best ? "  best" : "") << "\n";
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    const SweepRow &r = rows[i];
    os << "row=" << i << " config=" << r.label;
    if (!r.violations.empty() || !r.error.empty()) {
      std::string why = r.violations.empty() ? r.error : r.violations.front();
      std::replace(why.begin(), why.end(), ' ', '_');
      os << " skipped=" << why << "\n";
      continue;
    }
    const SimMetrics &m = r.metrics;
    os << " shared_bytes=" << r.sharedBytes
       << " bank_conflicts=" << m.bankConflicts
       << " global_transactions=" << m.globalTransactions
       << " copy_transactions=" << m.copyTransactions
       << " stall_cycles=" << m.stallCycles << " races=" << m.raceCount
       << " best=" << (r.best ? 1 : 0) << "\n";
  }
  return os.str();
}

} // namespace tcmm

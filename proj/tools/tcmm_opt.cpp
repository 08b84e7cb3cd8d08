// tcmm-opt: lowers a naive matmul (or a parsed IR file) through the pass
// pipeline, dumps IR or kernel text, and optionally simulates the kernel.

#include "tcmm/pipeline.h"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::string readFile(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

int main(int argc, char **argv) {
  using namespace tcmm;
  CLI::App app{"Tensor-core matmul lowering pipeline"};
  app.option_defaults()->always_capture_default();

  RunConfig rc;
  std::string accum = "f32", emit = "ir", stop, sweepFile, inputFile, resume;
  std::vector<std::string> dumpAfter, disabled;
  int64_t pad = 8;
  std::optional<int64_t> padA, padB;

  app.add_option("--m", rc.problem.M, "rows of A and C");
  app.add_option("--n", rc.problem.N, "columns of B and C");
  app.add_option("--k", rc.problem.K, "reduction size");
  app.add_option("--accum", accum, "accumulate type")
      ->check(CLI::IsMember({"f16", "f32"}));
  app.add_option("--tbm", rc.tiles.tbm, "thread-block tile M");
  app.add_option("--tbn", rc.tiles.tbn, "thread-block tile N");
  app.add_option("--tbk", rc.tiles.tbk, "thread-block tile K");
  app.add_option("--wm", rc.tiles.wm, "warp tile M");
  app.add_option("--wn", rc.tiles.wn, "warp tile N");
  app.add_option("--pad", pad, "shared buffer padding (elements)");
  app.add_option("--pad-a", padA, "padding of the A buffer only");
  app.add_option("--pad-b", padB, "padding of the B buffer only");
  app.add_option("--vec", rc.tiles.vectorBits, "copy vector width in bits")
      ->check(CLI::IsMember({32, 64, 128}));
  app.add_option("--pipeline-stop", stop, "stop after this pass");
  app.add_option("--dump-after", dumpAfter, "dump IR after these passes")
      ->delimiter(',');
  app.add_option("--disable", disabled, "skip these passes")->delimiter(',');
  app.add_flag("--simulate", rc.simulate, "run the simulator");
  app.add_flag("--check", rc.check, "compare against an f64 reference");
  app.add_option("--seed", rc.seed, "input seed");
  app.add_option("--emit", emit, "final artifact")
      ->check(CLI::IsMember({"ir", "kernel-text", "none"}));
  app.add_option("--sweep", sweepFile, "tile sweep file (key=value lines)");
  app.add_option("--input", inputFile, "start from this IR file");
  app.add_option("--resume-after", resume,
                 "pass the input IR was dumped after");
  app.add_option("--global-latency", rc.machine.globalLatency,
                 "stall cycles charged per exposed global load");

  CLI11_PARSE(app, argc, argv);

  rc.problem.accum = accum == "f16" ? ElemType::F16 : ElemType::F32;
  rc.tiles.paddingA = padA.value_or(pad);
  rc.tiles.paddingB = padB.value_or(pad);
  rc.emit = emit == "ir"            ? EmitKind::IR
            : emit == "kernel-text" ? EmitKind::KernelText
                                    : EmitKind::None;
  for (const auto &list : {std::vector<std::string>{stop}, dumpAfter,
                           disabled, std::vector<std::string>{resume}})
    for (const std::string &p : list)
      if (!p.empty() && !isPassName(p)) {
        std::cerr << "error: unknown pass '" << p << "'\n";
        return 2;
      }
  if (!stop.empty())
    rc.pipelineStop = stop;
  rc.dumpAfter.insert(dumpAfter.begin(), dumpAfter.end());
  rc.disabled.insert(disabled.begin(), disabled.end());

  try {
    if (!sweepFile.empty()) {
      auto configs = parseSweep(readFile(sweepFile), rc.tiles);
      std::cout << renderSweep(benchSweep(rc, configs));
      return 0;
    }
    std::optional<std::string> input;
    if (!inputFile.empty())
      input = readFile(inputFile);
    RunOutcome o = runPipeline(rc, input, resume);
    std::cout << o.out;
    std::cerr << o.err;
    return o.exitCode;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

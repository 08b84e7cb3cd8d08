//===- analysis.cpp - Static resource and legality checks -----------------===//

#include "tcmm/analysis.h"

#include "tcmm/transforms.h"

#include <algorithm>
#include <sstream>

namespace tcmm {

int64_t plannedSharedBytes(const TileConfig &cfg) {
  return (cfg.tbm * (cfg.tbk + cfg.paddingA) +
          cfg.tbk * (cfg.tbn + cfg.paddingB)) *
         elemBytes(ElemType::F16);
}

ResourceReport analyze(const Module &m, const TileConfig &cfg,
                       const ProblemConfig &p, const AnalysisParams &ap) {
  ResourceReport r;
  bool anyShared = std::any_of(m.globals.begin(), m.globals.end(),
                               [](const Global &g) {
                                 return g.type.space == MemorySpace::Shared;
                               });
  r.sharedBytes = anyShared ? sharedBytes(m) : plannedSharedBytes(cfg);
  int64_t fm = std::max<int64_t>(cfg.wm / TileConfig::wmmaM, 0);
  int64_t fn = std::max<int64_t>(cfg.wn / TileConfig::wmmaN, 0);
  r.fragmentsPerWarp = fm * fn + fm + fn;
  r.estRegistersPerThread =
      r.fragmentsPerWarp * TileConfig::wmmaM * TileConfig::wmmaN / 32 +
      ap.registerOverhead;
  if (const Function *f = m.funcs.empty() ? nullptr : &m.funcs[0];
      f && f->launch) {
    r.warpsPerBlock = f->launch->warps();
  } else {
    r.warpsPerBlock = cfg.wm > 0 && cfg.wn > 0 ? cfg.warpsX() * cfg.warpsY() : 0;
  }
  r.blockThreads = r.warpsPerBlock * 32;
  int64_t byShared = r.sharedBytes > 0 ? ap.smSharedBytes / r.sharedBytes
                                       : ap.smMaxWarps;
  int64_t byWarps =
      r.warpsPerBlock > 0 ? ap.smMaxWarps / r.warpsPerBlock : 0;
  r.estBlocksPerSM = std::min(byShared, byWarps);

  r.legality = configViolations(p, cfg);
  if (r.sharedBytes > ap.sharedLimitBytes)
    r.legality.push_back("shared memory " + std::to_string(r.sharedBytes) +
                         " bytes exceeds " +
                         std::to_string(ap.sharedLimitBytes));
  if (r.blockThreads > ap.maxBlockThreads)
    r.legality.push_back("block of " + std::to_string(r.blockThreads) +
                         " threads exceeds " +
                         std::to_string(ap.maxBlockThreads));
  if (r.estRegistersPerThread > ap.maxRegisters)
    r.legality.push_back("estimated " +
                         std::to_string(r.estRegistersPerThread) +
                         " registers per thread exceeds " +
                         std::to_string(ap.maxRegisters));
  return r;
}

std::string ResourceReport::render() const {
  std::ostringstream os;
  os << "shared_bytes=" << sharedBytes << "\n"
     << "fragments_per_warp=" << fragmentsPerWarp << "\n"
     << "est_registers_per_thread=" << estRegistersPerThread << "\n"
     << "warps_per_block=" << warpsPerBlock << "\n"
     << "block_threads=" << blockThreads << "\n"
     << "est_blocks_per_sm=" << estBlocksPerSM << "\n"
     << "violations=" << legality.size() << "\n";
  for (const std::string &v : legality)
    os << "violation=" << v << "\n";
  return os.str();
}

} // namespace tcmm

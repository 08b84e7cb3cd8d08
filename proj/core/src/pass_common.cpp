//===- pass_common.cpp - Reporting and helpers shared by passes -----------===//

#include "tcmm/transforms.h"
#include "tcmm/verifier.h"

#include <map>

namespace tcmm {

bool isCopyTag(const std::string &tag) { return tag.rfind("copy_", 0) == 0; }

int64_t sharedBytes(const Module &m) {
  int64_t total = 0;
  for (const Global &g : m.globals)
    if (g.type.space == MemorySpace::Shared)
      total += g.type.allocationBytes();
  return total;
}

namespace {

std::map<std::string, size_t> opCounts(const Module &m) {
  std::map<std::string, size_t> counts;
  for (const Function &f : m.funcs)
    walkOps(f.body, [&](const Op &op) { ++counts[std::string(toString(op.kind))]; });
  return counts;
}

size_t loopCount(const Module &m) {
  size_t n = 0;
  for (const Function &f : m.funcs)
    n += countLoops(f.body);
  return n;
}

} // namespace

std::string structuralSummary(const Module &m) {
  std::string out = "loops=" + std::to_string(loopCount(m));
  for (const auto &[k, v] : opCounts(m))
    out += " " + k + "=" + std::to_string(v);
  out += " shared_bytes=" + std::to_string(sharedBytes(m));
  return out;
}

PassResult finishPass(std::string name, const Module &before, Module after,
                      std::vector<std::string> notes) {
  auto diags = verify(after);
  if (!diags.empty()) {
    std::string msg = "produced invalid IR";
    for (const auto &d : diags)
      msg += "; " + d.str();
    throw PassError(name, msg);
  }
  PassReport report{name, {}};
  size_t lb = loopCount(before), la = loopCount(after);
  if (lb != la)
    report.deltas.push_back("loops " + std::to_string(lb) + " -> " +
                            std::to_string(la));
  auto cb = opCounts(before), ca = opCounts(after);
  std::map<std::string, std::pair<size_t, size_t>> merged;
  for (const auto &[k, v] : cb)
    merged[k].first = v;
  for (const auto &[k, v] : ca)
    merged[k].second = v;
  for (const auto &[k, v] : merged)
    if (v.first != v.second)
      report.deltas.push_back(k + " " + std::to_string(v.first) + " -> " +
                              std::to_string(v.second));
  int64_t sb = sharedBytes(before), sa = sharedBytes(after);
  if (sb != sa)
    report.deltas.push_back("shared bytes " + std::to_string(sb) + " -> " +
                            std::to_string(sa));
  for (auto &n : notes)
    report.deltas.push_back(std::move(n));
  if (report.deltas.empty())
    report.deltas.push_back("unchanged");
  return {std::move(after), std::move(report)};
}

} // namespace tcmm

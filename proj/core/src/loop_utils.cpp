//===- loop_utils.cpp - Loop-nest analysis shared by passes ---------------===//

#include "loop_utils.h"

#include <algorithm>
#include <stdexcept>

namespace tcmm::detail {

std::unordered_map<ValueId, const Loop *> ivLoops(const Block &b) {
  std::unordered_map<ValueId, const Loop *> out;
  walkLoops(b, [&](const Loop &l) { out[l.iv] = &l; });
  return out;
}

int64_t tripOf(const Loop &l) {
  auto t = l.tripCount();
  if (!t)
    throw std::logic_error("loop without constant trip count");
  return *t;
}

Expansion expandIvs(const AffineApply &a,
                    const std::unordered_map<ValueId, const Loop *> &loops,
                    const std::function<bool(const Loop *)> &expand) {
  Expansion e{a, {}};
  for (bool changed = true; changed;) {
    changed = false;
    for (ValueId v : e.apply.operands) {
      if (isCounter(v))
        continue;
      auto it = loops.find(v);
      if (it == loops.end() || !expand(it->second))
        continue;
      const Loop *l = it->second;
      auto pos = std::find(e.counters.begin(), e.counters.end(), l);
      ValueId counter = kCounterBase + ValueId(pos - e.counters.begin());
      if (pos == e.counters.end())
        e.counters.push_back(l);
      std::vector<ValueId> ops = l->lower.operands;
      ops.push_back(counter);
      AffineExpr repl = exprOver(l->lower, ops) +
                        AffineExpr::dim(unsigned(ops.size() - 1)) * l->step;
      e.apply = substitute(e.apply, v, affine(repl, ops));
      changed = true;
      break;
    }
  }
  return e;
}

std::optional<Split> splitCounters(const Expansion &e, unsigned r) {
  Split s;
  s.coefs.assign(e.counters.size(), 0);
  const AffineExpr &expr = e.apply.map.result(r);
  AffineExpr rest = expr;
  std::vector<AffineExpr> zeroCounters;
  for (unsigned d = 0; d < e.apply.operands.size(); ++d) {
    ValueId v = e.apply.operands[d];
    if (!isCounter(v)) {
      zeroCounters.push_back(AffineExpr::dim(d));
      continue;
    }
    zeroCounters.push_back(AffineExpr::constant(0));
    int64_t c = expr.dimCoefficient(d);
    rest = rest - AffineExpr::dim(d) * c;
    if (rest.usesDim(d))
      return std::nullopt;
    size_t idx = v - kCounterBase;
    s.coefs[idx] = c;
    int64_t span = c * (tripOf(*e.counters[idx]) - 1);
    s.range.lo += std::min<int64_t>(0, span);
    s.range.hi += std::max<int64_t>(0, span);
  }
  std::vector<AffineExpr> results = {expr.replaceDims(zeroCounters)};
  s.base = AffineApply::fromExprs(std::move(results), e.apply.operands);
  return s;
}

std::map<ValueId, std::string> memrefRoots(const Function &f) {
  std::map<ValueId, std::string> roots;
  for (ValueId a : f.args)
    roots[a] = "%" + f.values[a].name;
  walkOps(f.body, [&](const Op &op) {
    if (op.kind == OpKind::GetGlobal)
      roots[op.result] = "@" + op.symbol;
    else if (op.kind == OpKind::ViewCast)
      roots[op.result] = roots[op.operands[0]];
  });
  return roots;
}

void applyMap(Block &b, const ValueMap &map) {
  for (Node &n : b) {
    if (n.isOp()) {
      Op &op = n.op();
      for (ValueId &v : op.operands)
        v = remap(map, v);
      if (op.memref != kNoValue)
        op.memref = remap(map, op.memref);
      op.index = remap(map, op.index);
    } else {
      Loop &l = n.loop();
      l.lower = remap(map, l.lower);
      l.upper = remap(map, l.upper);
      for (ValueId &v : l.inits)
        v = remap(map, v);
      applyMap(l.body, map);
    }
  }
}

} // namespace tcmm::detail

//===- parallelize.cpp - Static loop-carried dependence test --------------===//
//
// Each access is expanded over normalized loop counters (iv = lb + step*t).
// For a loop L with counter t, two instances of accesses a and b in
// iterations t1 != t2 can touch the same element only if, in every
// dimension, alpha_a*t1 - alpha_b*t2 + (inner_a - inner_b) can be zero, where
// inner_* is the interval spanned by the other counters plus the access
// extent (16 for fragments, the vector width for vector views).
//
//===----------------------------------------------------------------------===//

#include "loop_utils.h"
#include "tcmm/transforms.h"

#include <algorithm>
#include <limits>

namespace tcmm {

using namespace detail;

namespace {

struct Access {
  const Op *op;
  bool write;
  std::string root;
  Expansion expansion; // in scalar element units
  std::vector<int64_t> extent;
};

int64_t floorDivI(int64_t a, int64_t b) { return tcmm::floorDiv(a, b); }
int64_t ceilDivI(int64_t a, int64_t b) { return -tcmm::floorDiv(-a, b); }

/// Per-dim verdict: false means the dimension proves independence.
struct DeltaSet {
  int64_t lo = std::numeric_limits<int64_t>::min() / 4;
  int64_t hi = std::numeric_limits<int64_t>::max() / 4;
};

bool mayConflict(const Access &a, const Access &b, const Loop *L, int64_t n) {
  DeltaSet delta;
  unsigned rank = a.expansion.apply.map.numResults();
  for (unsigned d = 0; d < rank; ++d) {
    auto sa = splitCounters(a.expansion, d);
    auto sb = splitCounters(b.expansion, d);
    if (!sa || !sb)
      continue; // unknown: no constraint
    // Common symbolic part must cancel to a constant.
    std::vector<ValueId> ops = sa->base.operands;
    for (ValueId v : sb->base.operands)
      if (std::find(ops.begin(), ops.end(), v) == ops.end())
        ops.push_back(v);
    AffineExpr diff = exprOver(sa->base, ops) - exprOver(sb->base, ops);
    auto c = diff.constantValue();
    if (!c)
      continue;
    auto coefOf = [&](const Access &x, const Split &s) -> int64_t {
      auto it = std::find(x.expansion.counters.begin(),
                          x.expansion.counters.end(), L);
      if (it == x.expansion.counters.end())
        return 0;
      return s.coefs[size_t(it - x.expansion.counters.begin())];
    };
    int64_t alphaA = coefOf(a, *sa), alphaB = coefOf(b, *sb);
    auto rangeWithout = [&](const Access &x, const Split &s, int64_t alpha) {
      Interval r = s.range;
      int64_t span = alpha * (n - 1);
      r.lo -= std::min<int64_t>(0, span);
      r.hi -= std::max<int64_t>(0, span);
      r.hi += x.extent[d] - 1;
      return r;
    };
    Interval ia = rangeWithout(a, *sa, alphaA);
    Interval ib = rangeWithout(b, *sb, alphaB);
    // alphaA*t1 - alphaB*t2 must lie in [lo, hi].
    int64_t lo = -(ia.hi - ib.lo + *c), hi = -(ia.lo - ib.hi + *c);
    if (alphaA == alphaB) {
      int64_t alpha = alphaA;
      if (alpha == 0) {
        if (lo > 0 || hi < 0)
          return false;
        continue;
      }
      int64_t dlo, dhi;
      if (alpha > 0) {
        dlo = ceilDivI(lo, alpha);
        dhi = floorDivI(hi, alpha);
      } else {
        dlo = ceilDivI(hi, alpha);
        dhi = floorDivI(lo, alpha);
      }
      delta.lo = std::max(delta.lo, dlo);
      delta.hi = std::min(delta.hi, dhi);
      if (delta.lo > delta.hi)
        return false;
    } else {
      int64_t mA = alphaA * (n - 1), mB = alphaB * (n - 1);
      int64_t rlo = std::min<int64_t>(0, mA) - std::max<int64_t>(0, mB);
      int64_t rhi = std::max<int64_t>(0, mA) - std::min<int64_t>(0, mB);
      if (rhi < lo || rlo > hi)
        return false;
    }
  }
  // Need some delta != 0 with |delta| <= n - 1.
  int64_t lo = std::max(delta.lo, -(n - 1)), hi = std::min(delta.hi, n - 1);
  if (lo > hi)
    return false;
  return !(lo == 0 && hi == 0);
}

} // namespace

bool loopIsParallel(const Function &f, const Loop &L) {
  if (!L.regionArgs.empty())
    return false;
  auto trip = L.tripCount();
  if (!trip)
    return false;
  if (*trip <= 1)
    return true;
  auto roots = memrefRoots(f);
  auto loops = ivLoops(L.body);
  loops[L.iv] = &L;
  bool enclosesCopies = !isCopyTag(L.tag);

  std::vector<Access> accesses;
  walkOps(L.body, [&](const Op &op) {
    if (!op.isMemoryAccess())
      return;
    const MemRefType &t = f.memrefType(op.memref);
    Access a;
    a.op = &op;
    a.write = op.writesMemory();
    if (a.write && enclosesCopies && isCopyTag(op.tag))
      return;
    a.root = roots.at(op.memref);
    AffineApply idx = op.index;
    a.extent.assign(t.rank(), 1);
    if (op.kind == OpKind::WmmaLoad || op.kind == OpKind::WmmaStore) {
      a.extent[0] = 16;
      a.extent[1] = 16;
    }
    if (t.vectorWidth > 1) {
      std::vector<AffineExpr> exprs = idx.map.results();
      exprs.back() = exprs.back() * t.vectorWidth;
      idx = AffineApply::fromExprs(exprs, idx.operands);
      a.extent.back() = t.vectorWidth;
    }
    a.expansion = expandIvs(idx, loops, [](const Loop *) { return true; });
    accesses.push_back(std::move(a));
  });
  for (size_t i = 0; i < accesses.size(); ++i)
    for (size_t j = i; j < accesses.size(); ++j) {
      const Access &a = accesses[i], &b = accesses[j];
      if (a.root != b.root || (!a.write && !b.write))
        continue;
      if (mayConflict(a, b, &L, *trip))
        return false;
    }
  return true;
}

PassResult parallelize(const Module &in) {
  Module m = in;
  Function &f = m.func();
  std::vector<std::pair<Loop *, bool>> verdicts;
  walkLoops(f.body, [&](Loop &l) {
    verdicts.push_back({&l, loopIsParallel(f, l)});
  });
  std::string par, seq;
  for (auto [l, p] : verdicts) {
    l->parallel = p;
    std::string &s = p ? par : seq;
    s += (s.empty() ? "" : ",") + (l->tag.empty() ? "?" : l->tag);
  }
  return finishPass("parallelize", in, std::move(m),
                    {"parallel: " + par, "sequential: " + seq});
}

} // namespace tcmm

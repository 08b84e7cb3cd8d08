// loopIsParallel against an exhaustive scan of every pair of executed
// accesses on small problems.
#include "test_support.h"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace tcmm;
using namespace tcmm::test;

namespace {

struct Exec {
  bool write;
  bool copy;
  std::vector<std::pair<const Loop *, int64_t>> stack;
};

struct Scanner {
  const Function &f;
  std::map<ValueId, std::string> roots;
  std::map<ValueId, int64_t> env;
  std::vector<std::pair<const Loop *, int64_t>> stack;
  std::vector<Exec> execs;
  // (root, element) -> exec ids
  std::map<std::pair<std::string, int64_t>, std::vector<size_t>> touches;

  explicit Scanner(const Function &fn) : f(fn) {
    for (ValueId a : f.args)
      roots[a] = f.values[a].name;
    walkOps(f.body, [&](const Op &op) {
      if (op.kind == OpKind::GetGlobal)
        roots[op.result] = op.symbol;
      if (op.kind == OpKind::ViewCast)
        roots[op.result] = roots.at(op.operands[0]);
    });
  }

  int64_t eval(const AffineApply &a, unsigned r = 0) const {
    std::vector<int64_t> dims;
    for (ValueId v : a.operands)
      dims.push_back(env.at(v));
    return a.map.result(r).eval(dims);
  }

  int64_t offset(const MemRefType &t, std::vector<int64_t> idx) const {
    return t.layout.eval(idx).at(0) * t.vectorWidth;
  }

  void access(const Op &op) {
    const MemRefType &t = f.memrefType(op.memref);
    std::vector<int64_t> idx;
    for (unsigned d = 0; d < op.index.map.numResults(); ++d)
      idx.push_back(eval(op.index, d));
    std::vector<int64_t> elems;
    if (op.kind == OpKind::WmmaLoad || op.kind == OpKind::WmmaStore) {
      for (int64_t r = 0; r < 16; ++r)
        for (int64_t c = 0; c < 16; ++c)
          elems.push_back(offset(t, {idx[0] + r, idx[1] + c}));
    } else {
      int64_t base = offset(t, idx);
      for (int64_t e = 0; e < t.vectorWidth; ++e)
        elems.push_back(base + e);
    }
    size_t id = execs.size();
    execs.push_back({op.writesMemory(), isCopyTag(op.tag), stack});
    for (int64_t e : elems)
      touches[{roots.at(op.memref), e}].push_back(id);
  }

  void run(const Block &b) {
    for (const Node &n : b) {
      if (n.isOp()) {
        if (n.op().isMemoryAccess())
          access(n.op());
        continue;
      }
      const Loop &l = n.loop();
      int64_t lo = eval(l.lower), hi = eval(l.upper);
      for (int64_t v = lo; v < hi; v += l.step) {
        env[l.iv] = v;
        stack.push_back({&l, v});
        run(l.body);
        stack.pop_back();
      }
    }
  }

  /// Loops that carry at least one conflict.
  std::set<const Loop *> carriers() const {
    std::set<const Loop *> out;
    for (const auto &[key, ids] : touches)
      for (size_t x = 0; x < ids.size(); ++x)
        for (size_t y = x + 1; y < ids.size(); ++y) {
          const Exec &a = execs[ids[x]], &b = execs[ids[y]];
          if (!a.write && !b.write)
            continue;
          size_t n = std::min(a.stack.size(), b.stack.size());
          for (size_t i = 0; i < n && a.stack[i].first == b.stack[i].first;
               ++i) {
            if (a.stack[i].second == b.stack[i].second)
              continue;
            const Loop *d = a.stack[i].first;
            // Staging writes are re-executed per block by design; only
            // copy loops themselves are checked against them.
            bool counts = isCopyTag(d->tag) || (a.write && !a.copy) ||
                          (b.write && !b.copy);
            if (counts)
              out.insert(d);
            break;
          }
        }
    return out;
  }
};

void compare(const Module &m, const std::string &what) {
  const Function &f = m.func();
  Scanner s(f);
  s.run(f.body);
  auto carried = s.carriers();
  walkLoops(f.body, [&](const Loop &l) {
    bool exact = l.regionArgs.empty() && !carried.count(&l);
    EXPECT_EQ(loopIsParallel(f, l), exact) << what << " loop " << l.tag;
  });
}

} // namespace

TEST(Dependence, NaiveNest) {
  Module m = buildNaiveMatmul(problem(8, 8, 8));
  compare(m, "naive");
  EXPECT_TRUE(loopIsParallel(m.func(), *findLoop(m.func().body, "i")));
  EXPECT_FALSE(loopIsParallel(m.func(), *findLoop(m.func().body, "k")));
}

TEST(Dependence, EveryStageMatchesExhaustiveScan) {
  ProblemConfig p = problem(32, 32, 48);
  TileConfig t = tiles(32, 32, 16, 16, 32);
  for (const auto &[pass, m] : allStages(p, t)) {
    if (m.func().launch)
      break;
    compare(m, pass);
  }
}

TEST(Dependence, WiderWarpGrid) {
  ProblemConfig p = problem(64, 64, 64);
  TileConfig t = tiles(64, 64, 32, 32, 32, 8, 64);
  for (const char *stop : {"copies", "wmma", "unroll", "pipeline", "vectorize"})
    compare(lowerTo(p, t, stop), stop);
}

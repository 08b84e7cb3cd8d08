#include "test_support.h"

#include "tcmm/gpu_map.h"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace tcmm;
using namespace tcmm::test;

namespace {

Module mapped(const ProblemConfig &p, const TileConfig &t) {
  return lowerTo(p, t, "map-gpu");
}

std::vector<OpKind> kBodyShape(const Module &k) {
  const Loop *l = findLoop(k.func().body, "k");
  std::vector<OpKind> out;
  if (!l)
    return out;
  for (const Node &n : l->body)
    if (n.isOp() && (out.empty() || out.back() != n.op().kind))
      out.push_back(n.op().kind);
  return out;
}

// Thread-level walk of one block: every address each copy access touches,
// keyed by (op, occurrence), in thread order.
struct ThreadWalk {
  const Function &f;
  int64_t bx, by, thread;
  std::map<ValueId, int64_t> env;
  std::map<const Op *, int64_t> seen;
  std::map<std::pair<const Op *, int64_t>, std::vector<int64_t>> *out;

  int64_t eval(const AffineApply &a, unsigned r = 0) {
    std::vector<int64_t> dims;
    for (ValueId v : a.operands)
      dims.push_back(env.at(v));
    return a.map.result(r).eval(dims);
  }

  void run(const Block &b) {
    for (const Node &n : b) {
      if (n.isLoop()) {
        const Loop &l = n.loop();
        for (int64_t v = eval(l.lower); v < eval(l.upper); v += l.step) {
          env[l.iv] = v;
          run(l.body);
        }
        continue;
      }
      const Op &op = n.op();
      if (op.kind == OpKind::HwId) {
        const LaunchConfig &lc = *f.launch;
        int64_t w = thread / 32;
        env[op.result] = op.hw == HwDim::BlockX   ? bx
                         : op.hw == HwDim::BlockY ? by
                         : op.hw == HwDim::WarpX  ? w % lc.warpsX
                         : op.hw == HwDim::WarpY  ? w / lc.warpsX
                                                  : thread;
      }
      bool global = op.memref != kNoValue &&
                    f.memrefType(op.memref).space == MemorySpace::Global;
      if (op.kind == OpKind::VectorLoad && global && isCopyTag(op.tag)) {
        const MemRefType &t = f.memrefType(op.memref);
        std::vector<int64_t> idx;
        for (unsigned d = 0; d < t.rank(); ++d)
          idx.push_back(eval(op.index, d));
        int64_t byteAddr =
            t.layout.eval(idx).at(0) * t.vectorWidth * elemBytes(t.elem);
        (*out)[{&op, seen[&op]++}].push_back(byteAddr);
      }
    }
  }
};

} // namespace

TEST(MapGpu, LargeTilesAtLargeSize) {
  Module k = mapped(problem(8192, 8192, 8192), tiles(128, 128, 64, 64, 64));
  ASSERT_TRUE(k.func().launch);
  const LaunchConfig &lc = *k.func().launch;
  EXPECT_EQ(lc.gridX, 64);
  EXPECT_EQ(lc.gridY, 64);
  EXPECT_EQ(lc.warpsX, 2);
  EXPECT_EQ(lc.warpsY, 2);
  EXPECT_EQ(lc.blockThreads(), 128);
}

TEST(MapGpu, SingleBlockGrid) {
  Module k = mapped(problem(64, 64, 64), tiles(64, 64, 32, 32, 32));
  EXPECT_EQ(k.func().launch->gridX, 1);
  EXPECT_EQ(k.func().launch->gridY, 1);
}

TEST(MapGpu, WideTile) {
  TileConfig t = tiles(128, 256, 32, 64, 64);
  Module k = mapped(problem(256, 512, 64), t);
  const LaunchConfig &lc = *k.func().launch;
  EXPECT_EQ(lc.gridX, 2);
  EXPECT_EQ(lc.gridY, 2);
  EXPECT_EQ(lc.warpsX, 2);
  EXPECT_EQ(lc.warpsY, 4);
  EXPECT_EQ(lc.blockThreads(), 256);
}

TEST(MapGpu, BodyHasNoHierarchyLoops) {
  Module k = mapped(problem(128, 128, 128), tiles(64, 64, 32, 32, 32));
  for (const char *tag : {"i", "j", "ii", "jj"})
    EXPECT_EQ(findLoop(k.func().body, tag), nullptr) << tag;
  ASSERT_NE(findLoop(k.func().body, "k"), nullptr);
  EXPECT_FALSE(findLoop(k.func().body, "k")->parallel);
  EXPECT_EQ(countOps(k.func().body, OpKind::HwId), 5u);
}

TEST(MapGpu, RejectsTooManyThreads) {
  ProblemConfig p = problem(256, 256, 64);
  TileConfig t = tiles(256, 128, 32, 16, 16); // 128 warps
  Module m = lowerTo(p, t, "parallelize");
  EXPECT_THROW(mapToGpu(m, t, p), PassError);
}

TEST(MapGpu, RejectsWarpTripMismatch) {
  ProblemConfig p = problem(128, 128, 128);
  TileConfig t = tiles(64, 64, 32, 32, 32);
  Module m = lowerTo(p, t, "parallelize");
  TileConfig other = tiles(64, 64, 32, 16, 32);
  EXPECT_THROW(mapToGpu(m, other, p), PassError);
}

TEST(MapGpu, RejectsUnparallelizedInput) {
  ProblemConfig p = problem(128, 128, 128);
  TileConfig t = tiles(64, 64, 32, 32, 32);
  EXPECT_THROW(mapToGpu(lowerTo(p, t, "vectorize"), t, p), PassError);
}

TEST(MapGpu, MatchesSequentialInterpretation) {
  for (ElemType acc : {ElemType::F32, ElemType::F16}) {
    ProblemConfig p = problem(128, 64, 96, acc);
    TileConfig t = tiles(64, 32, 32, 32, 16);
    Module pre = lowerTo(p, t, "parallelize");
    Module k = mapToGpu(pre, t, p).module;
    for (uint64_t seed : {0, 1, 2}) {
      Buffers in = randomInputs(pre, seed);
      auto seq = runSequential(pre, in).at("C");
      auto gpu = runGpu(k, in);
      EXPECT_EQ(gpu.metrics.raceCount, 0);
      std::vector<double> ref(seq.begin(), seq.end());
      EXPECT_LE(maxRelativeError(gpu.outputs.at("C"), ref),
                checkTolerance(acc));
    }
  }
}

TEST(MapGpu, EveryOutputElementWrittenOnce) {
  for (TileConfig t : {tiles(64, 64, 32, 32, 32), tiles(128, 128, 64, 64, 64),
                       tiles(64, 128, 32, 64, 32), tiles(32, 32, 32, 16, 16)}) {
    ProblemConfig p = problem(128, 256, 64);
    Module k = lowerTo(p, t);
    auto r = runGpu(k, randomInputs(k, 0));
    EXPECT_EQ(r.metrics.writeCensus.at("C"), (std::pair<int64_t, int64_t>{1, 1}))
        << describeTiles(t);
    EXPECT_EQ(r.metrics.writeCensus.count("A"), 0u);
  }
}

TEST(MapGpu, CopyLoadsAreCoalesced) {
  ProblemConfig p = problem(256, 256, 128);
  for (int vec : {32, 64, 128}) {
    TileConfig t = tiles(128, 128, 64, 64, 64, 8, vec);
    Module k = lowerTo(p, t);
    const Function &f = k.func();
    std::map<std::pair<const Op *, int64_t>, std::vector<int64_t>> addrs;
    for (int64_t tid = 0; tid < f.launch->blockThreads(); ++tid) {
      ThreadWalk w{f, 1, 0, tid, {}, {}, &addrs};
      w.run(f.body);
    }
    ASSERT_FALSE(addrs.empty());
    int64_t bytes = 2 * t.vectorElems();
    int64_t bound = (32 * bytes + 127) / 128;
    for (const auto &[key, perThread] : addrs) {
      ASSERT_EQ(int64_t(perThread.size()), f.launch->blockThreads());
      for (size_t w0 = 0; w0 < perThread.size(); w0 += 32) {
        std::set<int64_t> segs;
        for (size_t l = w0; l < w0 + 32; ++l)
          for (int64_t b = 0; b < bytes; b += 2)
            segs.insert((perThread[l] + b) / 128);
        EXPECT_LE(int64_t(segs.size()), bound) << "vec " << vec;
      }
      // Consecutive threads read consecutive vectors within a row.
      EXPECT_EQ(perThread[1] - perThread[0], bytes);
    }
  }
}

TEST(Finalize, BarrierLoadComputeBarrierStore) {
  Module k = lowerTo(problem(128, 128, 128), tiles(64, 64, 32, 32, 32));
  const Loop *kl = findLoop(k.func().body, "k");
  ASSERT_NE(kl, nullptr);
  for (const Node &n : kl->body)
    EXPECT_TRUE(n.isOp()) << "loop left in k body: " << n.loop().tag;
  std::vector<OpKind> shape = kBodyShape(k);
  // barrier, global vector loads, fragment loads + compute, barrier, stores.
  ASSERT_GE(shape.size(), 6u);
  EXPECT_EQ(shape[0], OpKind::Barrier);
  EXPECT_EQ(shape[1], OpKind::VectorLoad);
  auto second = std::find(shape.begin() + 1, shape.end(), OpKind::Barrier);
  ASSERT_NE(second, shape.end());
  for (auto it = shape.begin() + 2; it != second; ++it)
    EXPECT_TRUE(*it == OpKind::WmmaLoad || *it == OpKind::WmmaCompute);
  EXPECT_EQ(*(second + 1), OpKind::VectorStore);
  EXPECT_EQ(shape.back(), OpKind::Yield);
}

TEST(Finalize, NoInLoopCopiesIsNoOp) {
  ProblemConfig p = problem(64, 64, 32);
  TileConfig t = tiles(64, 64, 32, 32, 32);
  Module k = lowerTo(p, t, "map-gpu");
  PassResult r = finalizePipeline(k);
  EXPECT_EQ(printModule(r.module), printModule(k));
  EXPECT_FALSE(r.report.deltas.empty());
}

TEST(Finalize, SameOutputFewerStalls) {
  ProblemConfig p = problem(128, 128, 256);
  TileConfig t = tiles(64, 64, 32, 32, 32);
  Module before = lowerTo(p, t, "map-gpu");
  Module after = finalizePipeline(before).module;
  Buffers in = randomInputs(before, 3);
  auto a = runGpu(before, in), b = runGpu(after, in);
  EXPECT_EQ(a.outputs.at("C"), b.outputs.at("C"));
  EXPECT_LT(b.metrics.stallCycles, a.metrics.stallCycles);
  EXPECT_EQ(b.metrics.raceCount, 0);
}

TEST(KernelText, PaddedSharedDeclarations) {
  Module k = lowerTo(problem(256, 256, 128), tiles(128, 128, 64, 64, 64));
  std::string text = emitKernelText(k);
  EXPECT_NE(text.find("[128][72]"), std::string::npos);
  EXPECT_NE(text.find("[64][136]"), std::string::npos);
  EXPECT_NE(text.find("__syncthreads();"), std::string::npos);
  EXPECT_NE(text.find("mma_sync"), std::string::npos);
  EXPECT_EQ(text, emitKernelText(k));
  Module again = lowerTo(problem(256, 256, 128), tiles(128, 128, 64, 64, 64));
  EXPECT_EQ(text, emitKernelText(again));
}

TEST(KernelText, EmptyKernel) {
  Module m;
  Function f;
  f.name = "empty";
  f.launch = LaunchConfig{};
  m.funcs.push_back(f);
  std::string text = emitKernelText(m);
  EXPECT_NE(text.find("__global__ void empty("), std::string::npos);
  EXPECT_EQ(text.find("for ("), std::string::npos);
  EXPECT_EQ(text.find("__shared__"), std::string::npos);
  EXPECT_EQ(text.back(), '\n');
}

TEST(KernelText, Golden) {
  Module k = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 32, 32));
  EXPECT_EQ(emitKernelText(k), readFixture("kernel_64.cu.txt"));
}

#include "test_support.h"

#include "tcmm/rewrite.h"
#include "tcmm/verifier.h"

#include <gtest/gtest.h>

#include <map>
#include <set>

using namespace tcmm;
using namespace tcmm::test;

namespace {

void expectSameResults(const Module &a, const Module &b, int seeds,
                       const std::string &what) {
  for (int s = 0; s < seeds; ++s) {
    Buffers in = randomInputs(a, s);
    auto ra = runSequential(a, in), rb = runSequential(b, in);
    ASSERT_EQ(ra.at("C"), rb.at("C")) << what << " seed " << s;
  }
}

const Loop &loopOf(const Module &m, const std::string &tag) {
  const Loop *l = findLoop(m.func().body, tag);
  if (!l)
    throw std::runtime_error("no loop " + tag);
  return *l;
}

int64_t trip(const Module &m, const std::string &tag) {
  return loopOf(m, tag).tripCount().value_or(-1);
}

const Global *shared(const Module &m, const std::string &name) {
  const Global *g = m.global(name);
  if (!g)
    throw std::runtime_error("no global " + name);
  return g;
}

} // namespace

//===----------------------------------------------------------------------===//
// tile
//===----------------------------------------------------------------------===//

TEST(Tile, LargeProblemOuterSteps) {
  Module m = lowerTo(problem(8192, 8192, 8192), tiles(128, 128, 64, 64, 64),
                     "tile");
  EXPECT_EQ(countLoops(m.func().body), 8u);
  for (auto [tag, step] : {std::pair{"i", 128}, {"j", 128}, {"k", 64}}) {
    const Loop &l = loopOf(m, tag);
    EXPECT_EQ(l.lower.constantValue(), 0);
    EXPECT_EQ(l.upper.constantValue(), 8192);
    EXPECT_EQ(l.step, step);
  }
  EXPECT_EQ(loopTags(m.func().body),
            (std::vector<std::string>{"i", "j", "k", "ii", "jj", "iii", "jjj",
                                      "kk"}));
  EXPECT_TRUE(m.globals.empty());
}

TEST(Tile, FullSizeTileHasUnitOuterTrips) {
  Module m = lowerTo(problem(64, 64, 32), tiles(64, 64, 32, 64, 64), "tile");
  for (const char *tag : {"i", "j", "k", "ii", "jj"})
    EXPECT_EQ(trip(m, tag), 1) << tag;
  EXPECT_EQ(trip(m, "iii"), 64);
  EXPECT_EQ(trip(m, "jjj"), 64);
  EXPECT_EQ(trip(m, "kk"), 32);
  expectSameResults(buildNaiveMatmul(problem(64, 64, 32)), m, 2, "tile");
}

TEST(Tile, BitExactAt256) {
  ProblemConfig p = problem(256, 256, 256);
  Module m0 = buildNaiveMatmul(p);
  Module m1 = tileLoopNest(m0, tiles(64, 64, 64, 32, 32)).module;
  expectSameResults(m0, m1, 1, "tile 256");
}

TEST(Tile, RejectsNonDivisibleProblem) {
  EXPECT_THROW(tileLoopNest(buildNaiveMatmul(problem(100, 64, 64)),
                            tiles(64, 64, 32, 32, 32)),
               PassError);
}

//===----------------------------------------------------------------------===//
// copies / pad
//===----------------------------------------------------------------------===//

TEST(Copies, SharedBufferShapes) {
  Module m = lowerTo(problem(256, 256, 128), tiles(128, 128, 64, 64, 64),
                     "copies");
  EXPECT_EQ(shared(m, "a_smem")->type.shape, (std::vector<int64_t>{128, 64}));
  EXPECT_EQ(shared(m, "b_smem")->type.shape, (std::vector<int64_t>{64, 128}));
  EXPECT_EQ(shared(m, "a_smem")->type.space, MemorySpace::Shared);
  // Copies sit directly inside the k-block loop; C is never staged.
  std::vector<std::string> inK;
  for (const Node &n : loopOf(m, "k").body)
    if (n.isLoop())
      inK.push_back(n.loop().tag);
  EXPECT_EQ(inK[0], "copy_a");
  EXPECT_EQ(inK[1], "copy_b");
  EXPECT_EQ(m.globals.size(), 2u);
}

TEST(Copies, SingleIntrinsicTile) {
  ProblemConfig p = problem(32, 32, 32);
  TileConfig t = tiles(16, 16, 16, 16, 16);
  Module tiled = lowerTo(p, t, "tile");
  Module m = generateSharedCopies(tiled, t).module;
  EXPECT_EQ(trip(m, "copy_a"), 16);
  EXPECT_EQ(trip(m, "copy_a_inner"), 16);
  EXPECT_EQ(trip(m, "copy_b"), 16);
  EXPECT_EQ(trip(m, "copy_b_inner"), 16);
  expectSameResults(tiled, m, 10, "copies 16");
}

TEST(Copies, PreservesSemanticsTenSeeds) {
  ProblemConfig p = problem(64, 64, 64);
  TileConfig t = tiles(64, 32, 32, 32, 16);
  Module tiled = lowerTo(p, t, "tile");
  expectSameResults(tiled, generateSharedCopies(tiled, t).module, 10, "copies");
}

TEST(Copies, RejectsOversizedTiles) {
  TileConfig t = tiles(256, 256, 64, 128, 128);
  Module tiled = tileLoopNest(buildNaiveMatmul(problem(256, 256, 64)), t).module;
  EXPECT_THROW(generateSharedCopies(tiled, t), PassError);
}

TEST(Pad, PaddedShapesAtLargeTiles) {
  Module m = lowerTo(problem(256, 256, 128), tiles(128, 128, 64, 64, 64), "pad");
  EXPECT_EQ(shared(m, "a_smem")->type.allocationShape(),
            (std::vector<int64_t>{128, 72}));
  EXPECT_EQ(shared(m, "b_smem")->type.allocationShape(),
            (std::vector<int64_t>{64, 136}));
  // Logical shapes unchanged.
  EXPECT_EQ(shared(m, "a_smem")->type.shape, (std::vector<int64_t>{128, 64}));
  std::string text = printModule(m);
  EXPECT_NE(text.find("memref<128x72xf16, 3>"), std::string::npos);
  EXPECT_NE(text.find("memref<64x136xf16, 3>"), std::string::npos);
}

TEST(Pad, OnlyLayoutsChange) {
  TileConfig t = tiles(64, 64, 32, 32, 32);
  Module before = lowerTo(problem(64, 64, 64), t, "copies");
  Module after = padSharedBuffers(before, t).module;
  // Same ops with the same index expressions; only memref types differ.
  std::vector<AffineApply> ib, ia;
  walkOps(before.func().body, [&](const Op &op) { ib.push_back(op.index); });
  walkOps(after.func().body, [&](const Op &op) { ia.push_back(op.index); });
  EXPECT_EQ(ib, ia);
  expectSameResults(before, after, 3, "pad");
}

TEST(Pad, ZeroPaddingIsIdentity) {
  TileConfig t = tiles(64, 64, 32, 32, 32, 0);
  Module before = lowerTo(problem(64, 64, 64), t, "copies");
  PassResult r = padSharedBuffers(before, t);
  EXPECT_TRUE(structurallyEqual(before, r.module));
  EXPECT_EQ(printModule(before), printModule(r.module));
}

TEST(Pad, RejectsMisalignedPadding) {
  TileConfig t = tiles(64, 64, 32, 32, 32);
  Module before = lowerTo(problem(64, 64, 64), t, "copies");
  t.paddingA = 4;
  EXPECT_THROW(padSharedBuffers(before, t), PassError);
}

//===----------------------------------------------------------------------===//
// wmma / permute / unroll
//===----------------------------------------------------------------------===//

TEST(Wmma, StepsAndTripCounts) {
  Module m = lowerTo(problem(128, 128, 128), tiles(128, 128, 64, 64, 64), "wmma");
  for (const char *tag : {"iii", "jjj", "kk"}) {
    EXPECT_EQ(loopOf(m, tag).step, 16) << tag;
    EXPECT_EQ(trip(m, tag), 4) << tag;
  }
  const Function &f = m.func();
  EXPECT_EQ(countOps(f.body, OpKind::WmmaCompute), 1u);
  EXPECT_EQ(countOps(f.body, OpKind::WmmaLoad), 3u);
  EXPECT_EQ(countOps(f.body, OpKind::WmmaStore), 1u);
  EXPECT_EQ(countOps(f.body, OpKind::MulF), 0u);
  // Leading dimensions follow the padded shared rows and C's row stride.
  std::set<int64_t> lds;
  walkOps(f.body, [&](const Op &op) {
    if (op.kind == OpKind::WmmaLoad || op.kind == OpKind::WmmaStore)
      lds.insert(op.leadingDim);
  });
  EXPECT_EQ(lds, (std::set<int64_t>{72, 136, 128}));
}

TEST(Wmma, SmallestTileGivesOneComputePerKStep) {
  Module m = lowerTo(problem(32, 32, 32), tiles(16, 16, 16, 16, 16), "cse");
  const Loop &k = loopOf(m, "k");
  EXPECT_EQ(countOps(k.body, OpKind::WmmaCompute), 1u);
}

TEST(Wmma, BitExactAgainstScalarNest) {
  for (ElemType acc : {ElemType::F32, ElemType::F16}) {
    TileConfig t = tiles(64, 64, 32, 32, 32);
    ProblemConfig p = problem(64, 64, 64, acc);
    Module before = lowerTo(p, t, "pad");
    expectSameResults(before, raiseToWmma(before, t).module, 3, "wmma");
  }
}

TEST(Permute, OuterPermutationSinksBlockK) {
  Module m = lowerTo(problem(128, 128, 128), tiles(64, 64, 32, 32, 32),
                     "permute-outer");
  auto tags = loopTags(m.func().body);
  std::vector<std::string> compute;
  for (const auto &t : tags)
    if (!isCopyTag(t))
      compute.push_back(t);
  EXPECT_EQ(compute, (std::vector<std::string>{"i", "j", "ii", "jj", "k", "iii",
                                                "jjj", "kk"}));
}

TEST(Permute, InnerPermutationIsOuterProductOrder) {
  Module m = lowerTo(problem(128, 128, 128), tiles(64, 64, 32, 32, 32),
                     "permute-inner");
  auto tags = loopTags(loopOf(m, "k").body);
  std::vector<std::string> inner;
  for (const auto &t : tags)
    if (!isCopyTag(t))
      inner.push_back(t);
  EXPECT_EQ(inner, (std::vector<std::string>{"kk", "iii", "jjj"}));
}

TEST(Permute, IdentityIsNoOp) {
  Module m = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 32, 32), "wmma");
  PassResult r = permuteLoops(m, {"iii", "jjj", "kk"}, {"iii", "jjj", "kk"});
  EXPECT_EQ(printModule(m), printModule(r.module));
}

TEST(Permute, RejectsBoundDependenceInversion) {
  Module m = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 32, 32), "tile");
  // ii's bounds use i; ii cannot move outside i.
  EXPECT_THROW(permuteLoops(m, {"i", "j", "k", "ii"}, {"ii", "j", "k", "i"}),
               PassError);
}

TEST(Permute, SemanticsPreserved) {
  ProblemConfig p = problem(64, 64, 64);
  TileConfig t = tiles(64, 64, 32, 32, 32);
  Module w = lowerTo(p, t, "wmma");
  Module a = applyPass("permute-outer", w, runConfig(p, t)).module;
  Module b = applyPass("permute-inner", a, runConfig(p, t)).module;
  expectSameResults(w, a, 3, "permute-outer");
  expectSameResults(a, b, 3, "permute-inner");
}

TEST(Unroll, ComputeCountAndSemantics) {
  ProblemConfig p = problem(128, 128, 128);
  TileConfig t = tiles(128, 128, 64, 64, 64);
  Module before = lowerTo(p, t, "permute-inner");
  Module after = unrollFull(before, {"kk", "iii", "jjj"}).module;
  EXPECT_EQ(countOps(loopOf(after, "k").body, OpKind::WmmaCompute), 64u);
  EXPECT_EQ(findLoop(after.func().body, "kk"), nullptr);
  expectSameResults(before, after, 10, "unroll");
}

TEST(Unroll, TripCountOneInlinesBody) {
  Module m = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 64, 64), "tile");
  ASSERT_EQ(trip(m, "ii"), 1);
  Module u = unrollFull(m, {"ii"}).module;
  EXPECT_EQ(findLoop(u.func().body, "ii"), nullptr);
  EXPECT_EQ(countLoops(u.func().body), 7u);
  expectSameResults(m, u, 1, "unroll trip 1");
}

TEST(Unroll, RejectsNonConstantTripCount) {
  Module m = buildNaiveMatmul(problem(64, 64, 64));
  Loop *i = findLoop(m.func().body, "i");
  Loop *j = findLoop(m.func().body, "j");
  j->upper = AffineApply::value(i->iv);
  EXPECT_THROW(unrollFull(m, {"j"}), PassError);
}

//===----------------------------------------------------------------------===//
// cse / hoist
//===----------------------------------------------------------------------===//

TEST(Cse, FragmentLoadsMatchUniqueIndexEnumeration) {
  ProblemConfig p = problem(128, 128, 128);
  TileConfig t = tiles(128, 128, 64, 64, 64);
  Module pre = lowerTo(p, t, "permute-inner");
  Module unrolled = lowerTo(p, t, "unroll");
  Module post = lowerTo(p, t, "cse");
  for (FragmentRole role : {FragmentRole::MatA, FragmentRole::MatB}) {
    size_t unique = uniqueFragmentLoads(pre, role);
    EXPECT_EQ(unique, 16u);
    EXPECT_EQ(uniqueFragmentLoads(unrolled, role), unique);
    EXPECT_EQ(fragmentLoadsInK(unrolled, role), 64u);
    EXPECT_EQ(fragmentLoadsInK(post, role), unique);
  }
  expectSameResults(unrolled, post, 3, "cse");
}

TEST(Cse, IdenticalLoadsMerge) {
  Module m = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 32, 32), "unroll");
  PassResult r = cse(m);
  EXPECT_LT(countOps(r.module.func().body, OpKind::WmmaLoad),
            countOps(m.func().body, OpKind::WmmaLoad));
}

TEST(Cse, NoDuplicatesMeansUnchangedAndIdempotent) {
  Module naive = buildNaiveMatmul(problem(64, 64, 64));
  EXPECT_EQ(printModule(cse(naive).module), printModule(naive));
  Module once = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 32, 32), "cse");
  EXPECT_EQ(printModule(cse(once).module), printModule(once));
}

TEST(Cse, StoresKillAvailability) {
  // In the scalar nest, C is loaded, then stored; nothing may merge across.
  Module m = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 32, 32), "pad");
  PassResult r = cse(m);
  EXPECT_EQ(countOps(r.module.func().body, OpKind::Load),
            countOps(m.func().body, OpKind::Load));
}

TEST(Hoist, AccumulatorsBecomeIterArgs) {
  ProblemConfig p = problem(128, 128, 128);
  TileConfig t = tiles(128, 128, 64, 64, 64);
  Module before = lowerTo(p, t, "cse");
  Module m = hoistAccumulator(before).module;
  const Loop &k = loopOf(m, "k");
  EXPECT_EQ(k.regionArgs.size(), 16u);
  EXPECT_EQ(countOps(k.body, OpKind::WmmaStore), 0u);
  const Loop &jj = loopOf(m, "jj");
  size_t cLoadsOutside = 0, cStoresOutside = 0;
  for (const Node &n : jj.body) {
    if (!n.isOp())
      continue;
    cLoadsOutside += n.op().kind == OpKind::WmmaLoad;
    cStoresOutside += n.op().kind == OpKind::WmmaStore;
  }
  EXPECT_EQ(cLoadsOutside, 16u);
  EXPECT_EQ(cStoresOutside, 16u);
  expectSameResults(before, m, 3, "hoist");
}

TEST(Hoist, SingleKIterationStillHoists) {
  ProblemConfig p = problem(64, 64, 32);
  TileConfig t = tiles(64, 64, 32, 32, 32);
  Module before = lowerTo(p, t, "cse");
  ASSERT_EQ(trip(before, "k"), 1);
  Module m = hoistAccumulator(before).module;
  EXPECT_EQ(loopOf(m, "k").regionArgs.size(), 4u);
  expectSameResults(before, m, 3, "hoist trip 1");
}

TEST(Hoist, VariantAccessAbortsUnchanged) {
  Module m = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 32, 32), "cse");
  Loop *k = findLoop(m.func().body, "k");
  bool changed = false;
  walkOps(k->body, [&](Op &op) {
    if (op.kind != OpKind::WmmaLoad || changed ||
        std::get<FragmentType>(m.func().typeOf(op.result)).role !=
            FragmentRole::Accum)
      return;
    std::vector<ValueId> ops = op.index.operands;
    ops.push_back(k->iv);
    op.index = AffineApply::fromExprs(
        {exprOver(op.index, ops, 0), exprOver(op.index, ops, 1) +
                                         AffineExpr::dim(unsigned(ops.size() - 1))},
        ops);
    changed = true;
  });
  ASSERT_TRUE(changed);
  PassResult r = hoistAccumulator(m);
  EXPECT_EQ(printModule(r.module), printModule(m));
  EXPECT_FALSE(r.report.deltas.empty());
}

//===----------------------------------------------------------------------===//
// pipeline / barriers
//===----------------------------------------------------------------------===//

TEST(Pipeline, PeelsPrologueAndEpilogue) {
  Module m = lowerTo(problem(256, 256, 8192), tiles(128, 128, 64, 64, 64),
                     "pipeline");
  const Loop &k = loopOf(m, "k");
  EXPECT_EQ(k.tripCount(), 127);
  const Loop &jj = loopOf(m, "jj");
  // Body of the warp loop: C loads, prologue copies, k loop, epilogue.
  size_t kAt = 0, copiesBefore = 0, computeAfter = 0;
  for (size_t i = 0; i < jj.body.size(); ++i)
    if (jj.body[i].isLoop() && jj.body[i].loop().tag == "k")
      kAt = i;
  for (size_t i = 0; i < jj.body.size(); ++i) {
    const Node &n = jj.body[i];
    if (i < kAt && n.isLoop() && isCopyTag(n.loop().tag))
      ++copiesBefore;
    if (i > kAt && n.isOp() && n.op().kind == OpKind::WmmaCompute)
      ++computeAfter;
  }
  EXPECT_EQ(copiesBefore, 2u);
  EXPECT_EQ(computeAfter, 64u);
  // Inside: compute for this iteration, then copies one iteration ahead.
  std::vector<std::string> order;
  for (const Node &n : k.body)
    if (n.isLoop())
      order.push_back(n.loop().tag);
  EXPECT_EQ(order, (std::vector<std::string>{"copy_a", "copy_b"}));
  EXPECT_TRUE(k.body.front().isOp());
  EXPECT_EQ(k.body.front().op().kind, OpKind::WmmaLoad);
}

TEST(Pipeline, SingleIterationIsNoOp) {
  Module m = lowerTo(problem(64, 64, 32), tiles(64, 64, 32, 32, 32), "hoist");
  PassResult r = splitPipeline(m);
  EXPECT_EQ(printModule(r.module), printModule(m));
  EXPECT_FALSE(r.report.deltas.empty());
}

TEST(Pipeline, SemanticsTenSeeds) {
  ProblemConfig p = problem(64, 64, 128);
  TileConfig t = tiles(64, 64, 32, 32, 32);
  Module before = lowerTo(p, t, "hoist");
  expectSameResults(before, splitPipeline(before).module, 10, "pipeline");
}

TEST(Barriers, BarriersBracketSharedAccess) {
  Module m = lowerTo(problem(128, 128, 128), tiles(64, 64, 32, 32, 32),
                     "barriers");
  const Loop &jj = loopOf(m, "jj");
  // A barrier directly precedes the main k loop.
  for (size_t i = 0; i < jj.body.size(); ++i)
    if (jj.body[i].isLoop() && jj.body[i].loop().tag == "k") {
      ASSERT_GT(i, 0u);
      ASSERT_TRUE(jj.body[i - 1].isOp());
      EXPECT_EQ(jj.body[i - 1].op().kind, OpKind::Barrier);
    }
  // In the loop: barrier first, compute, barrier, copies.
  const Loop &k = loopOf(m, "k");
  std::vector<std::string> shape;
  for (const Node &n : k.body) {
    std::string s = n.isLoop()                          ? "copy"
                    : n.op().kind == OpKind::Barrier    ? "barrier"
                    : n.op().kind == OpKind::Yield      ? "yield"
                                                        : "compute";
    if (shape.empty() || shape.back() != s)
      shape.push_back(s);
  }
  EXPECT_EQ(shape, (std::vector<std::string>{"barrier", "compute", "barrier",
                                             "copy", "yield"}));
}

TEST(Barriers, NoSharedBuffersUnchangedAndIdempotent) {
  Module naive = buildNaiveMatmul(problem(64, 64, 64));
  EXPECT_EQ(printModule(insertBarriers(naive).module), printModule(naive));
  Module once = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 32, 32),
                        "barriers");
  EXPECT_EQ(printModule(insertBarriers(once).module), printModule(once));
}

TEST(Barriers, SkippingThemCausesRaces) {
  ProblemConfig p = problem(128, 128, 128);
  TileConfig t = tiles(64, 64, 32, 32, 64); // 2 warps
  Module with = lowerTo(p, t);
  Module without = lowerTo(p, t, {}, {"barriers"});
  Buffers in = randomInputs(with, 0);
  EXPECT_EQ(runGpu(with, in).metrics.raceCount, 0);
  EXPECT_GE(runGpu(without, in).metrics.raceCount, 1);
}

//===----------------------------------------------------------------------===//
// vectorize / parallelize
//===----------------------------------------------------------------------===//

TEST(Vectorize, WidthsAndSteps) {
  ProblemConfig p = problem(128, 128, 128);
  for (auto [bits, width] : {std::pair{128, 8}, {64, 4}, {32, 2}}) {
    TileConfig t = tiles(64, 64, 32, 32, 32, 8, bits);
    Module m = lowerTo(p, t, "vectorize");
    EXPECT_EQ(countOps(m.func().body, OpKind::Load), 0u);
    EXPECT_EQ(loopOf(m, "copy_a_inner").step, width);
    bool sawView = false;
    walkOps(m.func().body, [&](const Op &op) {
      if (op.kind == OpKind::ViewCast) {
        sawView = true;
        EXPECT_EQ(m.func().memrefType(op.result).vectorWidth, width);
      }
    });
    EXPECT_TRUE(sawView);
    expectSameResults(lowerTo(p, t, "barriers"), m, 2, "vectorize");
  }
  std::string text = printModule(lowerTo(p, tiles(64, 64, 32, 32, 32)));
  EXPECT_NE(text.find("vector<8xf16>"), std::string::npos);
}

TEST(Vectorize, RejectsSixteenBitVectors) {
  Module m = lowerTo(problem(64, 64, 64), tiles(64, 64, 32, 32, 32), "barriers");
  EXPECT_THROW(vectorizeCopies(m, 16), PassError);
}

TEST(Parallelize, NaiveMatmul) {
  Module m = parallelize(buildNaiveMatmul(problem(16, 16, 16))).module;
  EXPECT_TRUE(loopOf(m, "i").parallel);
  EXPECT_TRUE(loopOf(m, "j").parallel);
  EXPECT_FALSE(loopOf(m, "k").parallel);
}

TEST(Parallelize, PipelinedModule) {
  Module m = lowerTo(problem(128, 128, 128), tiles(64, 64, 32, 32, 32),
                     "parallelize");
  std::vector<std::string> par, seq;
  walkLoops(m.func().body, [&](const Loop &l) {
    if (!isCopyTag(l.tag))
      (l.parallel ? par : seq).push_back(l.tag);
    else
      EXPECT_TRUE(l.parallel) << l.tag;
  });
  EXPECT_EQ(par, (std::vector<std::string>{"i", "j", "ii", "jj"}));
  EXPECT_EQ(seq, (std::vector<std::string>{"k"}));
  EXPECT_EQ(printModule(parallelize(m).module), printModule(m));
}

//===----------------------------------------------------------------------===//
// cross-pass properties
//===----------------------------------------------------------------------===//

TEST(Passes, EveryOutputVerifiesAndReports) {
  for (const auto &[pass, m] :
       allStages(problem(128, 128, 128), tiles(64, 64, 32, 32, 32))) {
    EXPECT_TRUE(verify(m).empty()) << pass;
  }
  RunConfig rc = runConfig(problem(128, 128, 128), tiles(64, 64, 32, 32, 32));
  PassTrace tr = runPasses(buildNaiveMatmul(rc.problem), rc);
  ASSERT_EQ(tr.reports.size(), passNames().size());
  for (const PassReport &r : tr.reports)
    EXPECT_FALSE(r.deltas.empty()) << r.pass;
}

TEST(Passes, OnlyPadChangesSharedAllocation) {
  auto stages = allStages(problem(128, 128, 128), tiles(64, 64, 32, 32, 32));
  for (size_t i = 1; i < stages.size(); ++i) {
    const std::string &pass = stages[i].first;
    if (pass == "copies" || pass == "pad")
      continue;
    EXPECT_EQ(sharedBytes(stages[i - 1].second), sharedBytes(stages[i].second))
        << pass;
  }
}

//===----------------------------------------------------------------------===//
// golden snapshots (reviewed by hand; regenerate with tcmm-opt --pipeline-stop)
//===----------------------------------------------------------------------===//

TEST(Golden, PaddedBuffers) {
  EXPECT_EQ(printModule(lowerTo(problem(256, 256, 128),
                                tiles(128, 128, 64, 64, 64), "pad")),
            readFixture("pad_128x128x64.ir"));
}

TEST(Golden, SmallPipelineStages) {
  for (const char *stop : {"hoist", "pipeline", "finalize-pipeline"})
    EXPECT_EQ(printModule(lowerTo(problem(64, 64, 64),
                                  tiles(64, 64, 32, 32, 32), stop)),
              readFixture(std::string(stop) + "_64.ir"))
        << stop;
}

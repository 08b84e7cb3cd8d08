#include "test_support.h"

#include "tcmm/analysis.h"

#include <gtest/gtest.h>

#include <random>

using namespace tcmm;
using namespace tcmm::test;

namespace {

bool mentions(const ResourceReport &r, const std::string &what) {
  for (const std::string &v : r.legality)
    if (v.find(what) != std::string::npos)
      return true;
  return false;
}

} // namespace

TEST(Analysis, PaddedLargeTileSharedBytes) {
  ProblemConfig p = problem(256, 256, 128);
  TileConfig t = tiles(128, 128, 64, 64, 64);
  const int64_t expected = 128 * 72 * 2 + 64 * 136 * 2;
  ASSERT_EQ(expected, 35840);
  EXPECT_EQ(plannedSharedBytes(t), expected);
  for (const char *stop : {"tile", "pad", "hoist", "map-gpu"}) {
    ResourceReport r = analyze(lowerTo(p, t, stop), t, p);
    EXPECT_EQ(r.sharedBytes, expected) << stop;
    EXPECT_TRUE(r.legal()) << stop;
  }
  ResourceReport r = analyze(lowerTo(p, t), t, p);
  EXPECT_EQ(r.fragmentsPerWarp, 16 + 4 + 4);
  EXPECT_EQ(r.estRegistersPerThread, 24 * 256 / 32 + 40);
  EXPECT_EQ(r.warpsPerBlock, 4);
  EXPECT_EQ(r.blockThreads, 128);
}

TEST(Analysis, SharedBytesSumsGlobals) {
  ProblemConfig p = problem(128, 128, 128);
  TileConfig t = tiles(64, 64, 32, 32, 32, 16);
  Module m = lowerTo(p, t, "pad");
  int64_t sum = 0;
  for (const Global &g : m.globals)
    if (g.type.space == MemorySpace::Shared)
      sum += g.type.allocationBytes();
  EXPECT_EQ(analyze(m, t, p).sharedBytes, sum);
  EXPECT_EQ(sum, 64 * 48 * 2 + 32 * 80 * 2);
}

TEST(Analysis, SmallerTilesGiveHigherOccupancy) {
  ProblemConfig p = problem(256, 256, 256);
  TileConfig small = tiles(64, 64, 64, 32, 32);
  TileConfig large = tiles(128, 128, 64, 64, 64);
  ResourceReport rs = analyze(lowerTo(p, small), small, p);
  ResourceReport rl = analyze(lowerTo(p, large), large, p);
  EXPECT_EQ(rs.estBlocksPerSM, 102400 / 18432);
  EXPECT_EQ(rl.estBlocksPerSM, 102400 / 35840);
  EXPECT_GT(rs.estBlocksPerSM, rl.estBlocksPerSM);
}

TEST(Analysis, OccupancyCappedByWarps) {
  TileConfig t = tiles(128, 128, 32, 32, 32); // 16 warps
  ResourceReport r = analyze(buildNaiveMatmul(problem(128, 128, 128)), t,
                             problem(128, 128, 128));
  EXPECT_EQ(r.warpsPerBlock, 16);
  EXPECT_EQ(r.estBlocksPerSM, 48 / 16);
}

TEST(Analysis, FlagsOversizedSharedMemory) {
  ProblemConfig p = problem(512, 512, 512);
  TileConfig t = tiles(256, 256, 128, 64, 64);
  ResourceReport r = analyze(buildNaiveMatmul(p), t, p);
  EXPECT_GT(r.sharedBytes, 49152);
  EXPECT_FALSE(r.legal());
  EXPECT_TRUE(mentions(r, "shared memory"));
}

TEST(Analysis, FlagsRegisterPressure) {
  ProblemConfig p = problem(256, 256, 256);
  TileConfig t = tiles(128, 128, 32, 128, 128);
  ResourceReport r = analyze(buildNaiveMatmul(p), t, p);
  EXPECT_EQ(r.fragmentsPerWarp, 64 + 8 + 8);
  EXPECT_GT(r.estRegistersPerThread, 255);
  EXPECT_TRUE(mentions(r, "registers"));
  // The largest warp tile under the cap.
  TileConfig ok = tiles(128, 128, 32, 64, 64);
  EXPECT_FALSE(mentions(analyze(buildNaiveMatmul(p), ok, p), "registers"));
}

TEST(Analysis, FlagsLargeBlocks) {
  ProblemConfig p = problem(256, 256, 256);
  TileConfig t = tiles(256, 256, 32, 16, 32); // 128 warps
  ResourceReport r = analyze(buildNaiveMatmul(p), t, p);
  EXPECT_EQ(r.blockThreads, 4096);
  EXPECT_TRUE(mentions(r, "threads exceeds"));
}

TEST(Analysis, FlagsDivisibility) {
  ProblemConfig p = problem(100, 128, 128);
  TileConfig t = tiles(64, 64, 24, 32, 32, 4);
  ResourceReport r = analyze(buildNaiveMatmul(problem(128, 128, 128)), t, p);
  EXPECT_TRUE(mentions(r, "M=100"));
  EXPECT_TRUE(mentions(r, "tbk=24"));
  EXPECT_TRUE(mentions(r, "paddingA"));
}

TEST(Analysis, TotalOnDegenerateConfigs) {
  ProblemConfig p = problem(0, 64, 64);
  TileConfig t = tiles(0, 64, 32, 0, 32);
  ResourceReport r;
  EXPECT_NO_THROW(r = analyze(Module{}, t, p));
  EXPECT_FALSE(r.legal());
}

TEST(Analysis, MonotoneInTileExtents) {
  std::mt19937 rng(3);
  auto pick = [&](std::initializer_list<int64_t> xs) {
    std::vector<int64_t> v(xs);
    return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
  };
  for (int trial = 0; trial < 200; ++trial) {
    TileConfig t = tiles(pick({32, 64, 128}), pick({32, 64, 128}),
                         pick({16, 32, 64}), 32, 32, pick({0, 8, 16}));
    TileConfig grown = t;
    switch (trial % 5) {
    case 0: grown.tbm *= 2; break;
    case 1: grown.tbn *= 2; break;
    case 2: grown.tbk *= 2; break;
    case 3: grown.paddingA += 8; break;
    case 4: grown.paddingB += 8; break;
    }
    EXPECT_LE(plannedSharedBytes(t), plannedSharedBytes(grown));
  }
  // Same on built modules.
  ProblemConfig p = problem(256, 256, 256);
  int64_t prev = 0;
  for (int64_t tbk : {16, 32, 64}) {
    TileConfig t = tiles(64, 64, tbk, 32, 32);
    int64_t b = analyze(lowerTo(p, t, "pad"), t, p).sharedBytes;
    EXPECT_GE(b, prev);
    prev = b;
  }
}

TEST(Analysis, SameReportAfterReparse) {
  ProblemConfig p = problem(128, 128, 128);
  TileConfig t = tiles(64, 64, 32, 32, 32);
  for (const auto &[pass, m] : allStages(p, t)) {
    Module again = parseModule(printModule(m));
    EXPECT_EQ(analyze(m, t, p).render(), analyze(again, t, p).render())
        << pass;
  }
}

TEST(Analysis, RenderKeys) {
  TileConfig t = tiles(64, 64, 32, 32, 32);
  std::string text = analyze(Module{}, t, problem(128, 128, 128)).render();
  for (const char *key :
       {"shared_bytes=", "fragments_per_warp=", "est_registers_per_thread=",
        "warps_per_block=", "est_blocks_per_sm=", "violations=0"})
    EXPECT_NE(text.find(key), std::string::npos) << key;
}

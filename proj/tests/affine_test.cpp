#include "tcmm/affine.h"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace tcmm;

namespace {

// Random expression paired with a direct evaluator built alongside it.
struct Sample {
  AffineExpr e;
  std::function<int64_t(const int64_t *)> f;
};

Sample randomExpr(std::mt19937 &rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth > 0 ? 6 : 1);
  std::uniform_int_distribution<int> dim(0, 2);
  std::uniform_int_distribution<int> cst(-9, 9);
  std::uniform_int_distribution<int> div(1, 7);
  switch (pick(rng)) {
  case 0: {
    int d = dim(rng);
    return {AffineExpr::dim(d), [d](const int64_t *x) { return x[d]; }};
  }
  case 1: {
    int c = cst(rng);
    return {AffineExpr::constant(c), [c](const int64_t *) { return c; }};
  }
  case 2:
  case 3: {
    Sample a = randomExpr(rng, depth - 1), b = randomExpr(rng, depth - 1);
    return {a.e + b.e, [=](const int64_t *x) { return a.f(x) + b.f(x); }};
  }
  case 4: {
    Sample a = randomExpr(rng, depth - 1);
    int c = cst(rng);
    return {a.e * c, [=](const int64_t *x) { return a.f(x) * c; }};
  }
  case 5: {
    Sample a = randomExpr(rng, depth - 1);
    int d = div(rng);
    return {a.e.floorDiv(d), [=](const int64_t *x) {
              int64_t v = a.f(x);
              return (v - ((v % d) + d) % d) / d;
            }};
  }
  default: {
    Sample a = randomExpr(rng, depth - 1);
    int d = div(rng);
    return {a.e.mod(d), [=](const int64_t *x) {
              int64_t v = a.f(x);
              return ((v % d) + d) % d;
            }};
  }
  }
}

} // namespace

TEST(Affine, FloorDivAndModFollowMathematicalDefinition) {
  EXPECT_EQ(floorDiv(-7, 2), -4);
  EXPECT_EQ(floorMod(-7, 2), 1);
  EXPECT_EQ(floorDiv(7, 2), 3);
  EXPECT_EQ(floorMod(6, 3), 0);
}

TEST(Affine, RandomExpressionsEvaluateLikeDirectArithmetic) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int64_t> val(-40, 40);
  for (int i = 0; i < 3000; ++i) {
    Sample s = randomExpr(rng, 4);
    for (int j = 0; j < 5; ++j) {
      int64_t x[3] = {val(rng), val(rng), val(rng)};
      ASSERT_EQ(s.e.eval(x), s.f(x)) << s.e.str();
    }
  }
}

TEST(Affine, CanonicalFormMakesEqualLinearFunctionsEqual) {
  AffineExpr d0 = AffineExpr::dim(0), d1 = AffineExpr::dim(1);
  EXPECT_EQ(d0 + d1, d1 + d0);
  EXPECT_EQ(d0 * 2 + d0, d0 * 3);
  EXPECT_EQ((d0 + 5) - 5, d0);
  EXPECT_EQ((d0 * 4 + d1 * 8 + 4).floorDiv(4), d0 + d1 * 2 + 1);
  EXPECT_EQ((d0 * 8 + 3).mod(4), AffineExpr::constant(3));
  EXPECT_EQ(d0 - d0, AffineExpr::constant(0));
  EXPECT_NE(d0.floorDiv(2), d0.floorDiv(3));
}

TEST(Affine, LinearQueries) {
  AffineExpr d0 = AffineExpr::dim(0), d1 = AffineExpr::dim(1);
  AffineExpr e = d0 * 3 + d1.floorDiv(4) + 2;
  EXPECT_EQ(e.dimCoefficient(0), 3);
  EXPECT_TRUE(e.usesDim(1));
  EXPECT_FALSE(e.isPureLinear());
  EXPECT_TRUE((d0 * 3 + 2).isPureLinear());
  EXPECT_EQ(AffineExpr::constant(7).constantValue(), 7);
}

TEST(Affine, StridedMapAndIdentity) {
  int64_t strides[] = {72, 1};
  AffineMap m = AffineMap::strided(strides);
  int64_t at[] = {3, 5};
  EXPECT_EQ(m.eval(at)[0], 3 * 72 + 5);
  EXPECT_EQ(*m.linearStrides(), (std::vector<int64_t>{72, 1}));
  EXPECT_TRUE(AffineMap::identity(2).isIdentity());
  EXPECT_FALSE(m.isIdentity());
}

TEST(Affine, ReplaceDimsComposes) {
  AffineExpr d0 = AffineExpr::dim(0), d1 = AffineExpr::dim(1);
  AffineExpr e = d0 * 2 + d1;
  AffineExpr repl[] = {d1 + 1, d0.mod(3)};
  AffineExpr r = e.replaceDims(repl);
  std::mt19937 rng(5);
  for (int i = 0; i < 100; ++i) {
    int64_t x[2] = {int64_t(rng() % 50), int64_t(rng() % 50)};
    EXPECT_EQ(r.eval(x), (x[1] + 1) * 2 + x[0] % 3);
  }
}

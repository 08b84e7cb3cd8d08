// Shared helpers for the unit and acceptance tests.
#pragma once

#include "tcmm/builder.h"
#include "tcmm/pipeline.h"
#include "tcmm/text.h"

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace tcmm::test {

TileConfig tiles(int64_t tbm, int64_t tbn, int64_t tbk, int64_t wm, int64_t wn,
                 int64_t pad = 8, int vec = 128);
ProblemConfig problem(int64_t m, int64_t n, int64_t k,
                      ElemType accum = ElemType::F32);
RunConfig runConfig(const ProblemConfig &p, const TileConfig &t);

/// ("naive", m0), then (pass, module after pass) for every pass.
std::vector<std::pair<std::string, Module>> allStages(const ProblemConfig &p,
                                                      const TileConfig &t);
/// Module after `stop` (all passes when empty).
Module lowerTo(const ProblemConfig &p, const TileConfig &t,
               const std::string &stop = {},
               const std::set<std::string> &disabled = {});

size_t countOpsWithTag(const Module &m, OpKind kind, const std::string &tag);
std::vector<std::string> loopTags(const Block &b);
std::string readFixture(const std::string &name);

/// Distinct (memref, row, col) fragment loads of `role` made by one iteration
/// of the k-block loop, found by walking every inner iteration with concrete
/// IV values (outer loops at their first iteration).
size_t uniqueFragmentLoads(const Module &m, FragmentRole role);
/// Fragment loads of `role` written in the k-block loop body.
size_t fragmentLoadsInK(const Module &m, FragmentRole role);

} // namespace tcmm::test

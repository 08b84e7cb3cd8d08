#include "test_support.h"

#include <fstream>
#include <map>
#include <set>
#include <tuple>
#include <sstream>
#include <stdexcept>

namespace tcmm::test {

TileConfig tiles(int64_t tbm, int64_t tbn, int64_t tbk, int64_t wm, int64_t wn,
                 int64_t pad, int vec) {
  TileConfig t;
  t.tbm = tbm;
  t.tbn = tbn;
  t.tbk = tbk;
  t.wm = wm;
  t.wn = wn;
  t.paddingA = t.paddingB = pad;
  t.vectorBits = vec;
  return t;
}

ProblemConfig problem(int64_t m, int64_t n, int64_t k, ElemType accum) {
  ProblemConfig p;
  p.M = m;
  p.N = n;
  p.K = k;
  p.accum = accum;
  return p;
}

RunConfig runConfig(const ProblemConfig &p, const TileConfig &t) {
  RunConfig rc;
  rc.problem = p;
  rc.tiles = t;
  return rc;
}

std::vector<std::pair<std::string, Module>> allStages(const ProblemConfig &p,
                                                      const TileConfig &t) {
  std::vector<std::pair<std::string, Module>> out;
  RunConfig rc = runConfig(p, t);
  Module m = buildNaiveMatmul(p);
  out.emplace_back("naive", m);
  for (const std::string &name : passNames()) {
    m = applyPass(name, m, rc).module;
    out.emplace_back(name, m);
  }
  return out;
}

Module lowerTo(const ProblemConfig &p, const TileConfig &t,
               const std::string &stop, const std::set<std::string> &disabled) {
  RunConfig rc = runConfig(p, t);
  if (!stop.empty())
    rc.pipelineStop = stop;
  rc.disabled = disabled;
  return runPasses(buildNaiveMatmul(p), rc).module;
}

size_t countOpsWithTag(const Module &m, OpKind kind, const std::string &tag) {
  size_t n = 0;
  walkOps(m.func().body, [&](const Op &op) {
    if (op.kind == kind && op.tag == tag)
      ++n;
  });
  return n;
}

std::vector<std::string> loopTags(const Block &b) {
  std::vector<std::string> tags;
  walkLoops(b, [&](const Loop &l) { tags.push_back(l.tag); });
  return tags;
}

std::string readFixture(const std::string &name) {
  std::ifstream in(std::string(TCMM_FIXTURE_DIR) + "/" + name);
  if (!in)
    throw std::runtime_error("missing fixture " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

using Env = std::map<ValueId, int64_t>;

int64_t evalAt(const AffineApply &a, const Env &env, unsigned r = 0) {
  std::vector<int64_t> dims;
  for (ValueId v : a.operands)
    dims.push_back(env.at(v));
  return a.map.result(r).eval(dims);
}

bool isRole(const Function &f, const Op &op, FragmentRole role) {
  return op.kind == OpKind::WmmaLoad &&
         std::get<FragmentType>(f.typeOf(op.result)).role == role;
}

void enumerate(const Block &b, Env &env, const Function &f, FragmentRole role,
               std::set<std::tuple<ValueId, int64_t, int64_t>> &out) {
  for (const Node &n : b) {
    if (n.isOp()) {
      if (isRole(f, n.op(), role))
        out.emplace(n.op().memref, evalAt(n.op().index, env, 0),
                    evalAt(n.op().index, env, 1));
      continue;
    }
    const Loop &l = n.loop();
    for (int64_t v = evalAt(l.lower, env); v < evalAt(l.upper, env);
         v += l.step) {
      env[l.iv] = v;
      enumerate(l.body, env, f, role, out);
    }
  }
}

const Loop &kLoop(const Module &m) {
  const Loop *k = findLoop(m.func().body, "k");
  if (!k)
    throw std::runtime_error("no k loop");
  return *k;
}

} // namespace

size_t uniqueFragmentLoads(const Module &m, FragmentRole role) {
  const Function &f = m.func();
  Env env;
  walkLoops(f.body, [&](const Loop &l) { env[l.iv] = evalAt(l.lower, env); });
  std::set<std::tuple<ValueId, int64_t, int64_t>> seen;
  enumerate(kLoop(m).body, env, f, role, seen);
  return seen.size();
}

size_t fragmentLoadsInK(const Module &m, FragmentRole role) {
  size_t n = 0;
  walkOps(kLoop(m).body, [&](const Op &op) { n += isRole(m.func(), op, role); });
  return n;
}

} // namespace tcmm::test

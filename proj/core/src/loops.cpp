//===- loops.cpp - Loop permutation and full unrolling --------------------===//

#include "loop_utils.h"
#include "tcmm/transforms.h"

#include <algorithm>
#include <set>

namespace tcmm {

using namespace detail;

namespace {

bool isPureOp(const Op &op) {
  switch (op.kind) {
  case OpKind::Constant:
  case OpKind::GetGlobal:
  case OpKind::ViewCast:
  case OpKind::HwId:
    return true;
  default:
    return false;
  }
}

struct Level {
  Loop header;
  Block prefix, suffix;
};

const Op *defIn(const Block &b, ValueId v) {
  const Op *found = nullptr;
  walkOps(b, [&](const Op &op) {
    if (op.result == v)
      found = &op;
  });
  return found;
}

/// A store whose location is invariant in some permuted loop must be the
/// tail of a reduction: C[x] = C[x] + ... or wmma.store(wmma.compute(.., C[x])).
bool isReductionStore(const Block &scope, const Op &st) {
  const Op *val = defIn(scope, st.operands.at(0));
  if (!val)
    return false;
  ValueId acc = kNoValue;
  if (st.kind == OpKind::Store && val->kind == OpKind::AddF)
    acc = val->operands[0];
  else if (st.kind == OpKind::WmmaStore && val->kind == OpKind::WmmaCompute)
    acc = val->operands[2];
  const Op *ld = acc == kNoValue ? nullptr : defIn(scope, acc);
  return ld && ld->readsMemory() && ld->memref == st.memref &&
         ld->index.normalized() == st.index.normalized();
}

} // namespace

PassResult permuteLoops(const Module &in, const std::vector<std::string> &from,
                        const std::vector<std::string> &to) {
  const char *pass = "permute";
  if (from.size() != to.size() ||
      !std::is_permutation(from.begin(), from.end(), to.begin()))
    throw PassError(pass, "target order is not a permutation of the source");
  Module m = in;
  if (from == to)
    return finishPass(pass, in, std::move(m), {"identity permutation"});
  Function &f = m.func();
  Loop *outer = findLoop(f.body, from[0]);
  if (!outer)
    throw PassError(pass, "no loop tagged '" + from[0] + "'");

  // Legality is checked on the original nest before anything moves.
  {
    std::vector<const Loop *> chainLoops = {outer};
    for (size_t p = 1; p < from.size(); ++p) {
      const Loop *child = nullptr;
      for (const Node &n : chainLoops.back()->body) {
        if (!n.isLoop())
          continue;
        if (n.loop().tag == from[p]) {
          if (child)
            throw PassError(pass, "two loops tagged '" + from[p] + "'");
          child = &n.loop();
        }
      }
      if (!child)
        throw PassError(pass, "loop '" + from[p] + "' is not nested directly "
                                                   "in '" + from[p - 1] + "'");
      chainLoops.push_back(child);
    }
    std::set<const Loop *> chain(chainLoops.begin(), chainLoops.end());
    for (const Loop *l : chainLoops) {
      if (!l->regionArgs.empty())
        throw PassError(pass, "loop '" + l->tag + "' carries iter_args");
      for (const Node &n : l->body) {
        if (n.isLoop() && chain.count(&n.loop()))
          continue;
        if (l == chainLoops.back())
          continue;
        bool ok = n.isLoop() ? isCopyTag(n.loop().tag) : isPureOp(n.op()) ||
                                                            isCopyTag(n.op().tag);
        if (!ok)
          throw PassError(pass, "imperfect nest: '" + l->tag +
                                    "' holds a non-copy operation");
      }
    }
    // Bounds may only use loops that stay outside in the new order.
    auto posIn = [&](const std::string &tag) {
      return size_t(std::find(to.begin(), to.end(), tag) - to.begin());
    };
    for (const Loop *l : chainLoops) {
      for (const AffineApply *b : {&l->lower, &l->upper})
        for (ValueId v : b->operands)
          for (const Loop *o : chainLoops)
            if (o->iv == v && posIn(o->tag) >= posIn(l->tag))
              throw PassError(pass, "bounds of '" + l->tag + "' use '" +
                                        o->tag + "', which would move inside");
      for (const Node &n : l->body) {
        if (n.isLoop() && chain.count(&n.loop()))
          continue;
        if (l == chainLoops.back())
          continue;
        Block tmp{n};
        for (ValueId v : usedValues(tmp))
          for (const Loop *o : chainLoops)
            if (o->iv == v && posIn(o->tag) > posIn(l->tag))
              throw PassError(pass, "copy in '" + l->tag + "' uses '" +
                                        o->tag + "', which would move inside");
      }
    }
    // Dependences: stores invariant in a chain loop must be reductions.
    auto loops = ivLoops(outer->body);
    loops[outer->iv] = outer;
    const Block &scope = chainLoops.back()->body;
    walkOps(scope, [&](const Op &op) {
      if (!op.writesMemory() || isCopyTag(op.tag))
        return;
      Expansion e =
          expandIvs(op.index, loops, [](const Loop *) { return true; });
      for (const Loop *l : chainLoops) {
        if (std::find(e.counters.begin(), e.counters.end(), l) !=
            e.counters.end())
          continue;
        if (!isReductionStore(scope, op))
          throw PassError(pass, "illegal permutation: " +
                                    std::string(toString(op.kind)) +
                                    " carries a dependence across '" + l->tag +
                                    "'");
      }
    });
  }

  std::vector<Level> levels;
  Loop *cur = outer;
  Block core;
  for (size_t p = 0; p < from.size(); ++p) {
    Level lv;
    Block body = std::move(cur->body);
    lv.header = std::move(*cur);
    lv.header.body.clear();
    if (p + 1 == from.size()) {
      core = std::move(body);
      levels.push_back(std::move(lv));
      break;
    }
    size_t childAt = 0;
    for (size_t i = 0; i < body.size(); ++i)
      if (body[i].isLoop() && body[i].loop().tag == from[p + 1])
        childAt = i;
    for (size_t i = 0; i < childAt; ++i)
      lv.prefix.push_back(std::move(body[i]));
    for (size_t i = childAt + 1; i < body.size(); ++i)
      lv.suffix.push_back(std::move(body[i]));
    Loop child = std::move(body[childAt].loop());
    levels.push_back(std::move(lv));
    // Park the child in a temporary node so `cur` stays valid.
    core.clear();
    core.push_back(std::move(child));
    cur = &core.back().loop();
  }

  Block inner = std::move(core);
  for (size_t p = to.size(); p-- > 0;) {
    auto it = std::find(from.begin(), from.end(), to[p]);
    Level &lv = levels[size_t(it - from.begin())];
    Loop l = std::move(lv.header);
    l.body = std::move(lv.prefix);
    for (Node &n : inner)
      l.body.push_back(std::move(n));
    for (Node &n : lv.suffix)
      l.body.push_back(std::move(n));
    inner.clear();
    inner.push_back(std::move(l));
  }
  *outer = std::move(inner[0].loop());
  std::string order;
  for (const auto &t : to)
    order += (order.empty() ? "" : ",") + t;
  return finishPass(pass, in, std::move(m), {"order (" + order + ")"});
}

namespace {

bool unrollFirst(Function &f, Block &b, const std::string &tag) {
  for (size_t i = 0; i < b.size(); ++i) {
    if (!b[i].isLoop())
      continue;
    if (b[i].loop().tag != tag) {
      if (unrollFirst(f, b[i].loop().body, tag))
        return true;
      continue;
    }
    Loop l = std::move(b[i].loop());
    auto trip = l.tripCount();
    if (!trip)
      throw PassError("unroll", "loop '" + tag + "' has no constant trip count");
    std::vector<ValueId> current = l.inits;
    Block out;
    for (int64_t t = 0; t < *trip; ++t) {
      ValueMap map;
      for (size_t a = 0; a < l.regionArgs.size(); ++a)
        map[l.regionArgs[a]] = current[a];
      Block copy = cloneBlock(f, l.body, map);
      substituteInBlock(copy, l.iv, shifted(l.lower, t * l.step));
      if (!l.regionArgs.empty()) {
        current = copy.back().op().operands;
        copy.pop_back();
      } else if (!copy.empty() && copy.back().isOp() &&
                 copy.back().op().kind == OpKind::Yield) {
        copy.pop_back();
      }
      for (Node &n : copy)
        out.push_back(std::move(n));
    }
    b.erase(b.begin() + static_cast<std::ptrdiff_t>(i));
    b.insert(b.begin() + static_cast<std::ptrdiff_t>(i),
             std::make_move_iterator(out.begin()),
             std::make_move_iterator(out.end()));
    for (size_t r = 0; r < l.results.size(); ++r)
      replaceAllUses(f.body, l.results[r], current[r]);
    return true;
  }
  return false;
}

} // namespace

PassResult unrollFull(const Module &in, const std::vector<std::string> &tags) {
  Module m = in;
  Function &f = m.func();
  std::vector<std::string> notes;
  for (const std::string &tag : tags) {
    int n = 0;
    while (unrollFirst(f, f.body, tag))
      ++n;
    if (n)
      notes.push_back("unrolled " + std::to_string(n) + " '" + tag + "' loop" +
                      (n > 1 ? "s" : ""));
  }
  return finishPass("unroll", in, std::move(m), std::move(notes));
}

} // namespace tcmm

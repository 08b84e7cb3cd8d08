//===- pipeline.cpp - k-loop splitting and barrier placement --------------===//

#include "loop_utils.h"
#include "tcmm/transforms.h"

#include <algorithm>

namespace tcmm {

using namespace detail;

namespace {

bool isCopyItem(const Node &n) {
  return n.isLoop() ? isCopyTag(n.loop().tag) : isCopyTag(n.op().tag);
}

bool findParent(Block &b, const Loop *target, Block *&parent, size_t &pos) {
  for (size_t i = 0; i < b.size(); ++i) {
    if (!b[i].isLoop())
      continue;
    if (&b[i].loop() == target) {
      parent = &b;
      pos = i;
      return true;
    }
    if (findParent(b[i].loop().body, target, parent, pos))
      return true;
  }
  return false;
}

} // namespace

PassResult splitPipeline(const Module &in) {
  const char *pass = "pipeline";
  Module m = in;
  Function &f = m.func();
  Loop *kl = findLoop(f.body, "k");
  if (!kl)
    throw PassError(pass, "no k-block loop");
  Block copies, compute;
  Op yield;
  yield.kind = OpKind::Yield;
  bool seenCompute = false;
  for (const Node &n : kl->body) {
    if (n.isOp() && n.op().kind == OpKind::Yield) {
      yield = n.op();
    } else if (isCopyItem(n)) {
      if (seenCompute)
        throw PassError(pass, "copies must precede compute in the k loop");
      copies.push_back(n);
    } else {
      seenCompute = true;
      compute.push_back(n);
    }
  }
  if (copies.empty() || compute.empty())
    throw PassError(pass, "k loop must hold both copies and compute");
  int64_t trip = tripOf(*kl);
  if (trip < 2)
    return finishPass(pass, in, std::move(m),
                      {"trip count " + std::to_string(trip) +
                       " < 2, nothing to pipeline"});

  auto at = [&](const Block &b, const AffineApply &iv, ValueMap map) {
    Block c = cloneBlock(f, b, map);
    substituteInBlock(c, kl->iv, iv);
    return c;
  };
  AffineApply last = shifted(kl->upper, -kl->step);
  Block prologue = at(copies, kl->lower, {});

  Loop main = *kl;
  main.upper = last;
  main.body = compute;
  Block next = at(copies, shifted(AffineApply::value(kl->iv), kl->step), {});
  for (Node &n : next)
    main.body.push_back(std::move(n));
  std::vector<ValueId> oldResults = main.results;
  for (ValueId &r : main.results)
    r = f.newValue(f.typeOf(r));
  if (!main.regionArgs.empty())
    main.body.push_back(yield);

  ValueMap epiMap;
  for (size_t i = 0; i < main.regionArgs.size(); ++i)
    epiMap[main.regionArgs[i]] = main.results[i];
  Block epilogue = cloneBlock(f, compute, epiMap);
  substituteInBlock(epilogue, kl->iv, last);
  std::vector<ValueId> finals;
  for (ValueId v : yield.operands)
    finals.push_back(remap(epiMap, v));

  Block *parent = nullptr;
  size_t pos = 0;
  findParent(f.body, kl, parent, pos);
  Block replacement = std::move(prologue);
  replacement.push_back(std::move(main));
  for (Node &n : epilogue)
    replacement.push_back(std::move(n));
  parent->erase(parent->begin() + static_cast<std::ptrdiff_t>(pos));
  parent->insert(parent->begin() + static_cast<std::ptrdiff_t>(pos),
                 std::make_move_iterator(replacement.begin()),
                 std::make_move_iterator(replacement.end()));
  for (size_t i = 0; i < oldResults.size(); ++i)
    replaceAllUses(f.body, oldResults[i], finals[i]);
  return finishPass(pass, in, std::move(m),
                    {"k loop trip count " + std::to_string(trip) + " -> " +
                     std::to_string(trip - 1)});
}

namespace {

struct BarrierPlacer {
  const Function &f;
  size_t inserted = 0;

  bool readsShared(const Node &n) const {
    if (isCopyItem(n))
      return false;
    bool r = false;
    Block one{n};
    walkOps(one, [&](const Op &op) {
      r |= op.readsMemory() &&
           f.memrefType(op.memref).space == MemorySpace::Shared;
    });
    return r;
  }

  static bool isBarrier(const Block &b, size_t i) {
    return i < b.size() && b[i].isOp() && b[i].op().kind == OpKind::Barrier;
  }

  static Op barrier() {
    Op b;
    b.kind = OpKind::Barrier;
    return b;
  }

  /// Returns true when the owner loop needs a barrier right after it.
  bool block(Block &b, const Loop *owner) {
    for (size_t i = 0; i < b.size(); ++i) {
      if (!b[i].isLoop() || isCopyItem(b[i]))
        continue;
      if (block(b[i].loop().body, &b[i].loop()) && !isBarrier(b, i + 1)) {
        b.insert(b.begin() + static_cast<std::ptrdiff_t>(i + 1), barrier());
        ++inserted;
      }
    }
    struct Region {
      size_t begin, end;
    };
    std::vector<Region> regions;
    for (size_t i = 0; i < b.size();) {
      if (!isCopyItem(b[i])) {
        ++i;
        continue;
      }
      size_t j = i;
      while (j < b.size() && isCopyItem(b[j]))
        ++j;
      regions.push_back({i, j});
      i = j;
    }
    bool inK = owner && owner->tag == "k";
    bool needAfterLoop = false, needAtStart = false;
    std::vector<size_t> positions;
    for (const Region &r : regions) {
      bool readsBefore = false, readsAfter = false, endsBody = owner != nullptr;
      for (size_t i = 0; i < r.begin; ++i)
        readsBefore |= readsShared(b[i]);
      for (size_t i = r.end; i < b.size(); ++i) {
        readsAfter |= readsShared(b[i]);
        bool tail = b[i].isOp() && (b[i].op().kind == OpKind::Yield ||
                                    b[i].op().kind == OpKind::Barrier);
        endsBody &= tail;
      }
      if ((readsBefore || inK) && !isBarrier(b, r.begin - 1) && r.begin > 0)
        positions.push_back(r.begin);
      else if ((readsBefore || inK) && r.begin == 0)
        positions.push_back(0);
      if (readsAfter && !isBarrier(b, r.end))
        positions.push_back(r.end);
      if (endsBody && readsBefore) {
        needAtStart = true;
        needAfterLoop = true;
      }
    }
    if (needAtStart && !isBarrier(b, 0))
      positions.push_back(0);
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()),
                    positions.end());
    for (size_t p = positions.size(); p-- > 0;) {
      b.insert(b.begin() + static_cast<std::ptrdiff_t>(positions[p]),
               barrier());
      ++inserted;
    }
    return needAfterLoop;
  }
};

} // namespace

PassResult insertBarriers(const Module &in) {
  Module m = in;
  Function &f = m.func();
  BarrierPlacer p{f};
  p.block(f.body, nullptr);
  std::vector<std::string> notes;
  if (p.inserted)
    notes.push_back("inserted " + std::to_string(p.inserted) + " barriers");
  return finishPass("barriers", in, std::move(m), std::move(notes));
}

} // namespace tcmm

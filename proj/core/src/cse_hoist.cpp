//===- cse_hoist.cpp - CSE and accumulator hoisting -----------------------===//

#include "loop_utils.h"
#include "tcmm/transforms.h"

#include <algorithm>
#include <map>
#include <tuple>

namespace tcmm {

using detail::applyMap;
using detail::memrefRoots;

namespace {

bool cseable(OpKind k) {
  switch (k) {
  case OpKind::Constant:
  case OpKind::GetGlobal:
  case OpKind::ViewCast:
  case OpKind::HwId:
  case OpKind::MulF:
  case OpKind::AddF:
  case OpKind::ExtF:
  case OpKind::WmmaCompute:
  case OpKind::Load:
  case OpKind::VectorLoad:
  case OpKind::WmmaLoad:
    return true;
  default:
    return false;
  }
}

struct Available {
  Op key; // result cleared
  ValueId value;
  std::string root; // empty for pure ops
};

struct Cse {
  Function &f;
  std::map<ValueId, std::string> roots;
  ValueMap replaced;
  size_t removed = 0;

  Op keyOf(const Op &op) const {
    Op k = op;
    k.result = kNoValue;
    k.index = op.index.normalized();
    return k;
  }

  bool sameKey(const Op &a, const Op &b, ValueId ra, ValueId rb) const {
    return a == b && f.typeOf(ra) == f.typeOf(rb);
  }

  /// Roots written (and whether a barrier occurs) anywhere in `b`.
  void writes(const Block &b, std::vector<std::string> &roots_, bool &barrier) {
    walkOps(b, [&](const Op &op) {
      if (op.writesMemory())
        roots_.push_back(roots.at(op.memref));
      barrier |= op.kind == OpKind::Barrier;
    });
  }

  static void kill(std::vector<Available> &avail,
                   const std::vector<std::string> &rs, bool barrier) {
    std::erase_if(avail, [&](const Available &a) {
      if (a.root.empty())
        return false;
      return barrier || std::find(rs.begin(), rs.end(), a.root) != rs.end();
    });
  }

  void block(Block &b, std::vector<Available> avail) {
    for (size_t i = 0; i < b.size();) {
      Node &n = b[i];
      if (n.isLoop()) {
        Loop &l = n.loop();
        l.lower = remap(replaced, l.lower);
        l.upper = remap(replaced, l.upper);
        for (ValueId &v : l.inits)
          v = remap(replaced, v);
        std::vector<std::string> rs;
        bool barrier = false;
        writes(l.body, rs, barrier);
        kill(avail, rs, barrier);
        block(l.body, avail);
        ++i;
        continue;
      }
      Op &op = n.op();
      for (ValueId &v : op.operands)
        v = remap(replaced, v);
      if (op.memref != kNoValue)
        op.memref = remap(replaced, op.memref);
      op.index = remap(replaced, op.index);
      if (op.writesMemory()) {
        kill(avail, {roots.at(op.memref)}, false);
      } else if (op.kind == OpKind::Barrier) {
        kill(avail, {}, true);
      } else if (cseable(op.kind) && op.hasResult()) {
        Op key = keyOf(op);
        auto hit = std::find_if(avail.begin(), avail.end(), [&](const auto &a) {
          return sameKey(a.key, key, a.value, op.result);
        });
        if (hit != avail.end()) {
          replaced[op.result] = hit->value;
          b.erase(b.begin() + static_cast<std::ptrdiff_t>(i));
          ++removed;
          continue;
        }
        std::string root = op.readsMemory() ? roots.at(op.memref) : "";
        avail.push_back({std::move(key), op.result, std::move(root)});
      }
      ++i;
    }
  }
};

} // namespace

PassResult cse(const Module &in) {
  Module m = in;
  std::vector<std::string> notes;
  for (Function &f : m.funcs) {
    Cse c{f, memrefRoots(f), {}, 0};
    c.block(f.body, {});
    applyMap(f.body, c.replaced);
    if (c.removed)
      notes.push_back("removed " + std::to_string(c.removed) +
                      " redundant ops");
  }
  return finishPass("cse", in, std::move(m), std::move(notes));
}

namespace {

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

PassResult hoistAccumulator(const Module &in) {
  const char *pass = "hoist";
  Module m = in;
  Function &f = m.func();
  Loop *kl = findLoop(f.body, "k");
  if (!kl)
    return finishPass(pass, in, std::move(m), {"no k-block loop"});
  auto abort = [&](const std::string &why) {
    return finishPass(pass, in, Module(in), {"aborted: " + why});
  };

  // Accumulator buffers: global memrefs stored to by non-copy ops.
  std::vector<ValueId> accs;
  walkOps(kl->body, [&](const Op &op) {
    if (op.writesMemory() && !isCopyTag(op.tag) &&
        f.memrefType(op.memref).space == MemorySpace::Global &&
        std::find(accs.begin(), accs.end(), op.memref) == accs.end())
      accs.push_back(op.memref);
  });
  if (accs.empty())
    return finishPass(pass, in, std::move(m), {"no accumulator accesses"});

  std::vector<ValueId> inner = definedValues(kl->body);
  inner.push_back(kl->iv);
  for (ValueId r : kl->regionArgs)
    inner.push_back(r);
  size_t topLevel = 0, total = 0;
  for (const Node &n : kl->body)
    if (n.isOp() && std::count(accs.begin(), accs.end(), n.op().memref))
      ++topLevel;
  std::string bad;
  walkOps(kl->body, [&](const Op &op) {
    if (!op.isMemoryAccess() || !std::count(accs.begin(), accs.end(), op.memref))
      return;
    ++total;
    if (op.kind != OpKind::WmmaLoad && op.kind != OpKind::WmmaStore)
      bad = "scalar access to the accumulator";
    for (ValueId v : op.index.operands)
      if (std::count(inner.begin(), inner.end(), v))
        bad = "accumulator index varies inside the k loop";
  });
  if (topLevel != total)
    bad = "accumulator access nested in an inner loop";
  if (!bad.empty())
    return abort(bad);

  struct Slot {
    ValueId memref;
    AffineApply index;
    int64_t ld;
    ValueId arg, current;
  };
  std::vector<Slot> slots;
  auto slotOf = [&](const Op &op) -> Slot & {
    AffineApply key = op.index.normalized();
    for (Slot &s : slots)
      if (s.memref == op.memref && s.index.normalized() == key)
        return s;
    ValueId fragType = op.kind == OpKind::WmmaLoad ? op.result : op.operands[0];
    ValueId arg = f.newValue(f.typeOf(fragType));
    slots.push_back({op.memref, op.index, op.leadingDim, arg, arg});
    return slots.back();
  };
  ValueMap forward;
  Block body;
  for (Node &n : kl->body) {
    if (n.isOp()) {
      Op &op = n.op();
      for (ValueId &v : op.operands)
        v = remap(forward, v);
      if (std::count(accs.begin(), accs.end(), op.memref)) {
        Slot &s = slotOf(op);
        if (op.kind == OpKind::WmmaLoad)
          forward[op.result] = s.current;
        else
          s.current = op.operands[0];
        continue;
      }
    } else {
      Block one{std::move(n)};
      applyMap(one, forward);
      n = std::move(one[0]);
    }
    body.push_back(std::move(n));
  }
  Op *yield = nullptr;
  if (!body.empty() && body.back().isOp() &&
      body.back().op().kind == OpKind::Yield)
    yield = &body.back().op();
  if (!yield) {
    Op y;
    y.kind = OpKind::Yield;
    body.push_back(y);
    yield = &body.back().op();
  }
  for (ValueId &v : yield->operands)
    v = remap(forward, v);

  Block before, after;
  for (Slot &s : slots) {
    Op ld;
    ld.kind = OpKind::WmmaLoad;
    ld.memref = s.memref;
    ld.index = s.index;
    ld.leadingDim = s.ld;
    ld.result = f.newValue(f.typeOf(s.arg));
    before.push_back(ld);
    kl->inits.push_back(ld.result);
    kl->regionArgs.push_back(s.arg);
    yield->operands.push_back(s.current);
    ValueId res = f.newValue(f.typeOf(s.arg));
    kl->results.push_back(res);
    Op st;
    st.kind = OpKind::WmmaStore;
    st.operands = {res};
    st.memref = s.memref;
    st.index = s.index;
    st.leadingDim = s.ld;
    after.push_back(st);
  }
  kl->body = std::move(body);

  Block *parent = nullptr;
  size_t pos = 0;
  findParent(f.body, kl, parent, pos);
  parent->insert(parent->begin() + static_cast<std::ptrdiff_t>(pos + 1),
                 std::make_move_iterator(after.begin()),
                 std::make_move_iterator(after.end()));
  parent->insert(parent->begin() + static_cast<std::ptrdiff_t>(pos),
                 std::make_move_iterator(before.begin()),
                 std::make_move_iterator(before.end()));
  return finishPass(pass, in, std::move(m),
                    {std::to_string(slots.size()) + " accumulator iter_args"});
}

} // namespace tcmm

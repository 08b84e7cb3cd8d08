//===- vectorize.cpp - Vectorization of global -> shared copies -----------===//

#include "loop_utils.h"
#include "tcmm/transforms.h"

#include <algorithm>

namespace tcmm {

using namespace detail;

namespace {

/// True when every coefficient and the constant of `e` are multiples of w.
bool aligned(const AffineExpr &e, int64_t w) {
  switch (e.kind()) {
  case AffineKind::Constant:
    return e.value() % w == 0;
  case AffineKind::Add:
    return aligned(e.lhs(), w) && aligned(e.rhs(), w);
  case AffineKind::Mul:
    return e.rhs().value() % w == 0 || aligned(e.lhs(), w);
  default:
    return false;
  }
}

} // namespace

PassResult vectorizeCopies(const Module &in, int vectorBits) {
  const char *pass = "vectorize";
  if (vectorBits != 32 && vectorBits != 64 && vectorBits != 128)
    throw PassError(pass, "vector width " + std::to_string(vectorBits) +
                              " bits is not one of 32, 64, 128");
  Module m = in;
  Function &f = m.func();
  auto allLoops = ivLoops(f.body);

  struct Site {
    Loop *inner;
    Op *load, *store;
  };
  std::vector<Site> sites;
  walkLoops(f.body, [&](Loop &outer) {
    if (!isCopyTag(outer.tag) || outer.tag.ends_with("_inner"))
      return;
    if (outer.body.size() != 1 || !outer.body[0].isLoop())
      throw PassError(pass, "copy nest '" + outer.tag + "' is not 2-d");
    Loop &inner = outer.body[0].loop();
    if (inner.body.size() != 2 || !inner.body[0].isOp() ||
        !inner.body[1].isOp() || inner.body[0].op().kind != OpKind::Load ||
        inner.body[1].op().kind != OpKind::Store)
      return; // already vectorized or mapped
    sites.push_back({&inner, &inner.body[0].op(), &inner.body[1].op()});
  });
  if (sites.empty())
    return finishPass(pass, in, std::move(m), {"no scalar copy loops"});

  // Views are created once per memref, right after the leading prelude ops.
  std::vector<std::pair<ValueId, ValueId>> views;
  Block viewOps;
  auto viewOf = [&](ValueId src, int64_t w, const std::string &loop) {
    for (auto [s, v] : views)
      if (s == src)
        return v;
    MemRefType t = f.memrefType(src);
    auto strides = t.strides();
    if (t.rank() != 2 || !strides || (*strides)[1] != 1 ||
        (*strides)[0] % w != 0 || t.shape[1] % w != 0)
      throw PassError(pass, "copy loop '" + loop +
                                "' is not contiguous in vector units");
    MemRefType vt = t;
    vt.vectorWidth = w;
    vt.shape[1] = t.shape[1] / w;
    std::vector<int64_t> vs = {(*strides)[0] / w, 1};
    vt.layout = AffineMap::strided(vs);
    Op op;
    op.kind = OpKind::ViewCast;
    op.operands = {src};
    op.result = f.newValue(vt);
    viewOps.push_back(op);
    views.push_back({src, op.result});
    return op.result;
  };

  for (const Site &s : sites) {
    MemRefType lt = f.memrefType(s.load->memref);
    int64_t w = vectorBits / (8 * elemBytes(lt.elem));
    Loop &inner = *s.inner;
    auto trip = inner.tripCount();
    if (inner.step != 1 || !trip || *trip % w != 0)
      throw PassError(pass, "copy loop '" + inner.tag + "' trip count " +
                                (trip ? std::to_string(*trip) : "?") +
                                " is not a multiple of " + std::to_string(w));
    for (Op *op : {s.load, s.store}) {
      const AffineApply &idx = op->index;
      auto pos = std::find(idx.operands.begin(), idx.operands.end(), inner.iv);
      if (pos == idx.operands.end())
        throw PassError(pass, "copy loop '" + inner.tag +
                                  "' does not walk the fastest dimension");
      unsigned d = unsigned(pos - idx.operands.begin());
      const AffineExpr &last = idx.map.result(1);
      if (idx.map.result(0).usesDim(d) || last.dimCoefficient(d) != 1 ||
          (last - AffineExpr::dim(d)).usesDim(d))
        throw PassError(pass, "copy loop '" + inner.tag +
                                  "' does not walk the fastest dimension");
      // The first column touched must be vector aligned.
      AffineApply start = substitute(idx, inner.iv, inner.lower);
      Expansion e = expandIvs(start, allLoops,
                              [](const Loop *) { return true; });
      for (ValueId v : e.apply.operands)
        if (!isCounter(v))
          throw PassError(pass, "copy loop '" + inner.tag +
                                    "' start is not provably aligned");
      if (!aligned(e.apply.map.result(1), w))
        throw PassError(pass, "copy loop '" + inner.tag +
                                  "' start is not vector aligned");
    }
  }

  for (const Site &s : sites) {
    MemRefType lt = f.memrefType(s.load->memref);
    int64_t w = vectorBits / (8 * elemBytes(lt.elem));
    for (Op *op : {s.load, s.store}) {
      ValueId view = viewOf(op->memref, w, s.inner->tag);
      op->memref = view;
      op->index = AffineApply::fromExprs(
          {op->index.map.result(0), op->index.map.result(1).floorDiv(w)},
          op->index.operands);
    }
    s.load->kind = OpKind::VectorLoad;
    f.values[s.load->result].type = VectorType{w, lt.elem};
    s.store->kind = OpKind::VectorStore;
    s.inner->step = w;
  }

  size_t at = 0;
  while (at < f.body.size() && f.body[at].isOp())
    ++at;
  f.body.insert(f.body.begin() + static_cast<std::ptrdiff_t>(at),
                std::make_move_iterator(viewOps.begin()),
                std::make_move_iterator(viewOps.end()));
  return finishPass(pass, in, std::move(m),
                    {std::to_string(sites.size()) + " copy loops at " +
                     std::to_string(vectorBits) + " bits"});
}

} // namespace tcmm

//===- tile.cpp - Tiling, shared copies, padding, WMMA raising ------------===//

#include "loop_utils.h"
#include "tcmm/transforms.h"

#include <algorithm>
#include <cctype>

namespace tcmm {

using namespace detail;

namespace {

Loop newLoop(Function &f, AffineApply lb, AffineApply ub, int64_t step,
             std::string tag, ValueId iv = kNoValue) {
  Loop l;
  l.iv = iv == kNoValue ? f.newValue(IndexType{}) : iv;
  l.lower = std::move(lb);
  l.upper = std::move(ub);
  l.step = step;
  l.tag = std::move(tag);
  return l;
}

AffineApply plusConst(ValueId v, int64_t c) {
  return affine(AffineExpr::dim(0) + c, {v});
}

bool isConstLoop(const Loop &l, int64_t &ub) {
  auto lb = l.lower.constantValue();
  auto u = l.upper.constantValue();
  if (!lb || !u || *lb != 0 || l.step != 1)
    return false;
  ub = *u;
  return true;
}

Loop *onlyLoop(Block &b, const char *tag) {
  if (b.size() != 1 || !b[0].isLoop() || b[0].loop().tag != tag)
    return nullptr;
  return &b[0].loop();
}

} // namespace

PassResult tileLoopNest(const Module &in, const TileConfig &cfg) {
  const char *pass = "tile";
  Module m = in;
  Function &f = m.func();
  auto top = std::find_if(f.body.begin(), f.body.end(), [](const Node &n) {
    return n.isLoop() && n.loop().tag == "i";
  });
  if (top == f.body.end())
    throw PassError(pass, "no naive i/j/k loop nest");
  Loop li = top->loop();
  Loop *lj = onlyLoop(li.body, "j");
  Loop *lk = lj ? onlyLoop(lj->body, "k") : nullptr;
  int64_t M, N, K;
  if (!lk || !isConstLoop(li, M) || !isConstLoop(*lj, N) ||
      !isConstLoop(*lk, K))
    throw PassError(pass, "expected a perfectly nested i/j/k nest from 0 "
                          "with step 1");
  auto check = [&](const char *dim, int64_t ext, const char *tname,
                   int64_t tile) {
    if (tile <= 0 || ext % tile != 0)
      throw PassError(pass, std::string("divisibility violation in ") + dim +
                                ": " + std::to_string(ext) +
                                " is not a multiple of " + tname + "=" +
                                std::to_string(tile));
  };
  check("M", M, "tbm", cfg.tbm);
  check("N", N, "tbn", cfg.tbn);
  check("K", K, "tbk", cfg.tbk);
  check("tbm", cfg.tbm, "wm", cfg.wm);
  check("tbn", cfg.tbn, "wn", cfg.wn);

  Block body = std::move(lk->body);
  ValueId ivI = li.iv, ivJ = lj->iv, ivK = lk->iv;

  Loop i = newLoop(f, AffineApply::constant(0), AffineApply::constant(M),
                   cfg.tbm, "i");
  Loop j = newLoop(f, AffineApply::constant(0), AffineApply::constant(N),
                   cfg.tbn, "j");
  Loop k = newLoop(f, AffineApply::constant(0), AffineApply::constant(K),
                   cfg.tbk, "k");
  Loop ii = newLoop(f, AffineApply::value(i.iv), plusConst(i.iv, cfg.tbm),
                    cfg.wm, "ii");
  Loop jj = newLoop(f, AffineApply::value(j.iv), plusConst(j.iv, cfg.tbn),
                    cfg.wn, "jj");
  Loop iii = newLoop(f, AffineApply::value(ii.iv), plusConst(ii.iv, cfg.wm),
                     1, "iii", ivI);
  Loop jjj = newLoop(f, AffineApply::value(jj.iv), plusConst(jj.iv, cfg.wn),
                     1, "jjj", ivJ);
  Loop kk = newLoop(f, AffineApply::value(k.iv), plusConst(k.iv, cfg.tbk), 1,
                    "kk", ivK);
  kk.body = std::move(body);
  jjj.body.push_back(std::move(kk));
  iii.body.push_back(std::move(jjj));
  jj.body.push_back(std::move(iii));
  ii.body.push_back(std::move(jj));
  k.body.push_back(std::move(ii));
  j.body.push_back(std::move(k));
  i.body.push_back(std::move(j));
  *top = std::move(i);
  return finishPass(pass, in, std::move(m));
}

namespace {

std::string lower(std::string s) {
  for (char &c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct CopyPlan {
  ValueId source;
  std::string buffer, tag;
  std::vector<AffineApply> origin;
  std::vector<int64_t> extent;
  std::vector<Op *> loads;
};

} // namespace

PassResult generateSharedCopies(const Module &in, const TileConfig &cfg) {
  (void)cfg;
  const char *pass = "copies";
  Module m = in;
  Function &f = m.func();
  Loop *kl = findLoop(f.body, "k");
  if (!kl)
    throw PassError(pass, "no k-block loop");

  std::vector<ValueId> written;
  walkOps(f.body, [&](const Op &op) {
    if (op.writesMemory())
      written.push_back(op.memref);
  });
  auto loops = ivLoops(kl->body);
  std::vector<CopyPlan> plans;
  for (ValueId arg : f.args) {
    if (std::count(written.begin(), written.end(), arg))
      continue;
    CopyPlan plan;
    plan.source = arg;
    walkOps(kl->body, [&](Op &op) {
      if (op.kind == OpKind::Load && op.memref == arg)
        plan.loads.push_back(&op);
    });
    if (plan.loads.empty())
      continue;
    MemRefType t = f.memrefType(arg);
    if (t.rank() != 2)
      throw PassError(pass, "only rank-2 operands are staged");
    std::string name = lower(f.values[arg].name);
    plan.buffer = name + "_smem";
    plan.tag = "copy_" + name;
    for (unsigned d = 0; d < 2; ++d) {
      std::optional<AffineApply> base;
      Interval range{};
      for (Op *op : plan.loads) {
        Expansion e = expandIvs(op->index, loops,
                                [](const Loop *) { return true; });
        auto s = splitCounters(e, d);
        if (!s)
          throw PassError(pass, "non-affine access to %" +
                                    f.values[arg].name);
        if (base && !(s->base.normalized() == base->normalized()))
          throw PassError(pass, "accesses to %" + f.values[arg].name +
                                    " do not share a tile origin");
        if (!base)
          range = s->range;
        range.lo = std::min(range.lo, s->range.lo);
        range.hi = std::max(range.hi, s->range.hi);
        base = s->base;
      }
      plan.origin.push_back(shifted(*base, range.lo));
      plan.extent.push_back(range.hi - range.lo + 1);
    }
    plans.push_back(std::move(plan));
  }
  if (plans.empty())
    return finishPass(pass, in, std::move(m), {"no read-only operands"});

  int64_t bytes = sharedBytes(m);
  for (const CopyPlan &p : plans)
    bytes += p.extent[0] * p.extent[1] * elemBytes(f.memrefType(p.source).elem);
  if (bytes > kSharedLimitBytes)
    throw PassError(pass, "shared buffers need " + std::to_string(bytes) +
                              " bytes, limit is " +
                              std::to_string(kSharedLimitBytes));

  Block copies, prelude;
  for (CopyPlan &p : plans) {
    MemRefType src = f.memrefType(p.source);
    MemRefType smem =
        MemRefType::get(p.extent, src.elem, MemorySpace::Shared);
    m.globals.push_back({p.buffer, smem});
    Op get;
    get.kind = OpKind::GetGlobal;
    get.symbol = p.buffer;
    get.result = f.newValue(smem);
    ValueId buf = get.result;
    prelude.push_back(get);

    // Compute loads now read the shared tile at (index - origin).
    for (Op *op : p.loads) {
      std::vector<ValueId> ops = op->index.operands;
      for (const AffineApply &o : p.origin)
        for (ValueId v : o.operands)
          if (std::find(ops.begin(), ops.end(), v) == ops.end())
            ops.push_back(v);
      std::vector<AffineExpr> exprs;
      for (unsigned d = 0; d < 2; ++d)
        exprs.push_back(exprOver(op->index, ops, d) -
                        exprOver(p.origin[d], ops));
      op->memref = buf;
      op->index = AffineApply::fromExprs(std::move(exprs), std::move(ops));
    }

    Loop r = newLoop(f, p.origin[0], shifted(p.origin[0], p.extent[0]), 1,
                     p.tag);
    Loop c = newLoop(f, p.origin[1], shifted(p.origin[1], p.extent[1]), 1,
                     p.tag + "_inner");
    Op ld;
    ld.kind = OpKind::Load;
    ld.memref = p.source;
    ld.index = AffineApply::fromExprs({AffineExpr::dim(0), AffineExpr::dim(1)},
                                      {r.iv, c.iv});
    ld.result = f.newValue(ScalarType{src.elem});
    ld.tag = p.tag;
    Op st;
    st.kind = OpKind::Store;
    st.operands = {ld.result};
    st.memref = buf;
    std::vector<ValueId> ops = {r.iv, c.iv};
    for (const AffineApply &o : p.origin)
      for (ValueId v : o.operands)
        if (std::find(ops.begin(), ops.end(), v) == ops.end())
          ops.push_back(v);
    st.index = AffineApply::fromExprs(
        {AffineExpr::dim(0) - exprOver(p.origin[0], ops),
         AffineExpr::dim(1) - exprOver(p.origin[1], ops)},
        ops);
    st.tag = p.tag;
    c.body.push_back(ld);
    c.body.push_back(st);
    r.body.push_back(std::move(c));
    copies.push_back(std::move(r));
  }
  kl->body.insert(kl->body.begin(), std::make_move_iterator(copies.begin()),
                  std::make_move_iterator(copies.end()));
  f.body.insert(f.body.begin(), std::make_move_iterator(prelude.begin()),
                std::make_move_iterator(prelude.end()));
  return finishPass(pass, in, std::move(m));
}

PassResult padSharedBuffers(const Module &in, const TileConfig &cfg) {
  const char *pass = "pad";
  Module m = in;
  std::vector<std::string> notes;
  for (Global &g : m.globals) {
    if (g.type.space != MemorySpace::Shared || g.type.rank() != 2)
      continue;
    int64_t pad = g.name == "a_smem"   ? cfg.paddingA
                  : g.name == "b_smem" ? cfg.paddingB
                                       : 0;
    if (pad < 0 || pad % 8 != 0)
      throw PassError(pass, "padding " + std::to_string(pad) + " for @" +
                                g.name + " is not a multiple of 8");
    if (pad == 0)
      continue;
    MemRefType padded = g.type;
    int64_t ld = g.type.allocationShape()[1] + pad;
    std::vector<int64_t> strides = {ld, 1};
    padded.layout = AffineMap::strided(strides);
    MemRefType old = g.type;
    g.type = padded;
    for (Function &f : m.funcs)
      walkOps(f.body, [&](const Op &op) {
        if (op.kind == OpKind::GetGlobal && op.symbol == g.name)
          f.values[op.result].type = padded;
      });
    notes.push_back("@" + g.name + " leading dimension " +
                    std::to_string(ld - pad) + " -> " + std::to_string(ld));
  }
  if (sharedBytes(m) > kSharedLimitBytes)
    throw PassError(pass, "padded shared buffers need " +
                              std::to_string(sharedBytes(m)) +
                              " bytes, limit is " +
                              std::to_string(kSharedLimitBytes));
  return finishPass(pass, in, std::move(m), std::move(notes));
}

namespace {

/// Innermost loop chain ending in a loop whose body holds a scalar store.
bool findComputeChain(Block &b, std::vector<Loop *> &chain) {
  for (Node &n : b) {
    if (!n.isLoop())
      continue;
    Loop &l = n.loop();
    chain.push_back(&l);
    bool hasStore = false, hasLoop = false;
    for (const Node &c : l.body) {
      hasLoop |= c.isLoop();
      hasStore |= c.isOp() && c.op().kind == OpKind::Store &&
                  !isCopyTag(c.op().tag);
    }
    if (hasStore && !hasLoop)
      return true;
    if (findComputeChain(l.body, chain))
      return true;
    chain.pop_back();
  }
  return false;
}

const Op *defOf(const Block &b, ValueId v) {
  for (const Node &n : b)
    if (n.isOp() && n.op().result == v)
      return &n.op();
  return nullptr;
}

/// The only inner IV used by dim `d` of `index`, with coefficient 1.
bool unitUse(const AffineApply &index, unsigned d, ValueId iv,
             const std::vector<ValueId> &inner) {
  for (unsigned o = 0; o < index.operands.size(); ++o) {
    ValueId v = index.operands[o];
    if (std::find(inner.begin(), inner.end(), v) == inner.end())
      continue;
    const AffineExpr &e = index.map.result(d);
    bool used = e.usesDim(o);
    if (v == iv) {
      if (e.dimCoefficient(o) != 1 || (e - AffineExpr::dim(o)).usesDim(o))
        return false;
    } else if (used) {
      return false;
    }
  }
  return true;
}

} // namespace

PassResult raiseToWmma(const Module &in, const TileConfig &cfg) {
  (void)cfg;
  const char *pass = "wmma";
  Module m = in;
  Function &f = m.func();
  std::vector<Loop *> chain;
  if (!findComputeChain(f.body, chain) || chain.size() < 3)
    throw PassError(pass, "no innermost scalar matmul nest");
  std::vector<Loop *> nest(chain.end() - 3, chain.end());
  Block &body = nest[2]->body;

  const Op *store = nullptr;
  for (const Node &n : body)
    if (n.isOp() && n.op().kind == OpKind::Store)
      store = &n.op();
  const Op *add = store ? defOf(body, store->operands[0]) : nullptr;
  if (!add || add->kind != OpKind::AddF)
    throw PassError(pass, "store does not take an addf");
  const Op *cLoad = defOf(body, add->operands[0]);
  const Op *mul = defOf(body, add->operands[1]);
  if (!cLoad || !mul || cLoad->kind != OpKind::Load ||
      mul->kind != OpKind::MulF || cLoad->memref != store->memref ||
      !(cLoad->index == store->index))
    throw PassError(pass, "body is not C = C + A * B");
  auto through = [&](ValueId v) {
    const Op *op = defOf(body, v);
    if (op && op->kind == OpKind::ExtF)
      op = defOf(body, op->operands[0]);
    return op;
  };
  const Op *aLoad = through(mul->operands[0]);
  const Op *bLoad = through(mul->operands[1]);
  if (!aLoad || !bLoad || aLoad->kind != OpKind::Load ||
      bLoad->kind != OpKind::Load)
    throw PassError(pass, "mulf operands are not loads");

  std::vector<ValueId> ivs = {nest[0]->iv, nest[1]->iv, nest[2]->iv};
  auto ivOfDim = [&](const AffineApply &idx, unsigned d) -> ValueId {
    for (ValueId iv : ivs)
      if (idx.uses(iv) && idx.map.result(d).usesDim(unsigned(
                               std::find(idx.operands.begin(),
                                         idx.operands.end(), iv) -
                               idx.operands.begin())))
        return iv;
    return kNoValue;
  };
  ValueId row = ivOfDim(store->index, 0), col = ivOfDim(store->index, 1);
  ValueId red = kNoValue;
  for (ValueId iv : ivs)
    if (iv != row && iv != col)
      red = iv;
  if (row == kNoValue || col == kNoValue || row == col ||
      !unitUse(store->index, 0, row, ivs) ||
      !unitUse(store->index, 1, col, ivs) ||
      !unitUse(aLoad->index, 0, row, ivs) ||
      !unitUse(aLoad->index, 1, red, ivs) ||
      !unitUse(bLoad->index, 0, red, ivs) ||
      !unitUse(bLoad->index, 1, col, ivs))
    throw PassError(pass, "accesses do not match the i/j/k roles");
  for (Loop *l : nest) {
    auto t = l->tripCount();
    if (l->step != 1 || !t || *t % 16 != 0)
      throw PassError(pass, "loop '" + l->tag +
                                "' is not a multiple of 16 (trip count " +
                                (t ? std::to_string(*t) : "?") + ")");
  }

  MemRefType ta = f.memrefType(aLoad->memref);
  MemRefType tb = f.memrefType(bLoad->memref);
  MemRefType tc = f.memrefType(store->memref);
  if (ta.elem != ElemType::F16 || tb.elem != ElemType::F16)
    throw PassError(pass, "A and B must be f16");
  auto ld = [](const MemRefType &t) { return (*t.strides())[0]; };
  auto wload = [&](const Op &src, FragmentRole role, ElemType e,
                   const MemRefType &t) {
    Op op;
    op.kind = OpKind::WmmaLoad;
    op.memref = src.memref;
    op.index = src.index;
    op.leadingDim = ld(t);
    op.result = f.newValue(FragmentType{role, 16, 16, 16, e});
    return op;
  };
  Op fa = wload(*aLoad, FragmentRole::MatA, ElemType::F16, ta);
  Op fb = wload(*bLoad, FragmentRole::MatB, ElemType::F16, tb);
  Op fc = wload(*cLoad, FragmentRole::Accum, tc.elem, tc);
  Op mma;
  mma.kind = OpKind::WmmaCompute;
  mma.operands = {fa.result, fb.result, fc.result};
  mma.result = f.newValue(f.typeOf(fc.result));
  Op ws;
  ws.kind = OpKind::WmmaStore;
  ws.operands = {mma.result};
  ws.memref = store->memref;
  ws.index = store->index;
  ws.leadingDim = ld(tc);
  Block nb = {fa, fb, fc, mma, ws};
  body = std::move(nb);
  for (Loop *l : nest)
    l->step = 16;
  return finishPass(pass, in, std::move(m));
}

} // namespace tcmm

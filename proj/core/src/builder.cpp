//===- builder.cpp - Naive matmul starting point --------------------------===//

#include "tcmm/builder.h"

#include <stdexcept>

namespace tcmm {

namespace {

Loop makeLoop(Function &f, int64_t ub, const char *tag) {
  Loop l;
  l.iv = f.newValue(IndexType{});
  l.lower = AffineApply::constant(0);
  l.upper = AffineApply::constant(ub);
  l.step = 1;
  l.tag = tag;
  return l;
}

Op load(Function &f, ValueId mem, ValueId i0, ValueId i1) {
  Op op;
  op.kind = OpKind::Load;
  op.memref = mem;
  op.index = AffineApply::fromExprs({AffineExpr::dim(0), AffineExpr::dim(1)},
                                    {i0, i1});
  op.result = f.newValue(ScalarType{f.memrefType(mem).elem});
  return op;
}

Op unary(Function &f, OpKind kind, ValueId a, Type t) {
  Op op;
  op.kind = kind;
  op.operands = {a};
  op.result = f.newValue(std::move(t));
  return op;
}

Op binary(Function &f, OpKind kind, ValueId a, ValueId b) {
  Op op;
  op.kind = kind;
  op.operands = {a, b};
  op.result = f.newValue(f.typeOf(a));
  return op;
}

} // namespace

Module buildNaiveMatmul(const ProblemConfig &p) {
  if (p.M <= 0 || p.N <= 0 || p.K <= 0)
    throw std::invalid_argument("matmul extents must be positive");
  Module m;
  Function f;
  f.name = "matmul";
  ValueId A = f.newValue(MemRefType::get({p.M, p.K}, ElemType::F16), "A");
  ValueId B = f.newValue(MemRefType::get({p.K, p.N}, ElemType::F16), "B");
  ValueId C = f.newValue(MemRefType::get({p.M, p.N}, p.accum), "C");
  f.args = {A, B, C};

  Loop li = makeLoop(f, p.M, "i");
  Loop lj = makeLoop(f, p.N, "j");
  Loop lk = makeLoop(f, p.K, "k");
  Block body;
  Op a = load(f, A, li.iv, lk.iv);
  Op b = load(f, B, lk.iv, lj.iv);
  Op c = load(f, C, li.iv, lj.iv);
  ValueId av = a.result, bv = b.result;
  body.push_back(a);
  body.push_back(b);
  body.push_back(c);
  if (p.accum == ElemType::F32) {
    Op ae = unary(f, OpKind::ExtF, av, ScalarType{ElemType::F32});
    Op be = unary(f, OpKind::ExtF, bv, ScalarType{ElemType::F32});
    av = ae.result;
    bv = be.result;
    body.push_back(ae);
    body.push_back(be);
  }
  Op mul = binary(f, OpKind::MulF, av, bv);
  Op add = binary(f, OpKind::AddF, c.result, mul.result);
  Op st;
  st.kind = OpKind::Store;
  st.operands = {add.result};
  st.memref = C;
  st.index = c.index;
  body.push_back(mul);
  body.push_back(add);
  body.push_back(st);

  lk.body = std::move(body);
  lj.body.push_back(std::move(lk));
  li.body.push_back(std::move(lj));
  f.body.push_back(std::move(li));
  m.funcs.push_back(std::move(f));
  return m;
}

} // namespace tcmm

//===- rewrite.cpp - Cloning and substitution helpers ---------------------===//

#include "tcmm/rewrite.h"

#include <algorithm>
#include <stdexcept>

namespace tcmm {

ValueId remap(const ValueMap &map, ValueId v) {
  auto it = map.find(v);
  return it == map.end() ? v : it->second;
}

AffineApply remap(const ValueMap &map, const AffineApply &a) {
  AffineApply out = a;
  bool changed = false;
  for (ValueId &v : out.operands) {
    ValueId r = remap(map, v);
    changed |= r != v;
    v = r;
  }
  if (changed)
    out.canonicalize();
  return out;
}

namespace {

ValueId fresh(Function &f, ValueId old, ValueMap &map) {
  ValueId v = f.newValue(f.typeOf(old));
  map[old] = v;
  return v;
}

} // namespace

Node cloneNode(Function &f, const Node &n, ValueMap &map) {
  if (n.isOp()) {
    Op op = n.op();
    for (ValueId &v : op.operands)
      v = remap(map, v);
    if (op.memref != kNoValue)
      op.memref = remap(map, op.memref);
    op.index = remap(map, op.index);
    if (op.hasResult())
      op.result = fresh(f, op.result, map);
    return op;
  }
  const Loop &src = n.loop();
  Loop l;
  l.lower = remap(map, src.lower);
  l.upper = remap(map, src.upper);
  l.step = src.step;
  l.tag = src.tag;
  l.parallel = src.parallel;
  l.mapping = src.mapping;
  for (ValueId v : src.inits)
    l.inits.push_back(remap(map, v));
  l.iv = fresh(f, src.iv, map);
  for (ValueId v : src.regionArgs)
    l.regionArgs.push_back(fresh(f, v, map));
  l.body = cloneBlock(f, src.body, map);
  for (ValueId v : src.results)
    l.results.push_back(fresh(f, v, map));
  return l;
}

Block cloneBlock(Function &f, const Block &b, ValueMap &map) {
  Block out;
  out.reserve(b.size());
  for (const Node &n : b)
    out.push_back(cloneNode(f, n, map));
  return out;
}

AffineApply affine(const AffineExpr &e, std::vector<ValueId> operands) {
  return AffineApply::fromExprs({e}, std::move(operands));
}

AffineApply shifted(const AffineApply &a, int64_t c) {
  std::vector<AffineExpr> exprs;
  for (const AffineExpr &e : a.map.results())
    exprs.push_back(e + c);
  return AffineApply::fromExprs(std::move(exprs), a.operands);
}

AffineExpr exprOver(const AffineApply &a, const std::vector<ValueId> &operands,
                    unsigned result) {
  std::vector<AffineExpr> dims;
  for (ValueId v : a.operands) {
    auto it = std::find(operands.begin(), operands.end(), v);
    if (it == operands.end())
      throw std::logic_error("exprOver: operand not in list");
    dims.push_back(AffineExpr::dim(unsigned(it - operands.begin())));
  }
  return a.map.result(result).replaceDims(dims);
}

AffineApply substitute(const AffineApply &a, ValueId v,
                       const AffineApply &repl) {
  if (!a.uses(v))
    return a;
  std::vector<ValueId> operands;
  for (ValueId o : a.operands)
    if (o != v)
      operands.push_back(o);
  for (ValueId o : repl.operands)
    if (std::find(operands.begin(), operands.end(), o) == operands.end())
      operands.push_back(o);
  AffineExpr r = exprOver(repl, operands);
  std::vector<AffineExpr> dims;
  for (ValueId o : a.operands) {
    if (o == v) {
      dims.push_back(r);
      continue;
    }
    dims.push_back(AffineExpr::dim(unsigned(
        std::find(operands.begin(), operands.end(), o) - operands.begin())));
  }
  std::vector<AffineExpr> exprs;
  for (const AffineExpr &e : a.map.results())
    exprs.push_back(e.replaceDims(dims));
  return AffineApply::fromExprs(std::move(exprs), std::move(operands));
}

void substituteInBlock(Block &b, ValueId v, const AffineApply &repl) {
  for (Node &n : b) {
    if (n.isOp()) {
      Op &op = n.op();
      op.index = substitute(op.index, v, repl);
    } else {
      Loop &l = n.loop();
      l.lower = substitute(l.lower, v, repl);
      l.upper = substitute(l.upper, v, repl);
      substituteInBlock(l.body, v, repl);
    }
  }
}

} // namespace tcmm

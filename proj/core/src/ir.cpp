//===- ir.cpp - Structured loop IR ----------------------------------------===//

#include "tcmm/ir.h"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace tcmm {

MemRefType MemRefType::get(std::vector<int64_t> shape, ElemType elem,
                           MemorySpace space, int64_t vectorWidth) {
  std::vector<int64_t> strides(shape.size(), 1);
  for (size_t d = shape.size(); d-- > 1;)
    strides[d - 1] = strides[d] * shape[d];
  MemRefType t;
  t.layout = AffineMap::strided(strides);
  t.shape = std::move(shape);
  t.elem = elem;
  t.space = space;
  t.vectorWidth = vectorWidth;
  return t;
}

int64_t MemRefType::numElements() const {
  int64_t n = 1;
  for (int64_t s : shape)
    n *= s;
  return n;
}

std::optional<std::vector<int64_t>> MemRefType::strides() const {
  return layout.linearStrides();
}

int64_t MemRefType::footprint() const {
  if (auto s = strides()) {
    int64_t fp = 0;
    for (size_t d = 0; d < shape.size(); ++d)
      fp = std::max(fp, shape[d] * (*s)[d]);
    return fp;
  }
  // Non-linear layout: largest offset over the shape corners + 1.
  std::vector<int64_t> idx(shape.size());
  for (size_t d = 0; d < shape.size(); ++d)
    idx[d] = shape[d] - 1;
  return layout.eval(idx).at(0) + 1;
}

std::vector<int64_t> MemRefType::allocationShape() const {
  auto s = strides();
  if (!s || shape.empty())
    return shape;
  std::vector<int64_t> alloc(shape.size());
  alloc[0] = shape[0];
  for (size_t d = 1; d < shape.size(); ++d)
    alloc[d] = (*s)[d] == 0 ? shape[d] : (*s)[d - 1] / (*s)[d];
  return alloc;
}

bool MemRefType::isIdentityLayout() const {
  return layout == MemRefType::get(shape, elem).layout;
}

std::string_view toString(FragmentRole r) {
  switch (r) {
  case FragmentRole::MatA:
    return "a";
  case FragmentRole::MatB:
    return "b";
  case FragmentRole::Accum:
    return "c";
  }
  return "?";
}

std::string typeToString(const Type &t) {
  struct Visitor {
    std::string operator()(const IndexType &) const { return "index"; }
    std::string operator()(const ScalarType &s) const {
      return std::string(toString(s.elem));
    }
    std::string operator()(const VectorType &v) const {
      return "vector<" + std::to_string(v.width) + "x" +
             std::string(toString(v.elem)) + ">";
    }
    std::string operator()(const MemRefType &m) const {
      std::string out = "memref<";
      for (int64_t s : m.shape)
        out += std::to_string(s) + "x";
      if (m.vectorWidth > 1)
        out += "vector<" + std::to_string(m.vectorWidth) + "x" +
               std::string(toString(m.elem)) + ">";
      else
        out += toString(m.elem);
      if (!m.isIdentityLayout())
        out += ", affine_map<" + m.layout.str() + ">";
      if (m.space == MemorySpace::Shared)
        out += ", 3";
      return out + ">";
    }
    std::string operator()(const FragmentType &f) const {
      return "frag<" + std::string(toString(f.role)) + ", " +
             std::to_string(f.m) + "x" + std::to_string(f.n) + "x" +
             std::to_string(f.k) + ", " + std::string(toString(f.elem)) + ">";
    }
  };
  return std::visit(Visitor{}, t);
}

//===----------------------------------------------------------------------===//
// AffineApply
//===----------------------------------------------------------------------===//

AffineApply AffineApply::fromExprs(std::vector<AffineExpr> exprs,
                                   std::vector<ValueId> operands) {
  AffineApply a{AffineMap(static_cast<unsigned>(operands.size()), 0,
                          std::move(exprs)),
                std::move(operands)};
  a.canonicalize();
  return a;
}

std::optional<int64_t> AffineApply::constantValue() const {
  if (map.numResults() != 1)
    return std::nullopt;
  return map.result(0).constantValue();
}

void AffineApply::canonicalize() {
  std::vector<ValueId> newOperands;
  std::vector<AffineExpr> replacement(map.numDims());
  for (unsigned d = 0; d < map.numDims(); ++d) {
    bool used = false;
    for (const auto &r : map.results())
      used |= r.usesDim(d);
    if (!used)
      continue;
    auto it = std::find(newOperands.begin(), newOperands.end(), operands[d]);
    unsigned pos = static_cast<unsigned>(it - newOperands.begin());
    if (it == newOperands.end())
      newOperands.push_back(operands[d]);
    replacement[d] = AffineExpr::dim(pos);
  }
  map = map.replaceDims(replacement, static_cast<unsigned>(newOperands.size()));
  operands = std::move(newOperands);
}

AffineApply AffineApply::normalized() const {
  std::vector<ValueId> sorted = operands;
  std::sort(sorted.begin(), sorted.end());
  std::vector<AffineExpr> dims;
  for (ValueId v : operands)
    dims.push_back(AffineExpr::dim(unsigned(
        std::find(sorted.begin(), sorted.end(), v) - sorted.begin())));
  return {map.replaceDims(dims, unsigned(sorted.size())), std::move(sorted)};
}

bool AffineApply::uses(ValueId v) const {
  return std::find(operands.begin(), operands.end(), v) != operands.end();
}

//===----------------------------------------------------------------------===//
// Ops
//===----------------------------------------------------------------------===//

std::string_view toString(OpKind k) {
  switch (k) {
  case OpKind::Constant:
    return "const";
  case OpKind::GetGlobal:
    return "get_global";
  case OpKind::ViewCast:
    return "view";
  case OpKind::HwId:
    return "hw.id";
  case OpKind::Load:
    return "load";
  case OpKind::Store:
    return "store";
  case OpKind::VectorLoad:
    return "vload";
  case OpKind::VectorStore:
    return "vstore";
  case OpKind::MulF:
    return "mulf";
  case OpKind::AddF:
    return "addf";
  case OpKind::ExtF:
    return "extf";
  case OpKind::WmmaLoad:
    return "wmma.load";
  case OpKind::WmmaCompute:
    return "wmma.compute";
  case OpKind::WmmaStore:
    return "wmma.store";
  case OpKind::Barrier:
    return "barrier";
  case OpKind::Yield:
    return "yield";
  }
  return "?";
}

std::string_view toString(HwDim d) {
  switch (d) {
  case HwDim::BlockX:
    return "block_x";
  case HwDim::BlockY:
    return "block_y";
  case HwDim::WarpX:
    return "warp_x";
  case HwDim::WarpY:
    return "warp_y";
  case HwDim::Thread:
    return "thread";
  }
  return "?";
}

std::string_view toString(GpuDim d) {
  switch (d) {
  case GpuDim::BlockX:
    return "block_x";
  case GpuDim::BlockY:
    return "block_y";
  case GpuDim::WarpX:
    return "warp_x";
  case GpuDim::WarpY:
    return "warp_y";
  }
  return "?";
}

bool Op::isMemoryAccess() const { return readsMemory() || writesMemory(); }

bool Op::readsMemory() const {
  return kind == OpKind::Load || kind == OpKind::VectorLoad ||
         kind == OpKind::WmmaLoad;
}

bool Op::writesMemory() const {
  return kind == OpKind::Store || kind == OpKind::VectorStore ||
         kind == OpKind::WmmaStore;
}

//===----------------------------------------------------------------------===//
// Loops
//===----------------------------------------------------------------------===//

std::optional<int64_t> Loop::tripCount() const {
  if (lower.map.numResults() != 1 || upper.map.numResults() != 1 || step <= 0)
    return std::nullopt;
  // Express both bounds over a merged operand list and subtract.
  std::vector<ValueId> operands = lower.operands;
  std::vector<AffineExpr> upperDims;
  for (ValueId v : upper.operands) {
    auto it = std::find(operands.begin(), operands.end(), v);
    unsigned pos = static_cast<unsigned>(it - operands.begin());
    if (it == operands.end())
      operands.push_back(v);
    upperDims.push_back(AffineExpr::dim(pos));
  }
  AffineExpr diff =
      upper.map.result(0).replaceDims(upperDims) - lower.map.result(0);
  auto c = diff.constantValue();
  if (!c)
    return std::nullopt;
  return *c <= 0 ? 0 : (*c + step - 1) / step;
}

const Op *Loop::yield() const {
  if (body.empty() || !body.back().isOp() ||
      body.back().op().kind != OpKind::Yield)
    return nullptr;
  return &body.back().op();
}

Op *Loop::yield() {
  return const_cast<Op *>(static_cast<const Loop *>(this)->yield());
}

//===----------------------------------------------------------------------===//
// Functions and modules
//===----------------------------------------------------------------------===//

ValueId Function::newValue(Type type, std::string name) {
  values.push_back({std::move(type), std::move(name)});
  return static_cast<ValueId>(values.size() - 1);
}

const MemRefType &Function::memrefType(ValueId v) const {
  const auto *m = std::get_if<MemRefType>(&typeOf(v));
  if (!m)
    throw std::logic_error("value is not a memref");
  return *m;
}

ValueId Function::arg(std::string_view name) const {
  for (ValueId a : args)
    if (values[a].name == name)
      return a;
  return kNoValue;
}

const Global *Module::global(std::string_view name) const {
  for (const auto &g : globals)
    if (g.name == name)
      return &g;
  return nullptr;
}

Global *Module::global(std::string_view name) {
  for (auto &g : globals)
    if (g.name == name)
      return &g;
  return nullptr;
}

//===----------------------------------------------------------------------===//
// Traversal
//===----------------------------------------------------------------------===//

void walkOps(const Block &block, const std::function<void(const Op &)> &fn) {
  for (const Node &n : block) {
    if (n.isOp())
      fn(n.op());
    else
      walkOps(n.loop().body, fn);
  }
}

void walkOps(Block &block, const std::function<void(Op &)> &fn) {
  for (Node &n : block) {
    if (n.isOp())
      fn(n.op());
    else
      walkOps(n.loop().body, fn);
  }
}

void walkLoops(const Block &block,
               const std::function<void(const Loop &)> &fn) {
  for (const Node &n : block) {
    if (n.isLoop()) {
      fn(n.loop());
      walkLoops(n.loop().body, fn);
    }
  }
}

void walkLoops(Block &block, const std::function<void(Loop &)> &fn) {
  for (Node &n : block) {
    if (n.isLoop()) {
      fn(n.loop());
      walkLoops(n.loop().body, fn);
    }
  }
}

namespace {

void collectUses(const Block &block, std::vector<ValueId> &out) {
  for (const Node &n : block) {
    if (n.isOp()) {
      const Op &op = n.op();
      out.insert(out.end(), op.operands.begin(), op.operands.end());
      if (op.memref != kNoValue)
        out.push_back(op.memref);
      out.insert(out.end(), op.index.operands.begin(), op.index.operands.end());
    } else {
      const Loop &l = n.loop();
      out.insert(out.end(), l.lower.operands.begin(), l.lower.operands.end());
      out.insert(out.end(), l.upper.operands.begin(), l.upper.operands.end());
      out.insert(out.end(), l.inits.begin(), l.inits.end());
      collectUses(l.body, out);
    }
  }
}

void collectDefs(const Block &block, std::vector<ValueId> &out) {
  for (const Node &n : block) {
    if (n.isOp()) {
      if (n.op().hasResult())
        out.push_back(n.op().result);
    } else {
      const Loop &l = n.loop();
      out.push_back(l.iv);
      out.insert(out.end(), l.regionArgs.begin(), l.regionArgs.end());
      out.insert(out.end(), l.results.begin(), l.results.end());
      collectDefs(l.body, out);
    }
  }
}

} // namespace

std::vector<ValueId> usedValues(const Block &block) {
  std::vector<ValueId> out;
  collectUses(block, out);
  return out;
}

std::vector<ValueId> definedValues(const Block &block) {
  std::vector<ValueId> out;
  collectDefs(block, out);
  return out;
}

Loop *findLoop(Block &block, std::string_view tag) {
  for (Node &n : block) {
    if (!n.isLoop())
      continue;
    if (n.loop().tag == tag)
      return &n.loop();
    if (Loop *l = findLoop(n.loop().body, tag))
      return l;
  }
  return nullptr;
}

const Loop *findLoop(const Block &block, std::string_view tag) {
  return findLoop(const_cast<Block &>(block), tag);
}

size_t countLoops(const Block &block) {
  size_t n = 0;
  walkLoops(block, [&](const Loop &) { ++n; });
  return n;
}

size_t countOps(const Block &block, OpKind kind) {
  size_t n = 0;
  walkOps(block, [&](const Op &op) { n += op.kind == kind; });
  return n;
}

namespace {

void replaceIn(std::vector<ValueId> &vs, ValueId from, ValueId to) {
  for (ValueId &v : vs)
    if (v == from)
      v = to;
}

} // namespace

void replaceAllUses(Block &block, ValueId from, ValueId to) {
  for (Node &n : block) {
    if (n.isOp()) {
      Op &op = n.op();
      replaceIn(op.operands, from, to);
      if (op.memref == from)
        op.memref = to;
      if (op.index.uses(from)) {
        replaceIn(op.index.operands, from, to);
        op.index.canonicalize();
      }
    } else {
      Loop &l = n.loop();
      for (AffineApply *b : {&l.lower, &l.upper}) {
        if (b->uses(from)) {
          replaceIn(b->operands, from, to);
          b->canonicalize();
        }
      }
      replaceIn(l.inits, from, to);
      replaceAllUses(l.body, from, to);
    }
  }
}

//===----------------------------------------------------------------------===//
// Structural equality
//===----------------------------------------------------------------------===//

namespace {

struct Matcher {
  const Function &fa, &fb;
  std::unordered_map<ValueId, ValueId> map;

  bool bind(ValueId a, ValueId b) {
    if (a == kNoValue || b == kNoValue)
      return a == b;
    if (!(fa.typeOf(a) == fb.typeOf(b)))
      return false;
    return map.emplace(a, b).second;
  }
  bool same(ValueId a, ValueId b) const {
    if (a == kNoValue || b == kNoValue)
      return a == b;
    auto it = map.find(a);
    return it != map.end() && it->second == b;
  }
  bool sameList(const std::vector<ValueId> &a,
                const std::vector<ValueId> &b) const {
    if (a.size() != b.size())
      return false;
    for (size_t i = 0; i < a.size(); ++i)
      if (!same(a[i], b[i]))
        return false;
    return true;
  }
  // Operand order is not significant: rename a's dims to b's positions.
  bool sameApply(const AffineApply &a, const AffineApply &b) const {
    if (a.operands.size() != b.operands.size() ||
        a.map.numResults() != b.map.numResults())
      return false;
    std::vector<AffineExpr> dims;
    for (ValueId v : a.operands) {
      auto it = map.find(v);
      if (it == map.end())
        return false;
      auto pos = std::find(b.operands.begin(), b.operands.end(), it->second);
      if (pos == b.operands.end())
        return false;
      dims.push_back(AffineExpr::dim(unsigned(pos - b.operands.begin())));
    }
    return a.map.replaceDims(dims, b.map.numDims()) == b.map;
  }

  bool op(const Op &a, const Op &b) {
    if (a.kind != b.kind || !sameList(a.operands, b.operands) ||
        !same(a.memref, b.memref) || !sameApply(a.index, b.index) ||
        a.floatValue != b.floatValue || a.intValue != b.intValue ||
        a.symbol != b.symbol || a.hw != b.hw || a.leadingDim != b.leadingDim ||
        a.tag != b.tag)
      return false;
    return bind(a.result, b.result);
  }

  bool loop(const Loop &a, const Loop &b) {
    if (a.step != b.step || a.tag != b.tag || a.parallel != b.parallel ||
        a.mapping != b.mapping || !sameApply(a.lower, b.lower) ||
        !sameApply(a.upper, b.upper) || !sameList(a.inits, b.inits) ||
        a.regionArgs.size() != b.regionArgs.size() ||
        a.results.size() != b.results.size())
      return false;
    if (!bind(a.iv, b.iv))
      return false;
    for (size_t i = 0; i < a.regionArgs.size(); ++i)
      if (!bind(a.regionArgs[i], b.regionArgs[i]))
        return false;
    if (!block(a.body, b.body))
      return false;
    for (size_t i = 0; i < a.results.size(); ++i)
      if (!bind(a.results[i], b.results[i]))
        return false;
    return true;
  }

  bool block(const Block &a, const Block &b) {
    if (a.size() != b.size())
      return false;
    for (size_t i = 0; i < a.size(); ++i) {
      if (a[i].isOp() != b[i].isOp())
        return false;
      if (a[i].isOp() ? !op(a[i].op(), b[i].op())
                      : !loop(a[i].loop(), b[i].loop()))
        return false;
    }
    return true;
  }
};

} // namespace

bool structurallyEqual(const Module &a, const Module &b) {
  if (a.globals.size() != b.globals.size() || a.funcs.size() != b.funcs.size())
    return false;
  for (size_t i = 0; i < a.globals.size(); ++i)
    if (a.globals[i].name != b.globals[i].name ||
        !(a.globals[i].type == b.globals[i].type))
      return false;
  for (size_t f = 0; f < a.funcs.size(); ++f) {
    const Function &fa = a.funcs[f], &fb = b.funcs[f];
    if (fa.name != fb.name || fa.args.size() != fb.args.size() ||
        fa.launch != fb.launch)
      return false;
    Matcher m{fa, fb, {}};
    for (size_t i = 0; i < fa.args.size(); ++i)
      if (fa.values[fa.args[i]].name != fb.values[fb.args[i]].name ||
          !m.bind(fa.args[i], fb.args[i]))
        return false;
    if (!m.block(fa.body, fb.body))
      return false;
  }
  return true;
}

} // namespace tcmm

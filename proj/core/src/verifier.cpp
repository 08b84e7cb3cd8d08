//===- verifier.cpp - Structural IR verifier ------------------------------===//

#include "tcmm/verifier.h"

#include <set>
#include <unordered_set>

namespace tcmm {

std::string Diagnostic::str() const {
  return rule + ": " + message + " [at " + location + "]";
}

VerifyError::VerifyError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error([&] {
        std::string msg = "verification failed";
        for (const auto &d : diagnostics)
          msg += "\n  " + d.str();
        return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

void verifyOrThrow(const Module &m) {
  auto diags = verify(m);
  if (!diags.empty())
    throw VerifyError(std::move(diags));
}

namespace {

class Verifier {
public:
  explicit Verifier(const Module &m) : module_(m) {}

  std::vector<Diagnostic> run() {
    std::set<std::string> names;
    for (const Global &g : module_.globals) {
      if (!names.insert(g.name).second)
        report("global @" + g.name, "duplicate global",
               "global names must be unique");
      if (g.type.space != MemorySpace::Shared)
        report("global @" + g.name, "global space",
               "globals must live in shared memory");
      memref("global @" + g.name, g.type);
    }
    for (const Function &f : module_.funcs)
      function(f);
    return std::move(diags_);
  }

private:
  const Module &module_;
  const Function *fn_ = nullptr;
  std::vector<Diagnostic> diags_;
  std::vector<std::unordered_set<ValueId>> scopes_;
  std::unordered_set<ValueId> everDefined_;
  int loopDepth_ = 0;

  void report(std::string where, std::string rule, std::string msg) {
    diags_.push_back({std::move(where), std::move(rule), std::move(msg)});
  }

  static std::string opWhere(const Op &op) {
    std::string s(toString(op.kind));
    if (!op.tag.empty())
      s += " {tag = \"" + op.tag + "\"}";
    return s;
  }
  static std::string loopWhere(const Loop &l) {
    return "for" + (l.tag.empty() ? std::string() : " {tag = \"" + l.tag + "\"}");
  }

  void memref(const std::string &where, const MemRefType &t) {
    if (t.layout.numDims() != t.rank())
      report(where, "layout arity", "layout dims must equal memref rank");
    if (t.layout.numResults() != 1)
      report(where, "layout arity", "layout must produce one linear offset");
    else if (t.rank() > 0 && t.footprint() < t.numElements())
      report(where, "layout footprint",
             "linearized footprint smaller than the shape");
    for (int64_t s : t.shape)
      if (s <= 0)
        report(where, "static shape", "memref extents must be positive");
  }

  bool defined(ValueId v) const {
    for (const auto &s : scopes_)
      if (s.count(v))
        return true;
    return false;
  }

  void use(const std::string &where, ValueId v) {
    if (v == kNoValue || v >= fn_->values.size()) {
      report(where, "invalid value", "operand references no value");
      return;
    }
    if (!defined(v))
      report(where, "dominance",
             "value %" + std::to_string(v) + " used before its definition");
  }

  void define(const std::string &where, ValueId v) {
    if (v == kNoValue || v >= fn_->values.size()) {
      report(where, "invalid value", "definition references no value");
      return;
    }
    if (!everDefined_.insert(v).second)
      report(where, "single assignment",
             "value %" + std::to_string(v) + " defined more than once");
    scopes_.back().insert(v);
  }

  bool isIndex(ValueId v) const {
    return v < fn_->values.size() &&
           std::holds_alternative<IndexType>(fn_->typeOf(v));
  }

  void apply(const std::string &where, const AffineApply &a,
             std::optional<unsigned> results) {
    if (a.map.numDims() != a.operands.size())
      report(where, "map arity", "affine map dims must equal operand count");
    if (results && a.map.numResults() != *results)
      report(where, "index arity",
             "expected " + std::to_string(*results) + " index results, got " +
                 std::to_string(a.map.numResults()));
    for (const AffineExpr &e : a.map.results())
      if (e.maxDimPlusOne() > a.map.numDims() ||
          e.maxSymbolPlusOne() > a.map.numSymbols())
        report(where, "map arity", "expression references undeclared dim");
    for (ValueId v : a.operands) {
      use(where, v);
      if (!isIndex(v))
        report(where, "index operand", "affine operands must be index-typed");
    }
  }

  const MemRefType *memrefOperand(const std::string &where, const Op &op) {
    use(where, op.memref);
    if (op.memref >= fn_->values.size())
      return nullptr;
    const auto *t = std::get_if<MemRefType>(&fn_->typeOf(op.memref));
    if (!t) {
      report(where, "memref operand", "memory op needs a memref operand");
      return nullptr;
    }
    apply(where, op.index, t->rank());
    return t;
  }

  const Type *typeOf(ValueId v) const {
    return v < fn_->values.size() ? &fn_->typeOf(v) : nullptr;
  }

  void function(const Function &f) {
    fn_ = &f;
    scopes_.assign(1, {});
    everDefined_.clear();
    for (ValueId a : f.args) {
      define("func @" + f.name, a);
      if (a < f.values.size()) {
        if (const auto *t = std::get_if<MemRefType>(&f.typeOf(a))) {
          memref("func @" + f.name, *t);
          if (t->space != MemorySpace::Global)
            report("func @" + f.name, "argument space",
                   "function arguments must be global memrefs");
        } else {
          report("func @" + f.name, "argument type",
                 "function arguments must be memrefs");
        }
      }
    }
    if (f.launch) {
      if (f.launch->blockThreads() > 1024)
        report("func @" + f.name, "block size",
               "more than 1024 threads per block");
      if (f.launch->gridX <= 0 || f.launch->gridY <= 0 ||
          f.launch->warpsX <= 0 || f.launch->warpsY <= 0)
        report("func @" + f.name, "launch", "launch extents must be positive");
    }
    block(f.body, nullptr);
  }

  void block(const Block &b, const Loop *parent) {
    for (size_t i = 0; i < b.size(); ++i) {
      const Node &n = b[i];
      if (n.isLoop()) {
        loop(n.loop());
        continue;
      }
      const Op &op = n.op();
      if (op.kind == OpKind::Yield) {
        if (!parent || i + 1 != b.size())
          report(opWhere(op), "yield placement",
                 "yield must terminate a loop body");
      }
      this->op(op, parent);
    }
    if (parent && !parent->regionArgs.empty() && !parent->yield())
      report(loopWhere(*parent), "yield/iter_args mismatch",
             "loop with iter_args must end with a yield");
  }

  void loop(const Loop &l) {
    std::string where = loopWhere(l);
    apply(where, l.lower, 1u);
    apply(where, l.upper, 1u);
    if (l.step <= 0)
      report(where, "loop step", "step must be positive");
    if (!l.tripCount())
      report(where, "constant trip count",
             "trip count is not a compile-time constant");
    if (l.inits.size() != l.regionArgs.size() ||
        l.results.size() != l.regionArgs.size())
      report(where, "yield/iter_args mismatch",
             "iter_args, inits and results must have equal arity");
    for (ValueId v : l.inits)
      use(where, v);
    if (l.mapping && fn_->launch)
      report(where, "unmapped loop",
             "mapped kernels must not keep block/warp loops");
    scopes_.emplace_back();
    define(where, l.iv);
    if (!isIndex(l.iv))
      report(where, "induction variable", "induction variable must be index");
    for (size_t i = 0; i < l.regionArgs.size(); ++i) {
      define(where, l.regionArgs[i]);
      if (i < l.inits.size()) {
        const Type *a = typeOf(l.regionArgs[i]), *b = typeOf(l.inits[i]);
        if (a && b && !(*a == *b))
          report(where, "yield/iter_args mismatch",
                 "iter_arg type differs from its initial value");
      }
    }
    ++loopDepth_;
    block(l.body, &l);
    --loopDepth_;
    if (const Op *y = l.yield()) {
      if (y->operands.size() != l.regionArgs.size()) {
        report(where, "yield/iter_args mismatch",
               "yield has " + std::to_string(y->operands.size()) +
                   " values for " + std::to_string(l.regionArgs.size()) +
                   " iter_args");
      } else {
        for (size_t i = 0; i < y->operands.size(); ++i) {
          const Type *a = typeOf(y->operands[i]), *b = typeOf(l.regionArgs[i]);
          if (a && b && !(*a == *b))
            report(where, "yield/iter_args mismatch",
                   "yielded type differs from iter_arg type");
        }
      }
    }
    scopes_.pop_back();
    for (size_t i = 0; i < l.results.size(); ++i) {
      define(where, l.results[i]);
      if (i < l.regionArgs.size()) {
        const Type *a = typeOf(l.results[i]), *b = typeOf(l.regionArgs[i]);
        if (a && b && !(*a == *b))
          report(where, "yield/iter_args mismatch",
                 "loop result type differs from iter_arg type");
      }
    }
  }

  void fragment(const std::string &where, const FragmentType &f) {
    if (f.m != 16 || f.n != 16 || f.k != 16)
      report(where, "fragment shape", "only 16x16x16 fragments are supported");
    if (f.role != FragmentRole::Accum && f.elem != ElemType::F16)
      report(where, "fragment element",
             "A/B fragments must hold f16 elements");
  }

  const FragmentType *fragOperand(const std::string &where, ValueId v) {
    const Type *t = typeOf(v);
    const auto *f = t ? std::get_if<FragmentType>(t) : nullptr;
    if (!f)
      report(where, "fragment operand", "operand is not a fragment");
    return f;
  }

  void op(const Op &op, const Loop *parent) {
    std::string where = opWhere(op);
    for (ValueId v : op.operands)
      use(where, v);
    const Type *rt = op.hasResult() ? typeOf(op.result) : nullptr;
    auto needResult = [&](bool want) {
      if (want != op.hasResult())
        report(where, "result arity",
               want ? "op must produce a result" : "op must not produce a result");
    };
    auto arity = [&](size_t n) {
      if (op.operands.size() != n)
        report(where, "operand arity",
               "expected " + std::to_string(n) + " operands");
      return op.operands.size() == n;
    };
    switch (op.kind) {
    case OpKind::Constant:
      needResult(true);
      arity(0);
      if (rt && !std::holds_alternative<IndexType>(*rt) &&
          !std::holds_alternative<ScalarType>(*rt))
        report(where, "constant type", "constants are index or scalar");
      break;
    case OpKind::GetGlobal: {
      needResult(true);
      const Global *g = module_.global(op.symbol);
      if (!g)
        report(where, "unknown global", "no global @" + op.symbol);
      else if (rt && !(*rt == Type(g->type)))
        report(where, "global type", "result type differs from global @" +
                                         op.symbol);
      break;
    }
    case OpKind::ViewCast: {
      needResult(true);
      if (!arity(1))
        break;
      const Type *st = typeOf(op.operands[0]);
      const auto *src = st ? std::get_if<MemRefType>(st) : nullptr;
      const auto *dst = rt ? std::get_if<MemRefType>(rt) : nullptr;
      if (!src || !dst) {
        report(where, "view types", "view casts memref to memref");
        break;
      }
      memref(where, *dst);
      if (src->elem != dst->elem || src->space != dst->space ||
          src->rank() != dst->rank() || dst->vectorWidth <= src->vectorWidth ||
          dst->vectorWidth % src->vectorWidth != 0)
        report(where, "view types", "incompatible vector view");
      else if (src->shape.back() * src->vectorWidth !=
               dst->shape.back() * dst->vectorWidth)
        report(where, "view types", "vector view changes the row length");
      break;
    }
    case OpKind::HwId:
      needResult(true);
      if (!fn_->launch)
        report(where, "hardware id", "hw.id only valid inside a mapped kernel");
      if (rt && !std::holds_alternative<IndexType>(*rt))
        report(where, "hardware id", "hw.id yields an index");
      break;
    case OpKind::Load:
    case OpKind::VectorLoad: {
      needResult(true);
      arity(0);
      const MemRefType *mt = memrefOperand(where, op);
      if (!mt || !rt)
        break;
      if (op.kind == OpKind::Load &&
          (mt->vectorWidth != 1 || !(*rt == Type(ScalarType{mt->elem}))))
        report(where, "load type", "load result must be the element type");
      if (op.kind == OpKind::VectorLoad &&
          (mt->vectorWidth == 1 ||
           !(*rt == Type(VectorType{mt->vectorWidth, mt->elem}))))
        report(where, "load type", "vload needs a vector memref");
      break;
    }
    case OpKind::Store:
    case OpKind::VectorStore: {
      needResult(false);
      if (!arity(1))
        break;
      const MemRefType *mt = memrefOperand(where, op);
      const Type *vt = typeOf(op.operands[0]);
      if (!mt || !vt)
        break;
      Type want = op.kind == OpKind::Store
                      ? Type(ScalarType{mt->elem})
                      : Type(VectorType{mt->vectorWidth, mt->elem});
      if (!(*vt == want) ||
          (op.kind == OpKind::Store) != (mt->vectorWidth == 1))
        report(where, "store type", "stored value does not match memref");
      break;
    }
    case OpKind::MulF:
    case OpKind::AddF: {
      needResult(true);
      if (!arity(2) || !rt)
        break;
      for (ValueId v : op.operands) {
        const Type *t = typeOf(v);
        if (!t || !(*t == *rt) || !std::holds_alternative<ScalarType>(*t))
          report(where, "arith type", "operands and result must share a "
                                      "scalar float type");
      }
      break;
    }
    case OpKind::ExtF: {
      needResult(true);
      if (!arity(1) || !rt)
        break;
      const Type *t = typeOf(op.operands[0]);
      if (!t || !(*t == Type(ScalarType{ElemType::F16})) ||
          !(*rt == Type(ScalarType{ElemType::F32})))
        report(where, "extf type", "extf converts f16 to f32");
      break;
    }
    case OpKind::WmmaLoad: {
      needResult(true);
      arity(0);
      const MemRefType *mt = memrefOperand(where, op);
      const auto *f = rt ? std::get_if<FragmentType>(rt) : nullptr;
      if (!f) {
        report(where, "fragment result", "wmma.load yields a fragment");
        break;
      }
      fragment(where, *f);
      if (mt)
        wmmaMemref(where, op, *mt, *f);
      break;
    }
    case OpKind::WmmaCompute: {
      needResult(true);
      if (!arity(3))
        break;
      const FragmentType *a = fragOperand(where, op.operands[0]);
      const FragmentType *b = fragOperand(where, op.operands[1]);
      const FragmentType *c = fragOperand(where, op.operands[2]);
      if (a && a->role != FragmentRole::MatA)
        report(where, "wmma operand role", "first operand must be a MatA "
                                           "fragment");
      if (b && b->role != FragmentRole::MatB)
        report(where, "wmma operand role", "second operand must be a MatB "
                                           "fragment");
      if (c && c->role != FragmentRole::Accum)
        report(where, "wmma operand role", "third operand must be an Accum "
                                           "fragment");
      if (c && rt && !(*rt == Type(*c)))
        report(where, "wmma result", "result must match the accumulator type");
      break;
    }
    case OpKind::WmmaStore: {
      needResult(false);
      if (!arity(1))
        break;
      const FragmentType *f = fragOperand(where, op.operands[0]);
      const MemRefType *mt = memrefOperand(where, op);
      if (f && f->role != FragmentRole::Accum)
        report(where, "wmma operand role", "only accumulators are stored");
      if (f && mt)
        wmmaMemref(where, op, *mt, *f);
      break;
    }
    case OpKind::Barrier:
      needResult(false);
      arity(0);
      break;
    case OpKind::Yield:
      needResult(false);
      if (!parent)
        report(where, "yield placement", "yield outside a loop");
      break;
    }
    if (op.hasResult())
      define(where, op.result);
  }

  void wmmaMemref(const std::string &where, const Op &op, const MemRefType &mt,
                  const FragmentType &f) {
    if (mt.rank() != 2 || mt.vectorWidth != 1) {
      report(where, "wmma memref", "wmma accesses need a rank-2 scalar memref");
      return;
    }
    if (mt.elem != f.elem)
      report(where, "wmma element", "memref and fragment element types differ");
    if (op.leadingDim <= 0) {
      report(where, "leading dimension", "missing leading-dimension attribute");
      return;
    }
    auto s = mt.strides();
    if (s && (*s)[0] != op.leadingDim)
      report(where, "leading dimension",
             "ld = " + std::to_string(op.leadingDim) +
                 " does not match row stride " + std::to_string((*s)[0]));
  }
};

} // namespace

std::vector<Diagnostic> verify(const Module &m) { return Verifier(m).run(); }

} // namespace tcmm

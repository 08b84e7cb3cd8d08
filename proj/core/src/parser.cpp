//===- parser.cpp - Textual IR parser -------------------------------------===//

#include "tcmm/text.h"
#include "tcmm/verifier.h"

#include <cctype>
#include <charconv>
#include <unordered_map>

namespace tcmm {

ParseError::ParseError(int line, int column, const std::string &message)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) +
                         ": " + message),
      line_(line), column_(column) {}

namespace {

bool isIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == '$';
}

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  Module parse() {
    Module m;
    expectWord("module");
    expect('{');
    while (true) {
      skip();
      if (peekWord() == "global") {
        m.globals.push_back(global());
      } else if (peekWord() == "func") {
        m.funcs.push_back(function(m));
      } else {
        break;
      }
    }
    expect('}');
    skip();
    if (pos_ != text_.size())
      fail("trailing characters after module");
    return m;
  }

private:
  std::string_view text_;
  size_t pos_ = 0;
  Function *fn_ = nullptr;
  const Module *module_ = nullptr;
  std::unordered_map<std::string, ValueId> names_;
  std::vector<std::vector<std::string>> scopes_;

  //===--------------------------------------------------------------------===//
  // Lexing
  //===--------------------------------------------------------------------===//

  [[noreturn]] void fail(const std::string &msg) const {
    int line = 1, col = 1;
    for (size_t i = 0; i < pos_ && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(line, col, msg);
  }

  void skip() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '/' && pos_ + 1 < text_.size() &&
                 text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n')
          ++pos_;
      } else {
        break;
      }
    }
  }

  char peek() {
    skip();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool consumeIf(std::string_view lit) {
    skip();
    if (text_.substr(pos_, lit.size()) == lit) {
      pos_ += lit.size();
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (peek() != c)
      fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void expect(std::string_view lit) {
    if (!consumeIf(lit))
      fail("expected '" + std::string(lit) + "'");
  }

  std::string_view peekWord() {
    skip();
    size_t end = pos_;
    while (end < text_.size() && isIdentChar(text_[end]))
      ++end;
    return text_.substr(pos_, end - pos_);
  }

  std::string word() {
    std::string_view w = peekWord();
    if (w.empty())
      fail("expected identifier");
    pos_ += w.size();
    return std::string(w);
  }

  void expectWord(std::string_view w) {
    if (peekWord() != w)
      fail("expected '" + std::string(w) + "'");
    pos_ += w.size();
  }

  bool consumeWord(std::string_view w) {
    if (peekWord() != w)
      return false;
    pos_ += w.size();
    return true;
  }

  int64_t integer() {
    skip();
    bool negative = false;
    if (pos_ < text_.size() && text_[pos_] == '-') {
      negative = true;
      ++pos_;
    }
    size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    if (start == pos_)
      fail("expected integer");
    int64_t v = 0;
    std::from_chars(text_.data() + start, text_.data() + pos_, v);
    return negative ? -v : v;
  }

  std::string quoted() {
    expect('"');
    size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '"')
      ++pos_;
    if (pos_ >= text_.size())
      fail("unterminated string");
    std::string s(text_.substr(start, pos_ - start));
    ++pos_;
    return s;
  }

  std::string valueName() {
    expect('%');
    size_t start = pos_;
    while (pos_ < text_.size() && isIdentChar(text_[pos_]) &&
           text_[pos_] != '.')
      ++pos_;
    if (start == pos_)
      fail("expected value name");
    return std::string(text_.substr(start, pos_ - start));
  }

  //===--------------------------------------------------------------------===//
  // Values
  //===--------------------------------------------------------------------===//

  ValueId useValue() {
    std::string n = valueName();
    auto it = names_.find(n);
    if (it == names_.end())
      fail("use of undefined value %" + n);
    return it->second;
  }

  ValueId defineValue(const std::string &name, Type type,
                      bool keepName = false) {
    if (names_.count(name))
      fail("redefinition of value %" + name);
    ValueId v = fn_->newValue(std::move(type), keepName ? name : "");
    names_[name] = v;
    if (!scopes_.empty())
      scopes_.back().push_back(name);
    return v;
  }

  //===--------------------------------------------------------------------===//
  // Types
  //===--------------------------------------------------------------------===//

  ElemType elemType() {
    std::string w = word();
    if (w == "f16")
      return ElemType::F16;
    if (w == "f32")
      return ElemType::F32;
    fail("expected f16 or f32, got '" + w + "'");
  }

  AffineMap affineMap() {
    expect('(');
    std::vector<std::string> dims;
    if (peek() != ')') {
      do {
        dims.push_back(word());
      } while (consumeIf(","));
    }
    expect(')');
    unsigned numSymbols = 0;
    std::vector<std::string> syms;
    if (consumeIf("[")) {
      do {
        syms.push_back(word());
      } while (consumeIf(","));
      expect(']');
      numSymbols = static_cast<unsigned>(syms.size());
    }
    expect("->");
    expect('(');
    std::vector<AffineExpr> results;
    auto resolve = [&](const std::string &name) -> AffineExpr {
      for (unsigned i = 0; i < dims.size(); ++i)
        if (dims[i] == name)
          return AffineExpr::dim(i);
      for (unsigned i = 0; i < syms.size(); ++i)
        if (syms[i] == name)
          return AffineExpr::symbol(i);
      fail("unknown affine identifier '" + name + "'");
    };
    if (peek() != ')') {
      do {
        results.push_back(expr(resolve, nullptr));
      } while (consumeIf(","));
    }
    expect(')');
    return AffineMap(static_cast<unsigned>(dims.size()), numSymbols,
                     std::move(results));
  }

  Type type() {
    std::string_view w = peekWord();
    if (w == "index") {
      word();
      return IndexType{};
    }
    if (w == "f16" || w == "f32")
      return ScalarType{elemType()};
    if (w == "vector") {
      word();
      expect('<');
      int64_t width = integer();
      expect('x');
      ElemType e = elemType();
      expect('>');
      return VectorType{width, e};
    }
    if (w == "frag") {
      word();
      expect('<');
      std::string role = word();
      FragmentType f;
      if (role == "a")
        f.role = FragmentRole::MatA;
      else if (role == "b")
        f.role = FragmentRole::MatB;
      else if (role == "c")
        f.role = FragmentRole::Accum;
      else
        fail("unknown fragment role '" + role + "'");
      expect(',');
      f.m = shapeInt();
      f.n = shapeInt();
      skip();
      f.k = integer();
      expect(',');
      f.elem = elemType();
      expect('>');
      return f;
    }
    if (w == "memref")
      return memrefType();
    fail("expected type");
  }

  // Integer followed by 'x' inside a shape.
  int64_t shapeInt() {
    int64_t v = integer();
    if (pos_ >= text_.size() || text_[pos_] != 'x')
      fail("expected 'x' in shape");
    ++pos_;
    return v;
  }

  MemRefType memrefType() {
    expectWord("memref");
    expect('<');
    std::vector<int64_t> shape;
    skip();
    while (pos_ < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_])))
      shape.push_back(shapeInt());
    int64_t width = 1;
    ElemType elem;
    if (peekWord() == "vector") {
      word();
      expect('<');
      width = integer();
      expect('x');
      elem = elemType();
      expect('>');
    } else {
      // The element type may be glued to the last 'x' ("64xf16").
      elem = elemType();
    }
    MemRefType t = MemRefType::get(shape, elem, MemorySpace::Global, width);
    while (consumeIf(",")) {
      if (consumeWord("affine_map")) {
        expect('<');
        t.layout = affineMap();
        expect('>');
      } else {
        int64_t space = integer();
        if (space != 3)
          fail("unsupported memory space " + std::to_string(space));
        t.space = MemorySpace::Shared;
      }
    }
    expect('>');
    return t;
  }

  //===--------------------------------------------------------------------===//
  // Affine expressions over values
  //===--------------------------------------------------------------------===//

  using Resolver = std::function<AffineExpr(const std::string &)>;

  // When `operands` is non-null, '%name' references are collected into it.
  AffineExpr expr(const Resolver &resolve, std::vector<ValueId> *operands) {
    AffineExpr acc;
    bool negate = consumeIf("-");
    acc = term(resolve, operands);
    if (negate)
      acc = acc * -1;
    while (true) {
      skip();
      if (consumeIf("+")) {
        acc = acc + term(resolve, operands);
      } else if (peek() == '-' && text_.substr(pos_, 2) != "->") {
        ++pos_;
        acc = acc - term(resolve, operands);
      } else {
        return acc;
      }
    }
  }

  AffineExpr term(const Resolver &resolve, std::vector<ValueId> *operands) {
    AffineExpr acc = factor(resolve, operands);
    while (true) {
      if (consumeIf("*")) {
        AffineExpr rhs = factor(resolve, operands);
        try {
          acc = acc * rhs;
        } catch (const std::invalid_argument &e) {
          fail(e.what());
        }
      } else if (consumeWord("floordiv")) {
        acc = acc.floorDiv(positive());
      } else if (consumeWord("mod")) {
        acc = acc.mod(positive());
      } else {
        return acc;
      }
    }
  }

  int64_t positive() {
    int64_t v = integer();
    if (v <= 0)
      fail("divisor must be positive");
    return v;
  }

  AffineExpr factor(const Resolver &resolve, std::vector<ValueId> *operands) {
    char c = peek();
    if (c == '(') {
      ++pos_;
      AffineExpr e = expr(resolve, operands);
      expect(')');
      return e;
    }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c)))
      return AffineExpr::constant(integer());
    if (c == '%') {
      if (!operands)
        fail("value reference not allowed here");
      ValueId v = useValue();
      if (!std::holds_alternative<IndexType>(fn_->typeOf(v)))
        fail("index expression uses a non-index value");
      auto it = std::find(operands->begin(), operands->end(), v);
      unsigned pos = static_cast<unsigned>(it - operands->begin());
      if (it == operands->end())
        operands->push_back(v);
      return AffineExpr::dim(pos);
    }
    return resolve(word());
  }

  AffineApply valueExprs(size_t count = 1) {
    std::vector<ValueId> operands;
    std::vector<AffineExpr> exprs;
    for (size_t i = 0; i < count; ++i) {
      if (i)
        expect(',');
      exprs.push_back(expr(nullptr, &operands));
    }
    return AffineApply::fromExprs(std::move(exprs), std::move(operands));
  }

  AffineApply indexList() {
    expect('[');
    std::vector<ValueId> operands;
    std::vector<AffineExpr> exprs;
    if (peek() != ']') {
      do {
        exprs.push_back(expr(nullptr, &operands));
      } while (consumeIf(","));
    }
    expect(']');
    return AffineApply::fromExprs(std::move(exprs), std::move(operands));
  }

  //===--------------------------------------------------------------------===//
  // Attributes
  //===--------------------------------------------------------------------===//

  struct Attr {
    std::string key;
    std::optional<int64_t> intValue;
    std::optional<std::string> strValue;
  };

  bool atAttrDict() {
    if (peek() != '{')
      return false;
    size_t save = pos_;
    ++pos_;
    std::string_view w = peekWord();
    pos_ = save;
    return w == "tag" || w == "parallel" || w == "mapping" || w == "ld";
  }

  std::vector<Attr> attrs() {
    std::vector<Attr> out;
    if (!atAttrDict())
      return out;
    expect('{');
    do {
      Attr a;
      a.key = word();
      if (consumeIf("=")) {
        if (peek() == '"')
          a.strValue = quoted();
        else
          a.intValue = integer();
      }
      out.push_back(std::move(a));
    } while (consumeIf(","));
    expect('}');
    return out;
  }

  //===--------------------------------------------------------------------===//
  // Module structure
  //===--------------------------------------------------------------------===//

  Global global() {
    expectWord("global");
    expect('@');
    Global g;
    g.name = word();
    expect(':');
    MemRefType alloc = memrefType();
    if (consumeWord("as")) {
      MemRefType view = memrefType();
      if (view.allocationShape() != alloc.shape || view.elem != alloc.elem ||
          view.space != alloc.space)
        fail("global view does not match its allocation");
      g.type = view;
    } else {
      g.type = alloc;
    }
    return g;
  }

  Function function(const Module &m) {
    module_ = &m;
    Function f;
    fn_ = &f;
    names_.clear();
    scopes_.clear();
    expectWord("func");
    expect('@');
    f.name = word();
    expect('(');
    if (peek() != ')') {
      do {
        std::string n = valueName();
        expect(':');
        Type t = type();
        f.args.push_back(defineValue(n, std::move(t), /*keepName=*/true));
      } while (consumeIf(","));
    }
    expect(')');
    if (consumeWord("launch")) {
      LaunchConfig lc;
      expect('(');
      expectWord("grid");
      expect('=');
      expect('[');
      lc.gridX = integer();
      expect(',');
      lc.gridY = integer();
      expect(']');
      expect(',');
      expectWord("warps");
      expect('=');
      expect('[');
      lc.warpsX = integer();
      expect(',');
      lc.warpsY = integer();
      expect(']');
      expect(')');
      f.launch = lc;
    }
    expect('{');
    f.body = block();
    expect('}');
    fn_ = nullptr;
    return f;
  }

  Block block() {
    Block b;
    while (peek() != '}' && peek() != '\0')
      b.push_back(item());
    return b;
  }

  Node item() {
    std::vector<std::string> results;
    if (peek() == '%') {
      do {
        results.push_back(valueName());
      } while (consumeIf(","));
      expect('=');
    }
    if (peekWord() == "for")
      return loop(results);
    return Node(op(results));
  }

  Node loop(const std::vector<std::string> &resultNames) {
    expectWord("for");
    Loop l;
    std::string ivName = valueName();
    expect('=');
    l.lower = valueExprs();
    expectWord("to");
    l.upper = valueExprs();
    expectWord("step");
    l.step = integer();
    std::vector<std::string> argNames;
    std::vector<Type> argTypes;
    if (consumeWord("iter_args")) {
      expect('(');
      do {
        argNames.push_back(valueName());
        expect('=');
        l.inits.push_back(useValue());
      } while (consumeIf(","));
      expect(')');
      expect("->");
      expect('(');
      do {
        argTypes.push_back(type());
      } while (consumeIf(","));
      expect(')');
      if (argTypes.size() != argNames.size())
        fail("iter_args type list arity mismatch");
    }
    if (resultNames.size() != argNames.size())
      fail("loop result count does not match iter_args");
    for (const Attr &a : attrs()) {
      if (a.key == "tag" && a.strValue)
        l.tag = *a.strValue;
      else if (a.key == "parallel")
        l.parallel = true;
      else if (a.key == "mapping" && a.strValue) {
        static const std::pair<const char *, GpuDim> dims[] = {
            {"block_x", GpuDim::BlockX},
            {"block_y", GpuDim::BlockY},
            {"warp_x", GpuDim::WarpX},
            {"warp_y", GpuDim::WarpY}};
        bool found = false;
        for (auto [n, d] : dims)
          if (*a.strValue == n) {
            l.mapping = d;
            found = true;
          }
        if (!found)
          fail("unknown mapping '" + *a.strValue + "'");
      } else {
        fail("unknown loop attribute '" + a.key + "'");
      }
    }
    scopes_.emplace_back();
    l.iv = defineValue(ivName, IndexType{});
    for (size_t i = 0; i < argNames.size(); ++i)
      l.regionArgs.push_back(defineValue(argNames[i], argTypes[i]));
    expect('{');
    l.body = block();
    expect('}');
    for (const std::string &n : scopes_.back())
      names_.erase(n);
    scopes_.pop_back();
    for (size_t i = 0; i < resultNames.size(); ++i)
      l.results.push_back(defineValue(resultNames[i], argTypes[i]));
    return Node(std::move(l));
  }

  void applyOpAttrs(Op &op) {
    for (const Attr &a : attrs()) {
      if (a.key == "tag" && a.strValue)
        op.tag = *a.strValue;
      else if (a.key == "ld" && a.intValue)
        op.leadingDim = *a.intValue;
      else
        fail("unknown op attribute '" + a.key + "'");
    }
  }

  void checkType(ValueId v, const Type &t) {
    if (!(fn_->typeOf(v) == t))
      fail("type mismatch: value has type " + typeToString(fn_->typeOf(v)) +
           ", annotated " + typeToString(t));
  }

  Op op(const std::vector<std::string> &results) {
    Op op;
    std::string kw = word();
    auto needResults = [&](size_t n) {
      if (results.size() != n)
        fail("'" + kw + "' expects " + std::to_string(n) + " result(s)");
    };
    auto memAccess = [&] {
      op.memref = useValue();
      op.index = indexList();
    };
    if (kw == "const") {
      needResults(1);
      skip();
      size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '.' || text_[pos_] == '-' || text_[pos_] == '+'))
        ++pos_;
      std::string lit(text_.substr(start, pos_ - start));
      op.kind = OpKind::Constant;
      applyOpAttrs(op);
      expect(':');
      Type t = type();
      if (std::holds_alternative<IndexType>(t)) {
        auto r = std::from_chars(lit.data(), lit.data() + lit.size(),
                                 op.intValue);
        if (r.ec != std::errc() || r.ptr != lit.data() + lit.size())
          fail("bad integer constant '" + lit + "'");
      } else {
        auto r = std::from_chars(lit.data(), lit.data() + lit.size(),
                                 op.floatValue);
        if (r.ec != std::errc() || r.ptr != lit.data() + lit.size())
          fail("bad float constant '" + lit + "'");
      }
      op.result = defineValue(results[0], t);
    } else if (kw == "get_global") {
      needResults(1);
      op.kind = OpKind::GetGlobal;
      expect('@');
      op.symbol = word();
      applyOpAttrs(op);
      expect(':');
      op.result = defineValue(results[0], type());
    } else if (kw == "view") {
      needResults(1);
      op.kind = OpKind::ViewCast;
      op.operands.push_back(useValue());
      applyOpAttrs(op);
      expect(':');
      checkType(op.operands[0], type());
      expectWord("to");
      op.result = defineValue(results[0], type());
    } else if (kw == "hw.id") {
      needResults(1);
      op.kind = OpKind::HwId;
      std::string d = word();
      static const std::pair<const char *, HwDim> dims[] = {
          {"block_x", HwDim::BlockX}, {"block_y", HwDim::BlockY},
          {"warp_x", HwDim::WarpX},   {"warp_y", HwDim::WarpY},
          {"thread", HwDim::Thread}};
      bool found = false;
      for (auto [n, hd] : dims)
        if (d == n) {
          op.hw = hd;
          found = true;
        }
      if (!found)
        fail("unknown hardware id '" + d + "'");
      applyOpAttrs(op);
      op.result = defineValue(results[0], IndexType{});
    } else if (kw == "load" || kw == "vload") {
      needResults(1);
      op.kind = kw == "load" ? OpKind::Load : OpKind::VectorLoad;
      memAccess();
      applyOpAttrs(op);
      expect(':');
      checkType(op.memref, type());
      const MemRefType &mt = fn_->memrefType(op.memref);
      Type rt = op.kind == OpKind::Load ? Type(ScalarType{mt.elem})
                                        : Type(VectorType{mt.vectorWidth, mt.elem});
      op.result = defineValue(results[0], rt);
    } else if (kw == "store" || kw == "vstore" || kw == "wmma.store") {
      needResults(0);
      op.kind = kw == "store"    ? OpKind::Store
                : kw == "vstore" ? OpKind::VectorStore
                                 : OpKind::WmmaStore;
      op.operands.push_back(useValue());
      expect(',');
      memAccess();
      applyOpAttrs(op);
      expect(':');
      checkType(op.memref, type());
    } else if (kw == "mulf" || kw == "addf" || kw == "wmma.compute") {
      needResults(1);
      op.kind = kw == "mulf"   ? OpKind::MulF
                : kw == "addf" ? OpKind::AddF
                               : OpKind::WmmaCompute;
      size_t arity = op.kind == OpKind::WmmaCompute ? 3 : 2;
      for (size_t i = 0; i < arity; ++i) {
        if (i)
          expect(',');
        op.operands.push_back(useValue());
      }
      applyOpAttrs(op);
      expect(':');
      op.result = defineValue(results[0], type());
    } else if (kw == "extf") {
      needResults(1);
      op.kind = OpKind::ExtF;
      op.operands.push_back(useValue());
      applyOpAttrs(op);
      expect(':');
      checkType(op.operands[0], type());
      expectWord("to");
      op.result = defineValue(results[0], type());
    } else if (kw == "wmma.load") {
      needResults(1);
      op.kind = OpKind::WmmaLoad;
      memAccess();
      applyOpAttrs(op);
      expect(':');
      checkType(op.memref, type());
      expect("->");
      op.result = defineValue(results[0], type());
    } else if (kw == "barrier") {
      needResults(0);
      op.kind = OpKind::Barrier;
      applyOpAttrs(op);
    } else if (kw == "yield") {
      needResults(0);
      op.kind = OpKind::Yield;
      if (peek() == '%') {
        do {
          op.operands.push_back(useValue());
        } while (consumeIf(","));
      }
      applyOpAttrs(op);
    } else {
      fail("unknown operation '" + kw + "'");
    }
    return op;
  }
};

} // namespace

Module parseModule(std::string_view text) {
  Module m = Parser(text).parse();
  verifyOrThrow(m);
  return m;
}

} // namespace tcmm

//===- affine.cpp - Quasi-affine expressions and maps ---------------------===//

#include "tcmm/affine.h"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace tcmm {

int64_t floorDiv(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0)))
    --q;
  return q;
}

int64_t floorMod(int64_t a, int64_t b) { return a - floorDiv(a, b) * b; }

namespace {

const AffineExpr &zeroExpr() {
  static const AffineExpr zero = AffineExpr::constant(0);
  return zero;
}

int kindRank(AffineKind k) {
  switch (k) {
  case AffineKind::Dim:
    return 0;
  case AffineKind::Symbol:
    return 1;
  case AffineKind::FloorDiv:
    return 2;
  case AffineKind::Mod:
    return 3;
  case AffineKind::Mul:
    return 4;
  case AffineKind::Add:
    return 5;
  case AffineKind::Constant:
    return 6;
  }
  return 7;
}

struct AtomLess {
  bool operator()(const AffineExpr &a, const AffineExpr &b) const {
    return AffineExpr::compare(a, b) < 0;
  }
};

} // namespace

/// Sum of atom*coefficient terms plus a constant.
struct LinearForm {
  std::map<AffineExpr, int64_t, AtomLess> terms;
  int64_t constant = 0;

  void addTerm(const AffineExpr &atom, int64_t coef) {
    if (coef == 0)
      return;
    auto [it, inserted] = terms.emplace(atom, coef);
    if (!inserted) {
      it->second += coef;
      if (it->second == 0)
        terms.erase(it);
    }
  }

  void accumulate(const AffineExpr &e, int64_t scale) {
    switch (e.kind()) {
    case AffineKind::Constant:
      constant += e.value() * scale;
      return;
    case AffineKind::Add:
      accumulate(e.lhs(), scale);
      accumulate(e.rhs(), scale);
      return;
    case AffineKind::Mul:
      accumulate(e.lhs(), scale * e.rhs().value());
      return;
    default:
      addTerm(e, scale);
      return;
    }
  }

  static LinearForm of(const AffineExpr &e) {
    LinearForm f;
    f.accumulate(e, 1);
    return f;
  }

  AffineExpr build() const {
    std::optional<AffineExpr> acc;
    for (const auto &[atom, coef] : terms) {
      AffineExpr term =
          coef == 1 ? atom
                    : AffineExpr(std::make_shared<AffineExpr::Node>(
                          AffineKind::Mul, atom, AffineExpr::constant(coef)));
      acc = acc ? AffineExpr(std::make_shared<AffineExpr::Node>(
                      AffineKind::Add, *acc, term))
                : term;
    }
    if (!acc)
      return AffineExpr::constant(constant);
    if (constant != 0)
      acc = AffineExpr(std::make_shared<AffineExpr::Node>(
          AffineKind::Add, *acc, AffineExpr::constant(constant)));
    return *acc;
  }
};

AffineExpr::AffineExpr() : AffineExpr(zeroExpr()) {}

AffineExpr AffineExpr::dim(unsigned position) {
  return AffineExpr(std::make_shared<Node>(AffineKind::Dim, position));
}
AffineExpr AffineExpr::symbol(unsigned position) {
  return AffineExpr(std::make_shared<Node>(AffineKind::Symbol, position));
}
AffineExpr AffineExpr::constant(int64_t value) {
  return AffineExpr(std::make_shared<Node>(AffineKind::Constant, value));
}

AffineKind AffineExpr::kind() const { return node_->kind; }
int64_t AffineExpr::value() const { return node_->value; }
const AffineExpr &AffineExpr::lhs() const { return node_->lhs; }
const AffineExpr &AffineExpr::rhs() const { return node_->rhs; }

std::optional<int64_t> AffineExpr::constantValue() const {
  if (isConstant())
    return value();
  return std::nullopt;
}

bool AffineExpr::isPureLinear() const {
  switch (kind()) {
  case AffineKind::FloorDiv:
  case AffineKind::Mod:
    return false;
  case AffineKind::Add:
  case AffineKind::Mul:
    return lhs().isPureLinear() && rhs().isPureLinear();
  default:
    return true;
  }
}

int64_t AffineExpr::dimCoefficient(unsigned position) const {
  LinearForm f = LinearForm::of(*this);
  auto it = f.terms.find(AffineExpr::dim(position));
  return it == f.terms.end() ? 0 : it->second;
}

bool AffineExpr::usesDim(unsigned position) const {
  switch (kind()) {
  case AffineKind::Dim:
    return static_cast<unsigned>(value()) == position;
  case AffineKind::Symbol:
  case AffineKind::Constant:
    return false;
  default:
    return lhs().usesDim(position) || rhs().usesDim(position);
  }
}

unsigned AffineExpr::maxDimPlusOne() const {
  switch (kind()) {
  case AffineKind::Dim:
    return static_cast<unsigned>(value()) + 1;
  case AffineKind::Symbol:
  case AffineKind::Constant:
    return 0;
  default:
    return std::max(lhs().maxDimPlusOne(), rhs().maxDimPlusOne());
  }
}

unsigned AffineExpr::maxSymbolPlusOne() const {
  switch (kind()) {
  case AffineKind::Symbol:
    return static_cast<unsigned>(value()) + 1;
  case AffineKind::Dim:
  case AffineKind::Constant:
    return 0;
  default:
    return std::max(lhs().maxSymbolPlusOne(), rhs().maxSymbolPlusOne());
  }
}

int64_t AffineExpr::eval(std::span<const int64_t> dims,
                         std::span<const int64_t> symbols) const {
  switch (kind()) {
  case AffineKind::Dim:
    return dims[static_cast<size_t>(value())];
  case AffineKind::Symbol:
    return symbols[static_cast<size_t>(value())];
  case AffineKind::Constant:
    return value();
  case AffineKind::Add:
    return lhs().eval(dims, symbols) + rhs().eval(dims, symbols);
  case AffineKind::Mul:
    return lhs().eval(dims, symbols) * rhs().value();
  case AffineKind::FloorDiv:
    return tcmm::floorDiv(lhs().eval(dims, symbols), rhs().value());
  case AffineKind::Mod:
    return floorMod(lhs().eval(dims, symbols), rhs().value());
  }
  return 0;
}

AffineExpr AffineExpr::replaceDims(std::span<const AffineExpr> dims) const {
  return replace(dims, {});
}

AffineExpr AffineExpr::replace(std::span<const AffineExpr> dims,
                               std::span<const AffineExpr> symbols) const {
  switch (kind()) {
  case AffineKind::Dim:
    return static_cast<size_t>(value()) < dims.size() ? dims[value()] : *this;
  case AffineKind::Symbol:
    return static_cast<size_t>(value()) < symbols.size() ? symbols[value()]
                                                         : *this;
  case AffineKind::Constant:
    return *this;
  case AffineKind::Add:
    return lhs().replace(dims, symbols) + rhs().replace(dims, symbols);
  case AffineKind::Mul:
    return lhs().replace(dims, symbols) * rhs().value();
  case AffineKind::FloorDiv:
    return lhs().replace(dims, symbols).floorDiv(rhs().value());
  case AffineKind::Mod:
    return lhs().replace(dims, symbols).mod(rhs().value());
  }
  return *this;
}

namespace {

bool needsParens(const AffineExpr &e) {
  return e.kind() == AffineKind::Add;
}

std::string render(const AffineExpr &e,
                   const std::function<std::string(unsigned)> &dimName) {
  switch (e.kind()) {
  case AffineKind::Dim:
    return dimName(static_cast<unsigned>(e.value()));
  case AffineKind::Symbol:
    return "s" + std::to_string(e.value());
  case AffineKind::Constant:
    return std::to_string(e.value());
  case AffineKind::FloorDiv:
  case AffineKind::Mod: {
    std::string inner = render(e.lhs(), dimName);
    if (needsParens(e.lhs()))
      inner = "(" + inner + ")";
    return inner + (e.kind() == AffineKind::FloorDiv ? " floordiv " : " mod ") +
           std::to_string(e.rhs().value());
  }
  case AffineKind::Mul: {
    std::string inner = render(e.lhs(), dimName);
    if (e.lhs().kind() != AffineKind::Dim &&
        e.lhs().kind() != AffineKind::Symbol)
      inner = "(" + inner + ")";
    return inner + " * " + std::to_string(e.rhs().value());
  }
  case AffineKind::Add:
    break;
  }
  // Flatten the canonical left-leaning sum so negative terms print as '-'.
  std::vector<AffineExpr> terms;
  const AffineExpr *cur = &e;
  while (cur->kind() == AffineKind::Add) {
    terms.push_back(cur->rhs());
    cur = &cur->lhs();
  }
  terms.push_back(*cur);
  std::reverse(terms.begin(), terms.end());
  std::string out;
  for (size_t i = 0; i < terms.size(); ++i) {
    const AffineExpr &t = terms[i];
    bool negative = false;
    AffineExpr shown = t;
    if (t.isConstant() && t.value() < 0) {
      negative = true;
      shown = AffineExpr::constant(-t.value());
    } else if (t.kind() == AffineKind::Mul && t.rhs().value() < 0) {
      negative = true;
      shown = t.rhs().value() == -1 ? t.lhs() : t.lhs() * (-t.rhs().value());
    }
    std::string text = render(shown, dimName);
    if (i == 0)
      out = negative ? "-" + text : text;
    else
      out += (negative ? " - " : " + ") + text;
  }
  return out;
}

} // namespace

std::string
AffineExpr::str(const std::function<std::string(unsigned)> &dimName) const {
  return render(*this, dimName);
}

std::string AffineExpr::str() const {
  return str([](unsigned d) { return "d" + std::to_string(d); });
}

AffineExpr operator+(const AffineExpr &a, const AffineExpr &b) {
  LinearForm f = LinearForm::of(a);
  f.accumulate(b, 1);
  return f.build();
}

AffineExpr operator+(const AffineExpr &a, int64_t c) {
  return a + AffineExpr::constant(c);
}

AffineExpr operator-(const AffineExpr &a, const AffineExpr &b) {
  LinearForm f = LinearForm::of(a);
  f.accumulate(b, -1);
  return f.build();
}

AffineExpr operator-(const AffineExpr &a, int64_t c) {
  return a + AffineExpr::constant(-c);
}

AffineExpr operator*(const AffineExpr &a, int64_t c) {
  LinearForm f;
  f.accumulate(a, c);
  return f.build();
}

AffineExpr operator*(const AffineExpr &a, const AffineExpr &b) {
  if (auto c = b.constantValue())
    return a * *c;
  if (auto c = a.constantValue())
    return b * *c;
  throw std::invalid_argument("non-affine product of two non-constant "
                              "expressions");
}

AffineExpr AffineExpr::floorDiv(int64_t divisor) const {
  if (divisor <= 0)
    throw std::invalid_argument("floordiv requires a positive constant");
  if (divisor == 1)
    return *this;
  LinearForm f = LinearForm::of(*this);
  LinearForm quotient, remainder;
  for (const auto &[atom, coef] : f.terms) {
    if (coef % divisor == 0)
      quotient.addTerm(atom, coef / divisor);
    else
      remainder.addTerm(atom, coef);
  }
  quotient.constant = tcmm::floorDiv(f.constant, divisor);
  remainder.constant = floorMod(f.constant, divisor);
  if (!remainder.terms.empty()) {
    AffineExpr node(std::make_shared<Node>(AffineKind::FloorDiv,
                                           remainder.build(),
                                           AffineExpr::constant(divisor)));
    quotient.addTerm(node, 1);
  }
  return quotient.build();
}

AffineExpr AffineExpr::mod(int64_t divisor) const {
  if (divisor <= 0)
    throw std::invalid_argument("mod requires a positive constant");
  if (divisor == 1)
    return AffineExpr::constant(0);
  LinearForm f = LinearForm::of(*this);
  LinearForm remainder;
  for (const auto &[atom, coef] : f.terms) {
    int64_t r = floorMod(coef, divisor);
    if (r != 0)
      remainder.addTerm(atom, r);
  }
  remainder.constant = floorMod(f.constant, divisor);
  if (remainder.terms.empty())
    return AffineExpr::constant(remainder.constant);
  return AffineExpr(std::make_shared<Node>(
      AffineKind::Mod, remainder.build(), AffineExpr::constant(divisor)));
}

int AffineExpr::compare(const AffineExpr &a, const AffineExpr &b) {
  if (a.node_ == b.node_)
    return 0;
  int ra = kindRank(a.kind()), rb = kindRank(b.kind());
  if (ra != rb)
    return ra < rb ? -1 : 1;
  switch (a.kind()) {
  case AffineKind::Dim:
  case AffineKind::Symbol:
  case AffineKind::Constant:
    if (a.value() == b.value())
      return 0;
    return a.value() < b.value() ? -1 : 1;
  default:
    if (int c = compare(a.rhs(), b.rhs()))
      return c;
    return compare(a.lhs(), b.lhs());
  }
}

bool operator==(const AffineExpr &a, const AffineExpr &b) {
  return AffineExpr::compare(a, b) == 0;
}

AffineMap::AffineMap(unsigned numDims, unsigned numSymbols,
                     std::vector<AffineExpr> results)
    : numDims_(numDims), numSymbols_(numSymbols), results_(std::move(results)) {
}

AffineMap AffineMap::identity(unsigned rank) {
  std::vector<AffineExpr> results;
  for (unsigned d = 0; d < rank; ++d)
    results.push_back(AffineExpr::dim(d));
  return AffineMap(rank, 0, std::move(results));
}

AffineMap AffineMap::strided(std::span<const int64_t> strides) {
  AffineExpr e = AffineExpr::constant(0);
  for (unsigned d = 0; d < strides.size(); ++d)
    e = e + AffineExpr::dim(d) * strides[d];
  return AffineMap(static_cast<unsigned>(strides.size()), 0, {e});
}

AffineMap AffineMap::constant(int64_t value) {
  return AffineMap(0, 0, {AffineExpr::constant(value)});
}

std::vector<int64_t> AffineMap::eval(std::span<const int64_t> dims,
                                     std::span<const int64_t> symbols) const {
  std::vector<int64_t> out;
  out.reserve(results_.size());
  for (const auto &r : results_)
    out.push_back(r.eval(dims, symbols));
  return out;
}

AffineMap AffineMap::replaceDims(std::span<const AffineExpr> dims,
                                 unsigned newNumDims) const {
  std::vector<AffineExpr> results;
  results.reserve(results_.size());
  for (const auto &r : results_)
    results.push_back(r.replaceDims(dims));
  return AffineMap(newNumDims, numSymbols_, std::move(results));
}

bool AffineMap::isIdentity() const {
  if (numResults() != numDims_)
    return false;
  for (unsigned d = 0; d < numDims_; ++d)
    if (results_[d] != AffineExpr::dim(d))
      return false;
  return true;
}

std::optional<std::vector<int64_t>> AffineMap::linearStrides() const {
  if (numResults() != 1 || !results_[0].isPureLinear())
    return std::nullopt;
  std::vector<int64_t> strides;
  for (unsigned d = 0; d < numDims_; ++d)
    strides.push_back(results_[0].dimCoefficient(d));
  return strides;
}

std::string AffineMap::str() const {
  std::string out = "(";
  for (unsigned d = 0; d < numDims_; ++d)
    out += (d ? ", d" : "d") + std::to_string(d);
  out += ")";
  if (numSymbols_) {
    out += "[";
    for (unsigned s = 0; s < numSymbols_; ++s)
      out += (s ? ", s" : "s") + std::to_string(s);
    out += "]";
  }
  out += " -> (";
  for (unsigned i = 0; i < results_.size(); ++i)
    out += (i ? ", " : "") + results_[i].str();
  return out + ")";
}

bool operator==(const AffineMap &a, const AffineMap &b) {
  return a.numDims_ == b.numDims_ && a.numSymbols_ == b.numSymbols_ &&
         a.results_ == b.results_;
}

} // namespace tcmm

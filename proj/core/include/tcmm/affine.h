//===- affine.h - Quasi-affine expressions and maps --------------*- C++ -*-===//
//
// AffineExpr values are immutable and always kept in a canonical form: a sum
// of (atom * coefficient) terms ordered by atom, followed by a constant. Atoms
// are dims, symbols, and floordiv/mod nodes. Two expressions denote the same
// linear function iff they compare equal, which is what CSE and the loop
// transforms rely on.
//
//===----------------------------------------------------------------------===//

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tcmm {

enum class AffineKind : uint8_t { Dim, Symbol, Constant, Add, Mul, FloorDiv, Mod };

class AffineExpr {
public:
  AffineExpr(); // constant 0
  static AffineExpr dim(unsigned position);
  static AffineExpr symbol(unsigned position);
  static AffineExpr constant(int64_t value);

  AffineKind kind() const;
  /// Position for dims/symbols, value for constants.
  int64_t value() const;
  /// Children of Add/Mul/FloorDiv/Mod. The rhs of Mul/FloorDiv/Mod is always
  /// a constant.
  const AffineExpr &lhs() const;
  const AffineExpr &rhs() const;

  bool isConstant() const { return kind() == AffineKind::Constant; }
  std::optional<int64_t> constantValue() const;
  /// True if the expression contains no floordiv/mod.
  bool isPureLinear() const;
  /// Coefficient of dim `position` if the expression is purely linear.
  int64_t dimCoefficient(unsigned position) const;
  bool usesDim(unsigned position) const;
  unsigned maxDimPlusOne() const;
  unsigned maxSymbolPlusOne() const;

  int64_t eval(std::span<const int64_t> dims,
               std::span<const int64_t> symbols = {}) const;
  AffineExpr replaceDims(std::span<const AffineExpr> dims) const;
  AffineExpr replace(std::span<const AffineExpr> dims,
                     std::span<const AffineExpr> symbols) const;

  /// Renders using the given names for dims (and s<N> for symbols).
  std::string str(const std::function<std::string(unsigned)> &dimName) const;
  std::string str() const;

  friend AffineExpr operator+(const AffineExpr &a, const AffineExpr &b);
  friend AffineExpr operator+(const AffineExpr &a, int64_t c);
  friend AffineExpr operator-(const AffineExpr &a, const AffineExpr &b);
  friend AffineExpr operator-(const AffineExpr &a, int64_t c);
  friend AffineExpr operator*(const AffineExpr &a, int64_t c);
  /// Product of two expressions; one side must be constant.
  friend AffineExpr operator*(const AffineExpr &a, const AffineExpr &b);
  AffineExpr floorDiv(int64_t divisor) const;
  AffineExpr mod(int64_t divisor) const;

  friend bool operator==(const AffineExpr &a, const AffineExpr &b);
  friend bool operator!=(const AffineExpr &a, const AffineExpr &b) {
    return !(a == b);
  }
  /// Total order over canonical expressions.
  static int compare(const AffineExpr &a, const AffineExpr &b);

  struct Node;

private:
  explicit AffineExpr(std::shared_ptr<const Node> node)
      : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
  friend struct LinearForm;
};

struct AffineExpr::Node {
  AffineKind kind;
  int64_t value = 0;
  AffineExpr lhs, rhs;
  Node(AffineKind k, int64_t v) : kind(k), value(v), lhs(nullptr), rhs(nullptr) {}
  Node(AffineKind k, AffineExpr l, AffineExpr r)
      : kind(k), lhs(std::move(l)), rhs(std::move(r)) {}
};

/// Floor division and non-negative modulo for a positive divisor.
int64_t floorDiv(int64_t a, int64_t b);
int64_t floorMod(int64_t a, int64_t b);

class AffineMap {
public:
  AffineMap() = default;
  AffineMap(unsigned numDims, unsigned numSymbols,
            std::vector<AffineExpr> results);

  static AffineMap identity(unsigned rank);
  /// Row-major layout with the given strides.
  static AffineMap strided(std::span<const int64_t> strides);
  static AffineMap constant(int64_t value);

  unsigned numDims() const { return numDims_; }
  unsigned numSymbols() const { return numSymbols_; }
  unsigned numResults() const { return static_cast<unsigned>(results_.size()); }
  const std::vector<AffineExpr> &results() const { return results_; }
  const AffineExpr &result(unsigned i) const { return results_.at(i); }

  std::vector<int64_t> eval(std::span<const int64_t> dims,
                            std::span<const int64_t> symbols = {}) const;
  /// Substitutes every dim of this map by the corresponding expression; the
  /// result map has `newNumDims` dims.
  AffineMap replaceDims(std::span<const AffineExpr> dims,
                        unsigned newNumDims) const;
  bool isIdentity() const;
  /// Strides if every result is purely linear and the map has a single result.
  std::optional<std::vector<int64_t>> linearStrides() const;

  std::string str() const;

  friend bool operator==(const AffineMap &a, const AffineMap &b);
  friend bool operator!=(const AffineMap &a, const AffineMap &b) {
    return !(a == b);
  }

private:
  unsigned numDims_ = 0;
  unsigned numSymbols_ = 0;
  std::vector<AffineExpr> results_;
};

} // namespace tcmm

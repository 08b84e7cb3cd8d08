//===- ir.h - Structured loop IR for tensor-core matmul lowering -*- C++ -*-===//
//
// A module holds named shared-memory globals and functions. A function body is
// a tree of loops and operations over single-assignment values. Loops carry
// state only through iter_args; memory operations index memrefs through an
// affine map applied to index-typed operands.
//
//===----------------------------------------------------------------------===//

#pragma once

#include "tcmm/affine.h"
#include "tcmm/numeric.h"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tcmm {

enum class MemorySpace : uint8_t { Global, Shared, Fragment };

struct MemRefType {
  std::vector<int64_t> shape;
  ElemType elem = ElemType::F32;
  /// 1 for scalar elements; N for a vector<N x elem> view of the storage.
  int64_t vectorWidth = 1;
  /// Logical index -> linear offset, in units of (vector) elements.
  AffineMap layout;
  MemorySpace space = MemorySpace::Global;

  /// Row-major identity layout.
  static MemRefType get(std::vector<int64_t> shape, ElemType elem,
                        MemorySpace space = MemorySpace::Global,
                        int64_t vectorWidth = 1);

  unsigned rank() const { return static_cast<unsigned>(shape.size()); }
  int64_t numElements() const;
  /// Row strides when the layout is purely linear.
  std::optional<std::vector<int64_t>> strides() const;
  /// Number of (vector) elements the layout spans, padding included.
  int64_t footprint() const;
  /// Allocated extents implied by a strided layout (e.g. 128x72 for a 128x64
  /// buffer with row stride 72). Equals `shape` for the identity layout.
  std::vector<int64_t> allocationShape() const;
  int64_t allocationBytes() const {
    return footprint() * vectorWidth * elemBytes(elem);
  }
  bool isIdentityLayout() const;

  friend bool operator==(const MemRefType &, const MemRefType &) = default;
};

enum class FragmentRole : uint8_t { MatA, MatB, Accum };
std::string_view toString(FragmentRole r);

struct FragmentType {
  FragmentRole role = FragmentRole::Accum;
  int64_t m = 16, n = 16, k = 16;
  ElemType elem = ElemType::F32;
  /// Rows and columns of the tile this fragment holds.
  int64_t rows() const { return role == FragmentRole::MatB ? k : m; }
  int64_t cols() const { return role == FragmentRole::MatA ? k : n; }
  friend bool operator==(const FragmentType &, const FragmentType &) = default;
};

struct IndexType {
  friend bool operator==(const IndexType &, const IndexType &) = default;
};
struct ScalarType {
  ElemType elem;
  friend bool operator==(const ScalarType &, const ScalarType &) = default;
};
struct VectorType {
  int64_t width;
  ElemType elem;
  friend bool operator==(const VectorType &, const VectorType &) = default;
};

using Type =
    std::variant<IndexType, ScalarType, VectorType, MemRefType, FragmentType>;

std::string typeToString(const Type &t);

using ValueId = uint32_t;
constexpr ValueId kNoValue = ~0u;

/// An affine map applied to index-typed operands: loop bounds (one result)
/// and memory-access indices (one result per memref dimension).
struct AffineApply {
  AffineMap map;
  std::vector<ValueId> operands;

  static AffineApply constant(int64_t v) { return {AffineMap::constant(v), {}}; }
  static AffineApply value(ValueId v) {
    return {AffineMap(1, 0, {AffineExpr::dim(0)}), {v}};
  }
  /// Builds from expressions over the given operand list, dropping unused and
  /// duplicate operands.
  static AffineApply fromExprs(std::vector<AffineExpr> exprs,
                               std::vector<ValueId> operands);
  /// Expression of result `i` with dims renamed to the ids of its operands.
  std::optional<int64_t> constantValue() const;
  void canonicalize();
  /// Same function with operands sorted by id; equal applies compare equal.
  AffineApply normalized() const;
  bool uses(ValueId v) const;
  friend bool operator==(const AffineApply &, const AffineApply &) = default;
};

enum class OpKind : uint8_t {
  Constant,
  GetGlobal,
  ViewCast,
  HwId,
  Load,
  Store,
  VectorLoad,
  VectorStore,
  MulF,
  AddF,
  ExtF,
  WmmaLoad,
  WmmaCompute,
  WmmaStore,
  Barrier,
  Yield,
};

std::string_view toString(OpKind k);

enum class HwDim : uint8_t { BlockX, BlockY, WarpX, WarpY, Thread };
std::string_view toString(HwDim d);

struct Op {
  OpKind kind = OpKind::Barrier;
  ValueId result = kNoValue;
  /// Data operands: stored value, arithmetic inputs, WMMA fragments (A, B, C),
  /// yielded values, view source.
  std::vector<ValueId> operands;
  /// Memory operand of load/store-like ops.
  ValueId memref = kNoValue;
  AffineApply index;

  double floatValue = 0; // Constant (float-typed)
  int64_t intValue = 0;  // Constant (index-typed)
  std::string symbol;    // GetGlobal
  HwDim hw = HwDim::Thread;
  int64_t leadingDim = 0; // WmmaLoad/WmmaStore
  /// Provenance tag, e.g. "copy_a" for ops created by shared-copy generation.
  std::string tag;

  bool hasResult() const { return result != kNoValue; }
  bool isMemoryAccess() const;
  bool readsMemory() const;
  bool writesMemory() const;
  friend bool operator==(const Op &, const Op &) = default;
};

enum class GpuDim : uint8_t { BlockX, BlockY, WarpX, WarpY };
std::string_view toString(GpuDim d);

struct Node;

struct Loop {
  ValueId iv = kNoValue;
  AffineApply lower, upper;
  int64_t step = 1;
  std::vector<ValueId> regionArgs;
  std::vector<ValueId> inits;
  std::vector<ValueId> results;
  std::vector<Node> body;

  std::string tag;
  bool parallel = false;
  std::optional<GpuDim> mapping;

  /// Compile-time trip count, if (upper - lower) folds to a constant.
  std::optional<int64_t> tripCount() const;
  /// Yield op at the end of the body, if any.
  const Op *yield() const;
  Op *yield();
};

struct Node {
  std::variant<Op, Loop> v;

  Node(Op op) : v(std::move(op)) {}
  Node(Loop loop) : v(std::move(loop)) {}

  bool isOp() const { return std::holds_alternative<Op>(v); }
  bool isLoop() const { return std::holds_alternative<Loop>(v); }
  Op &op() { return std::get<Op>(v); }
  const Op &op() const { return std::get<Op>(v); }
  Loop &loop() { return std::get<Loop>(v); }
  const Loop &loop() const { return std::get<Loop>(v); }
};

using Block = std::vector<Node>;

struct ValueInfo {
  Type type;
  std::string name; // optional print name (function arguments)
};

struct LaunchConfig {
  int64_t gridX = 1, gridY = 1;
  int64_t warpsX = 1, warpsY = 1;
  static constexpr int64_t threadsPerWarp = 32;
  int64_t warps() const { return warpsX * warpsY; }
  int64_t blockThreads() const { return warps() * threadsPerWarp; }
  friend bool operator==(const LaunchConfig &, const LaunchConfig &) = default;
};

struct Function {
  std::string name;
  std::vector<ValueId> args;
  Block body;
  std::vector<ValueInfo> values;
  /// Set once the function has been mapped onto the GPU hierarchy.
  std::optional<LaunchConfig> launch;

  ValueId newValue(Type type, std::string name = {});
  const Type &typeOf(ValueId v) const { return values.at(v).type; }
  const MemRefType &memrefType(ValueId v) const;
  ValueId arg(std::string_view name) const;
};

struct Global {
  std::string name;
  MemRefType type;
};

struct Module {
  std::vector<Global> globals;
  std::vector<Function> funcs;

  const Global *global(std::string_view name) const;
  Global *global(std::string_view name);
  Function &func() { return funcs.at(0); }
  const Function &func() const { return funcs.at(0); }
};

//===----------------------------------------------------------------------===//
// Traversal helpers
//===----------------------------------------------------------------------===//

void walkOps(const Block &block, const std::function<void(const Op &)> &fn);
void walkOps(Block &block, const std::function<void(Op &)> &fn);
void walkLoops(const Block &block, const std::function<void(const Loop &)> &fn);
void walkLoops(Block &block, const std::function<void(Loop &)> &fn);

/// Every value used by ops/loops inside `block` (operands, memrefs, index
/// operands, bound operands, inits).
std::vector<ValueId> usedValues(const Block &block);
/// Every value defined inside `block`.
std::vector<ValueId> definedValues(const Block &block);

/// Finds the first loop (pre-order) with the given tag.
Loop *findLoop(Block &block, std::string_view tag);
const Loop *findLoop(const Block &block, std::string_view tag);
size_t countLoops(const Block &block);
size_t countOps(const Block &block, OpKind kind);

/// Replaces every use of `from` by `to` in data operands, memrefs, index and
/// bound operands, inits and yields.
void replaceAllUses(Block &block, ValueId from, ValueId to);

/// Structural equality modulo value numbering.
bool structurallyEqual(const Module &a, const Module &b);

} // namespace tcmm

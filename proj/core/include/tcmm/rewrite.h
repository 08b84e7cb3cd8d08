//===- rewrite.h - Cloning and substitution helpers for passes ---*- C++ -*-===//

#pragma once

#include "tcmm/ir.h"

#include <unordered_map>

namespace tcmm {

using ValueMap = std::unordered_map<ValueId, ValueId>;

ValueId remap(const ValueMap &map, ValueId v);
AffineApply remap(const ValueMap &map, const AffineApply &a);

/// Deep copy of `b` with fresh values for everything it defines. Uses of
/// values found in `map` are redirected; new definitions are added to it.
Block cloneBlock(Function &f, const Block &b, ValueMap &map);
Node cloneNode(Function &f, const Node &n, ValueMap &map);

/// Single-result apply of `e` over `operands` (dims index into operands).
AffineApply affine(const AffineExpr &e, std::vector<ValueId> operands);
/// a + c.
AffineApply shifted(const AffineApply &a, int64_t c);

/// Replaces uses of index value `v` inside `a` by the single-result `repl`.
AffineApply substitute(const AffineApply &a, ValueId v,
                       const AffineApply &repl);
/// Same, over every index and loop bound in the block.
void substituteInBlock(Block &b, ValueId v, const AffineApply &repl);

/// Expression of single-result `a` as a function of `operands` (which must
/// include every operand of `a`).
AffineExpr exprOver(const AffineApply &a, const std::vector<ValueId> &operands,
                    unsigned result = 0);

} // namespace tcmm

//===- text.h - Textual IR format --------------------------------*- C++ -*-===//
//
// Grammar (whitespace-insensitive, `//` comments):
//
//   module   ::= 'module' '{' global* func* '}'
//   global   ::= 'global' '@'name ':' memref-type ('as' memref-type)?
//   func     ::= 'func' '@'name '(' (arg (',' arg)*)? ')' launch? '{' item* '}'
//   launch   ::= 'launch' '(' 'grid' '=' '[' int ',' int ']' ','
//                            'warps' '=' '[' int ',' int ']' ')'
//   arg      ::= '%'name ':' memref-type
//   item     ::= loop | op
//   loop     ::= (results '=')? 'for' '%'iv '=' expr 'to' expr 'step' int
//                ('iter_args' '(' '%'a '=' '%'v (',' ...)* ')' '->' '(' types ')')?
//                attrs? '{' item* '}'
//   op       ::= (value '=')? opname operands attrs? (':' types)?
//   expr     ::= quasi-affine expression over '%'values and integers using
//                + - * floordiv mod and parentheses
//   attrs    ::= '{' (key ('=' (int | string))? (',' ...)*)? '}'
//
// Shared buffers print their allocated extents first, then the logical view
// when padding makes them differ:
//   global @a_smem : memref<128x72xf16, 3> as
//       memref<128x64xf16, affine_map<(d0, d1) -> (d0 * 72 + d1)>, 3>
//
//===----------------------------------------------------------------------===//

#pragma once

#include "tcmm/ir.h"

#include <stdexcept>
#include <string>
#include <string_view>

namespace tcmm {

std::string printModule(const Module &m);

class ParseError : public std::runtime_error {
public:
  ParseError(int line, int column, const std::string &message);
  int line() const { return line_; }
  int column() const { return column_; }

private:
  int line_, column_;
};

/// Parses and verifies. Throws ParseError on syntax errors and VerifyError
/// (see verifier.h) when the parsed module is ill-typed.
Module parseModule(std::string_view text);

} // namespace tcmm

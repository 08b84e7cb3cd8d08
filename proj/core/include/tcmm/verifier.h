//===- verifier.h - Structural IR verifier -----------------------*- C++ -*-===//

#pragma once

#include "tcmm/ir.h"

#include <stdexcept>
#include <string>
#include <vector>

namespace tcmm {

struct Diagnostic {
  /// Printed form of the offending op or loop header.
  std::string location;
  /// Short rule identifier, e.g. "yield/iter_args mismatch".
  std::string rule;
  std::string message;

  std::string str() const;
};

/// Checks every structural and typing invariant of the IR. Never throws.
std::vector<Diagnostic> verify(const Module &m);

class VerifyError : public std::runtime_error {
public:
  explicit VerifyError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic> &diagnostics() const { return diagnostics_; }

private:
  std::vector<Diagnostic> diagnostics_;
};

/// Throws VerifyError when verify(m) reports anything.
void verifyOrThrow(const Module &m);

} // namespace tcmm

//===- builder.h - Naive matmul starting point -------------------*- C++ -*-===//

#pragma once

#include "tcmm/config.h"
#include "tcmm/ir.h"

namespace tcmm {

/// func @matmul(%A: MxK f16, %B: KxN f16, %C: MxN accum) with the i/j/k nest
/// computing C[i][j] += A[i][k] * B[k][j]. Loops are tagged "i", "j", "k".
Module buildNaiveMatmul(const ProblemConfig &p);

} // namespace tcmm

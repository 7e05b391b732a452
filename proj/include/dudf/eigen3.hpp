#pragma once

#include "dudf/common.hpp"
#include "dudf/jet.hpp"

namespace dudf {

/// Eigenpairs of a symmetric 3x3 matrix ordered by |lambda| descending.
/// Column i of `vectors` pairs with values[i] and is flipped so that its
/// largest-magnitude component is positive (first such component on ties).
struct EigenDecomp3 {
  Vec3 values = Vec3::Zero();
  Mat3 vectors = Mat3::Identity();
  /// |lambda1| - |lambda2| < 1e-9 * ||H||_F, including H = 0.
  bool degenerate = true;

  Vec3 principal() const { return vectors.col(0); }
  /// |lambda1| - |lambda2|.
  double gap() const;
};

EigenDecomp3 symmetric_eig3(const Mat3& h);
EigenDecomp3 symmetric_eig3(const SymmetricEntries& h);

}  // namespace dudf

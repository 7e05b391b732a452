#include "dudf/eigen3.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>

namespace dudf {

double EigenDecomp3::gap() const { return std::abs(values[0]) - std::abs(values[1]); }

EigenDecomp3 symmetric_eig3(const Mat3& h) {
  const Eigen::SelfAdjointEigenSolver<Mat3> solver(h, Eigen::ComputeEigenvectors);
  const Vec3 ev = solver.eigenvalues();
  const Mat3 vecs = solver.eigenvectors();

  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(ev[a]) > std::abs(ev[b]); });

  EigenDecomp3 out;
  for (int k = 0; k < 3; ++k) {
    out.values[k] = ev[order[k]];
    Vec3 v = vecs.col(order[k]);
    int lead = 0;
    for (int c = 1; c < 3; ++c)
      if (std::abs(v[c]) > std::abs(v[lead])) lead = c;
    if (v[lead] < 0.0) v = -v;
    out.vectors.col(k) = v;
  }
  const double norm = h.norm();
  out.degenerate = !(out.gap() >= 1e-9 * norm) || norm == 0.0;
  return out;
}

EigenDecomp3 symmetric_eig3(const SymmetricEntries& h) { return symmetric_eig3(to_matrix(h)); }

}  // namespace dudf

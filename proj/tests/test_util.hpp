// Copyright 2026 The qpt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Seeded random matrices for property tests.

#include "qpt/qpt.hpp"

#include <vector>

namespace qpt::testing {

inline CMatrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      m(i, j) = cplx(re, im);
    }
  }
  return m;
}

inline CMatrix random_hermitian(Rng& rng, Eigen::Index d) {
  const CMatrix a = random_matrix(rng, d, d);
  return 0.5 * (a + a.adjoint());
}

inline CMatrix random_unitary(Rng& rng, Eigen::Index d) {
  Eigen::HouseholderQR<CMatrix> qr(random_matrix(rng, d, d));
  return qr.householderQ() * CMatrix::Identity(d, d);
}

inline CVector random_state(Rng& rng, Eigen::Index d) {
  CVector v = random_matrix(rng, d, 1).col(0);
  return v / v.norm();
}

/// Rank-r density matrix with generic spectrum.
inline CMatrix random_density(Rng& rng, Eigen::Index d, Eigen::Index r) {
  const CMatrix c = random_matrix(rng, d, r);
  const CMatrix rho = c * c.adjoint();
  return rho / std::real(rho.trace());
}

/// m Kraus operators of a trace-preserving map: blocks of a random isometry
/// from C^s into C^(m s).
inline KrausSet random_kraus(Rng& rng, int s, int m) {
  const CMatrix a = random_matrix(rng, static_cast<Eigen::Index>(m) * s, s);
  Eigen::HouseholderQR<CMatrix> qr(a);
  const CMatrix v = qr.householderQ() * CMatrix::Identity(static_cast<Eigen::Index>(m) * s, s);
  std::vector<CMatrix> ops;
  for (int k = 0; k < m; ++k) ops.push_back(v.block(static_cast<Eigen::Index>(k) * s, 0, s, s));
  return KrausSet(s, ops);
}

inline double max_abs(const CMatrix& m) { return qpt::detail::max_abs(m); }

}  // namespace qpt::testing

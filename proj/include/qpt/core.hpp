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

// Complex-matrix and quantum-state primitives shared by every other header.
//
// Composite spaces are ordered (input ⊗ output) with the input index slow:
// vectorize() stacks columns, so entry M(k, j) lands at index j*s + k and
// vec(E) = Σ_j |j⟩_in ⊗ E|j⟩_out.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpt {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Base class for every precondition or numerical failure raised by qpt.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Subsystem { input, output };

namespace detail {

inline int exact_sqrt(Eigen::Index n) {
  const auto r = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
  if (r * r != n) return -1;
  return static_cast<int>(r);
}

inline double max_abs(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool all_finite(const CMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i].real()) || !std::isfinite(m.data()[i].imag())) return false;
  }
  return true;
}

}  // namespace detail

inline void require_square(const CMatrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw error(std::string(what) + ": expected a non-empty square matrix");
  }
  if (!detail::all_finite(m)) throw error(std::string(what) + ": non-finite entries");
}

inline double hermiticity_residual(const CMatrix& m) {
  return detail::max_abs(m - m.adjoint());
}

inline CVector vectorize(const CMatrix& m) {
  require_square(m, "vectorize");
  return Eigen::Map<const CVector>(m.data(), m.size());
}

inline CMatrix unvectorize(const CVector& v) {
  const int s = detail::exact_sqrt(v.size());
  if (s <= 0) throw error("unvectorize: length " + std::to_string(v.size()) + " is not a perfect square");
  return Eigen::Map<const CMatrix>(v.data(), s, s);
}

/// Kronecker product a ⊗ b.
inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// Traces out `which` factor of an (input ⊗ output) operator of dimension s².
inline CMatrix partial_trace(const CMatrix& m, Subsystem which) {
  require_square(m, "partial_trace");
  const int s = detail::exact_sqrt(m.rows());
  if (s <= 0) throw error("partial_trace: dimension " + std::to_string(m.rows()) + " is not s^2");
  CMatrix out = CMatrix::Zero(s, s);
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) {
      cplx acc = 0.0;
      for (int k = 0; k < s; ++k) {
        acc += which == Subsystem::output ? m(a * s + k, b * s + k) : m(k * s + a, k * s + b);
      }
      out(a, b) = acc;
    }
  }
  return out;
}

struct EigenDecomposition {
  RVector values;   // descending
  CMatrix vectors;  // columns, unitary
};

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. The input is symmetrized before decomposition.
inline EigenDecomposition hermitian_eig(const CMatrix& m, double tol = 1e-10) {
  require_square(m, "hermitian_eig");
  const double scale = std::max(1.0, detail::max_abs(m));
  if (hermiticity_residual(m) > tol * scale) {
    throw error("hermitian_eig: matrix is not Hermitian (residual " +
                std::to_string(hermiticity_residual(m)) + ")");
  }
  const CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
  if (solver.info() != Eigen::Success) throw error("hermitian_eig: decomposition failed");
  const Eigen::Index n = h.rows();
  EigenDecomposition out{RVector(n), CMatrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

/// Number of eigenvalues above rel_tol * λ_max.
inline int numerical_rank(const CMatrix& m, double rel_tol = 1e-10) {
  const auto eig = hermitian_eig(m);
  const double top = std::max(eig.values(0), 0.0);
  int r = 0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) > rel_tol * top) ++r;
  }
  return r;
}

/// Principal square root of a Hermitian PSD matrix; negative round-off is clipped.
inline CMatrix psd_sqrt(const CMatrix& m) {
  const auto eig = hermitian_eig(m);
  RVector root = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * root.asDiagonal() * eig.vectors.adjoint();
}

/// Throws unless `rho` is a density matrix (Hermitian, PSD and unit trace).
inline void validate_density(const CMatrix& rho, const char* what, double trace_tol = 1e-9) {
  require_square(rho, what);
  if (hermiticity_residual(rho) > 1e-10) throw error(std::string(what) + ": not Hermitian");
  const auto eig = hermitian_eig(rho);
  if (eig.values(eig.values.size() - 1) < -1e-10) {
    throw error(std::string(what) + ": not positive semidefinite");
  }
  if (std::abs(rho.trace() - cplx(1.0)) > trace_tol) throw error(std::string(what) + ": trace is not 1");
}

inline CMatrix projector(const CVector& psi) { return psi * psi.adjoint(); }

/// Uhlmann fidelity (Tr √(√ρ0 ρ √ρ0))². Overshoot above 1 by less than 1e-9
/// is clipped; anything larger is reported as an error.
inline double fidelity(const CMatrix& rho0, const CMatrix& rho) {
  validate_density(rho0, "fidelity");
  validate_density(rho, "fidelity");
  if (rho0.rows() != rho.rows()) throw error("fidelity: dimension mismatch");
  const CMatrix root = psd_sqrt(rho0);
  const CMatrix inner = root * rho * root;
  const auto eig = hermitian_eig(0.5 * (inner + inner.adjoint()), 1e-8);
  // Eigenvalues at round-off level belong to the null space; their square
  // roots would otherwise add O(sqrt(eps)) to the trace.
  const double top = eig.values.size() ? eig.values.maxCoeff() : 0.0;
  const double cutoff = 64.0 * std::numeric_limits<double>::epsilon() * std::max(top, 1.0) * static_cast<double>(rho.rows());
  double tr = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i)
    if (eig.values(i) > cutoff) tr += std::sqrt(eig.values(i));
  double f = tr * tr;
  if (f > 1.0 + 1e-9) throw error("fidelity: value exceeds 1 beyond numerical slack");
  return std::clamp(f, 0.0, 1.0);
}

/// Von Neumann entropy in bits.
inline double von_neumann_entropy(const CMatrix& rho) {
  validate_density(rho, "von_neumann_entropy");
  const auto eig = hermitian_eig(rho);
  double s = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    const double l = eig.values(i);
    if (l > 0.0) s -= l * std::log2(l);
  }
  return std::max(s, 0.0);
}

namespace pauli {

inline CMatrix identity() { return CMatrix::Identity(2, 2); }

inline CMatrix x() {
  CMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline CMatrix y() {
  CMatrix m(2, 2);
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}

inline CMatrix z() {
  CMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace pauli

}  // namespace qpt

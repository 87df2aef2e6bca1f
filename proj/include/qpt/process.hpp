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

// Kraus sets, χ-matrices and Choi states, and the maps between them.

#include "qpt/core.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace qpt {

struct KrausSet {
  int s = 0;
  std::vector<CMatrix> operators;

  KrausSet() = default;
  KrausSet(int dim, std::vector<CMatrix> ops) : s(dim), operators(std::move(ops)) {
    if (s <= 0 || operators.empty()) throw error("KrausSet: need s > 0 and at least one operator");
    for (const auto& e : operators) {
      require_square(e, "KrausSet");
      if (e.rows() != s) throw error("KrausSet: operator dimension differs from s");
    }
  }

  /// ‖Σ E†E − I‖_max
  double completeness_residual() const {
    CMatrix acc = CMatrix::Zero(s, s);
    for (const auto& e : operators) acc += e.adjoint() * e;
    return detail::max_abs(acc - CMatrix::Identity(s, s));
  }

  bool trace_preserving() const { return completeness_residual() < 1e-10; }
  std::size_t size() const { return operators.size(); }
};

enum class ChiNormalization { chi, choi };

/// Process matrix on the (input ⊗ output) space. `chi` normalization has
/// trace s; `choi` normalization (ρ_χ = χ/s) has trace 1.
struct ChiMatrix {
  int s = 0;
  CMatrix matrix;
  ChiNormalization normalization = ChiNormalization::chi;

  ChiMatrix() = default;
  ChiMatrix(int dim, CMatrix m, ChiNormalization norm) : s(dim), matrix(std::move(m)), normalization(norm) {
    require_square(matrix, "ChiMatrix");
    if (matrix.rows() != static_cast<Eigen::Index>(s) * s) throw error("ChiMatrix: matrix must be s^2 x s^2");
  }

  ChiMatrix as_chi() const {
    if (normalization == ChiNormalization::chi) return *this;
    return {s, matrix * static_cast<double>(s), ChiNormalization::chi};
  }

  ChiMatrix as_choi() const {
    if (normalization == ChiNormalization::choi) return *this;
    return {s, matrix / static_cast<double>(s), ChiNormalization::choi};
  }

  /// ‖Tr_out(χ) − I‖_max in chi normalization.
  double trace_preservation_residual() const {
    return detail::max_abs(partial_trace(as_chi().matrix, Subsystem::output) - CMatrix::Identity(s, s));
  }
};

/// The s² × m matrix e whose k-th column is vectorize(E_k).
inline CMatrix kraus_matrix(const KrausSet& k) {
  CMatrix e(static_cast<Eigen::Index>(k.s) * k.s, static_cast<Eigen::Index>(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i) e.col(static_cast<Eigen::Index>(i)) = vectorize(k.operators[i]);
  return e;
}

inline ChiMatrix chi_from_kraus(const KrausSet& k) {
  const CMatrix e = kraus_matrix(k);
  return {k.s, e * e.adjoint(), ChiNormalization::chi};
}

namespace detail {

// Makes the largest-magnitude entry real and positive (first one in
// column-major order among ties).
inline CMatrix fix_global_phase(const CMatrix& m) {
  const double top = max_abs(m);
  if (top == 0.0) return m;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const cplx v = m.data()[i];
    if (std::abs(v) >= top * (1.0 - 1e-12)) return m * (std::abs(v) / v);
  }
  return m;
}

}  // namespace detail

/// Minimal Kraus set of a χ-matrix: one operator per eigenvalue above
/// rel_tol·λ_max, e = U D^{1/2}, phases fixed deterministically.
inline KrausSet kraus_from_chi(const ChiMatrix& chi, double rel_tol = 1e-10) {
  const ChiMatrix c = chi.as_chi();
  const auto eig = hermitian_eig(c.matrix);
  const double top = eig.values(0);
  std::vector<CMatrix> ops;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) <= rel_tol * top) break;
    CVector col = eig.vectors.col(i) * std::sqrt(eig.values(i));
    ops.push_back(detail::fix_global_phase(unvectorize(col)));
  }
  return KrausSet(c.s, std::move(ops));
}

inline CMatrix apply_channel(const KrausSet& k, const CMatrix& rho_in) {
  require_square(rho_in, "apply_channel");
  if (rho_in.rows() != k.s) throw error("apply_channel: dimension mismatch");
  CMatrix out = CMatrix::Zero(k.s, k.s);
  for (const auto& e : k.operators) out += e * rho_in * e.adjoint();
  return out;
}

/// Choi state (I ⊗ E)(|Φ⟩⟨Φ|) built by acting with each Kraus operator on the
/// output factor of the maximally entangled state. Serves as an independent
/// construction of chi_from_kraus(k) / s.
inline ChiMatrix choi_from_channel(const KrausSet& k) {
  const int s = k.s;
  const Eigen::Index d = static_cast<Eigen::Index>(s) * s;
  CVector phi = CVector::Zero(d);
  for (int j = 0; j < s; ++j) phi(j * s + j) = 1.0 / std::sqrt(static_cast<double>(s));
  const CMatrix phi_proj = projector(phi);
  CMatrix out = CMatrix::Zero(d, d);
  const CMatrix id = CMatrix::Identity(s, s);
  for (const auto& e : k.operators) {
    const CMatrix op = kron(id, e);
    out += op * phi_proj * op.adjoint();
  }
  return {s, out, ChiNormalization::choi};
}

namespace detail {

inline void require_normalized(const CVector& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > 1e-12) throw error(std::string(what) + ": state vector is not normalized");
}

}  // namespace detail

/// Tr(E(|c_in⟩⟨c_in|) |c_m⟩⟨c_m|)
inline double direct_probability(const KrausSet& k, const CVector& c_in, const CVector& c_m) {
  detail::require_normalized(c_in, "direct_probability");
  detail::require_normalized(c_m, "direct_probability");
  const CMatrix out = apply_channel(k, projector(c_in));
  return std::real(c_m.dot(out * c_m));
}

/// ⟨c̃|χ|c̃⟩ with |c̃⟩ = |c_in*⟩ ⊗ |c_m⟩.
inline double effective_probability(const ChiMatrix& chi, const CVector& c_in, const CVector& c_m) {
  detail::require_normalized(c_in, "effective_probability");
  detail::require_normalized(c_m, "effective_probability");
  if (c_in.size() != chi.s || c_m.size() != chi.s) throw error("effective_probability: dimension mismatch");
  const CVector eff = kron(CVector(c_in.conjugate()), c_m);
  return std::real(eff.dot(chi.as_chi().matrix * eff));
}

/// Orthonormal operator basis {E, σx, −iσy, σz}/√2, tensor-powered over
/// `qubits` factors. Ordering is (I, X, Y, Z) lexicographic with the first
/// tensor factor most significant.
inline std::vector<CMatrix> pauli_basis(int qubits) {
  if (qubits < 1) throw error("pauli_basis: need at least one qubit");
  const double h = 1.0 / std::sqrt(2.0);
  const std::vector<CMatrix> single = {h * pauli::identity(), h * pauli::x(), cplx(0, -1) * h * pauli::y(),
                                       h * pauli::z()};
  std::vector<CMatrix> basis = single;
  for (int q = 1; q < qubits; ++q) {
    std::vector<CMatrix> next;
    next.reserve(basis.size() * 4);
    for (const auto& a : basis) {
      for (const auto& b : single) next.push_back(kron(a, b));
    }
    basis = std::move(next);
  }
  return basis;
}

/// max_{j,k} |Tr(a_j a_k†) − δ_jk|
inline double basis_orthonormality_check(const std::vector<CMatrix>& basis) {
  double worst = 0.0;
  for (std::size_t j = 0; j < basis.size(); ++j) {
    for (std::size_t k = 0; k < basis.size(); ++k) {
      if (basis[j].rows() != basis[k].rows() || basis[j].cols() != basis[k].cols()) {
        throw error("basis_orthonormality_check: unequal dimensions");
      }
      const cplx g = (basis[j] * basis[k].adjoint()).trace();
      worst = std::max(worst, std::abs(g - cplx(j == k ? 1.0 : 0.0)));
    }
  }
  return worst;
}

enum class BasisDirection { natural_to_pauli, pauli_to_natural };

inline ChiMatrix chi_change_basis(const ChiMatrix& chi, BasisDirection dir) {
  int qubits = 0;
  for (int v = chi.s; v > 1; v >>= 1) {
    if (v & 1) throw error("chi_change_basis: s must be a power of 2");
    ++qubits;
  }
  if (qubits == 0) throw error("chi_change_basis: s must be a power of 2");
  const auto basis = pauli_basis(qubits);
  const Eigen::Index d = chi.matrix.rows();
  CMatrix u0(d, d);
  for (Eigen::Index j = 0; j < d; ++j) u0.col(j) = vectorize(basis[static_cast<std::size_t>(j)]);
  CMatrix m = dir == BasisDirection::natural_to_pauli ? CMatrix(u0.adjoint() * chi.matrix * u0)
                                                      : CMatrix(u0 * chi.matrix * u0.adjoint());
  return {chi.s, m, chi.normalization};
}

/// e' = eU; leaves ee† unchanged.
inline CMatrix unitary_mix(const CMatrix& e, const CMatrix& u) {
  if (u.rows() != u.cols() || u.rows() != e.cols()) throw error("unitary_mix: U must be m x m");
  const CMatrix gram = u.adjoint() * u;
  if (detail::max_abs(gram - CMatrix::Identity(u.rows(), u.cols())) > 1e-10) {
    throw error("unitary_mix: U is not unitary");
  }
  return e * u;
}

/// Real parameters of a rank-r trace-preserving operation in dimension s.
inline std::int64_t parameter_count(int s, int r) {
  const std::int64_t s2 = static_cast<std::int64_t>(s) * s;
  if (s < 1 || r < 1 || r > s2) throw error("parameter_count: rank out of range");
  return 2 * s2 * r - static_cast<std::int64_t>(r) * r - s2;
}

inline int process_rank(const ChiMatrix& chi, double rel_tol = 1e-10) {
  return numerical_rank(chi.matrix, rel_tol);
}

}  // namespace qpt

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

// Poisson maximum likelihood in the purified parameterization ρ = cc†,
// c a d×r complex matrix. The likelihood equation is Ic = Jc with
// I = Σ t_j Λ_j and J = Σ (k_j/λ_j) Λ_j, both acting on each column of c.
//
// The solver starts with the damped fixed-point map
//   c ← (1−β)c + β I⁻¹J(c)c
// and then finishes with Newton steps in the doubled real representation
// x = [Re c_0; Im c_0; Re c_1; Im c_1; ...]. Where the Hessian is not
// negative definite it takes a Fisher-scoring step instead. Every step is
// guarded by a backtracking search that never lowers the likelihood.

#include "qpt/core.hpp"
#include "qpt/process.hpp"
#include "qpt/protocols.hpp"
#include "qpt/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace qpt {

namespace detail {

inline constexpr double kRateFloor = 1e-300;

inline void check_rows(const std::vector<ProtocolRow>& rows, Eigen::Index d, bool need_counts) {
  if (rows.empty()) throw error("ml: empty protocol");
  for (const auto& r : rows) {
    if (r.op.rows() != d || r.op.cols() != d) throw error("ml: row dimension does not match c");
    if (!(r.exposure > 0.0) || !std::isfinite(r.exposure)) throw error("ml: exposures must be positive");
    if (need_counts && (!r.count || *r.count < 0)) throw error("ml: every row needs a nonnegative count");
  }
}

inline double count_of(const ProtocolRow& r) { return static_cast<double>(r.count.value_or(0)); }

/// [[Re M, −Im M], [Im M, Re M]]
inline RMatrix realrep(const CMatrix& m) {
  const Eigen::Index n = m.rows(), k = m.cols();
  RMatrix out(2 * n, 2 * k);
  out.topLeftCorner(n, k) = m.real();
  out.topRightCorner(n, k) = -m.imag();
  out.bottomLeftCorner(n, k) = m.imag();
  out.bottomRightCorner(n, k) = m.real();
  return out;
}

inline RVector to_real(const CMatrix& c) {
  const Eigen::Index d = c.rows();
  RVector x(2 * c.size());
  for (Eigen::Index q = 0; q < c.cols(); ++q) {
    x.segment(2 * d * q, d) = c.col(q).real();
    x.segment(2 * d * q + d, d) = c.col(q).imag();
  }
  return x;
}

inline CMatrix from_real(const RVector& x, Eigen::Index d, Eigen::Index r) {
  CMatrix c(d, r);
  for (Eigen::Index q = 0; q < r; ++q) {
    for (Eigen::Index i = 0; i < d; ++i) c(i, q) = cplx(x(2 * d * q + i), x(2 * d * q + d + i));
  }
  return c;
}

struct LikelihoodProblem {
  Eigen::Index d = 0;
  Eigen::Index r = 0;
  std::vector<CMatrix> ops;
  std::vector<RMatrix> blocks;  // realrep(Λ_j)
  RVector t, k;
  CMatrix info;  // Σ t_j Λ_j
  Eigen::LLT<CMatrix> info_factor;

  LikelihoodProblem(const std::vector<ProtocolRow>& rows, Eigen::Index dim, Eigen::Index rank) : d(dim), r(rank) {
    check_rows(rows, d, true);
    const auto m = static_cast<Eigen::Index>(rows.size());
    t.resize(m);
    k.resize(m);
    info = CMatrix::Zero(d, d);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& row = rows[static_cast<std::size_t>(j)];
      ops.push_back(0.5 * (row.op + row.op.adjoint()));
      blocks.push_back(realrep(ops.back()));
      t(j) = row.exposure;
      k(j) = count_of(row);
      info += t(j) * ops.back();
    }
    const auto eig = hermitian_eig(info);
    if (!(eig.values(d - 1) > 1e-12 * eig.values(0))) {
      throw error("ml: protocol is incomplete (I = sum t_j Lambda_j is singular)");
    }
    info_factor.compute(info);
  }

  // 2Λ_j c in the real representation, i.e. the gradient of λ_j.
  RVector rate_gradient(std::size_t j, const RVector& x) const {
    RVector g(x.size());
    for (Eigen::Index q = 0; q < r; ++q) g.segment(2 * d * q, 2 * d) = 2.0 * blocks[j] * x.segment(2 * d * q, 2 * d);
    return g;
  }

  RVector rates(const RVector& x) const {
    RVector lam(static_cast<Eigen::Index>(ops.size()));
    for (std::size_t j = 0; j < ops.size(); ++j) {
      double acc = 0.0;
      for (Eigen::Index q = 0; q < r; ++q) {
        const auto seg = x.segment(2 * d * q, 2 * d);
        acc += seg.dot(blocks[j] * seg);
      }
      lam(static_cast<Eigen::Index>(j)) = acc;
    }
    return lam;
  }

  // Σ k ln(λ t) − λ t, or −∞ where a counted row has no rate.
  double surrogate(const RVector& lam) const {
    double ll = 0.0;
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
      if (k(j) > 0.0) {
        if (!(lam(j) > 0.0)) return -std::numeric_limits<double>::infinity();
        ll += k(j) * std::log(lam(j) * t(j));
      }
      ll -= lam(j) * t(j);
    }
    return ll;
  }

  // Change of the surrogate along x → x + a·s, with Δλ_j = a sᵀA_j(2x + a s)
  // formed directly so that improvements far below the likelihood's own
  // magnitude are still resolved.
  double surrogate_change(const RVector& x, const RVector& lam, const RVector& s, double a, RVector& lam_out) const {
    lam_out.resize(lam.size());
    double change = 0.0;
    const RVector y = 2.0 * x + a * s;
    for (std::size_t j = 0; j < ops.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      double dl = 0.0;
      for (Eigen::Index q = 0; q < r; ++q) {
        dl += s.segment(2 * d * q, 2 * d).dot(blocks[j] * y.segment(2 * d * q, 2 * d));
      }
      dl *= a;
      lam_out(jj) = lam(jj) + dl;
      if (k(jj) > 0.0) {
        if (!(lam_out(jj) > 0.0) || !(lam(jj) > 0.0)) return -std::numeric_limits<double>::infinity();
        change += k(jj) * std::log1p(dl / lam(jj));
      }
      change -= t(jj) * dl;
    }
    return change;
  }

  CMatrix empirical(const RVector& lam) const {
    CMatrix jm = CMatrix::Zero(d, d);
    for (std::size_t j = 0; j < ops.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (k(jj) > 0.0) jm += (k(jj) / std::max(lam(jj), kRateFloor)) * ops[j];
    }
    return jm;
  }

  double residual(const CMatrix& c, const CMatrix& jm) const {
    const CMatrix ic = info * c;
    const double den = ic.norm();
    return den > 0.0 ? (ic - jm * c).norm() / den : std::numeric_limits<double>::infinity();
  }
};

}  // namespace detail

/// λ_j = Tr(c† Λ_j c)
inline RVector expected_rates(const CMatrix& c, const std::vector<ProtocolRow>& rows) {
  detail::check_rows(rows, c.rows(), false);
  RVector lam(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    lam(static_cast<Eigen::Index>(j)) = std::max(std::real((c.adjoint() * rows[j].op * c).trace()), 0.0);
  }
  return lam;
}

/// Σ_j [k_j ln(λ_j t_j) − λ_j t_j − ln k_j!]; the factorial term is dropped
/// when include_constant is false. Rows with k_j = 0 contribute −λ_j t_j.
inline double log_likelihood(const CMatrix& c, const std::vector<ProtocolRow>& rows, bool include_constant = true) {
  detail::check_rows(rows, c.rows(), true);
  const RVector lam = expected_rates(c, rows);
  double ll = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double k = detail::count_of(rows[j]);
    const double mu = lam(static_cast<Eigen::Index>(j)) * rows[j].exposure;
    if (k > 0.0) {
      if (!(mu > 0.0)) throw error("log_likelihood: zero rate on a row with counts (likelihood is -infinity)");
      ll += k * std::log(mu);
      if (include_constant) ll -= std::lgamma(k + 1.0);
    }
    ll -= mu;
  }
  return ll;
}

struct FisherMatrices {
  CMatrix theoretical;  // I = Σ t_j Λ_j
  CMatrix empirical;    // J = Σ (k_j/λ_j) Λ_j
};

inline FisherMatrices fisher_matrices(const CMatrix& c, const std::vector<ProtocolRow>& rows) {
  detail::check_rows(rows, c.rows(), true);
  const RVector lam = expected_rates(c, rows);
  const Eigen::Index d = c.rows();
  FisherMatrices f{CMatrix::Zero(d, d), CMatrix::Zero(d, d)};
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double k = detail::count_of(rows[j]);
    const double l = lam(static_cast<Eigen::Index>(j));
    f.theoretical += rows[j].exposure * rows[j].op;
    if (k > 0.0) {
      if (!(l > 0.0)) throw error("fisher_matrices: vanishing rate on a row with counts");
      f.empirical += (k / l) * rows[j].op;
    }
  }
  return f;
}

/// 2(J − I)c. Its real part is ∂L/∂Re c and its imaginary part ∂L/∂Im c.
inline CMatrix likelihood_gradient(const CMatrix& c, const std::vector<ProtocolRow>& rows) {
  const auto f = fisher_matrices(c, rows);
  return 2.0 * (f.empirical - f.theoretical) * c;
}

/// (1 − β)c + β I⁻¹J(c)c
inline CMatrix fixed_point_step(const CMatrix& c, const std::vector<ProtocolRow>& rows, double beta = 0.5) {
  if (!(beta > 0.0 && beta <= 1.0)) throw error("fixed_point_step: beta must lie in (0, 1]");
  const auto f = fisher_matrices(c, rows);
  return (1.0 - beta) * c + beta * f.theoretical.llt().solve(f.empirical * c);
}

struct InformationMatrix {
  RMatrix matrix;   // 2dr × 2dr, real representation
  RVector spectrum; // descending
};

/// H = 2 Σ t_j (Λ_j c)(Λ_j c)† / λ_j over the stacked columns of c.
inline InformationMatrix information_matrix(const CMatrix& c, const std::vector<ProtocolRow>& rows) {
  detail::check_rows(rows, c.rows(), false);
  const Eigen::Index d = c.rows(), r = c.cols(), n = d * r;
  const RVector lam = expected_rates(c, rows);
  CMatrix h = CMatrix::Zero(n, n);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double l = lam(static_cast<Eigen::Index>(j));
    if (!(l > 0.0)) continue;
    const CMatrix lc = rows[j].op * c;
    const CVector v = Eigen::Map<const CVector>(lc.data(), n);
    h += (2.0 * rows[j].exposure / l) * (v * v.adjoint());
  }
  InformationMatrix out{RMatrix(2 * n, 2 * n), RVector()};
  for (Eigen::Index p = 0; p < r; ++p) {
    for (Eigen::Index q = 0; q < r; ++q) out.matrix.block(2 * d * p, 2 * d * q, 2 * d, 2 * d) = detail::realrep(h.block(d * p, d * q, d, d));
  }
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<RMatrix> es(out.matrix, Eigen::EigenvaluesOnly);
  out.spectrum = es.eigenvalues().reverse();
  return out;
}

struct ReconstructionConfig {
  int rank = 2;
  double beta = 0.5;
  int max_iterations = 20000;
  double tolerance = 1e-9;
  int fixed_point_iterations = 50;
  bool warm_start = true;  // rank < d: start from the full-rank estimate
  std::uint64_t seed = 1;
  std::optional<CMatrix> initial;  // d×r purification overriding the default start
};

struct ReconstructionResult {
  int s = 0;                  // process dimension; 0 for state reconstructions
  CMatrix c;                  // purification at the optimum (Eq. 26 normalization)
  CMatrix rho;                // cc† / Tr(cc†)
  int iterations = 0;
  int newton_steps = 0;
  int scoring_steps = 0;
  bool converged = false;
  double residual = 0.0;             // ‖(I − J)c‖ / ‖Ic‖
  double log_likelihood = 0.0;       // with the factorial constant
  double normalization_residual = 0.0;  // |Σ λt − Σ k| / Σ k
  std::optional<double> trace_preservation_residual;
  RVector information_spectrum;
  std::int64_t parameters = 0;  // ν

  ChiMatrix chi() const {
    if (s == 0) throw error("ReconstructionResult: state reconstruction has no chi matrix");
    return {s, rho, ChiNormalization::choi};
  }
};

/// Top-r eigenpairs of cc† as a d×r purification.
inline CMatrix truncate_purification(const CMatrix& c, int r) {
  if (r < 1 || r > c.rows()) throw error("truncate_purification: rank out of range");
  const auto eig = hermitian_eig(c * c.adjoint());
  CMatrix out(c.rows(), r);
  for (int q = 0; q < r; ++q) out.col(q) = eig.vectors.col(q) * std::sqrt(std::max(eig.values(q), 0.0));
  return out;
}

namespace detail {

inline CMatrix default_start(const LikelihoodProblem& p, int r, std::uint64_t seed) {
  Rng rng(seed);
  CMatrix c = CMatrix::Zero(p.d, r);
  for (int q = 0; q < r; ++q) c(q, q) = 1.0;
  for (Eigen::Index q = 0; q < r; ++q) {
    for (Eigen::Index i = 0; i < p.d; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      c(i, q) += 1e-3 * cplx(re, im);
    }
  }
  return c;
}

// Rescales c so that Σ λ_j t_j = Σ k_j.
inline CMatrix normalize_start(const LikelihoodProblem& p, CMatrix c) {
  const RVector lam = p.rates(to_real(c));
  const double expected = lam.dot(p.t);
  const double observed = p.k.sum();
  if (!(expected > 0.0)) throw error("ml: initial purification has zero expected counts");
  if (observed > 0.0) c *= std::sqrt(observed / expected);
  return c;
}

struct SolveState {
  CMatrix c;
  int iterations = 0;
  int newton = 0;
  int scoring = 0;
  double residual = 0.0;
  bool converged = false;
};

inline SolveState optimize(const LikelihoodProblem& p, CMatrix c, const ReconstructionConfig& cfg) {
  SolveState st;
  const Eigen::Index d = p.d, r = c.cols();
  double beta = cfg.beta;
  RVector x = to_real(c);
  RVector lam = p.rates(x);
  double ll = p.surrogate(lam);

  auto check = [&](const CMatrix& cc, const RVector& l) {
    st.residual = p.residual(cc, p.empirical(l));
    return st.residual < cfg.tolerance;
  };

  // Damped fixed-point warm-up, monitored for likelihood decrease.
  for (int it = 0; it < cfg.fixed_point_iterations && st.iterations < cfg.max_iterations; ++it) {
    if (check(c, lam)) {
      st.converged = true;
      break;
    }
    const CMatrix mapped = p.info_factor.solve(p.empirical(lam) * c);
    const CMatrix next = (1.0 - beta) * c + beta * mapped;
    const RVector xn = to_real(next);
    const RVector ln = p.rates(xn);
    const double lln = p.surrogate(ln);
    ++st.iterations;
    if (lln + 1e-12 * std::abs(ll) < ll) {
      beta *= 0.5;
      if (beta < 1e-6) break;
      continue;
    }
    c = next;
    x = xn;
    lam = ln;
    ll = lln;
  }

  while (!st.converged && st.iterations < cfg.max_iterations) {
    if (check(c, lam)) {
      st.converged = true;
      break;
    }
    ++st.iterations;
    const Eigen::Index n = x.size();
    RVector g = RVector::Zero(n);
    RMatrix curvature = RMatrix::Zero(n, n);  // −Hessian
    std::vector<RVector> grads(p.ops.size());
    for (std::size_t j = 0; j < p.ops.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      grads[j] = p.rate_gradient(j, x);
      const double l = std::max(lam(jj), kRateFloor);
      const double w = (p.k(jj) > 0.0 ? p.k(jj) / l : 0.0) - p.t(jj);
      g += w * grads[j];
      for (Eigen::Index q = 0; q < r; ++q) curvature.block(2 * d * q, 2 * d * q, 2 * d, 2 * d) -= 2.0 * w * p.blocks[j];
      if (p.k(jj) > 0.0) curvature += (p.k(jj) / (l * l)) * grads[j] * grads[j].transpose();
    }
    Eigen::SelfAdjointEigenSolver<RMatrix> es(curvature);
    RVector ev = es.eigenvalues();
    RMatrix vecs = es.eigenvectors();
    double top = ev.cwiseAbs().maxCoeff();
    if (ev.minCoeff() < -1e-9 * top) {
      RMatrix scoring = RMatrix::Zero(n, n);
      for (std::size_t j = 0; j < p.ops.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        scoring += (p.t(jj) / std::max(lam(jj), kRateFloor)) * grads[j] * grads[j].transpose();
      }
      es.compute(scoring);
      ev = es.eigenvalues();
      vecs = es.eigenvectors();
      top = ev.maxCoeff();
      ++st.scoring;
    } else {
      ++st.newton;
    }
    RVector step = RVector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (ev(i) > 1e-11 * top) step += (vecs.col(i).dot(g) / ev(i)) * vecs.col(i);
    }
    double a = 1.0;
    bool moved = false;
    RVector ln;
    while (a > 1e-12) {
      const double change = p.surrogate_change(x, lam, step, a, ln);
      if (change >= 0.0) {
        x += a * step;
        lam = p.rates(x);
        ll += change;
        moved = true;
        break;
      }
      a *= 0.5;
    }
    c = from_real(x, d, r);
    if (!moved) {
      st.converged = check(c, lam);
      break;
    }
  }
  st.c = c;
  return st;
}

inline ReconstructionResult solve(const std::vector<ProtocolRow>& rows, Eigen::Index d, const ReconstructionConfig& cfg) {
  if (cfg.rank < 1 || cfg.rank > d) throw error("solve_likelihood: rank must lie in [1, d]");
  if (!(cfg.tolerance > 0.0) || cfg.max_iterations < 1) throw error("solve_likelihood: invalid tolerances");
  if (!(cfg.beta > 0.0 && cfg.beta <= 1.0)) throw error("solve_likelihood: beta must lie in (0, 1]");
  const LikelihoodProblem p(rows, d, cfg.rank);
  const int r = cfg.rank;

  CMatrix start;
  int extra_iterations = 0;
  if (cfg.initial) {
    if (cfg.initial->rows() != d || cfg.initial->cols() != r) throw error("solve_likelihood: initial c must be d x r");
    start = *cfg.initial;
  } else if (cfg.warm_start && r < d) {
    const LikelihoodProblem full(rows, d, d);
    const auto fs = optimize(full, normalize_start(full, default_start(full, static_cast<int>(d), cfg.seed)), cfg);
    extra_iterations = fs.iterations;
    start = truncate_purification(fs.c, r);
  } else {
    start = default_start(p, r, cfg.seed);
  }
  const auto st = optimize(p, normalize_start(p, start), cfg);

  ReconstructionResult out;
  out.c = st.c;
  const CMatrix rho = st.c * st.c.adjoint();
  const double tr = std::real(rho.trace());
  if (!(tr > 0.0)) throw error("solve_likelihood: estimate has zero trace");
  out.rho = rho / tr;
  out.rho = 0.5 * (out.rho + out.rho.adjoint()).eval();
  out.iterations = st.iterations + extra_iterations;
  out.newton_steps = st.newton;
  out.scoring_steps = st.scoring;
  out.converged = st.converged;
  out.residual = st.residual;
  const RVector lam = p.rates(to_real(st.c));
  const double observed = p.k.sum();
  out.normalization_residual = observed > 0.0 ? std::abs(lam.dot(p.t) - observed) / observed : 0.0;
  out.log_likelihood = log_likelihood(st.c, rows, true);
  out.information_spectrum = information_matrix(st.c, rows).spectrum;
  return out;
}

}  // namespace detail

/// Generic solve over rows of dimension d = c's ambient dimension.
inline ReconstructionResult solve_likelihood(const std::vector<ProtocolRow>& rows, const ReconstructionConfig& cfg) {
  if (rows.empty()) throw error("solve_likelihood: empty protocol");
  return detail::solve(rows, rows.front().op.rows(), cfg);
}

/// Process tomography over the (input ⊗ output) space; auxiliary rows are
/// expected among `rows`. The estimate is the unit-trace Choi state.
inline ReconstructionResult reconstruct_process(const std::vector<ProtocolRow>& rows, const ReconstructionConfig& cfg) {
  if (rows.empty()) throw error("reconstruct_process: empty protocol");
  const int s = detail::exact_sqrt(rows.front().op.rows());
  if (s <= 0) throw error("reconstruct_process: row dimension is not s^2");
  auto out = detail::solve(rows, static_cast<Eigen::Index>(s) * s, cfg);
  out.s = s;
  out.parameters = parameter_count(s, cfg.rank);
  out.trace_preservation_residual = out.chi().trace_preservation_residual();
  return out;
}

/// State tomography; ν = 2dr − r² − 1.
inline ReconstructionResult reconstruct_state(const std::vector<ProtocolRow>& rows, const ReconstructionConfig& cfg) {
  if (rows.empty()) throw error("reconstruct_state: empty protocol");
  const Eigen::Index d = rows.front().op.rows();
  auto out = detail::solve(rows, d, cfg);
  out.parameters = 2 * static_cast<std::int64_t>(d) * cfg.rank - static_cast<std::int64_t>(cfg.rank) * cfg.rank - 1;
  return out;
}

}  // namespace qpt

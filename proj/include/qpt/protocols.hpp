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

// Measurement protocols as lists of rows (intensity operator, exposure,
// count), plus synthetic Poisson data.
//
// Rates follow λ_j = Tr(Λ_j ρ) with ρ the unit-trace state being measured;
// for process tomography that is the Choi state ρ_χ.

#include "qpt/core.hpp"
#include "qpt/process.hpp"
#include "qpt/random.hpp"
#include "qpt/waveplate.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qpt {

struct ProtocolRow {
  CMatrix op;  // intensity operator Λ, Hermitian PSD
  double exposure = 1.0;
  std::optional<std::int64_t> count;
  bool auxiliary = false;
};

using QubitStates = std::array<CVector, 4>;

inline CVector qubit(cplx a, cplx b) {
  CVector v(2);
  v << a, b;
  return v;
}

/// (⟨σx⟩, ⟨σy⟩, ⟨σz⟩)
inline Eigen::Vector3d bloch_vector(const CVector& psi) {
  const CMatrix rho = projector(psi);
  return {std::real((rho * pauli::x()).trace()), std::real((rho * pauli::y()).trace()),
          std::real((rho * pauli::z()).trace())};
}

inline CVector state_from_bloch(const Eigen::Vector3d& a) {
  const Eigen::Vector3d n = a.normalized();
  const double theta = std::acos(std::clamp(n.z(), -1.0, 1.0));
  const double phi = std::atan2(n.y(), n.x());
  return qubit(std::cos(theta / 2), std::polar(std::sin(theta / 2), phi));
}

/// |H⟩, |V⟩, |−45°⟩ = (|H⟩−|V⟩)/√2, |L⟩ = (|H⟩−i|V⟩)/√2
inline QubitStates j4_states() {
  const double h = 1.0 / std::sqrt(2.0);
  return {qubit(1, 0), qubit(0, 1), qubit(h, -h), qubit(h, cplx(0, -h))};
}

/// Tetrahedron with Bloch vectors (1,1,1)/√3, (1,−1,−1)/√3, (−1,1,−1)/√3, (−1,−1,1)/√3.
inline QubitStates r4_states() {
  const double k = 1.0 / std::sqrt(3.0);
  return {state_from_bloch({k, k, k}), state_from_bloch({k, -k, -k}), state_from_bloch({-k, k, -k}),
          state_from_bloch({-k, -k, k})};
}

inline constexpr double kB4PlateThickness = 214.0;

/// |V⟩ through a 214 µm plate at 0°, 15°, 30°, 45°.
inline QubitStates b4_states(double central_lambda) {
  QubitStates out;
  for (int i = 0; i < 4; ++i) {
    const WaveplateSpec plate{kB4PlateThickness, i * 15.0 * kPi / 180.0};
    out[static_cast<std::size_t>(i)] = plate_unitary(plate, central_lambda) * qubit(0, 1);
  }
  return out;
}

/// Rank of a set of Hermitian operators viewed as real vectors of length d².
inline int hermitian_span_rank(const std::vector<CMatrix>& ops, double tol = 1e-9) {
  if (ops.empty()) return 0;
  const Eigen::Index d = ops.front().rows();
  RMatrix m(d * d, static_cast<Eigen::Index>(ops.size()));
  for (std::size_t c = 0; c < ops.size(); ++c) {
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
      m(k++, static_cast<Eigen::Index>(c)) = ops[c](i, i).real();
      for (Eigen::Index j = i + 1; j < d; ++j) {
        m(k++, static_cast<Eigen::Index>(c)) = std::sqrt(2.0) * ops[c](i, j).real();
        m(k++, static_cast<Eigen::Index>(c)) = std::sqrt(2.0) * ops[c](i, j).imag();
      }
    }
  }
  Eigen::JacobiSVD<RMatrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol * sv(0)) ++r;
  }
  return r;
}

inline bool tomographically_complete(const QubitStates& states) {
  std::vector<CMatrix> ops;
  for (const auto& s : states) ops.push_back(projector(s));
  return hermitian_span_rank(ops) == 4;
}

enum class ProcessProtocolName { J4, R4, B4 };

inline ProcessProtocolName parse_process_protocol(std::string_view name) {
  if (name == "J4") return ProcessProtocolName::J4;
  if (name == "R4") return ProcessProtocolName::R4;
  if (name == "B4") return ProcessProtocolName::B4;
  throw error("unknown process protocol '" + std::string(name) + "' (expected J4, R4 or B4)");
}

inline std::string to_string(ProcessProtocolName n) {
  switch (n) {
    case ProcessProtocolName::J4: return "J4";
    case ProcessProtocolName::R4: return "R4";
    case ProcessProtocolName::B4: return "B4";
  }
  return "?";
}

struct ProcessProtocol {
  ProcessProtocolName name = ProcessProtocolName::R4;
  QubitStates inputs;
  QubitStates projectors;
  std::vector<ProtocolRow> rows;  // 16 rows over the 4-dimensional Choi space
};

/// Rows Λ_(i,m) = |c_in,i*⟩⟨c_in,i*| ⊗ |c_m⟩⟨c_m| with unit exposures; the
/// exposures are rescaled to the requested total count by generate_counts.
inline ProcessProtocol process_protocol(ProcessProtocolName name, double central_lambda = 1.1509) {
  ProcessProtocol p;
  p.name = name;
  switch (name) {
    case ProcessProtocolName::J4: p.inputs = j4_states(); break;
    case ProcessProtocolName::R4: p.inputs = r4_states(); break;
    case ProcessProtocolName::B4: p.inputs = b4_states(central_lambda); break;
  }
  p.projectors = p.inputs;
  if (!tomographically_complete(p.inputs)) throw error("process_protocol: input set is not tomographically complete");
  for (const auto& in : p.inputs) {
    const CMatrix a = projector(CVector(in.conjugate()));
    for (const auto& m : p.projectors) p.rows.push_back({kron(a, projector(m)), 1.0, std::nullopt, false});
  }
  return p;
}

/// Virtual rows |c_in*⟩⟨c_in*| ⊗ I_s with exposure w·T and count round(wT/s).
inline std::vector<ProtocolRow> auxiliary_rows(const QubitStates& inputs, double total_exposure, double weight) {
  if (!tomographically_complete(inputs)) throw error("auxiliary_rows: input set is not tomographically complete");
  if (!(total_exposure > 0.0) || !(weight > 0.0)) throw error("auxiliary_rows: exposure and weight must be positive");
  constexpr int s = 2;
  std::vector<ProtocolRow> rows;
  const double t = weight * total_exposure;
  for (const auto& in : inputs) {
    const CMatrix a = projector(CVector(in.conjugate()));
    rows.push_back({kron(a, CMatrix::Identity(s, s)), t, static_cast<std::int64_t>(std::llround(t / s)), true});
  }
  return rows;
}

enum class StateProtocolName { BN, J4, R4 };

struct StateProtocol {
  StateProtocolName name = StateProtocolName::BN;
  std::string label;
  std::vector<ProtocolRow> rows;  // over the 2-dimensional polarization space
};

/// A single plate of thickness h rotated through N orientations α_j = j·π/N
/// in front of a vertical analyser: Λ_j = U†(α_j)|V⟩⟨V|U(α_j).
inline StateProtocol bn_state_protocol(int n, double plate_thickness, double lambda) {
  if (n < 4) throw error("bn_state_protocol: need at least 4 orientations");
  StateProtocol p{StateProtocolName::BN, "B" + std::to_string(n), {}};
  const CMatrix v = projector(qubit(0, 1));
  std::vector<CMatrix> ops;
  for (int j = 0; j < n; ++j) {
    const CMatrix u = plate_unitary({plate_thickness, j * kPi / n}, lambda);
    CMatrix op = u.adjoint() * v * u;
    op = 0.5 * (op + op.adjoint());
    ops.push_back(op);
    p.rows.push_back({op, 1.0, std::nullopt, false});
  }
  if (hermitian_span_rank(ops) < 4) {
    throw error("bn_state_protocol: plate retardance is degenerate at this wavelength; protocol is incomplete");
  }
  return p;
}

/// Projective measurement onto each of four states.
inline StateProtocol projective_state_protocol(StateProtocolName name) {
  StateProtocol p{name, name == StateProtocolName::J4 ? "J4state" : "R4state", {}};
  const QubitStates states = name == StateProtocolName::J4 ? j4_states() : r4_states();
  for (const auto& s : states) p.rows.push_back({projector(s), 1.0, std::nullopt, false});
  return p;
}

struct ExperimentPlan {
  std::int64_t total_counts = 10000;  // expected events over non-auxiliary rows
  std::uint64_t seed = 1;
  double auxiliary_weight = 10.0;
};

inline double expected_rate(const ProtocolRow& row, const CMatrix& rho) { return std::real((row.op * rho).trace()); }

/// Rescales the exposures so that Σ λ_j t_j = n under `rho`, then draws
/// k_j ~ Poisson(λ_j t_j) from a generator seeded with plan.seed.
inline std::vector<ProtocolRow> generate_counts(std::vector<ProtocolRow> rows, const CMatrix& rho,
                                                const ExperimentPlan& plan) {
  if (plan.total_counts < 1) throw error("generate_counts: total count must be >= 1");
  double total = 0.0;
  for (const auto& r : rows) {
    if (r.auxiliary) throw error("generate_counts: auxiliary rows carry virtual counts");
    if (r.op.rows() != rho.rows()) throw error("generate_counts: dimension mismatch");
    total += std::max(expected_rate(r, rho), 0.0) * r.exposure;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw error("generate_counts: expected total is not positive");
  const double scale = static_cast<double>(plan.total_counts) / total;
  Rng rng(plan.seed);
  for (auto& r : rows) {
    r.exposure *= scale;
    const double mean = std::max(expected_rate(r, rho), 0.0) * r.exposure;
    if (!std::isfinite(mean)) throw error("generate_counts: non-finite mean");
    r.count = poisson(rng, mean);
  }
  return rows;
}

/// Counts for a process protocol plus its auxiliary rows.
inline std::vector<ProtocolRow> process_dataset(const ProcessProtocol& protocol, const ChiMatrix& truth,
                                                const ExperimentPlan& plan) {
  auto rows = generate_counts(protocol.rows, truth.as_choi().matrix, plan);
  double total_exposure = 0.0;
  for (const auto& r : rows) total_exposure += r.exposure;
  for (auto& a : auxiliary_rows(protocol.inputs, total_exposure, plan.auxiliary_weight)) rows.push_back(std::move(a));
  return rows;
}

}  // namespace qpt

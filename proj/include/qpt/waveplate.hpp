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

// Forward model of dispersive quartz retarders: refractive indices, retarder
// unitaries, spectral mixtures as Choi states or polarization states, and
// the inverse fit of (δ, α) from an SU(2) matrix.
//
// Units: wavelengths and thicknesses in micrometers, angles in radians.

#include "qpt/core.hpp"
#include "qpt/process.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace qpt {

enum class Material { quartz };

struct RefractiveIndices {
  double n_o = 0.0;
  double n_e = 0.0;
};

inline constexpr double kQuartzMinWavelength = 0.2;
inline constexpr double kQuartzMaxWavelength = 3.0;

/// Plates thinner than this are evaluated at the mean wavelength of the
/// spectrum; thicker plates are evaluated per spectral knot.
inline constexpr double kThinPlateLimit = 1000.0;

/// Sellmeier-type dispersion of crystalline quartz, λ in micrometers.
inline RefractiveIndices quartz_indices(double lambda) {
  if (!(lambda > kQuartzMinWavelength && lambda < kQuartzMaxWavelength)) {
    throw error("quartz_indices: wavelength " + std::to_string(lambda) + " um outside (0.2, 3)");
  }
  const double l2 = lambda * lambda;
  const double no2 = 1.30979 + 1.04683 * l2 / (l2 - 0.01025) + 1.20328 * l2 / (l2 - 108.584);
  const double ne2 = 1.32888 + 1.05487 * l2 / (l2 - 0.01053) + 0.97121 * l2 / (l2 - 84.261);
  return {std::sqrt(no2), std::sqrt(ne2)};
}

struct WaveplateSpec {
  double thickness = 0.0;    // micrometers
  double orientation = 0.0;  // optical axis vs vertical, radians
  Material material = Material::quartz;
};

inline RefractiveIndices material_indices(Material m, double lambda) {
  switch (m) {
    case Material::quartz:
      return quartz_indices(lambda);
  }
  throw error("material_indices: unknown material");
}

/// Signed retardance π(n_o − n_e)h/λ. This is the δ that enters the retarder
/// unitary exp(−iδ σ·n); for quartz it is negative.
inline double retardance(const WaveplateSpec& spec, double lambda) {
  if (!(spec.thickness >= 0.0) || !std::isfinite(spec.thickness)) throw error("retardance: invalid thickness");
  const auto n = material_indices(spec.material, lambda);
  return kPi * (n.n_o - n.n_e) * spec.thickness / lambda;
}

/// Optical thickness π|n_e − n_o|h/λ.
inline double optical_thickness(const WaveplateSpec& spec, double lambda) {
  return std::abs(retardance(spec, lambda));
}

struct RetarderParams {
  double delta = 0.0;
  Eigen::Vector3d axis{0.0, 0.0, 1.0};

  /// Physical plate: axis (sin 2α, 0, cos 2α).
  static RetarderParams from_orientation(double delta, double alpha) {
    return {delta, Eigen::Vector3d(std::sin(2 * alpha), 0.0, std::cos(2 * alpha))};
  }
};

/// U = I cos δ − i(σ·n) sin δ
inline CMatrix retarder_unitary(const RetarderParams& p) {
  if (std::abs(p.axis.norm() - 1.0) > 1e-12) throw error("retarder_unitary: axis is not a unit vector");
  const double c = std::cos(p.delta);
  const double s = std::sin(p.delta);
  const double nx = p.axis.x(), ny = p.axis.y(), nz = p.axis.z();
  const cplx i(0.0, 1.0);
  CMatrix u(2, 2);
  u << c - i * nz * s, -i * (nx - i * ny) * s,
       -i * (nx + i * ny) * s, c + i * nz * s;
  return u;
}

inline CMatrix plate_unitary(const WaveplateSpec& spec, double lambda) {
  return retarder_unitary(RetarderParams::from_orientation(retardance(spec, lambda), spec.orientation));
}

/// Normalized spectral weights on strictly increasing wavelength knots.
class SpectralProfile {
 public:
  SpectralProfile() = default;

  /// Weights are rescaled to unit sum.
  SpectralProfile(std::vector<double> wavelengths, std::vector<double> weights)
      : wavelengths_(std::move(wavelengths)), weights_(std::move(weights)) {
    if (wavelengths_.empty() || wavelengths_.size() != weights_.size()) {
      throw error("SpectralProfile: need equally many wavelengths and weights");
    }
    for (std::size_t i = 1; i < wavelengths_.size(); ++i) {
      if (!(wavelengths_[i] > wavelengths_[i - 1])) throw error("SpectralProfile: wavelengths must increase");
    }
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw error("SpectralProfile: weights must be finite and >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw error("SpectralProfile: all weights are zero");
    for (double& w : weights_) w /= total;
  }

  static SpectralProfile monochromatic(double lambda) { return SpectralProfile({lambda}, {1.0}); }

  std::span<const double> wavelengths() const { return wavelengths_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return wavelengths_.size(); }

  double mean_wavelength() const {
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m += wavelengths_[i] * weights_[i];
    return m;
  }

 private:
  std::vector<double> wavelengths_;
  std::vector<double> weights_;
};

/// sinc²(a) = 1/2; maps a FWHM onto the sinc argument scale.
inline constexpr double kSincHalfPower = 1.391557;

inline constexpr double kDefaultSpectralSpan = 40.0;

/// sinc²[2a(λ−λ0)/fwhm] sampled on `knots` uniform points over λ0 ± span·fwhm.
inline SpectralProfile sinc2_profile(double lambda0, double fwhm, int knots, double span = kDefaultSpectralSpan) {
  if (knots < 3 || knots % 2 == 0) throw error("sinc2_profile: knots must be odd and >= 3");
  if (!(span > 0.0) || !(fwhm > 0.0)) throw error("sinc2_profile: span and fwhm must be positive");
  std::vector<double> lambdas(static_cast<std::size_t>(knots));
  std::vector<double> weights(lambdas.size());
  const int half = knots / 2;
  const double step = span * fwhm / half;
  for (int i = 0; i < knots; ++i) {
    const int offset = i - half;
    const double l = lambda0 + offset * step;
    const double x = 2.0 * kSincHalfPower * (offset * step) / fwhm;
    const double sinc = offset == 0 ? 1.0 : std::sin(x) / x;
    lambdas[static_cast<std::size_t>(i)] = l;
    weights[static_cast<std::size_t>(i)] = sinc * sinc;
  }
  return SpectralProfile(std::move(lambdas), std::move(weights));
}

namespace detail {

inline CMatrix plate_stack_unitary(std::span<const WaveplateSpec> plates, double lambda, double mean_lambda) {
  CMatrix u = CMatrix::Identity(2, 2);
  for (const auto& p : plates) {
    const double l = p.thickness < kThinPlateLimit ? mean_lambda : lambda;
    u = plate_unitary(p, l) * u;
  }
  return u;
}

}  // namespace detail

/// Choi state Σ_j P_j |Ψ_j⟩⟨Ψ_j| of a stack of plates traversed in order,
/// |Ψ_j⟩ = vec(U(λ_j))/√2.
inline ChiMatrix plates_choi_state(std::span<const WaveplateSpec> plates, const SpectralProfile& profile) {
  CMatrix rho = CMatrix::Zero(4, 4);
  const double mean = profile.mean_wavelength();
  for (std::size_t j = 0; j < profile.size(); ++j) {
    const CVector psi = vectorize(detail::plate_stack_unitary(plates, profile.wavelengths()[j], mean)) / std::sqrt(2.0);
    rho += profile.weights()[j] * psi * psi.adjoint();
  }
  return {2, rho, ChiNormalization::choi};
}

inline ChiMatrix plate_choi_state(const WaveplateSpec& spec, const SpectralProfile& profile) {
  return plates_choi_state(std::span<const WaveplateSpec>(&spec, 1), profile);
}

/// Unimodular unitary [[t, r], [−r*, t*]].
struct SU2Retarder {
  cplx t{1.0, 0.0};
  cplx r{0.0, 0.0};

  CMatrix matrix() const {
    CMatrix g(2, 2);
    g << t, r, -std::conj(r), std::conj(t);
    return g;
  }

  double unitarity_residual() const { return std::abs(std::norm(t) + std::norm(r) - 1.0); }
};

inline SU2Retarder su2_from_retarder(double delta, double alpha) {
  return {cplx(std::cos(delta), std::sin(delta) * std::cos(2 * alpha)),
          cplx(0.0, std::sin(delta) * std::sin(2 * alpha))};
}

struct RetarderFit {
  double delta = 0.0;  // [0, π/2]
  double alpha = 0.0;  // [0, π)
  bool degenerate = false;
  double out_of_plane = 0.0;  // |Re r|, zero for an axis in the plate plane
};

/// Inverts su2_from_retarder up to the retarder symmetries
/// (δ, α) ~ (−δ, α + π/2) and G ~ −G.
inline RetarderFit fit_su2_retarder(const SU2Retarder& g) {
  if (g.unitarity_residual() > 1e-8) throw error("fit_su2_retarder: |t|^2 + |r|^2 != 1");
  cplx t = g.t, r = g.r;
  if (t.real() < 0.0) {
    t = -t;
    r = -r;
  }
  RetarderFit fit;
  const double sin_delta = std::hypot(t.imag(), r.imag());
  fit.delta = std::atan2(sin_delta, t.real());
  fit.out_of_plane = std::abs(r.real());
  if (sin_delta < 1e-12) {
    fit.alpha = 0.0;
    fit.degenerate = true;
    return fit;
  }
  double two_alpha = std::atan2(r.imag(), t.imag());
  if (two_alpha < 0.0) two_alpha += 2.0 * kPi;
  fit.alpha = 0.5 * two_alpha;
  if (fit.alpha >= kPi) fit.alpha -= kPi;
  return fit;
}

/// Δn = δλ/(πL)
inline double birefringence_from_delta(double delta, double lambda, double length) {
  if (!(length > 0.0)) throw error("birefringence_from_delta: length must be positive");
  return delta * lambda / (kPi * length);
}

/// Linear photoelastic law Δn = K1·σ (K1 in m²/N, σ in N/m²).
inline double stress_birefringence(double brewster_constant, double stress) { return brewster_constant * stress; }

/// Polarization state of broadband light after a plate stack: each spectral
/// knot carries the same input and is transformed by its own SU(2).
inline CMatrix broadband_mixed_state(const CVector& input, std::span<const WaveplateSpec> plates,
                                     const SpectralProfile& profile) {
  if (input.size() != 2 || std::abs(input.norm() - 1.0) > 1e-12) {
    throw error("broadband_mixed_state: input must be a normalized qubit state");
  }
  CMatrix rho = CMatrix::Zero(2, 2);
  const double mean = profile.mean_wavelength();
  for (std::size_t k = 0; k < profile.size(); ++k) {
    const CVector out = detail::plate_stack_unitary(plates, profile.wavelengths()[k], mean) * input;
    rho += profile.weights()[k] * out * out.adjoint();
  }
  return rho;
}

/// Σ a_i ρ_i / Σ a_i
inline CMatrix component_sum_state(std::span<const std::pair<double, CMatrix>> components) {
  if (components.empty()) throw error("component_sum_state: no components");
  double total = 0.0;
  const Eigen::Index d = components.front().second.rows();
  CMatrix rho = CMatrix::Zero(d, d);
  for (const auto& [w, c] : components) {
    if (!(w >= 0.0)) throw error("component_sum_state: negative weight");
    if (c.rows() != d || c.cols() != d) throw error("component_sum_state: dimension mismatch");
    rho += w * c;
    total += w;
  }
  if (!(total > 0.0)) throw error("component_sum_state: all weights are zero");
  return rho / total;
}

}  // namespace qpt

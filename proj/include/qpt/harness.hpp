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

// Experiment campaigns: Monte-Carlo fidelity studies, n-scaling, the
// component-wise mixed-state workflow and retarder fitting. Configs are JSON;
// every parsed config can be written back with all defaults resolved.
//
// Per-replication seeds are derive_seed(seed, i, stream) with stream 0 for
// counts and stream 1 for the solver start, so every model rank of one
// replication sees the same data.

#include "qpt/core.hpp"
#include "qpt/io.hpp"
#include "qpt/ml.hpp"
#include "qpt/process.hpp"
#include "qpt/protocols.hpp"
#include "qpt/random.hpp"
#include "qpt/waveplate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace qpt::harness {

using json = io::json;

inline double deg(double radians) { return radians * 180.0 / kPi; }
inline double rad(double degrees) { return degrees * kPi / 180.0; }

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw error(std::string("config field '") + key + "': " + e.what());
  }
}

inline void require_object(const json& j, const char* what) {
  if (!j.is_object()) throw error(std::string(what) + ": expected a JSON object");
}

// Rejects misspelled keys.
inline void check_keys(const json& j, const char* what, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw error(std::string(what) + ": unknown field '" + key + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Config pieces

struct SolverSettings {
  double tolerance = 1e-9;
  int max_iterations = 20000;
  double beta = 0.5;
  int fixed_point_iterations = 50;
  bool warm_start = true;

  ReconstructionConfig config(int rank, std::uint64_t seed) const {
    ReconstructionConfig c;
    c.rank = rank;
    c.tolerance = tolerance;
    c.max_iterations = max_iterations;
    c.beta = beta;
    c.fixed_point_iterations = fixed_point_iterations;
    c.warm_start = warm_start;
    c.seed = seed;
    return c;
  }

  static SolverSettings from_json(const json& j) {
    SolverSettings s;
    if (j.is_null()) return s;
    detail::require_object(j, "solver");
    detail::check_keys(j, "solver", {"tolerance", "max_iterations", "beta", "fixed_point_iterations", "warm_start"});
    s.tolerance = detail::get_or(j, "tolerance", s.tolerance);
    s.max_iterations = detail::get_or(j, "max_iterations", s.max_iterations);
    s.beta = detail::get_or(j, "beta", s.beta);
    s.fixed_point_iterations = detail::get_or(j, "fixed_point_iterations", s.fixed_point_iterations);
    s.warm_start = detail::get_or(j, "warm_start", s.warm_start);
    if (!(s.tolerance > 0.0) || s.max_iterations < 1 || !(s.beta > 0.0 && s.beta <= 1.0) || s.fixed_point_iterations < 0) {
      throw error("solver: tolerance > 0, max_iterations >= 1, beta in (0, 1] and fixed_point_iterations >= 0 required");
    }
    return s;
  }

  json to_json() const {
    return {{"tolerance", tolerance}, {"max_iterations", max_iterations}, {"beta", beta},
            {"fixed_point_iterations", fixed_point_iterations}, {"warm_start", warm_start}};
  }
};

struct ProfileSpec {
  std::string type = "sinc2";  // sinc2 | monochromatic | table
  double center_um = 1.1509;
  double fwhm_um = 0.008;
  int knots = 801;
  double span_fwhm = kDefaultSpectralSpan;
  std::vector<double> wavelengths_um;
  std::vector<double> weights;

  SpectralProfile build() const {
    if (type == "sinc2") return sinc2_profile(center_um, fwhm_um, knots, span_fwhm);
    if (type == "monochromatic") return SpectralProfile::monochromatic(center_um);
    if (type == "table") return SpectralProfile(wavelengths_um, weights);
    throw error("profile: unknown type '" + type + "' (sinc2, monochromatic or table)");
  }

  static ProfileSpec from_json(const json& j) {
    ProfileSpec p;
    if (j.is_null()) return p;
    detail::require_object(j, "profile");
    detail::check_keys(j, "profile", {"type", "center_um", "fwhm_um", "knots", "span_fwhm", "wavelengths_um", "weights"});
    p.type = detail::get_or<std::string>(j, "type", p.type);
    p.center_um = detail::get_or(j, "center_um", p.center_um);
    p.fwhm_um = detail::get_or(j, "fwhm_um", p.fwhm_um);
    p.knots = detail::get_or(j, "knots", p.knots);
    p.span_fwhm = detail::get_or(j, "span_fwhm", p.span_fwhm);
    p.wavelengths_um = detail::get_or(j, "wavelengths_um", p.wavelengths_um);
    p.weights = detail::get_or(j, "weights", p.weights);
    (void)p.build();
    return p;
  }

  json to_json() const {
    if (type == "sinc2") {
      return {{"type", type}, {"center_um", center_um}, {"fwhm_um", fwhm_um}, {"knots", knots}, {"span_fwhm", span_fwhm}};
    }
    if (type == "monochromatic") return {{"type", type}, {"center_um", center_um}};
    return {{"type", type}, {"wavelengths_um", wavelengths_um}, {"weights", weights}};
  }
};

inline std::vector<WaveplateSpec> plates_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw error("plates: expected a non-empty array");
  std::vector<WaveplateSpec> out;
  for (const auto& p : j) {
    detail::require_object(p, "plate");
    detail::check_keys(p, "plate", {"thickness_um", "orientation_deg"});
    if (!p.contains("thickness_um")) throw error("plate: 'thickness_um' is required");
    WaveplateSpec w{p.at("thickness_um").get<double>(), rad(detail::get_or(p, "orientation_deg", 45.0))};
    if (!(w.thickness > 0.0)) throw error("plate: thickness must be positive");
    out.push_back(w);
  }
  return out;
}

inline json plates_to_json(const std::vector<WaveplateSpec>& plates) {
  json out = json::array();
  for (const auto& p : plates) out.push_back({{"thickness_um", p.thickness}, {"orientation_deg", deg(p.orientation)}});
  return out;
}

struct TruthSpec {
  std::string type = "plates";  // plates | identity | chi_file
  std::vector<WaveplateSpec> plates{{5024.0, kPi / 4}};
  ProfileSpec profile;
  std::string path;
  int generation_rank = 0;  // 0 keeps the full rank

  /// Unit-trace Choi state of the true process. With generation_rank r the
  /// top-r eigenpairs are kept and the trace is restored to 1.
  ChiMatrix build(const std::filesystem::path& base_dir = {}) const {
    ChiMatrix chi;
    if (type == "plates") {
      chi = plates_choi_state(plates, profile.build());
    } else if (type == "identity") {
      chi = chi_from_kraus(KrausSet(2, {CMatrix::Identity(2, 2)})).as_choi();
    } else if (type == "chi_file") {
      std::filesystem::path p(path);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      chi = io::chi_from_json(io::read_json(p)).as_choi();
    } else {
      throw error("truth: unknown type '" + type + "' (plates, identity or chi_file)");
    }
    validate_density(chi.matrix, "truth", 1e-8);
    if (generation_rank > 0 && generation_rank < numerical_rank(chi.matrix)) {
      const auto eig = hermitian_eig(chi.matrix);
      CMatrix m = CMatrix::Zero(chi.matrix.rows(), chi.matrix.cols());
      double tr = 0.0;
      for (int q = 0; q < generation_rank; ++q) {
        m += eig.values(q) * eig.vectors.col(q) * eig.vectors.col(q).adjoint();
        tr += eig.values(q);
      }
      chi = {chi.s, m / tr, ChiNormalization::choi};
    }
    return chi;
  }

  static TruthSpec from_json(const json& j) {
    TruthSpec t;
    if (j.is_null()) return t;
    detail::require_object(j, "truth");
    detail::check_keys(j, "truth", {"type", "plates", "profile", "path", "generation_rank"});
    t.type = detail::get_or<std::string>(j, "type", t.type);
    if (j.contains("plates")) t.plates = plates_from_json(j.at("plates"));
    if (j.contains("profile")) t.profile = ProfileSpec::from_json(j.at("profile"));
    t.path = detail::get_or<std::string>(j, "path", t.path);
    t.generation_rank = detail::get_or(j, "generation_rank", t.generation_rank);
    if (t.generation_rank < 0 || t.generation_rank > 4) throw error("truth: generation_rank must lie in [0, 4]");
    if (t.type == "chi_file" && t.path.empty()) throw error("truth: chi_file needs 'path'");
    return t;
  }

  json to_json() const {
    json j{{"type", type}, {"generation_rank", generation_rank}};
    if (type == "plates") {
      j["plates"] = plates_to_json(plates);
      j["profile"] = profile.to_json();
    }
    if (type == "chi_file") j["path"] = path;
    return j;
  }
};

struct CampaignConfig {
  std::string scenario = "mc";
  TruthSpec truth;
  std::string protocol = "R4";
  double central_wavelength_um = 1.1509;
  std::int64_t n = 10000;
  int replications = 200;
  std::vector<int> ranks{2, 4};
  std::uint64_t seed = 1;
  double auxiliary_weight = 10.0;
  int histogram_bins = 30;
  int bootstrap_resamples = 2000;
  std::vector<std::int64_t> n_list{1000, 10000, 100000, 1000000};
  SolverSettings solver;

  static CampaignConfig from_json(const json& j) {
    CampaignConfig c;
    detail::require_object(j, "campaign config");
    detail::check_keys(j, "campaign config",
                       {"scenario", "truth", "protocol", "central_wavelength_um", "n", "replications", "ranks",
                        "seed", "auxiliary_weight", "histogram_bins", "bootstrap_resamples", "n_list", "solver"});
    c.scenario = detail::get_or<std::string>(j, "scenario", c.scenario);
    if (j.contains("truth")) c.truth = TruthSpec::from_json(j.at("truth"));
    c.protocol = detail::get_or<std::string>(j, "protocol", c.protocol);
    (void)parse_process_protocol(c.protocol);
    c.central_wavelength_um = detail::get_or(j, "central_wavelength_um", c.central_wavelength_um);
    c.n = detail::get_or(j, "n", c.n);
    c.replications = detail::get_or(j, "replications", c.replications);
    c.ranks = detail::get_or(j, "ranks", c.ranks);
    c.seed = detail::get_or(j, "seed", c.seed);
    c.auxiliary_weight = detail::get_or(j, "auxiliary_weight", c.auxiliary_weight);
    c.histogram_bins = detail::get_or(j, "histogram_bins", c.histogram_bins);
    c.bootstrap_resamples = detail::get_or(j, "bootstrap_resamples", c.bootstrap_resamples);
    c.n_list = detail::get_or(j, "n_list", c.n_list);
    if (j.contains("solver")) c.solver = SolverSettings::from_json(j.at("solver"));
    c.validate();
    return c;
  }

  void validate() const {
    if (n < 1) throw error("campaign: n must be >= 1");
    if (replications < 1) throw error("campaign: replications must be >= 1");
    if (ranks.empty()) throw error("campaign: need at least one rank");
    for (int r : ranks) {
      if (r < 1 || r > 4) throw error("campaign: ranks must lie in [1, 4]");
    }
    if (!(auxiliary_weight > 0.0)) throw error("campaign: auxiliary_weight must be positive");
    if (histogram_bins < 1) throw error("campaign: histogram_bins must be >= 1");
    if (bootstrap_resamples < 1) throw error("campaign: bootstrap_resamples must be >= 1");
    for (auto v : n_list) {
      if (v < 1) throw error("campaign: n_list entries must be >= 1");
    }
  }

  json to_json() const {
    return {{"scenario", scenario},
            {"truth", truth.to_json()},
            {"protocol", protocol},
            {"central_wavelength_um", central_wavelength_um},
            {"n", n},
            {"replications", replications},
            {"ranks", ranks},
            {"seed", seed},
            {"auxiliary_weight", auxiliary_weight},
            {"histogram_bins", histogram_bins},
            {"bootstrap_resamples", bootstrap_resamples},
            {"n_list", n_list},
            {"solver", solver.to_json()}};
  }
};

// ---------------------------------------------------------------------------
// Statistics

/// Runs body(i) for i in [0, count) on `threads` workers (0 = hardware count).
/// The first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct Histogram {
  std::vector<double> edges;  // bins + 1 uniform edges
  std::vector<std::int64_t> counts;

  std::int64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }
};

/// Uniform bins over [min, max] of the values; the last bin is closed.
inline Histogram make_histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw error("make_histogram: bins must be >= 1");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  if (values.empty()) {
    for (int i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / bins);
    return h;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  double hi = *hi_it;
  if (!(hi > lo)) hi = lo + std::max(1e-12, std::abs(lo) * 1e-9);
  const double width = (hi - lo) / bins;
  for (int i = 0; i <= bins; ++i) h.edges.push_back(i == bins ? hi : lo + i * width);
  for (double v : values) {
    auto b = static_cast<std::int64_t>(std::floor((v - lo) / width));
    b = std::clamp<std::int64_t>(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

struct RatioEstimate {
  int numerator_rank = 0;
  int denominator_rank = 0;
  double ratio = 0.0;
  double lower_95 = 0.0;  // one-sided 95% paired bootstrap bound
  std::size_t pairs = 0;
  int resamples = 0;
};

/// mean(num)/mean(den) with a paired percentile bootstrap (resampling indices).
inline RatioEstimate paired_ratio(const std::vector<double>& num, const std::vector<double>& den, int resamples,
                                  std::uint64_t seed) {
  if (num.size() != den.size() || num.empty()) throw error("paired_ratio: need equally many paired values");
  RatioEstimate out;
  out.pairs = num.size();
  out.resamples = resamples;
  out.ratio = mean(num) / mean(den);
  Rng rng(seed);
  std::vector<double> ratios;
  ratios.reserve(static_cast<std::size_t>(resamples));
  const auto m = num.size();
  for (int b = 0; b < resamples; ++b) {
    double sn = 0.0, sd = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(m));
      sn += num[std::min(k, m - 1)];
      sd += den[std::min(k, m - 1)];
    }
    ratios.push_back(sn / sd);
  }
  std::sort(ratios.begin(), ratios.end());
  out.lower_95 = ratios[static_cast<std::size_t>(std::floor(0.05 * resamples))];
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw error("least_squares: need at least two points");
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw error("least_squares: x values are all equal");
  return {sxy / sxx, my - sxy / sxx * mx};
}

// ---------------------------------------------------------------------------
// Monte-Carlo campaign

struct Replication {
  std::size_t index = 0;
  double fidelity = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string failure;  // empty on success

  bool ok() const { return failure.empty(); }
};

struct RankSummary {
  int rank = 0;
  std::int64_t parameters = 0;
  std::vector<Replication> replications;  // sorted by index
  std::vector<double> losses;             // successful replications only
  double mean_loss = 0.0;
  double standard_error = 0.0;
  std::size_t failures = 0;
  Histogram histogram;
  RVector information_spectrum;  // replication 0
};

struct CampaignResult {
  std::int64_t n = 0;
  ChiMatrix truth;
  std::vector<RankSummary> ranks;
  std::optional<RatioEstimate> ratio;  // ranks[1] over ranks[0]

  std::size_t failures() const {
    std::size_t f = 0;
    for (const auto& r : ranks) f += r.failures;
    return f;
  }
};

/// Reconstructions at several ranks from one dataset. Ranks below d start
/// from the truncated full-rank estimate when warm starts are enabled.
inline std::vector<ReconstructionResult> reconstruct_ranks(const std::vector<ProtocolRow>& rows, const std::vector<int>& ranks,
                                                           const SolverSettings& solver, std::uint64_t seed) {
  const Eigen::Index d = rows.front().op.rows();
  std::optional<ReconstructionResult> full;
  auto full_rank = [&]() -> const ReconstructionResult& {
    if (!full) {
      auto cfg = solver.config(static_cast<int>(d), seed);
      cfg.warm_start = false;
      full = reconstruct_process(rows, cfg);
    }
    return *full;
  };
  std::vector<ReconstructionResult> out;
  for (int r : ranks) {
    if (r == d) {
      out.push_back(full_rank());
      continue;
    }
    auto cfg = solver.config(r, seed);
    if (solver.warm_start) cfg.initial = truncate_purification(full_rank().c, r);
    out.push_back(reconstruct_process(rows, cfg));
  }
  return out;
}

inline CampaignResult run_mc_campaign(const CampaignConfig& cfg, int threads = 1,
                                     const std::filesystem::path& base_dir = {}) {
  cfg.validate();
  CampaignResult out;
  out.n = cfg.n;
  out.truth = cfg.truth.build(base_dir);
  const auto protocol = process_protocol(parse_process_protocol(cfg.protocol), cfg.central_wavelength_um);
  const auto count = static_cast<std::size_t>(cfg.replications);
  std::vector<std::vector<Replication>> per_rank(cfg.ranks.size(), std::vector<Replication>(count));
  std::vector<RVector> spectra(cfg.ranks.size());

  parallel_for(count, threads, [&](std::size_t i) {
    const ExperimentPlan plan{cfg.n, derive_seed(cfg.seed, i, 0), cfg.auxiliary_weight};
    for (auto& pr : per_rank) pr[i].index = i;
    try {
      const auto rows = process_dataset(protocol, out.truth, plan);
      const auto results = reconstruct_ranks(rows, cfg.ranks, cfg.solver, derive_seed(cfg.seed, i, 1));
      for (std::size_t k = 0; k < results.size(); ++k) {
        auto& rep = per_rank[k][i];
        rep.iterations = results[k].iterations;
        rep.converged = results[k].converged;
        try {
          rep.fidelity = fidelity(out.truth.matrix, results[k].rho);
          if (!rep.converged) rep.failure = "not converged (residual " + io::format_double(results[k].residual) + ")";
        } catch (const error& e) {
          rep.failure = e.what();
        }
        if (i == 0) spectra[k] = results[k].information_spectrum;
      }
    } catch (const error& e) {
      for (auto& pr : per_rank) pr[i].failure = e.what();
    }
  });

  for (std::size_t k = 0; k < cfg.ranks.size(); ++k) {
    RankSummary s;
    s.rank = cfg.ranks[k];
    s.parameters = parameter_count(2, s.rank);
    s.replications = std::move(per_rank[k]);
    for (const auto& rep : s.replications) {
      if (rep.ok()) {
        s.losses.push_back(1.0 - rep.fidelity);
      } else {
        ++s.failures;
      }
    }
    s.mean_loss = mean(s.losses);
    s.standard_error = standard_error(s.losses);
    s.histogram = make_histogram(s.losses, cfg.histogram_bins);
    s.information_spectrum = spectra[k];
    out.ranks.push_back(std::move(s));
  }

  if (out.ranks.size() >= 2) {
    std::vector<double> num, den;
    const auto& a = out.ranks[1].replications;
    const auto& b = out.ranks[0].replications;
    for (std::size_t i = 0; i < count; ++i) {
      if (a[i].ok() && b[i].ok()) {
        num.push_back(1.0 - a[i].fidelity);
        den.push_back(1.0 - b[i].fidelity);
      }
    }
    if (!num.empty()) {
      auto r = paired_ratio(num, den, cfg.bootstrap_resamples, derive_seed(cfg.seed, 0, 2));
      r.numerator_rank = out.ranks[1].rank;
      r.denominator_rank = out.ranks[0].rank;
      out.ratio = r;
    }
  }
  return out;
}

inline json histogram_to_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

inline std::string histogram_csv(const Histogram& h) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    rows.push_back({io::format_double(h.edges[b]), io::format_double(h.edges[b + 1]), std::to_string(h.counts[b])});
  }
  return io::csv({"bin_left", "bin_right", "count"}, rows);
}

inline std::string fidelities_csv(const RankSummary& s) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& rep : s.replications) {
    if (rep.ok()) rows.push_back({std::to_string(rep.index), io::format_double(rep.fidelity)});
  }
  return io::csv({"replication", "fidelity"}, rows);
}

inline json ratio_to_json(const RatioEstimate& r) {
  return {{"numerator_rank", r.numerator_rank}, {"denominator_rank", r.denominator_rank}, {"ratio", r.ratio},
          {"lower_95", r.lower_95}, {"pairs", r.pairs}, {"resamples", r.resamples}};
}

inline json campaign_to_json(const CampaignResult& res) {
  json ranks = json::array();
  for (const auto& s : res.ranks) {
    json failures = json::array();
    for (const auto& rep : s.replications) {
      if (!rep.ok()) failures.push_back({{"replication", rep.index}, {"reason", rep.failure}});
    }
    std::vector<double> spectrum(s.information_spectrum.data(), s.information_spectrum.data() + s.information_spectrum.size());
    int above = 0;
    for (double v : spectrum) above += (!spectrum.empty() && v > 1e-8 * spectrum.front()) ? 1 : 0;
    ranks.push_back({{"rank", s.rank},
                     {"parameters", s.parameters},
                     {"mean_loss", s.mean_loss},
                     {"standard_error", s.standard_error},
                     {"successes", s.losses.size()},
                     {"failures", s.failures},
                     {"failure_details", failures},
                     {"histogram", histogram_to_json(s.histogram)},
                     {"information_spectrum_replication0", spectrum},
                     {"information_rank_replication0", above}});
  }
  json j{{"n", res.n}, {"truth", io::chi_to_json(res.truth)}, {"ranks", ranks}};
  j["ratio"] = res.ratio ? ratio_to_json(*res.ratio) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// n-scaling

struct ScalingResult {
  std::vector<std::int64_t> n_list;
  std::vector<int> ranks;
  std::vector<std::vector<double>> mean_loss;       // [rank][n]
  std::vector<std::vector<double>> standard_error;  // [rank][n]
  std::vector<LineFit> fits;                        // log loss vs log n per rank
  std::size_t failures = 0;
};

inline ScalingResult run_scaling_study(const CampaignConfig& base, int threads = 1,
                                       const std::filesystem::path& base_dir = {}) {
  if (base.n_list.size() < 3) throw error("scaling: need at least 3 values of n");
  const auto [lo, hi] = std::minmax_element(base.n_list.begin(), base.n_list.end());
  if (static_cast<double>(*hi) < 100.0 * static_cast<double>(*lo)) throw error("scaling: n_list must span at least two decades");
  ScalingResult out;
  out.n_list = base.n_list;
  out.ranks = base.ranks;
  out.mean_loss.assign(base.ranks.size(), {});
  out.standard_error.assign(base.ranks.size(), {});
  for (auto n : base.n_list) {
    CampaignConfig cfg = base;
    cfg.n = n;
    const auto res = run_mc_campaign(cfg, threads, base_dir);
    out.failures += res.failures();
    for (std::size_t k = 0; k < res.ranks.size(); ++k) {
      out.mean_loss[k].push_back(res.ranks[k].mean_loss);
      out.standard_error[k].push_back(res.ranks[k].standard_error);
    }
  }
  std::vector<double> x;
  for (auto n : base.n_list) x.push_back(std::log(static_cast<double>(n)));
  for (const auto& losses : out.mean_loss) {
    std::vector<double> y;
    for (double l : losses) y.push_back(std::log(l));
    out.fits.push_back(least_squares(x, y));
  }
  return out;
}

inline json scaling_to_json(const ScalingResult& s) {
  json ranks = json::array();
  for (std::size_t k = 0; k < s.ranks.size(); ++k) {
    ranks.push_back({{"rank", s.ranks[k]},
                     {"mean_loss", s.mean_loss[k]},
                     {"standard_error", s.standard_error[k]},
                     {"slope", s.fits[k].slope},
                     {"intercept", s.fits[k].intercept}});
  }
  return {{"n_list", s.n_list}, {"ranks", ranks}, {"failures", s.failures}};
}

// ---------------------------------------------------------------------------
// Component-wise mixed-state workflow

struct MixedWorkflowConfig {
  std::int64_t n = 10000;  // expected events per reconstructed state
  std::uint64_t seed = 1;
  double plate_thickness_um = 5031.0;
  double plate_orientation_deg = 45.0;
  std::vector<int> plate_counts{1, 2};
  std::vector<double> component_wavelengths_um{0.994, 0.996, 0.998, 1.000, 1.002, 1.004, 1.006};
  std::vector<double> component_weights{0.1690, 0.4955, 0.8470, 1.0, 0.8470, 0.4955, 0.1690};
  std::vector<std::vector<int>> subsets{{1, 2, 3, 4, 5, 6, 7}, {2, 3, 4, 5, 6}, {3, 4, 5}, {2, 4, 6}, {1, 2, 3, 4}, {2, 3, 7}};
  double measurement_plate_um = 312.7;
  int measurement_orientations = 36;
  double measurement_wavelength_um = 1.0;
  int broadband_rank = 2;
  int component_rank = 1;
  ProfileSpec continuous_profile{"sinc2", 1.0, 0.008, 801, kDefaultSpectralSpan, {}, {}};
  SolverSettings solver;

  static MixedWorkflowConfig from_json(const json& j) {
    MixedWorkflowConfig c;
    detail::require_object(j, "mixed-workflow config");
    detail::check_keys(j, "mixed-workflow config",
                       {"n", "seed", "plate_thickness_um", "plate_orientation_deg", "plate_counts",
                        "component_wavelengths_um", "component_weights", "subsets", "measurement_plate_um",
                        "measurement_orientations", "measurement_wavelength_um", "broadband_rank", "component_rank",
                        "continuous_profile", "solver"});
    c.n = detail::get_or(j, "n", c.n);
    c.seed = detail::get_or(j, "seed", c.seed);
    c.plate_thickness_um = detail::get_or(j, "plate_thickness_um", c.plate_thickness_um);
    c.plate_orientation_deg = detail::get_or(j, "plate_orientation_deg", c.plate_orientation_deg);
    c.plate_counts = detail::get_or(j, "plate_counts", c.plate_counts);
    c.component_wavelengths_um = detail::get_or(j, "component_wavelengths_um", c.component_wavelengths_um);
    c.component_weights = detail::get_or(j, "component_weights", c.component_weights);
    c.subsets = detail::get_or(j, "subsets", c.subsets);
    c.measurement_plate_um = detail::get_or(j, "measurement_plate_um", c.measurement_plate_um);
    c.measurement_orientations = detail::get_or(j, "measurement_orientations", c.measurement_orientations);
    c.measurement_wavelength_um = detail::get_or(j, "measurement_wavelength_um", c.measurement_wavelength_um);
    c.broadband_rank = detail::get_or(j, "broadband_rank", c.broadband_rank);
    c.component_rank = detail::get_or(j, "component_rank", c.component_rank);
    if (j.contains("continuous_profile")) c.continuous_profile = ProfileSpec::from_json(j.at("continuous_profile"));
    if (j.contains("solver")) c.solver = SolverSettings::from_json(j.at("solver"));
    c.validate();
    return c;
  }

  void validate() const {
    if (n < 1) throw error("mixed-workflow: n must be >= 1");
    if (component_wavelengths_um.size() != component_weights.size() || component_weights.empty()) {
      throw error("mixed-workflow: need equally many component wavelengths and weights");
    }
    for (int p : plate_counts) {
      if (p < 1) throw error("mixed-workflow: plate_counts entries must be >= 1");
    }
    for (const auto& s : subsets) {
      if (s.empty()) throw error("mixed-workflow: empty subset");
      for (int i : s) {
        if (i < 1 || i > static_cast<int>(component_weights.size())) throw error("mixed-workflow: subset index out of range");
      }
    }
    if (broadband_rank < 1 || broadband_rank > 2 || component_rank < 1 || component_rank > 2) {
      throw error("mixed-workflow: state ranks must lie in [1, 2]");
    }
  }

  json to_json() const {
    return {{"n", n},
            {"seed", seed},
            {"plate_thickness_um", plate_thickness_um},
            {"plate_orientation_deg", plate_orientation_deg},
            {"plate_counts", plate_counts},
            {"component_wavelengths_um", component_wavelengths_um},
            {"component_weights", component_weights},
            {"subsets", subsets},
            {"measurement_plate_um", measurement_plate_um},
            {"measurement_orientations", measurement_orientations},
            {"measurement_wavelength_um", measurement_wavelength_um},
            {"broadband_rank", broadband_rank},
            {"component_rank", component_rank},
            {"continuous_profile", continuous_profile.to_json()},
            {"solver", solver.to_json()}};
  }
};

struct ComponentReport {
  int index = 0;  // 1-based
  double wavelength_um = 0.0;
  double weight = 0.0;
  double fidelity = 0.0;  // reconstruction vs pure component truth
  CMatrix truth;
  CMatrix estimate;
};

struct SubsetReport {
  std::vector<int> subset;
  double entropy = 0.0;          // of the reconstructed component sum
  double fidelity = 0.0;         // vs the broadband truth
  double ideal_entropy = 0.0;    // same sum over exact components
  double ideal_fidelity = 0.0;
};

struct PlateReport {
  int plates = 0;
  CMatrix truth;
  double truth_entropy = 0.0;
  double continuous_entropy = 0.0;  // continuous sinc² spectrum, for reference
  double broadband_fidelity = 0.0;  // stage 1
  double broadband_entropy = 0.0;
  std::vector<ComponentReport> components;
  std::vector<SubsetReport> subsets;
};

struct MixedWorkflowResult {
  std::vector<PlateReport> reports;
};

inline std::vector<ProtocolRow> state_counts(const StateProtocol& protocol, const CMatrix& rho, std::int64_t n,
                                             std::uint64_t seed) {
  return generate_counts(protocol.rows, rho, {n, seed, 1.0});
}

inline MixedWorkflowResult run_mixed_state_workflow(const MixedWorkflowConfig& cfg) {
  cfg.validate();
  const auto protocol = bn_state_protocol(cfg.measurement_orientations, cfg.measurement_plate_um, cfg.measurement_wavelength_um);
  const CVector input = qubit(0, 1);
  const SpectralProfile table(cfg.component_wavelengths_um, cfg.component_weights);
  const SpectralProfile continuous = cfg.continuous_profile.build();
  MixedWorkflowResult out;
  for (std::size_t p = 0; p < cfg.plate_counts.size(); ++p) {
    const int count = cfg.plate_counts[p];
    const std::vector<WaveplateSpec> plates(static_cast<std::size_t>(count),
                                            WaveplateSpec{cfg.plate_thickness_um, rad(cfg.plate_orientation_deg)});
    PlateReport rep;
    rep.plates = count;
    rep.truth = broadband_mixed_state(input, plates, table);
    rep.truth_entropy = von_neumann_entropy(rep.truth);
    rep.continuous_entropy = von_neumann_entropy(broadband_mixed_state(input, plates, continuous));

    const std::uint64_t base = derive_seed(cfg.seed, p, 3);
    const auto broadband = reconstruct_state(state_counts(protocol, rep.truth, cfg.n, derive_seed(base, 0, 0)),
                                             cfg.solver.config(cfg.broadband_rank, derive_seed(base, 0, 1)));
    if (!broadband.converged) throw error("mixed-workflow: broadband reconstruction did not converge");
    rep.broadband_fidelity = fidelity(rep.truth, broadband.rho);
    rep.broadband_entropy = von_neumann_entropy(broadband.rho);

    for (std::size_t i = 0; i < cfg.component_weights.size(); ++i) {
      ComponentReport c;
      c.index = static_cast<int>(i) + 1;
      c.wavelength_um = cfg.component_wavelengths_um[i];
      c.weight = cfg.component_weights[i];
      c.truth = broadband_mixed_state(input, plates, SpectralProfile::monochromatic(c.wavelength_um));
      const auto est = reconstruct_state(state_counts(protocol, c.truth, cfg.n, derive_seed(base, i + 1, 0)),
                                         cfg.solver.config(cfg.component_rank, derive_seed(base, i + 1, 1)));
      if (!est.converged) throw error("mixed-workflow: component reconstruction did not converge");
      c.estimate = est.rho;
      c.fidelity = fidelity(c.truth, c.estimate);
      rep.components.push_back(std::move(c));
    }

    for (const auto& subset : cfg.subsets) {
      std::vector<std::pair<double, CMatrix>> measured, ideal;
      for (int idx : subset) {
        const auto& c = rep.components[static_cast<std::size_t>(idx - 1)];
        measured.emplace_back(c.weight, c.estimate);
        ideal.emplace_back(c.weight, c.truth);
      }
      SubsetReport s;
      s.subset = subset;
      const CMatrix sum = component_sum_state(measured);
      const CMatrix ideal_sum = component_sum_state(ideal);
      s.entropy = von_neumann_entropy(sum);
      s.fidelity = fidelity(rep.truth, sum);
      s.ideal_entropy = von_neumann_entropy(ideal_sum);
      s.ideal_fidelity = fidelity(rep.truth, ideal_sum);
      rep.subsets.push_back(std::move(s));
    }
    out.reports.push_back(std::move(rep));
  }
  return out;
}

inline std::string subset_label(const std::vector<int>& s) {
  bool contiguous = s.size() > 3;
  for (std::size_t i = 1; i < s.size(); ++i) contiguous = contiguous && s[i] == s[i - 1] + 1;
  if (contiguous) return std::to_string(s.front()) + "-" + std::to_string(s.back());
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out;
}

inline json mixed_workflow_to_json(const MixedWorkflowResult& res) {
  json reports = json::array();
  for (const auto& r : res.reports) {
    json comps = json::array();
    for (const auto& c : r.components) {
      comps.push_back({{"index", c.index}, {"wavelength_um", c.wavelength_um}, {"weight", c.weight}, {"fidelity", c.fidelity}});
    }
    json subsets = json::array();
    for (const auto& s : r.subsets) {
      subsets.push_back({{"subset", s.subset},
                         {"label", subset_label(s.subset)},
                         {"entropy", s.entropy},
                         {"fidelity", s.fidelity},
                         {"ideal_entropy", s.ideal_entropy},
                         {"ideal_fidelity", s.ideal_fidelity}});
    }
    reports.push_back({{"plates", r.plates},
                       {"truth", io::matrix_to_json(r.truth)},
                       {"truth_entropy", r.truth_entropy},
                       {"continuous_profile_entropy", r.continuous_entropy},
                       {"broadband_fidelity", r.broadband_fidelity},
                       {"broadband_entropy", r.broadband_entropy},
                       {"components", comps},
                       {"subsets", subsets}});
  }
  return {{"reports", reports}};
}

// ---------------------------------------------------------------------------
// Retarder fit

struct RetarderFitOptions {
  double wavelength_um = 1.0;
  double length_um = 25400.0;
  std::optional<int> order;          // m in δ = mπ ± δ_principal
  std::optional<double> axis_hint;   // radians, resolves the α vs α + π/2 branch
  double max_mixedness = 0.05;       // 1 − λ_max / Tr χ
};

struct RetarderReport {
  double dominant_weight = 0.0;  // λ_max / Tr χ
  double mixedness = 0.0;
  double entropy = 0.0;          // of ρ_χ, bits
  SU2Retarder su2;
  double su2_residual = 0.0;     // distance of the SVD-projected operator from SU(2) form
  RetarderFit principal;
  double delta = 0.0;            // unwrapped when an order is given, else principal
  double alpha = 0.0;
  double birefringence = 0.0;    // δλ/(πL)
};

inline RetarderReport run_retarder_fit(const ChiMatrix& estimate, const RetarderFitOptions& opt) {
  if (estimate.s != 2) throw error("fit-retarder: only qubit processes are supported");
  const ChiMatrix chi = estimate.as_chi();
  validate_density(chi.as_choi().matrix, "fit-retarder estimate", 1e-6);
  const auto eig = hermitian_eig(chi.matrix);
  RetarderReport rep;
  rep.dominant_weight = eig.values(0) / std::real(chi.matrix.trace());
  rep.mixedness = 1.0 - rep.dominant_weight;
  rep.entropy = von_neumann_entropy(chi.as_choi().matrix);
  if (rep.mixedness > opt.max_mixedness) {
    throw error("fit-retarder: estimate is too mixed for a retarder fit (mixedness " + io::format_double(rep.mixedness) +
                " > " + io::format_double(opt.max_mixedness) + ")");
  }
  const CMatrix e = kraus_from_chi(chi).operators.front();
  Eigen::JacobiSVD<CMatrix> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  CMatrix u = svd.matrixU() * svd.matrixV().adjoint();
  u /= std::sqrt(u.determinant());
  rep.su2 = {u(0, 0), u(0, 1)};
  rep.su2_residual = qpt::detail::max_abs(u - rep.su2.matrix());
  rep.principal = fit_su2_retarder(rep.su2);
  rep.delta = rep.principal.delta;
  rep.alpha = rep.principal.alpha;
  if (opt.order) {
    const double m = static_cast<double>(*opt.order) * kPi;
    const double alt_alpha = std::fmod(rep.principal.alpha + kPi / 2, kPi);
    bool use_alt = false;
    if (opt.axis_hint) {
      auto dist = [](double a, double b) {
        const double d = std::fmod(std::abs(a - b), kPi);
        return std::min(d, kPi - d);
      };
      use_alt = dist(alt_alpha, *opt.axis_hint) < dist(rep.principal.alpha, *opt.axis_hint);
    }
    rep.alpha = use_alt ? alt_alpha : rep.principal.alpha;
    rep.delta = use_alt ? m - rep.principal.delta : m + rep.principal.delta;
  } else if (opt.axis_hint) {
    throw error("fit-retarder: an axis hint needs a half-wave order");
  }
  rep.birefringence = birefringence_from_delta(rep.delta, opt.wavelength_um, opt.length_um);
  return rep;
}

inline json retarder_to_json(const RetarderReport& r) {
  return {{"dominant_weight", r.dominant_weight},
          {"mixedness", r.mixedness},
          {"entropy", r.entropy},
          {"su2", {{"t", {r.su2.t.real(), r.su2.t.imag()}}, {"r", {r.su2.r.real(), r.su2.r.imag()}}}},
          {"su2_residual", r.su2_residual},
          {"principal", {{"delta_rad", r.principal.delta},
                         {"alpha_deg", deg(r.principal.alpha)},
                         {"degenerate", r.principal.degenerate},
                         {"out_of_plane", r.principal.out_of_plane}}},
          {"delta_rad", r.delta},
          {"alpha_deg", deg(r.alpha)},
          {"birefringence", r.birefringence}};
}

}  // namespace qpt::harness

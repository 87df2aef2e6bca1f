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

// Command-line front end. Every subcommand reads an optional JSON config,
// echoes the resolved config and seed, and writes its artifacts to --out.
// Exit status: 0 on full success, 1 on errors, 2 when some replications or
// checks failed.

#include "qpt/qpt.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using qpt::io::json;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  int threads = 1;
};

struct Context {
  json config = json::object();
  fs::path base_dir;
  fs::path out;
  int threads = 1;
};

Context load(const Options& opt) {
  Context ctx;
  if (!opt.config.empty()) {
    ctx.config = qpt::io::read_json(opt.config);
    if (!ctx.config.is_object()) throw qpt::error("config must be a JSON object");
    ctx.base_dir = fs::path(opt.config).parent_path();
  }
  if (opt.seed) ctx.config["seed"] = *opt.seed;
  ctx.out = opt.out;
  ctx.threads = opt.threads;
  fs::create_directories(ctx.out);
  return ctx;
}

json envelope(const char* command, const json& resolved, std::uint64_t seed) {
  std::cout << "command: " << command << "\n";
  std::cout << "seed: " << seed << "\n";
  std::cout << "config: " << resolved.dump() << "\n";
  return {{"command", command}, {"seed", seed}, {"config", resolved}, {"config_hash", qpt::io::config_hash(resolved)}};
}

void print_matrix(const qpt::CMatrix& m) {
  std::cout << std::fixed << std::setprecision(6);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto v = m(i, j);
      std::cout << "  " << std::setw(9) << v.real() << (v.imag() < 0 ? " - " : " + ") << std::setw(8) << std::abs(v.imag()) << "i";
    }
    std::cout << "\n";
  }
  std::cout.unsetf(std::ios::floatfield);
  std::cout << std::setprecision(6);
}

std::vector<double> to_vector(const qpt::RVector& v) { return {v.data(), v.data() + v.size()}; }

int cmd_plate_chi(const Options& opt) {
  auto ctx = load(opt);
  qpt::harness::detail::check_keys(ctx.config, "plate-chi config", {"truth", "seed"});
  const auto truth = qpt::harness::TruthSpec::from_json(ctx.config.value("truth", json()));
  const std::uint64_t seed = ctx.config.value("seed", std::uint64_t{1});
  auto result = envelope("plate-chi", {{"truth", truth.to_json()}, {"seed", seed}}, seed);
  const auto chi = truth.build(ctx.base_dir);
  const auto eig = qpt::hermitian_eig(chi.matrix);
  std::cout << "rho_chi (Choi state, trace 1):\n";
  print_matrix(chi.matrix);
  std::cout << "eigenvalues:";
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) std::cout << " " << eig.values(i);
  std::cout << "\nrank: " << qpt::process_rank(chi) << "\n";
  result["eigenvalues"] = to_vector(eig.values);
  result["rank"] = qpt::process_rank(chi);
  result["trace_preservation_residual"] = chi.trace_preservation_residual();
  result["chi"] = qpt::io::chi_to_json(chi);
  qpt::io::write_json(ctx.out / "chi.json", qpt::io::chi_to_json(chi));
  qpt::io::write_json(ctx.out / "result.json", result);
  return 0;
}

int cmd_gen_data(const Options& opt) {
  auto ctx = load(opt);
  const auto cfg = qpt::harness::CampaignConfig::from_json(ctx.config);
  auto result = envelope("gen-data", cfg.to_json(), cfg.seed);
  const auto truth = cfg.truth.build(ctx.base_dir);
  const auto protocol = qpt::process_protocol(qpt::parse_process_protocol(cfg.protocol), cfg.central_wavelength_um);
  const auto rows = qpt::process_dataset(protocol, truth, {cfg.n, qpt::derive_seed(cfg.seed, 0, 0), cfg.auxiliary_weight});
  json data{{"kind", "process"}, {"protocol", cfg.protocol}, {"n", cfg.n}, {"seed", cfg.seed},
            {"auxiliary_weight", cfg.auxiliary_weight}, {"rows", qpt::io::rows_to_json(rows)}};
  qpt::io::write_json(ctx.out / "data.json", data);
  qpt::io::write_json(ctx.out / "truth.json", qpt::io::chi_to_json(truth));
  std::int64_t total = 0;
  for (const auto& r : rows) {
    if (!r.auxiliary) total += *r.count;
  }
  result["rows"] = rows.size();
  result["observed_counts"] = total;
  qpt::io::write_json(ctx.out / "result.json", result);
  std::cout << "rows: " << rows.size() << ", observed counts: " << total << "\n";
  return 0;
}

int cmd_reconstruct(const Options& opt) {
  auto ctx = load(opt);
  qpt::harness::detail::check_keys(ctx.config, "reconstruct config", {"data", "truth", "ranks", "solver", "seed"});
  if (!ctx.config.contains("data")) throw qpt::error("reconstruct: config needs 'data' (path to gen-data output)");
  const auto solver = qpt::harness::SolverSettings::from_json(ctx.config.value("solver", json()));
  const auto ranks = qpt::harness::detail::get_or(ctx.config, "ranks", std::vector<int>{2});
  if (ranks.empty()) throw qpt::error("reconstruct: need at least one rank");
  const std::uint64_t seed = ctx.config.value("seed", std::uint64_t{1});
  const std::string data_path = ctx.config.at("data").get<std::string>();
  const std::string truth_path = ctx.config.value("truth", std::string());
  json resolved{{"data", data_path}, {"ranks", ranks}, {"solver", solver.to_json()}, {"seed", seed}};
  if (!truth_path.empty()) resolved["truth"] = truth_path;
  auto result = envelope("reconstruct", resolved, seed);

  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !ctx.base_dir.empty() ? ctx.base_dir / path : path;
  };
  const json data = qpt::io::read_json(resolve(data_path));
  if (data.value("kind", "") != "process") throw qpt::error("reconstruct: data kind must be 'process'");
  const auto rows = qpt::io::rows_from_json(data.at("rows"));
  std::optional<qpt::ChiMatrix> truth;
  if (!truth_path.empty()) truth = qpt::io::chi_from_json(qpt::io::read_json(resolve(truth_path))).as_choi();

  const auto estimates = qpt::harness::reconstruct_ranks(rows, ranks, solver, qpt::derive_seed(seed, 0, 1));
  json per_rank = json::array();
  bool all_ok = true;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const auto& e = estimates[k];
    json j{{"rank", ranks[k]},
           {"converged", e.converged},
           {"iterations", e.iterations},
           {"residual", e.residual},
           {"log_likelihood", e.log_likelihood},
           {"normalization_residual", e.normalization_residual},
           {"trace_preservation_residual", *e.trace_preservation_residual},
           {"parameters", e.parameters},
           {"information_spectrum", to_vector(e.information_spectrum)}};
    if (truth) {
      j["fidelity"] = qpt::fidelity(truth->matrix, e.rho);
      std::cout << "rank " << ranks[k] << ": fidelity " << std::setprecision(10) << j["fidelity"].get<double>() << "\n";
    }
    all_ok = all_ok && e.converged;
    per_rank.push_back(j);
    qpt::io::write_json(ctx.out / ("chi_rank" + std::to_string(ranks[k]) + ".json"), qpt::io::chi_to_json(e.chi()));
  }
  qpt::io::write_json(ctx.out / "chi.json", qpt::io::chi_to_json(estimates.front().chi()));
  result["reconstructions"] = per_rank;
  qpt::io::write_json(ctx.out / "result.json", result);
  return all_ok ? 0 : 2;
}

void write_campaign_files(const fs::path& out, const qpt::harness::CampaignResult& res) {
  for (std::size_t k = 0; k < res.ranks.size(); ++k) {
    const auto& s = res.ranks[k];
    const std::string suffix = "_rank" + std::to_string(s.rank);
    qpt::io::write_text(out / ("fidelities" + suffix + ".csv"), qpt::harness::fidelities_csv(s));
    qpt::io::write_text(out / ("histogram" + suffix + ".csv"), qpt::harness::histogram_csv(s.histogram));
    if (k == 0) {
      qpt::io::write_text(out / "fidelities.csv", qpt::harness::fidelities_csv(s));
      qpt::io::write_text(out / "histogram.csv", qpt::harness::histogram_csv(s.histogram));
    }
  }
  qpt::io::write_json(out / "chi.json", qpt::io::chi_to_json(res.truth));
}

int cmd_mc(const Options& opt) {
  auto ctx = load(opt);
  const auto cfg = qpt::harness::CampaignConfig::from_json(ctx.config);
  auto result = envelope("mc", cfg.to_json(), cfg.seed);
  std::cout << "threads: " << ctx.threads << "\n";
  const auto res = qpt::harness::run_mc_campaign(cfg, ctx.threads, ctx.base_dir);
  result["campaign"] = qpt::harness::campaign_to_json(res);
  write_campaign_files(ctx.out, res);
  qpt::io::write_json(ctx.out / "result.json", result);
  for (const auto& s : res.ranks) {
    std::cout << "rank " << s.rank << ": mean loss " << s.mean_loss << " +- " << s.standard_error << " (" << s.losses.size()
              << " ok, " << s.failures << " failed)\n";
  }
  if (res.ratio) {
    std::cout << "loss ratio rank " << res.ratio->numerator_rank << "/" << res.ratio->denominator_rank << ": " << res.ratio->ratio
              << " (one-sided 95% lower bound " << res.ratio->lower_95 << ")\n";
  }
  return res.failures() == 0 ? 0 : 2;
}

int cmd_scaling(const Options& opt) {
  auto ctx = load(opt);
  const auto cfg = qpt::harness::CampaignConfig::from_json(ctx.config);
  auto result = envelope("scaling", cfg.to_json(), cfg.seed);
  const auto res = qpt::harness::run_scaling_study(cfg, ctx.threads, ctx.base_dir);
  result["scaling"] = qpt::harness::scaling_to_json(res);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < res.ranks.size(); ++k) {
    for (std::size_t i = 0; i < res.n_list.size(); ++i) {
      rows.push_back({std::to_string(res.ranks[k]), std::to_string(res.n_list[i]), qpt::io::format_double(res.mean_loss[k][i]),
                      qpt::io::format_double(res.standard_error[k][i])});
    }
    std::cout << "rank " << res.ranks[k] << ": slope " << res.fits[k].slope << "\n";
  }
  qpt::io::write_text(ctx.out / "scaling.csv", qpt::io::csv({"rank", "n", "mean_loss", "standard_error"}, rows));
  qpt::io::write_json(ctx.out / "result.json", result);
  return res.failures == 0 ? 0 : 2;
}

int cmd_mixed_workflow(const Options& opt) {
  auto ctx = load(opt);
  const auto cfg = qpt::harness::MixedWorkflowConfig::from_json(ctx.config);
  auto result = envelope("mixed-workflow", cfg.to_json(), cfg.seed);
  const auto res = qpt::harness::run_mixed_state_workflow(cfg);
  result["workflow"] = qpt::harness::mixed_workflow_to_json(res);
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : res.reports) {
    std::cout << r.plates << " plate(s): truth entropy " << r.truth_entropy << " bits, broadband reconstruction F "
              << r.broadband_fidelity << "\n";
    for (const auto& s : r.subsets) {
      rows.push_back({std::to_string(r.plates), "\"" + qpt::harness::subset_label(s.subset) + "\"", qpt::io::format_double(s.entropy),
                      qpt::io::format_double(s.fidelity)});
      std::cout << "  " << std::setw(14) << std::left << qpt::harness::subset_label(s.subset) << std::right << " S " << s.entropy
                << "  F " << s.fidelity << "\n";
    }
  }
  qpt::io::write_text(ctx.out / "table3.csv", qpt::io::csv({"plates", "components", "entropy", "fidelity"}, rows));
  qpt::io::write_json(ctx.out / "result.json", result);
  return 0;
}

int cmd_fit_retarder(const Options& opt) {
  auto ctx = load(opt);
  using qpt::harness::detail::get_or;
  qpt::harness::detail::check_keys(ctx.config, "fit-retarder config",
                                   {"chi", "synthetic", "n", "wavelength_um", "length_um", "order", "axis_hint_deg",
                                    "max_mixedness", "seed", "solver"});
  qpt::harness::RetarderFitOptions fo;
  fo.wavelength_um = get_or(ctx.config, "wavelength_um", fo.wavelength_um);
  fo.length_um = get_or(ctx.config, "length_um", fo.length_um);
  fo.max_mixedness = get_or(ctx.config, "max_mixedness", fo.max_mixedness);
  if (ctx.config.contains("order")) fo.order = ctx.config.at("order").get<int>();
  if (ctx.config.contains("axis_hint_deg")) fo.axis_hint = qpt::harness::rad(ctx.config.at("axis_hint_deg").get<double>());
  const std::uint64_t seed = get_or(ctx.config, "seed", std::uint64_t{1});
  const std::int64_t n = get_or(ctx.config, "n", std::int64_t{0});
  const auto solver = qpt::harness::SolverSettings::from_json(ctx.config.value("solver", json()));

  json resolved{{"wavelength_um", fo.wavelength_um}, {"length_um", fo.length_um}, {"max_mixedness", fo.max_mixedness},
                {"seed", seed}, {"n", n}, {"solver", solver.to_json()}};
  if (fo.order) resolved["order"] = *fo.order;
  if (fo.axis_hint) resolved["axis_hint_deg"] = qpt::harness::deg(*fo.axis_hint);

  qpt::ChiMatrix chi;
  if (ctx.config.contains("chi")) {
    fs::path p(ctx.config.at("chi").get<std::string>());
    if (p.is_relative() && !ctx.base_dir.empty()) p = ctx.base_dir / p;
    resolved["chi"] = ctx.config.at("chi");
    chi = qpt::io::chi_from_json(qpt::io::read_json(p));
  } else {
    const json syn = ctx.config.value("synthetic", json::object());
    qpt::harness::detail::check_keys(syn, "synthetic", {"delta_n", "alpha_deg"});
    const double dn = get_or(syn, "delta_n", 2.2e-3);
    const double alpha = get_or(syn, "alpha_deg", 91.0);
    resolved["synthetic"] = {{"delta_n", dn}, {"alpha_deg", alpha}};
    const double delta = qpt::kPi * dn * fo.length_um / fo.wavelength_um;
    const auto u = qpt::su2_from_retarder(delta, qpt::harness::rad(alpha)).matrix();
    chi = qpt::chi_from_kraus(qpt::KrausSet(2, {u}));
  }
  auto result = envelope("fit-retarder", resolved, seed);
  if (n > 0) {
    const auto protocol = qpt::process_protocol(qpt::ProcessProtocolName::R4);
    const auto rows = qpt::process_dataset(protocol, chi, {n, qpt::derive_seed(seed, 0, 0), 10.0});
    const auto est = qpt::reconstruct_process(rows, solver.config(1, qpt::derive_seed(seed, 0, 1)));
    if (!est.converged) throw qpt::error("fit-retarder: reconstruction did not converge");
    result["reconstruction_fidelity"] = qpt::fidelity(chi.as_choi().matrix, est.rho);
    chi = est.chi();
  }
  const auto rep = qpt::harness::run_retarder_fit(chi, fo);
  result["fit"] = qpt::harness::retarder_to_json(rep);
  qpt::io::write_json(ctx.out / "chi.json", qpt::io::chi_to_json(chi.as_choi()));
  qpt::io::write_json(ctx.out / "result.json", result);
  std::cout << std::setprecision(8) << "delta " << rep.delta << " rad, alpha " << qpt::harness::deg(rep.alpha)
            << " deg, birefringence " << rep.birefringence << ", mixedness " << rep.mixedness << "\n";
  return 0;
}

json states_to_json(const qpt::QubitStates& states) {
  json out = json::array();
  for (const auto& s : states) {
    const auto b = qpt::bloch_vector(s);
    out.push_back({{"amplitudes", {{s(0).real(), s(0).imag()}, {s(1).real(), s(1).imag()}}}, {"bloch", {b.x(), b.y(), b.z()}}});
  }
  return out;
}

int cmd_protocol_dump(const Options& opt) {
  auto ctx = load(opt);
  using qpt::harness::detail::get_or;
  qpt::harness::detail::check_keys(ctx.config, "protocol-dump config",
                                   {"protocol", "central_wavelength_um", "plate_thickness_um", "wavelength_um", "seed"});
  const std::string name = get_or<std::string>(ctx.config, "protocol", "R4");
  const double central = get_or(ctx.config, "central_wavelength_um", 1.1509);
  const double plate = get_or(ctx.config, "plate_thickness_um", 312.7);
  const double lambda = get_or(ctx.config, "wavelength_um", 1.0);
  const std::uint64_t seed = get_or(ctx.config, "seed", std::uint64_t{1});
  auto result = envelope("protocol-dump",
                         {{"protocol", name}, {"central_wavelength_um", central}, {"plate_thickness_um", plate},
                          {"wavelength_um", lambda}, {"seed", seed}},
                         seed);
  json dump{{"protocol", name}};
  std::vector<qpt::ProtocolRow> rows;
  if (name == "J4" || name == "R4" || name == "B4") {
    const auto p = qpt::process_protocol(qpt::parse_process_protocol(name), central);
    dump["kind"] = "process";
    dump["inputs"] = states_to_json(p.inputs);
    dump["projectors"] = states_to_json(p.projectors);
    rows = p.rows;
  } else if (name == "J4state" || name == "R4state") {
    const auto p = qpt::projective_state_protocol(name == "J4state" ? qpt::StateProtocolName::J4 : qpt::StateProtocolName::R4);
    dump["kind"] = "state";
    rows = p.rows;
  } else if (name.size() > 1 && name[0] == 'B') {
    std::size_t used = 0;
    int orientations = 0;
    try {
      orientations = std::stoi(name.substr(1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != name.size() - 1) throw qpt::error("protocol-dump: unknown protocol '" + name + "'");
    const auto p = qpt::bn_state_protocol(orientations, plate, lambda);
    dump["kind"] = "state";
    rows = p.rows;
  } else {
    throw qpt::error("protocol-dump: unknown protocol '" + name + "' (J4, R4, B4, J4state, R4state or B<N>)");
  }
  std::vector<qpt::CMatrix> ops;
  for (const auto& r : rows) ops.push_back(r.op);
  dump["rows"] = qpt::io::rows_to_json(rows);
  dump["span_rank"] = qpt::hermitian_span_rank(ops);
  result["rows"] = rows.size();
  result["span_rank"] = dump["span_rank"];
  qpt::io::write_json(ctx.out / "protocol.json", dump);
  qpt::io::write_json(ctx.out / "result.json", result);
  std::cout << name << ": " << rows.size() << " rows, operator span rank " << dump["span_rank"].get<int>() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum process tomography toolkit for dispersive retarders"};
  app.require_subcommand(1);
  Options opt;
  int status = 0;

  auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON config file");
    sub->add_option("--seed", opt.seed, "seed (overrides the config)");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--threads", opt.threads, "worker threads (0 = hardware concurrency)")->capture_default_str();
    sub->callback([&, fn] {
      try {
        status = fn(opt);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        status = 1;
      }
    });
  };
  add("plate-chi", "Choi state of a plate stack under a spectral profile", cmd_plate_chi);
  add("gen-data", "simulate Poisson counts for a process protocol", cmd_gen_data);
  add("reconstruct", "maximum-likelihood reconstruction from gen-data output", cmd_reconstruct);
  add("mc", "Monte-Carlo fidelity campaign", cmd_mc);
  add("scaling", "mean loss versus total counts", cmd_scaling);
  add("mixed-workflow", "component-wise mixed-state reconstruction", cmd_mixed_workflow);
  add("fit-retarder", "fit retardance and axis from a process estimate", cmd_fit_retarder);
  add("protocol-dump", "write protocol states and intensity operators", cmd_protocol_dump);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  return status;
}

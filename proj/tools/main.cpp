// diffun -- classify convergence of integral functionals of 1-D diffusions
// and verify verdicts / proof identities by Monte Carlo.
//
// Subcommands:
//   classify <config.json>    deterministic classifier only
//   verify <config.json>      classifier + pathwise trend agreement
//   identities <config.json>  Ray-Knight / Williams / Cherny / Fubini / occupation
//
// Exit codes: 0 success, 1 usage/config error, 2 inconclusive or flagged.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffun/checks.hpp"
#include "diffun/classify.hpp"
#include "diffun/report.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

using diffun::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double endpoint_number(const json& j, const std::string& field) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return diffun::kInf;
    if (s == "-inf") return -diffun::kInf;
    throw ConfigError("field '" + field + "': expected a number, \"inf\" or \"-inf\"");
  }
  if (!j.is_number()) throw ConfigError("field '" + field + "': expected a number");
  return j.get<double>();
}

diffun::Expr parse_field_expr(const json& blk, const std::string& field) {
  if (!blk.contains(field) || !blk.at(field).is_string())
    throw ConfigError("problem." + field + ": expected an expression string");
  const std::string src = blk.at(field).get<std::string>();
  try {
    return diffun::parse_expr(src);
  } catch (const diffun::ParseError& e) {
    throw ConfigError("problem." + field + ": parse error at offset " +
                      std::to_string(e.offset) + " in \"" + src + "\": " + e.what());
  }
}

struct RunConfig {
  diffun::Problem problem;
  diffun::Tolerances tol;
  // simulation block
  double dt = 1e-3;
  double horizon = 256.0;
  std::size_t n_paths = 500;
  std::uint64_t master_seed = 1;
  int dyadic_count = 10;
  double bandwidth = 0.0;  // 0 -> 2*sqrt(dt)
  double agreement_threshold = 0.9;
  double significance = 0.01;
  double rk_u = 0.5;
  std::vector<double> cherny_p = {1.5, 2.5};
  std::vector<std::string> fubini_f = {"1", "x"};
  // output block
  std::string report_path;
  bool dump_paths = false;
  std::string dump_dir = ".";
  std::size_t dump_limit = 4;

  json echo;  // the raw config, for the report
};

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  RunConfig cfg;
  cfg.echo = j;
  if (!j.contains("problem") || !j["problem"].is_object())
    throw ConfigError("config: missing 'problem' object");
  const json& pb = j["problem"];
  for (const char* field : {"l", "r", "x0"})
    if (!pb.contains(field)) throw ConfigError(std::string("problem.") + field + ": missing");
  cfg.problem.space.l = endpoint_number(pb["l"], "problem.l");
  cfg.problem.space.r = endpoint_number(pb["r"], "problem.r");
  cfg.problem.space.x0 = endpoint_number(pb["x0"], "problem.x0");
  cfg.problem.mu = parse_field_expr(pb, "mu");
  cfg.problem.sigma = parse_field_expr(pb, "sigma");
  cfg.problem.f = parse_field_expr(pb, "f");
  if (pb.contains("declared_singularities"))
    cfg.problem.declared_singularities = pb["declared_singularities"].get<std::vector<double>>();
  cfg.problem.f_ae_zero = pb.value("f_ae_zero", false);
  if (!cfg.problem.space.well_formed())
    throw ConfigError("problem: need l < x0 < r");

  if (j.contains("tolerances")) {
    const json& tb = j["tolerances"];
    cfg.tol.rel_tol = tb.value("rel_tol", cfg.tol.rel_tol);
    cfg.tol.abs_tol = tb.value("abs_tol", cfg.tol.abs_tol);
  }
  if (j.contains("simulation")) {
    const json& sb = j["simulation"];
    cfg.dt = sb.value("dt", cfg.dt);
    cfg.horizon = sb.value("horizon", cfg.horizon);
    cfg.n_paths = sb.value("n_paths", cfg.n_paths);
    cfg.master_seed = sb.value("master_seed", cfg.master_seed);
    cfg.dyadic_count = sb.value("dyadic_count", cfg.dyadic_count);
    cfg.bandwidth = sb.value("bandwidth", cfg.bandwidth);
    cfg.agreement_threshold = sb.value("agreement_threshold", cfg.agreement_threshold);
    cfg.significance = sb.value("significance", cfg.significance);
    cfg.rk_u = sb.value("u", cfg.rk_u);
    if (sb.contains("cherny_p")) cfg.cherny_p = sb["cherny_p"].get<std::vector<double>>();
    if (sb.contains("fubini_f")) cfg.fubini_f = sb["fubini_f"].get<std::vector<std::string>>();
    if (!(cfg.dt > 0) || !(cfg.horizon > 0))
      throw ConfigError("simulation: dt and horizon must be positive");
  }
  if (j.contains("output")) {
    const json& ob = j["output"];
    cfg.report_path = ob.value("report", std::string{});
    cfg.dump_paths = ob.value("dump_paths", false);
    cfg.dump_dir = ob.value("dump_dir", std::string{"."});
    cfg.dump_limit = ob.value("dump_limit", cfg.dump_limit);
  }
  if (cfg.bandwidth <= 0) cfg.bandwidth = 2.0 * std::sqrt(cfg.dt);
  return cfg;
}

json base_report(const RunConfig& cfg, const std::string& command) {
  json rep;
  rep["version"] = kVersion;
  rep["command"] = command;
  rep["config"] = cfg.echo;
  return rep;
}

void emit(const json& rep, const RunConfig& cfg, const std::string& out_override) {
  const std::string dump = rep.dump(2) + "\n";
  const std::string path = !out_override.empty() ? out_override : cfg.report_path;
  if (!path.empty()) {
    std::ofstream of(path);
    if (!of) throw ConfigError("cannot write report to '" + path + "'");
    of << dump;
  } else {
    std::cout << dump;
  }
}

void dump_path_csv(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.dump_dir);
  auto f = diffun::as_evaluator(cfg.problem.f);
  const std::size_t n = std::min<std::size_t>(cfg.dump_limit, cfg.n_paths);
  for (std::size_t i = 0; i < n; ++i) {
    diffun::PathSample path = diffun::simulate_diffusion(
        cfg.problem, cfg.dt, cfg.horizon,
        diffun::Rng::for_path(cfg.master_seed, i).next_u64());
    std::vector<double> cum = diffun::detail::cumulative_integral(path, f);
    std::ofstream of(cfg.dump_dir + "/path_" + std::to_string(i) + ".csv");
    of << "t,y,partial_integral\n";
    of.precision(17);
    for (std::size_t k = 0; k < path.times.size(); ++k)
      of << path.times[k] << ',' << path.values[k] << ',' << cum[k] << '\n';
  }
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

int cmd_classify(const RunConfig& cfg, const std::string& out_override) {
  Timer timer;
  json rep = base_report(cfg, "classify");
  diffun::ConvergenceReport cr = diffun::full_verdict(cfg.problem, cfg.tol);
  rep["classifier"] = diffun::to_json(cr, /*include_partials=*/true);
  rep["status"] = cr.conclusive ? "conclusive" : "inconclusive";
  rep["timings"] = {{"total_ms", timer.ms()}};
  emit(rep, cfg, out_override);
  return cr.conclusive ? 0 : 2;
}

int cmd_verify(const RunConfig& cfg, const std::string& out_override, unsigned threads) {
  Timer timer;
  json rep = base_report(cfg, "verify");
  diffun::ConvergenceReport cr = diffun::full_verdict(cfg.problem, cfg.tol);
  rep["classifier"] = diffun::to_json(cr, true);
  if (!cr.conclusive) {
    rep["status"] = "inconclusive";
    rep["timings"] = {{"total_ms", timer.ms()}};
    emit(rep, cfg, out_override);
    return 2;
  }
  diffun::SimParams sp;
  sp.dt = cfg.dt;
  sp.horizon = cfg.horizon;
  sp.dyadic_count = cfg.dyadic_count;
  sp.master_seed = cfg.master_seed;
  sp.threads = threads;
  diffun::AgreementResult ag = diffun::verdict_agreement(cfg.problem, cr, cfg.n_paths, sp);

  // a bucket is underpowered for the threshold when it cannot even resolve
  // one failure at that rate
  std::size_t need = 30;
  if (cfg.agreement_threshold < 1.0)
    need = std::max<std::size_t>(
        need, static_cast<std::size_t>(std::ceil(1.0 / (1.0 - cfg.agreement_threshold))));
  bool too_few = false, below = false;
  for (const auto& b : ag.buckets) {
    if (b.n == 0) continue;
    if (b.n < need || b.too_few) too_few = true;
    if (b.fraction() < cfg.agreement_threshold) below = true;
  }
  json sim = diffun::to_json(ag);
  sim["threshold"] = cfg.agreement_threshold;
  sim["too_few_paths"] = too_few;
  rep["simulation"] = sim;
  rep["status"] = (too_few || below) ? "inconclusive" : "conclusive";
  if (cfg.dump_paths) dump_path_csv(cfg);
  rep["timings"] = {{"total_ms", timer.ms()}};
  emit(rep, cfg, out_override);
  return (too_few || below) ? 2 : 0;
}

int cmd_identities(const RunConfig& cfg, const std::string& out_override, unsigned threads) {
  Timer timer;
  json rep = base_report(cfg, "identities");
  const double r = std::isfinite(cfg.problem.space.r) ? cfg.problem.space.r : 1.0;
  const double x0 = std::isfinite(cfg.problem.space.x0) ? cfg.problem.space.x0 : 0.0;
  const bool underpowered = cfg.n_paths < 100;
  json sim;
  bool all_pass = true;

  {
    diffun::RayKnightResult rk = diffun::ray_knight_check(
        r, x0, cfg.rk_u, cfg.n_paths, cfg.dt, cfg.bandwidth, cfg.master_seed, threads);
    json jrk = diffun::to_json(rk);
    const bool pass = rk.ks.p_value > cfg.significance && rk.truncated_fraction < 0.01;
    jrk["pass"] = pass;
    jrk["underpowered"] = underpowered;
    sim["ray_knight"] = jrk;
    all_pass = all_pass && pass;
  }
  {
    diffun::WilliamsResult w = diffun::williams_check(
        r, x0, cfg.n_paths, cfg.dt, cfg.master_seed ^ 0x77696c6c, threads);
    json jw = diffun::to_json(w);
    const bool pass = w.ks.p_value > cfg.significance;
    jw["pass"] = pass;
    jw["underpowered"] = underpowered;
    sim["williams"] = jw;
    all_pass = all_pass && pass;
  }
  {
    json arr = json::array();
    bool pass = true;
    for (double p : cfg.cherny_p) {
      diffun::ChernyResult c = diffun::cherny_dichotomy_check(
          p, 1.0, std::min<std::size_t>(cfg.n_paths, 500), cfg.dt,
          cfg.master_seed ^ 0x63686572, threads);
      json jc = diffun::to_json(c);
      jc["p"] = p;
      const bool ok = c.summary.estimate >= 0.9;
      jc["pass"] = ok;
      pass = pass && ok;
      arr.push_back(jc);
    }
    sim["cherny"] = {{"cases", arr}, {"pass", pass}, {"underpowered", underpowered}};
    all_pass = all_pass && pass;
  }
  {
    json arr = json::array();
    bool pass = true;
    for (const std::string& src : cfg.fubini_f) {
      auto f = diffun::as_evaluator(diffun::parse_expr(src));
      diffun::FubiniResult fb = diffun::fubini_mean_check(
          f, r, x0, cfg.n_paths, cfg.master_seed ^ 0x66756269, threads);
      json jf = diffun::to_json(fb);
      jf["f"] = src;
      const bool ok = std::fabs(fb.z_score) <= 3.0;
      jf["pass"] = ok;
      pass = pass && ok;
      arr.push_back(jf);
    }
    sim["fubini"] = {{"cases", arr}, {"pass", pass}, {"underpowered", underpowered}};
    all_pass = all_pass && pass;
  }
  {
    // occupation identity on BM stopped at its first hit of r
    auto f = [](double x) { return std::exp(-x * x); };
    const std::size_t n = std::min<std::size_t>(cfg.n_paths, 100);
    auto errs = diffun::map_indexed<double>(n, threads, [&](std::size_t i) {
      diffun::PathSample path = diffun::simulate_bm_to_hit(
          x0, r, cfg.dt, diffun::Rng::for_path(cfg.master_seed ^ 0x6f636370, i).next_u64(),
          1e4 * (r - x0) * (r - x0));
      return diffun::occupation_identity_relerr(path, f, cfg.bandwidth);
    });
    const double med = diffun::median_of(errs);
    const bool pass = med < 0.05;
    sim["occupation"] = {{"median_rel_error", diffun::json_number(med)},
                         {"n_paths", n},
                         {"pass", pass},
                         {"underpowered", underpowered}};
    all_pass = all_pass && pass;
  }

  rep["simulation"] = sim;
  rep["status"] = (all_pass && !underpowered) ? "conclusive" : "inconclusive";
  rep["timings"] = {{"total_ms", timer.ms()}};
  emit(rep, cfg, out_override);
  return (all_pass && !underpowered) ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffun: convergence of integral functionals of 1-D diffusions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, out_override;
  std::optional<std::uint64_t> seed_override;
  unsigned threads = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "JSON config file")->required();
    sub->add_option("--seed", seed_override, "override simulation.master_seed");
    sub->add_option("--out", out_override, "report output path (default: config or stdout)");
    sub->add_option("--threads", threads, "worker threads (does not affect results)");
  };
  CLI::App* c_classify = app.add_subcommand("classify", "deterministic classification only");
  CLI::App* c_verify = app.add_subcommand("verify", "classification + simulation agreement");
  CLI::App* c_ident = app.add_subcommand("identities", "distributional identity checks");
  add_common(c_classify);
  add_common(c_verify);
  add_common(c_ident);

  CLI11_PARSE(app, argc, argv);
  if (threads == 0) threads = 1;

  try {
    RunConfig cfg = load_config(config_path);
    if (seed_override) {
      cfg.master_seed = *seed_override;
      cfg.echo["simulation"]["master_seed"] = cfg.master_seed;
    }
    if (c_classify->parsed()) return cmd_classify(cfg, out_override);
    if (c_verify->parsed()) return cmd_verify(cfg, out_override, threads);
    return cmd_identities(cfg, out_override, threads);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

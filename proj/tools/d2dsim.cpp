// d2dsim: run scenarios, query the brute-force optimum, analyse the exact
// chain of a tiny game, and print calibrated rate targets.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "d2d/analysis.hpp"
#include "d2d/metrics.hpp"
#include "d2d/scenario.hpp"
#include "d2d/simulator.hpp"

namespace {

using nlohmann::json;

struct Source {
  std::string config;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> horizon;

  void attach(CLI::App* cmd) {
    auto* c = cmd->add_option("-c,--config", config, "scenario config file");
    auto* p = cmd->add_option("-p,--preset", preset_name, "named preset")
                  ->check(CLI::IsMember(d2d::preset_names()));
    c->excludes(p);
    cmd->add_option("-s,--seed", seed, "seed override");
    cmd->add_option("-n,--horizon", horizon, "epochs (frames or superframes)");
  }

  d2d::ScenarioConfig load() const {
    if (config.empty() && preset_name.empty()) {
      throw d2d::ConfigError("give --config or --preset");
    }
    d2d::ScenarioConfig cfg = config.empty() ? d2d::preset(preset_name) : d2d::load_config(config);
    if (seed) cfg.seed = *seed;
    if (horizon) cfg.horizon = *horizon;
    cfg.validate();
    return cfg;
  }
};

json lists_json(const d2d::ListSpace& space, const d2d::ActionProfile& p) {
  json out = json::array();
  for (auto rank : p) {
    json l = json::array();
    for (int c : space.unrank(rank)) l.push_back(c + 1);
    out.push_back(l);
  }
  return out;
}

json allocation_json(const std::vector<d2d::AllocationProfile>& allocs) {
  json out = json::array();
  for (const auto& a : allocs) {
    json row = json::array();
    for (int c : d2d::allocation_tuple(a)) row.push_back(c + 1);  // 0 = none
    out.push_back(row);
  }
  return out;
}

json calibration_json(const d2d::Calibration& cal) {
  return {{"normalization_bps", cal.normalization_bps},
          {"r_tgt", cal.r_tgt},
          {"observed_utility", cal.observed_norm}};
}

std::optional<d2d::Optimum> try_oracle(const d2d::ScenarioConfig& cfg, const d2d::World& world,
                                       const d2d::Calibration& cal, std::int64_t budget) {
  if (cfg.mode != d2d::Mode::PathlossFrame) return std::nullopt;
  const auto game = d2d::make_game(cfg, world, cal);
  const auto total = game.num_profiles();
  if (total < 0 || total > budget) return std::nullopt;
  try {
    return d2d::brute_force_optimum(game, budget);
  } catch (const d2d::NoFeasibleProfile&) {
    return std::nullopt;
  }
}

int run_cmd(const Source& src, const std::string& out_dir, bool trace, std::int64_t budget) {
  const auto cfg = src.load();
  const auto world = d2d::make_world(cfg);
  const auto cal = d2d::calibrate(cfg, world);
  const auto oracle = try_oracle(cfg, world, cal, budget);

  std::filesystem::create_directories(out_dir);
  const std::string stem = out_dir + "/" + cfg.name + "_seed" + std::to_string(cfg.seed);
  d2d::CsvWriter csv(stem + ".csv", cfg.mode, cfg.n_d);
  std::optional<d2d::TraceWriter> tracer;
  if (trace) tracer.emplace(stem + "_trace.csv");

  d2d::RunOptions opt;
  opt.keep_allocations = trace;
  if (oracle) opt.w_star = oracle->w_star;
  opt.sink = [&](const d2d::EpochRecord& r) {
    csv.write(r);
    if (tracer) tracer->write(r);
  };
  const auto s = d2d::run_experiment(cfg, opt);
  csv.close();

  json j = {{"scenario", cfg.name},
            {"mode", d2d::to_string(cfg.mode)},
            {"seed", cfg.seed},
            {"epochs", s.epochs},
            {"csv", stem + ".csv"},
            {"calibration", calibration_json(s.calibration)},
            {"mean_social_utility_bps", s.mean_social_bps},
            {"mean_social_utility_norm", s.mean_social_norm},
            {"max_social_utility_bps", s.max_social_bps},
            {"mean_normalized_mood", s.mean_mood}};
  if (std::isfinite(s.max_content_social_bps)) {
    j["max_all_content_social_utility_bps"] = s.max_content_social_bps;
    json allocs = json::array();
    for (const auto& t : s.best_content_allocations) {
      json row = json::array();
      for (int c : t) row.push_back(c + 1);
      allocs.push_back(row);
    }
    j["allocations_at_max_all_content"] = allocs;
  }
  if (oracle) {
    j["oracle_w_star_norm"] = oracle->w_star;
    j["fraction_at_optimum"] = *s.fraction_at_optimum;
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int oracle_cmd(const Source& src, std::int64_t budget) {
  const auto cfg = src.load();
  if (cfg.mode != d2d::Mode::PathlossFrame) {
    throw d2d::ConfigError("oracle needs a pathloss-mode scenario");
  }
  const auto world = d2d::make_world(cfg);
  const auto cal = d2d::calibrate(cfg, world);
  const auto game = d2d::make_game(cfg, world, cal);
  const auto opt = d2d::brute_force_optimum(game, budget);
  json profiles = json::array();
  for (std::size_t i = 0; i < opt.profiles.size(); ++i) {
    profiles.push_back({{"lists", lists_json(game.lists(), opt.profiles[i])},
                        {"utilities", opt.utilities[i]},
                        {"allocations", allocation_json(game.play(opt.profiles[i]).allocations)}});
  }
  json j = {{"scenario", cfg.name},
            {"calibration", calibration_json(cal)},
            {"profiles_enumerated", game.num_profiles()},
            {"feasible_profiles", opt.feasible_count},
            {"w_star_norm", opt.w_star},
            {"w_star_bps", opt.w_star * cal.normalization_bps},
            {"optimal_profiles", profiles}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int dtmc_cmd(const Source& src, const std::vector<double>& epsilons, std::size_t state_budget) {
  const auto cfg = src.load();
  if (cfg.mode != d2d::Mode::PathlossFrame) {
    throw d2d::ConfigError("dtmc needs a pathloss-mode scenario");
  }
  const auto world = d2d::make_world(cfg);
  const auto cal = d2d::calibrate(cfg, world);
  const auto game = d2d::make_game(cfg, world, cal);
  const auto opt = d2d::brute_force_optimum(game);

  std::vector<d2d::DtmcSolve> family;
  json per_eps = json::array();
  for (double eps : epsilons) {
    auto chain = d2d::build_exact_dtmc(game, cfg.k, eps, state_budget);
    auto pi = d2d::stationary_distribution(chain.transition);
    double mass = 0.0;
    for (std::size_t i = 0; i < chain.size(); ++i) {
      if (d2d::check_stable_state(chain.states[i], game, opt).passes()) {
        mass += pi(static_cast<Eigen::Index>(i));
      }
    }
    per_eps.push_back({{"epsilon", eps},
                       {"states", chain.size()},
                       {"period", d2d::period(chain.transition)},
                       {"max_row_sum_error", d2d::max_row_sum_error(chain.transition)},
                       {"residual", d2d::stationary_residual(chain.transition, pi)},
                       {"optimal_content_mass", mass}});
    family.push_back({eps, std::move(chain), std::move(pi)});
  }

  json stable = json::array();
  if (family.size() >= 3) {
    for (const auto& s : d2d::stochastically_stable_set(family)) {
      const auto check = d2d::check_stable_state(s, game, opt);
      json moods = json::array();
      for (auto m : s.moods) moods.push_back(d2d::to_string(m));
      stable.push_back({{"lists", lists_json(game.lists(), s.lists)},
                        {"utilities", s.utilities},
                        {"moods", moods},
                        {"all_content", check.all_content},
                        {"aligned", check.aligned},
                        {"optimal", check.optimal}});
    }
  }
  json j = {{"scenario", cfg.name},
            {"k", cfg.k},
            {"w_star_norm", opt.w_star},
            {"chains", per_eps},
            {"stochastically_stable", stable}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int calibrate_cmd(const Source& src) {
  const auto cfg = src.load();
  const auto world = d2d::make_world(cfg);
  const auto cal = d2d::calibrate(cfg, world);
  json j = calibration_json(cal);
  j["scenario"] = cfg.name;
  j["seed"] = cfg.seed;
  json bps = json::array();
  for (double r : cal.r_tgt) bps.push_back(r * cal.normalization_bps);
  j["r_tgt_bps"] = bps;
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"D2D underlay resource allocation with mood-based learning"};
  app.require_subcommand(1);

  Source run_src, oracle_src, dtmc_src, cal_src;
  std::string out_dir = "out";
  bool trace = false;
  std::int64_t budget = 2'000'000;
  std::vector<double> epsilons{0.2, 0.1, 0.05};
  std::size_t state_budget = 20000;

  auto* run = app.add_subcommand("run", "run a scenario and write per-epoch CSV");
  run_src.attach(run);
  run->add_option("-o,--out", out_dir, "output directory");
  run->add_flag("--trace", trace, "also write the per-subframe allocation trace");
  run->add_option("--budget", budget, "profile budget for the at-optimum fraction");

  auto* oracle = app.add_subcommand("oracle", "brute-force social optimum");
  oracle_src.attach(oracle);
  oracle->add_option("--budget", budget, "maximum number of action profiles");

  auto* dtmc = app.add_subcommand("dtmc", "exact perturbed chain of a tiny game");
  dtmc_src.attach(dtmc);
  dtmc->add_option("-e,--epsilon", epsilons, "epsilon values")->delimiter(',');
  dtmc->add_option("--state-budget", state_budget, "maximum number of chain states");

  auto* cal = app.add_subcommand("calibrate", "print rate targets and normalization");
  cal_src.attach(cal);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_cmd(run_src, out_dir, trace, budget);
    if (*oracle) return oracle_cmd(oracle_src, budget);
    if (*dtmc) return dtmc_cmd(dtmc_src, epsilons, state_budget);
    if (*cal) return calibrate_cmd(cal_src);
  } catch (const std::exception& e) {
    std::cerr << "d2dsim: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

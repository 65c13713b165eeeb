#pragma once

// Scenario configuration: presets and the INI-style config file.
//
//   [scenario]   preset, name, mode, topology, n_c, n_d, cell_radius_m,
//                pair_range_m, horizon, seed, topology_seed
//   [concept]    inner_radius_m, outer_radius_m, cu_angles_deg,
//                rx_angles_deg, tx_offset_deg
//   [channel]    pathloss, alpha, shadowing_sigma_db, fast_fading,
//                noise_density_dbm_hz, bandwidth_hz, rate_bandwidth_hz,
//                ue_noise_figure_db,
//                bs_noise_figure_db, noise_mw, min_distance_m
//   [power]      p_c_mw, p_d_mw
//   [learning]   epsilon, k, list_len, normalization_bps,
//                normalization_margin, delta, utility_rel_tol
//   [allocation] test_enabled, gamma_tgt_db
//   [targets]    rule, fraction, baseline_lists, values
//   [mobility]   enabled, speed_m_s, change_prob
//
// `preset` loads a named preset first; the remaining keys override it.
// Lists in `baseline_lists` use 1-based CU numbers, e.g. "1 2; 2 3; 3 1".

#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "d2d/learning.hpp"
#include "d2d/topology.hpp"

namespace d2d {

enum class Mode { PathlossFrame, FadingSuperframe };
enum class TopologyKind { Concept, Uniform };
enum class TargetRule { None, BaselineProfile, FirstEpoch, Explicit };

inline const char* to_string(Mode m) {
  return m == Mode::PathlossFrame ? "pathloss" : "fading";
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  std::string name = "custom";
  Mode mode = Mode::PathlossFrame;
  TopologyKind topology = TopologyKind::Uniform;
  ConceptLayout concept_layout{};
  std::size_t n_c = 10;
  std::size_t n_d = 10;
  double cell_radius_m = 250.0;
  double pair_range_m = 50.0;

  ChannelConfig channel{};
  PowerConfig power{};

  double epsilon = 0.7;
  double k = 23.0;
  std::size_t list_len = 3;
  // 0 selects the peak rule: margin times the largest interference-free
  // single-link rate of the drop.
  double normalization_bps = 10e6;
  double normalization_margin = 1.05;
  double delta = 0.01;
  double utility_rel_tol = 0.0;

  bool allocation_test = true;
  double gamma_tgt_db = 0.0;

  TargetRule target_rule = TargetRule::FirstEpoch;
  double target_fraction = 0.5;
  std::vector<D2dList> baseline_lists;  // 0-based
  std::vector<double> explicit_targets;

  bool mobility_enabled = false;
  MobilityParams mobility{};

  std::int64_t horizon = 1000;  // frames or superframes
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> topology_seed;

  void validate() const {
    if (n_c == 0 || n_d == 0) throw ConfigError("n_c and n_d must be >= 1");
    if (topology == TopologyKind::Concept && (n_c != 3 || n_d != 3)) {
      throw ConfigError("concept topology needs n_c = n_d = 3");
    }
    if (!(cell_radius_m > 0.0) || !(pair_range_m > 0.0)) {
      throw ConfigError("cell_radius_m and pair_range_m must be > 0");
    }
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
    if (!(k > static_cast<double>(n_d))) {
      throw ConfigError("k must exceed N_D (k=" + std::to_string(k) +
                        ", N_D=" + std::to_string(n_d) + ")");
    }
    if (list_len == 0 || list_len > n_c) throw ConfigError("list_len must satisfy 1 <= K <= N_C");
    if (ListSpace(n_c, list_len).size() < 2) throw ConfigError("need at least two lists");
    if (normalization_bps < 0.0) throw ConfigError("normalization_bps must be >= 0");
    if (!(normalization_margin >= 1.0)) throw ConfigError("normalization_margin must be >= 1");
    if (!(delta >= 0.0)) throw ConfigError("delta must be >= 0");
    if (!(target_fraction >= 0.0)) throw ConfigError("target fraction must be >= 0");
    if (target_rule == TargetRule::BaselineProfile) {
      if (baseline_lists.size() != n_d) {
        throw ConfigError("baseline_lists needs one list per D2D pair");
      }
      for (const auto& l : baseline_lists) {
        if (l.size() != list_len) throw ConfigError("baseline list has wrong length");
        try {
          validate_list(l, n_c);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("baseline_lists: ") + e.what());
        }
      }
    }
    if (target_rule == TargetRule::Explicit && explicit_targets.size() != n_d) {
      throw ConfigError("targets.values needs one value per D2D pair");
    }
    try {
      channel.validate();
      power.validate();
      if (mobility_enabled) mobility.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  LearningParams learning(std::vector<double> r_tgt, double normalization) const {
    LearningParams p;
    p.epsilon = epsilon;
    p.k = k;
    p.r_tgt = std::move(r_tgt);
    p.normalization_bps = normalization;
    p.n_c = n_c;
    p.n_d = n_d;
    p.list_len = list_len;
    p.utility_rel_tol = utility_rel_tol;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Presets.

/// Three CUs and three pairs on two semicircles, powers 10 mW, 1/d^2
/// pathloss, N0 = 0.1 mW, B = 1 Hz. The allocation test is off; targets are
/// half the rates under the allocation (c1, c2, c3).
inline ScenarioConfig concept_preset() {
  ScenarioConfig c;
  c.name = "concept";
  c.mode = Mode::PathlossFrame;
  c.topology = TopologyKind::Concept;
  c.n_c = 3;
  c.n_d = 3;
  c.cell_radius_m = 100.0;
  c.pair_range_m = 20.0;
  c.channel.pathloss = PowerLaw{2.0};
  c.channel.bandwidth_hz = 1.0;
  c.channel.explicit_noise_mw = 0.1;
  c.power = {10.0, 10.0};
  c.epsilon = 0.5;
  c.k = 11.0;
  c.list_len = 2;
  c.normalization_bps = 1.0;
  c.allocation_test = false;
  c.gamma_tgt_db = 0.0;
  c.target_rule = TargetRule::BaselineProfile;
  c.baseline_lists = {{0, 1}, {1, 2}, {2, 0}};
  c.horizon = 10000;
  c.seed = 1;
  return c;
}

/// 250 m cell, ten CUs and ten pairs, LTE pathloss, lists of three.
inline ScenarioConfig main_pathloss_preset() {
  ScenarioConfig c;
  c.name = "main-pathloss";
  c.mode = Mode::PathlossFrame;
  c.topology = TopologyKind::Uniform;
  c.n_c = 10;
  c.n_d = 10;
  c.cell_radius_m = 250.0;
  c.pair_range_m = 50.0;
  c.channel = ChannelConfig{};
  c.channel.rate_bandwidth_hz = 180e3;  // rates per PRB; noise over both PRBs
  c.power = {250.0, 1.0};
  c.epsilon = 0.7;
  c.k = 23.0;
  c.list_len = 3;
  c.normalization_bps = 10e6;
  c.allocation_test = true;
  c.gamma_tgt_db = 0.0;
  c.target_rule = TargetRule::FirstEpoch;
  c.horizon = 20000;
  c.seed = 1;
  return c;
}

/// main-pathloss plus 8 dB shadowing, Rayleigh fast fading, CU mobility
/// and the superframe threshold utility.
inline ScenarioConfig main_fading_preset() {
  ScenarioConfig c = main_pathloss_preset();
  c.name = "main-fading";
  c.mode = Mode::FadingSuperframe;
  c.channel.shadowing_sigma_db = 8.0;
  c.channel.fast_fading = true;
  c.epsilon = 0.7;
  c.k = 31.0;
  c.delta = 0.01;
  c.utility_rel_tol = 1e-9;
  c.mobility_enabled = true;
  c.mobility = MobilityParams{1.0, 1e-5, c.cell_radius_m, 1e-3};
  c.horizon = 2000;
  return c;
}

/// Two pairs, three CUs, one-entry lists: small enough for the exact chain.
inline ScenarioConfig tiny_dtmc_preset() {
  ScenarioConfig c;
  c.name = "tiny-dtmc";
  c.mode = Mode::PathlossFrame;
  c.topology = TopologyKind::Uniform;
  c.n_c = 3;
  c.n_d = 2;
  c.cell_radius_m = 100.0;
  c.pair_range_m = 30.0;
  c.channel.pathloss = PowerLaw{3.0};
  c.channel.bandwidth_hz = 1.0;
  c.channel.explicit_noise_mw = 1e-6;
  c.power = {100.0, 10.0};
  c.epsilon = 0.1;
  c.k = 3.0;
  c.list_len = 1;
  c.normalization_bps = 0.0;
  c.allocation_test = false;
  c.target_rule = TargetRule::FirstEpoch;
  c.horizon = 1000;
  c.seed = 1;
  c.topology_seed = 222;
  return c;
}

/// Three pairs, four CUs, power-law pathloss in a 100 m cell.
inline ScenarioConfig random_small_preset() {
  ScenarioConfig c;
  c.name = "random-small";
  c.mode = Mode::PathlossFrame;
  c.topology = TopologyKind::Uniform;
  c.n_c = 4;
  c.n_d = 3;
  c.cell_radius_m = 100.0;
  c.pair_range_m = 30.0;
  c.channel.pathloss = PowerLaw{3.0};
  c.channel.bandwidth_hz = 1.0;
  c.channel.explicit_noise_mw = 1e-6;
  c.power = {10.0, 10.0};
  c.epsilon = 0.3;
  c.k = 3.5;
  c.list_len = 1;
  c.normalization_bps = 0.0;
  c.allocation_test = false;
  c.target_rule = TargetRule::FirstEpoch;
  c.horizon = 100000;
  c.seed = 1;
  return c;
}

inline std::vector<std::string> preset_names() {
  return {"concept", "main-pathloss", "main-fading", "tiny-dtmc", "random-small"};
}

inline ScenarioConfig preset(std::string_view name) {
  if (name == "concept") return concept_preset();
  if (name == "main-pathloss") return main_pathloss_preset();
  if (name == "main-fading") return main_fading_preset();
  if (name == "tiny-dtmc") return tiny_dtmc_preset();
  if (name == "random-small") return random_small_preset();
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Config file.

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("'" + key + "': expected a number, got '" + t + "'");
  }
  return v;
}

inline std::int64_t parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("'" + key + "': expected an integer, got '" + t + "'");
  }
  return v;
}

inline std::size_t parse_count(const std::string& key, const std::string& text) {
  const auto v = parse_int(key, text);
  if (v < 0) throw ConfigError("'" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + t + "'");
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& text) {
  // Comma or whitespace separated.
  std::string flat = text;
  for (char& ch : flat) {
    if (ch == ',') ch = ' ';
  }
  std::vector<double> out;
  std::stringstream ss(flat);
  std::string item;
  while (ss >> item) out.push_back(parse_double(key, item));
  return out;
}

template <std::size_t N>
std::array<double, N> parse_triple(const std::string& key, const std::string& text) {
  const auto v = parse_doubles(key, text);
  if (v.size() != N) throw ConfigError("'" + key + "': expected " + std::to_string(N) + " values");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i];
  return out;
}

/// "1 2; 2 3; 3 1" -> {{0,1},{1,2},{2,0}}
inline std::vector<D2dList> parse_lists(const std::string& key, const std::string& text) {
  std::vector<D2dList> lists;
  std::stringstream ss(text);
  std::string group;
  while (std::getline(ss, group, ';')) {
    std::stringstream gs(group);
    std::string tok;
    D2dList l;
    while (gs >> tok) {
      const auto c = parse_int(key, tok);
      if (c < 1) throw ConfigError("'" + key + "': CU numbers start at 1");
      l.push_back(static_cast<int>(c - 1));
    }
    if (!l.empty()) lists.push_back(std::move(l));
  }
  return lists;
}

/// Line of the first `key =` assignment inside `[section]`, or 0.
inline int find_line(const std::string& path, const std::string& section, const std::string& key) {
  std::ifstream in(path);
  std::string line;
  std::string current;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      current = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (current == section && eq != std::string::npos && trim(t.substr(0, eq)) == key) {
      return number;
    }
  }
  return 0;
}

}  // namespace detail

/// Applies one `section.key = value` setting.
inline void apply_setting(ScenarioConfig& c, const std::string& section, const std::string& key,
                          const std::string& value) {
  using namespace detail;
  const std::string full = section + "." + key;
  const std::string v = trim(value);
  auto unknown = [&]() { throw ConfigError("unknown key '" + full + "'"); };

  if (section == "scenario") {
    if (key == "preset") {
      // handled by the loader before other keys
    } else if (key == "name") {
      c.name = v;
    } else if (key == "mode") {
      if (v == "pathloss") c.mode = Mode::PathlossFrame;
      else if (v == "fading") c.mode = Mode::FadingSuperframe;
      else throw ConfigError("'" + full + "': expected pathloss or fading");
    } else if (key == "topology") {
      if (v == "concept") c.topology = TopologyKind::Concept;
      else if (v == "uniform") c.topology = TopologyKind::Uniform;
      else throw ConfigError("'" + full + "': expected concept or uniform");
    } else if (key == "n_c") {
      c.n_c = parse_count(full, v);
    } else if (key == "n_d") {
      c.n_d = parse_count(full, v);
    } else if (key == "cell_radius_m") {
      c.cell_radius_m = parse_double(full, v);
      c.mobility.cell_radius_m = c.cell_radius_m;
    } else if (key == "pair_range_m") {
      c.pair_range_m = parse_double(full, v);
    } else if (key == "horizon") {
      c.horizon = parse_int(full, v);
    } else if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(parse_int(full, v));
    } else if (key == "topology_seed") {
      c.topology_seed = static_cast<std::uint64_t>(parse_int(full, v));
    } else {
      unknown();
    }
  } else if (section == "concept") {
    if (key == "inner_radius_m") c.concept_layout.inner_radius_m = parse_double(full, v);
    else if (key == "outer_radius_m") c.concept_layout.outer_radius_m = parse_double(full, v);
    else if (key == "cu_angles_deg") c.concept_layout.cu_angles_deg = parse_triple<3>(full, v);
    else if (key == "rx_angles_deg") c.concept_layout.rx_angles_deg = parse_triple<3>(full, v);
    else if (key == "tx_offset_deg") c.concept_layout.tx_offset_deg = parse_triple<3>(full, v);
    else unknown();
  } else if (section == "channel") {
    if (key == "pathloss") {
      if (v == "lte") c.channel.pathloss = LteUplink{};
      else if (v == "power") c.channel.pathloss = PowerLaw{2.0};
      else throw ConfigError("'" + full + "': expected lte or power");
    } else if (key == "alpha") {
      c.channel.pathloss = PowerLaw{parse_double(full, v)};
    } else if (key == "shadowing_sigma_db") {
      c.channel.shadowing_sigma_db = parse_double(full, v);
    } else if (key == "fast_fading") {
      c.channel.fast_fading = parse_bool(full, v);
    } else if (key == "noise_density_dbm_hz") {
      c.channel.noise_density_dbm_hz = parse_double(full, v);
    } else if (key == "bandwidth_hz") {
      c.channel.bandwidth_hz = parse_double(full, v);
    } else if (key == "rate_bandwidth_hz") {
      if (v == "none") c.channel.rate_bandwidth_hz.reset();
      else c.channel.rate_bandwidth_hz = parse_double(full, v);
    } else if (key == "ue_noise_figure_db") {
      c.channel.ue_noise_figure_db = parse_double(full, v);
    } else if (key == "bs_noise_figure_db") {
      c.channel.bs_noise_figure_db = parse_double(full, v);
    } else if (key == "noise_mw") {
      if (v == "none") c.channel.explicit_noise_mw.reset();
      else c.channel.explicit_noise_mw = parse_double(full, v);
    } else if (key == "min_distance_m") {
      c.channel.min_distance_m = parse_double(full, v);
    } else {
      unknown();
    }
  } else if (section == "power") {
    if (key == "p_c_mw") c.power.p_c_mw = parse_double(full, v);
    else if (key == "p_d_mw") c.power.p_d_mw = parse_double(full, v);
    else unknown();
  } else if (section == "learning") {
    if (key == "epsilon") c.epsilon = parse_double(full, v);
    else if (key == "k") c.k = parse_double(full, v);
    else if (key == "list_len") c.list_len = parse_count(full, v);
    else if (key == "normalization_bps") c.normalization_bps = parse_double(full, v);
    else if (key == "normalization_margin") c.normalization_margin = parse_double(full, v);
    else if (key == "delta") c.delta = parse_double(full, v);
    else if (key == "utility_rel_tol") c.utility_rel_tol = parse_double(full, v);
    else unknown();
  } else if (section == "allocation") {
    if (key == "test_enabled") c.allocation_test = parse_bool(full, v);
    else if (key == "gamma_tgt_db") c.gamma_tgt_db = parse_double(full, v);
    else unknown();
  } else if (section == "targets") {
    if (key == "rule") {
      if (v == "none") c.target_rule = TargetRule::None;
      else if (v == "baseline") c.target_rule = TargetRule::BaselineProfile;
      else if (v == "first_epoch") c.target_rule = TargetRule::FirstEpoch;
      else if (v == "explicit") c.target_rule = TargetRule::Explicit;
      else throw ConfigError("'" + full + "': expected none, baseline, first_epoch or explicit");
    } else if (key == "fraction") {
      c.target_fraction = parse_double(full, v);
    } else if (key == "baseline_lists") {
      c.baseline_lists = parse_lists(full, v);
    } else if (key == "values") {
      c.explicit_targets = parse_doubles(full, v);
    } else {
      unknown();
    }
  } else if (section == "mobility") {
    if (key == "enabled") c.mobility_enabled = parse_bool(full, v);
    else if (key == "speed_m_s") c.mobility.speed_m_s = parse_double(full, v);
    else if (key == "change_prob") c.mobility.change_prob = parse_double(full, v);
    else unknown();
  } else {
    throw ConfigError("unknown section '[" + section + "]'");
  }
}

/// Parses and validates a config file. Errors carry the file path and,
/// where known, the line.
inline ScenarioConfig load_config(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  ScenarioConfig config;
  if (auto p = tree.get_optional<std::string>("scenario.preset")) {
    try {
      config = preset(detail::trim(*p));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(detail::find_line(path, "scenario", "preset")) +
                        ": " + e.what());
    }
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(path + ": key '" + section + "' outside any section");
    }
    for (const auto& [key, node] : body) {
      try {
        apply_setting(config, section, key, node.data());
      } catch (const ConfigError& e) {
        const int line = detail::find_line(path, section, key);
        throw ConfigError(path + ":" + std::to_string(line) + ": " + e.what());
      }
    }
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config;
}

}  // namespace d2d

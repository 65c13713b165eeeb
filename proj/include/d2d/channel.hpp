#pragma once

// Link budget primitives: pathloss, shadowing, fast fading, noise, CU SINR
// and D2D achievable rate. All link math is in linear mW / unitless gains;
// dB only appears at configuration and reporting boundaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <variant>
#include <vector>

namespace d2d {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }
inline double dbm_to_mw(double dbm) { return db_to_linear(dbm); }
inline double mw_to_dbm(double mw) { return linear_to_db(mw); }

/// Free-space style power law, gain = 1 / d^alpha (distance in metres).
struct PowerLaw {
  double alpha = 2.0;
};

/// LTE uplink macro model, PL = 128.1 + 37.6 log10(d_km).
struct LteUplink {};

using PathlossModel = std::variant<PowerLaw, LteUplink>;

inline double pathloss_gain(double distance_m, double alpha) {
  if (!(distance_m > 0.0)) {
    throw std::domain_error("pathloss_gain: distance must be positive");
  }
  return 1.0 / std::pow(distance_m, alpha);
}

inline double lte_pathloss_db(double distance_km) {
  if (!(distance_km > 0.0)) {
    throw std::domain_error("lte_pathloss_db: distance must be positive");
  }
  return 128.1 + 37.6 * std::log10(distance_km);
}

inline double noise_power_dbm(double density_dbm_hz, double bandwidth_hz,
                              double noise_figure_db) {
  if (!(bandwidth_hz > 0.0)) {
    throw std::domain_error("noise_power_dbm: bandwidth must be positive");
  }
  return density_dbm_hz + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

/// Lognormal shadowing multiplier 10^(X/10), X ~ N(0, sigma_db^2).
/// sigma_db == 0 returns exactly 1 without consuming randomness.
template <class Rng>
double sample_shadowing(double sigma_db, Rng& rng) {
  if (sigma_db < 0.0) {
    throw std::domain_error("sample_shadowing: sigma must be non-negative");
  }
  if (sigma_db == 0.0) return 1.0;
  std::normal_distribution<double> normal(0.0, sigma_db);
  return db_to_linear(normal(rng));
}

/// Rayleigh power fading: exponential with unit mean.
template <class Rng>
double sample_fast_fading(Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  return expo(rng);
}

template <class Rng>
double sample_fast_fading(bool enabled, Rng& rng) {
  return enabled ? sample_fast_fading(rng) : 1.0;
}

inline double effective_gain(double pathloss, double shadow, double fading) {
  if (!(pathloss > 0.0) || !(shadow > 0.0) || !(fading > 0.0)) {
    throw std::domain_error("effective_gain: factors must be positive");
  }
  return pathloss * shadow * fading;
}

/// SINR of CU c at the BS when D2D transmitter d reuses its resources.
/// A zero interference term (p_d * g_dB == 0) gives the plain SNR.
inline double cu_sinr(double p_c, double g_cB, double p_d, double g_dB,
                      double n0) {
  if (!(p_c > 0.0) || !(g_cB > 0.0) || !(n0 > 0.0) || p_d < 0.0 ||
      g_dB < 0.0) {
    throw std::domain_error("cu_sinr: invalid power, gain or noise");
  }
  return (p_c * g_cB) / (p_d * g_dB + n0);
}

/// Shannon rate B log2(1 + SINR) of D2D pair d on CU c's resources.
inline double d2d_rate(double b_hz, double p_d, double g_d, double p_c,
                       double g_cd, double n0) {
  if (!(b_hz > 0.0) || !(p_d > 0.0) || !(g_d > 0.0) || !(p_c > 0.0) ||
      !(g_cd > 0.0) || !(n0 > 0.0)) {
    throw std::domain_error("d2d_rate: inputs must be positive");
  }
  const double sinr = (p_d * g_d) / (p_c * g_cd + n0);
  return b_hz * std::log2(1.0 + sinr);
}

struct PowerConfig {
  double p_c_mw = 250.0;
  double p_d_mw = 1.0;

  void validate() const {
    if (!(p_c_mw > 0.0) || !(p_d_mw > 0.0)) {
      throw std::invalid_argument("transmit powers must be positive");
    }
  }
};

struct ChannelConfig {
  PathlossModel pathloss = LteUplink{};
  double shadowing_sigma_db = 0.0;
  bool fast_fading = false;
  double noise_density_dbm_hz = -174.0;
  double bandwidth_hz = 360e3;
  double ue_noise_figure_db = 9.0;
  double bs_noise_figure_db = 5.0;
  std::optional<double> explicit_noise_mw;
  // Bandwidth in front of log2(1 + SINR); unset means bandwidth_hz. With
  // power spread evenly over several PRBs the per-PRB SINR equals the total
  // SINR, so a per-PRB rate only changes this prefactor.
  std::optional<double> rate_bandwidth_hz;
  // Distances are clamped to this floor before pathloss; keeps the log
  // model finite for co-located nodes.
  double min_distance_m = 1.0;

  void validate() const {
    if (const auto* pl = std::get_if<PowerLaw>(&pathloss); pl && !(pl->alpha > 0.0)) {
      throw std::invalid_argument("pathloss exponent alpha must be > 0");
    }
    if (!(bandwidth_hz > 0.0)) {
      throw std::invalid_argument("bandwidth_hz must be > 0");
    }
    if (shadowing_sigma_db < 0.0) {
      throw std::invalid_argument("shadowing_sigma_db must be >= 0");
    }
    if (rate_bandwidth_hz && !(*rate_bandwidth_hz > 0.0)) {
      throw std::invalid_argument("rate_bandwidth_hz must be > 0");
    }
    if (explicit_noise_mw && !(*explicit_noise_mw > 0.0)) {
      throw std::invalid_argument("noise_mw must be > 0");
    }
    if (!(min_distance_m > 0.0)) {
      throw std::invalid_argument("min_distance_m must be > 0");
    }
  }

  double rate_bandwidth() const { return rate_bandwidth_hz.value_or(bandwidth_hz); }

  /// Noise at the BS receiver (CU SINR).
  double bs_noise_mw() const {
    if (explicit_noise_mw) return *explicit_noise_mw;
    return dbm_to_mw(noise_power_dbm(noise_density_dbm_hz, bandwidth_hz,
                                     bs_noise_figure_db));
  }

  /// Noise at a D2D receiver (a UE).
  double ue_noise_mw() const {
    if (explicit_noise_mw) return *explicit_noise_mw;
    return dbm_to_mw(noise_power_dbm(noise_density_dbm_hz, bandwidth_hz,
                                     ue_noise_figure_db));
  }

  double pathloss_at(double distance_m) const {
    const double d = std::max(distance_m, min_distance_m);
    return std::visit(
        [d](const auto& model) -> double {
          using M = std::decay_t<decltype(model)>;
          if constexpr (std::is_same_v<M, PowerLaw>) {
            return pathloss_gain(d, model.alpha);
          } else {
            return db_to_linear(-lte_pathloss_db(d / 1000.0));
          }
        },
        pathloss);
  }
};

enum class Link { CuToBs, D2dToBs, D2dDirect, CuToD2dRx };

/// Partial CSI: only the uplink gains into the BS are reported.
constexpr bool known_at_bs(Link link) {
  return link == Link::CuToBs || link == Link::D2dToBs;
}

/// All gains between entities for one channel realization.
/// g_cd is stored row-major as [c * n_d + d].
struct LinkGainTable {
  std::size_t n_c = 0;
  std::size_t n_d = 0;
  std::vector<double> g_cB;
  std::vector<double> g_dB;
  std::vector<double> g_d;
  std::vector<double> g_cd;

  LinkGainTable() = default;
  LinkGainTable(std::size_t num_cu, std::size_t num_d2d)
      : n_c(num_cu), n_d(num_d2d), g_cB(num_cu, 1.0), g_dB(num_d2d, 1.0),
        g_d(num_d2d, 1.0), g_cd(num_cu * num_d2d, 1.0) {}

  double& cu_to_rx(std::size_t c, std::size_t d) { return g_cd[c * n_d + d]; }
  double cu_to_rx(std::size_t c, std::size_t d) const { return g_cd[c * n_d + d]; }

  void validate() const {
    if (g_cB.size() != n_c || g_dB.size() != n_d || g_d.size() != n_d ||
        g_cd.size() != n_c * n_d) {
      throw std::invalid_argument("LinkGainTable: dimension mismatch");
    }
    for (const auto* v : {&g_cB, &g_dB, &g_d, &g_cd}) {
      for (double g : *v) {
        if (!(g > 0.0)) throw std::invalid_argument("LinkGainTable: gain must be > 0");
      }
    }
  }
};

/// The subset of a LinkGainTable the BS is allowed to see.
class BsChannelView {
 public:
  explicit BsChannelView(const LinkGainTable& table) : table_(&table) {}
  double g_cB(std::size_t c) const { return table_->g_cB.at(c); }
  double g_dB(std::size_t d) const { return table_->g_dB.at(d); }

 private:
  const LinkGainTable* table_;
};

}  // namespace d2d

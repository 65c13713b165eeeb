#pragma once

// Exact analysis of small deterministic (pathloss-only) games: exhaustive
// social optimum, the perturbed Markov chain over system states, its
// stationary distribution, and resistance-tree stochastic potentials.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "d2d/learning.hpp"

namespace d2d {

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoFeasibleProfile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReducibleChain : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ActionProfile = std::vector<ListRank>;

/// A pathloss-only game: every action profile maps to one utility profile.
class DeterministicGame {
 public:
  DeterministicGame(StaticEnvironment env, std::size_t list_len, double normalization_bps,
                    std::vector<double> r_tgt)
      : env_(std::move(env)),
        lists_(env_.num_cu(), list_len),
        normalization_(normalization_bps),
        r_tgt_(std::move(r_tgt)) {
    if (r_tgt_.empty()) r_tgt_.assign(env_.num_d2d(), 0.0);
    if (r_tgt_.size() != env_.num_d2d()) {
      throw std::invalid_argument("DeterministicGame: one target per player required");
    }
  }

  std::size_t num_players() const { return env_.num_d2d(); }
  std::size_t num_cu() const { return env_.num_cu(); }
  const ListSpace& lists() const { return lists_; }
  const std::vector<double>& targets() const { return r_tgt_; }
  double normalization_bps() const { return normalization_; }

  /// L^N_D, or -1 when it overflows int64.
  std::int64_t num_profiles() const {
    std::int64_t total = 1;
    for (std::size_t d = 0; d < num_players(); ++d) {
      if (total > std::numeric_limits<std::int64_t>::max() / lists_.size()) return -1;
      total *= lists_.size();
    }
    return total;
  }

  /// Mixed-radix decoding; player 0 is the most significant digit.
  ActionProfile profile_at(std::int64_t index) const {
    ActionProfile p(num_players());
    for (std::size_t d = num_players(); d-- > 0;) {
      p[d] = index % lists_.size();
      index /= lists_.size();
    }
    return p;
  }

  std::int64_t index_of(const ActionProfile& p) const {
    std::int64_t index = 0;
    for (ListRank r : p) index = index * lists_.size() + r;
    return index;
  }

  FramePlay play(const ActionProfile& p) const {
    std::vector<D2dList> chosen;
    chosen.reserve(p.size());
    for (ListRank r : p) chosen.push_back(lists_.unrank(r));
    Rng unused(0);
    auto env = env_;
    return play_frame(chosen, env, unused);
  }

  std::vector<double> utilities(const ActionProfile& p) const {
    auto rates = play(p).mean_rate_bps;
    for (double& r : rates) r = clamp_utility(r / normalization_);
    return rates;
  }

  bool feasible(const std::vector<double>& utilities) const {
    for (std::size_t d = 0; d < utilities.size(); ++d) {
      if (utilities[d] < r_tgt_[d]) return false;
    }
    return true;
  }

 private:
  StaticEnvironment env_;
  ListSpace lists_;
  double normalization_;
  std::vector<double> r_tgt_;
};

inline double social_utility(const std::vector<double>& utilities) {
  return std::accumulate(utilities.begin(), utilities.end(), 0.0);
}

struct Optimum {
  double w_star = 0.0;
  std::vector<ActionProfile> profiles;
  std::vector<std::vector<double>> utilities;
  std::int64_t feasible_count = 0;
};

/// Exhaustive maximization of the social utility subject to every player
/// meeting its target. Profiles within `tie_tol` of the best are all kept.
inline Optimum brute_force_optimum(const DeterministicGame& game,
                                   std::int64_t budget = 2'000'000,
                                   double tie_tol = 1e-9) {
  const std::int64_t total = game.num_profiles();
  if (total < 0 || total > budget) {
    throw BudgetExceeded("brute_force_optimum: " + std::to_string(total) +
                         " profiles exceed budget " + std::to_string(budget));
  }
  Optimum best;
  best.w_star = -std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < total; ++i) {
    const auto p = game.profile_at(i);
    const auto u = game.utilities(p);
    if (!game.feasible(u)) continue;
    ++best.feasible_count;
    const double w = social_utility(u);
    if (w > best.w_star + tie_tol) {
      best.w_star = w;
      best.profiles.clear();
      best.utilities.clear();
    }
    if (w >= best.w_star - tie_tol) {
      best.profiles.push_back(p);
      best.utilities.push_back(u);
    }
  }
  if (best.feasible_count == 0) {
    throw NoFeasibleProfile("brute_force_optimum: no profile meets every rate target");
  }
  // Drop entries that were kept before a slightly better one arrived.
  std::vector<ActionProfile> profiles;
  std::vector<std::vector<double>> utils;
  for (std::size_t i = 0; i < best.profiles.size(); ++i) {
    if (social_utility(best.utilities[i]) >= best.w_star - tie_tol) {
      profiles.push_back(best.profiles[i]);
      utils.push_back(best.utilities[i]);
    }
  }
  best.profiles = std::move(profiles);
  best.utilities = std::move(utils);
  return best;
}

// ---------------------------------------------------------------------------
// Exact perturbed chain.

struct SystemState {
  ActionProfile lists;
  std::vector<double> utilities;
  std::vector<Mood> moods;

  bool all_content() const {
    return std::all_of(moods.begin(), moods.end(), [](Mood m) { return m == Mood::Content; });
  }
  bool all_discontent() const {
    return std::all_of(moods.begin(), moods.end(), [](Mood m) { return m == Mood::Discontent; });
  }
};

/// Utilities are rounded to 12 decimals for state identity.
inline std::int64_t quantize_utility(double u) { return std::llround(u * 1e12); }

inline std::vector<std::int64_t> state_key(const SystemState& s) {
  std::vector<std::int64_t> key;
  key.reserve(3 * s.lists.size());
  for (std::size_t d = 0; d < s.lists.size(); ++d) {
    key.push_back(s.lists[d]);
    key.push_back(quantize_utility(s.utilities[d]));
    key.push_back(s.moods[d] == Mood::Content ? 1 : 0);
  }
  return key;
}

struct ExactDtmc {
  double epsilon = 0.0;
  double k = 0.0;
  std::vector<SystemState> states;
  Eigen::MatrixXd transition;  // row-stochastic
  std::map<std::vector<std::int64_t>, std::size_t> index;

  std::size_t size() const { return states.size(); }

  std::size_t find(const SystemState& s) const {
    auto it = index.find(state_key(s));
    if (it == index.end()) throw std::out_of_range("state not in chain");
    return it->second;
  }
};

namespace detail {

inline double selection_probability(Mood prev_mood, ListRank prev, ListRank next,
                                    ListRank num_lists, double explore) {
  if (prev_mood == Mood::Discontent) return 1.0 / static_cast<double>(num_lists);
  return next == prev ? 1.0 - explore : explore / static_cast<double>(num_lists - 1);
}

}  // namespace detail

/// Breadth-first closure of the system-state chain from the all-Discontent
/// state at profile 0. Transition probabilities are composed exactly from
/// list selection, the deterministic utility map and the mood rule.
/// epsilon == 0 yields the unperturbed chain.
inline ExactDtmc build_exact_dtmc(const DeterministicGame& game, double k, double epsilon,
                                  std::size_t state_budget = 4096) {
  if (epsilon < 0.0 || epsilon >= 1.0) throw std::invalid_argument("epsilon must be in [0,1)");
  const std::int64_t profiles = game.num_profiles();
  if (profiles < 0 || profiles > 1'000'000) {
    throw BudgetExceeded("build_exact_dtmc: too many action profiles");
  }
  const std::size_t n_d = game.num_players();
  const ListRank num_lists = game.lists().size();
  const double explore = std::pow(epsilon, k);

  std::vector<std::vector<double>> utility_table(static_cast<std::size_t>(profiles));
  for (std::int64_t i = 0; i < profiles; ++i) {
    utility_table[static_cast<std::size_t>(i)] = game.utilities(game.profile_at(i));
  }

  ExactDtmc chain;
  chain.epsilon = epsilon;
  chain.k = k;
  std::vector<std::map<std::size_t, double>> rows;

  auto intern = [&](SystemState s) -> std::size_t {
    auto key = state_key(s);
    auto it = chain.index.find(key);
    if (it != chain.index.end()) return it->second;
    if (chain.states.size() >= state_budget) {
      throw BudgetExceeded("build_exact_dtmc: state budget exceeded");
    }
    const std::size_t id = chain.states.size();
    chain.index.emplace(std::move(key), id);
    chain.states.push_back(std::move(s));
    rows.emplace_back();
    return id;
  };

  SystemState initial;
  initial.lists = game.profile_at(0);
  initial.utilities = utility_table[0];
  initial.moods.assign(n_d, Mood::Discontent);
  intern(initial);

  std::vector<double> p_content(n_d);
  for (std::size_t cur = 0; cur < chain.states.size(); ++cur) {
    const SystemState from = chain.states[cur];
    for (std::int64_t pi = 0; pi < profiles; ++pi) {
      const ActionProfile next = game.profile_at(pi);
      double p_select = 1.0;
      for (std::size_t d = 0; d < n_d && p_select > 0.0; ++d) {
        p_select *= detail::selection_probability(from.moods[d], from.lists[d], next[d],
                                                  num_lists, explore);
      }
      if (p_select <= 0.0) continue;
      const auto& u = utility_table[static_cast<std::size_t>(pi)];
      for (std::size_t d = 0; d < n_d; ++d) {
        const bool unchanged = from.moods[d] == Mood::Content && from.lists[d] == next[d] &&
                               quantize_utility(from.utilities[d]) == quantize_utility(u[d]);
        if (unchanged) {
          p_content[d] = 1.0;
        } else if (u[d] >= game.targets()[d]) {
          p_content[d] = content_probability(epsilon, u[d]);
        } else {
          p_content[d] = 0.0;
        }
      }
      for (std::uint32_t mask = 0; mask < (1u << n_d); ++mask) {
        double p = p_select;
        SystemState to{next, u, std::vector<Mood>(n_d)};
        for (std::size_t d = 0; d < n_d && p > 0.0; ++d) {
          const bool content = (mask >> d) & 1u;
          p *= content ? p_content[d] : 1.0 - p_content[d];
          to.moods[d] = content ? Mood::Content : Mood::Discontent;
        }
        if (p <= 0.0) continue;
        const std::size_t id = intern(std::move(to));
        rows[cur][id] += p;
      }
    }
  }

  const auto n = chain.states.size();
  chain.transition = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                           static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [j, p] : rows[i]) {
      chain.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p;
    }
  }
  return chain;
}

namespace detail {

inline std::vector<bool> reachable(const Eigen::MatrixXd& p, std::size_t start, bool reverse) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> queue{start};
  seen[start] = true;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (std::size_t j = 0; j < n; ++j) {
      const double w = reverse ? p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i))
                               : p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (w > 0.0 && !seen[j]) {
        seen[j] = true;
        queue.push_back(j);
      }
    }
  }
  return seen;
}

}  // namespace detail

inline bool is_irreducible(const Eigen::MatrixXd& p) {
  if (p.rows() == 0) return false;
  const auto fwd = detail::reachable(p, 0, false);
  const auto bwd = detail::reachable(p, 0, true);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

/// Period of an irreducible chain: gcd over edges (i,j) of
/// level(i) + 1 - level(j), with BFS levels from state 0.
inline std::int64_t period(const Eigen::MatrixXd& p) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<std::int64_t> level(n, -1);
  std::deque<std::size_t> queue{0};
  level[0] = 0;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (std::size_t j = 0; j < n; ++j) {
      if (p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0 && level[j] < 0) {
        level[j] = level[i] + 1;
        queue.push_back(j);
      }
    }
  }
  std::int64_t g = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (level[i] < 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.0 && level[j] >= 0) {
        g = std::gcd(g, std::abs(level[i] + 1 - level[j]));
      }
    }
  }
  return g;
}

inline double max_row_sum_error(const Eigen::MatrixXd& p) {
  return (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

/// Unique stationary distribution of an irreducible chain: solves
/// pi (P - I) = 0 with sum(pi) = 1.
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p) {
  if (p.rows() != p.cols() || p.rows() == 0) {
    throw std::invalid_argument("stationary_distribution: square non-empty matrix required");
  }
  if (!is_irreducible(p)) throw ReducibleChain("stationary_distribution: chain is reducible");
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(b);
  // Clip round-off negatives and renormalize.
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  return pi;
}

inline double stationary_residual(const Eigen::MatrixXd& p, const Eigen::VectorXd& pi) {
  return (pi.transpose() * p - pi.transpose()).cwiseAbs().maxCoeff();
}

struct StabilityCheck {
  bool all_content = false;
  bool aligned = false;   // utilities equal the utility map of the action profile
  bool optimal = false;   // action profile is a feasible social optimum
  bool passes() const { return all_content && aligned && optimal; }
};

inline StabilityCheck check_stable_state(const SystemState& s, const DeterministicGame& game,
                                         const Optimum& optimum, double tol = 1e-9) {
  StabilityCheck check;
  check.all_content = s.all_content();
  const auto u = game.utilities(s.lists);
  check.aligned = true;
  for (std::size_t d = 0; d < u.size(); ++d) {
    check.aligned = check.aligned && std::abs(u[d] - s.utilities[d]) <= 1e-12;
  }
  check.optimal = game.feasible(u) && social_utility(u) >= optimum.w_star - tol;
  return check;
}

struct DtmcSolve {
  double epsilon = 0.0;
  ExactDtmc chain;
  Eigen::VectorXd pi;
};

/// States whose stationary mass at the smallest epsilon is at least `floor`
/// and never decreases as epsilon decreases across the family.
inline std::vector<SystemState> stochastically_stable_set(std::vector<DtmcSolve> family,
                                                          double floor = 0.01) {
  if (family.size() < 3) {
    throw std::invalid_argument("stochastically_stable_set: need at least three epsilons");
  }
  std::sort(family.begin(), family.end(),
            [](const DtmcSolve& a, const DtmcSolve& b) { return a.epsilon > b.epsilon; });
  const auto& ref = family.front().chain;
  for (const auto& f : family) {
    if (f.chain.size() != ref.size() || static_cast<std::size_t>(f.pi.size()) != ref.size()) {
      throw std::invalid_argument("stochastically_stable_set: inconsistent state spaces");
    }
    for (const auto& [key, id] : ref.index) {
      if (!f.chain.index.count(key)) {
        throw std::invalid_argument("stochastically_stable_set: inconsistent state spaces");
      }
    }
  }
  std::vector<SystemState> stable;
  for (const auto& [key, id] : ref.index) {
    bool monotone = true;
    double prev = -1.0;
    double last = 0.0;
    for (const auto& f : family) {
      const double mass = f.pi(static_cast<Eigen::Index>(f.chain.index.at(key)));
      monotone = monotone && mass >= prev;
      prev = mass;
      last = mass;
    }
    if (monotone && last >= floor) stable.push_back(ref.states[id]);
  }
  return stable;
}

/// Largest probability of reaching any target state from `from`, via
/// shortest paths on -log P.
inline double max_path_log_probability(const ExactDtmc& chain, std::size_t from,
                                       const std::function<bool(const SystemState&)>& target) {
  const std::size_t n = chain.size();
  std::vector<double> cost(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  cost[from] = 0.0;
  heap.emplace(0.0, from);
  while (!heap.empty()) {
    auto [c, i] = heap.top();
    heap.pop();
    if (c > cost[i]) continue;
    if (i != from && target(chain.states[i])) return -c;
    for (std::size_t j = 0; j < n; ++j) {
      const double p =
          chain.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (p <= 0.0 || j == i) continue;
      const double next = c - std::log(p);
      if (next < cost[j]) {
        cost[j] = next;
        heap.emplace(next, j);
      }
    }
  }
  return -std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Resistances and stochastic potentials.

struct Potentials {
  double content = 0.0;     // gamma of a content class
  double discontent = 0.0;  // gamma of the all-discontent class
};

inline void check_utilities(const std::vector<double>& r) {
  if (r.empty()) throw std::domain_error("utilities must be non-empty");
  for (double u : r) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("utilities must lie in (0,1)");
  }
}

inline double discontent_cost(const std::vector<double>& r) {
  double s = 0.0;
  for (double u : r) s += 1.0 - u;
  return s;
}

inline Potentials stochastic_potentials(const std::vector<double>& r, double k,
                                        std::size_t num_content_classes) {
  check_utilities(r);
  if (!(k > 0.0)) throw std::domain_error("k must be > 0");
  if (num_content_classes < 1) throw std::domain_error("need at least one content class");
  const double classes = static_cast<double>(num_content_classes);
  return {k * (classes - 1.0) + discontent_cost(r), k * classes};
}

enum class TransitionKind { ContentToDiscontent, DiscontentToContent, ContentToContent };

inline double edge_resistance(TransitionKind kind, double k, const std::vector<double>& r) {
  switch (kind) {
    case TransitionKind::ContentToDiscontent:
      return k;
    case TransitionKind::DiscontentToContent:
      check_utilities(r);
      return discontent_cost(r);
    case TransitionKind::ContentToContent: {
      check_utilities(r);
      double lowest = 1.0;
      for (double u : r) lowest = std::min(lowest, 1.0 - u);
      return k + lowest;
    }
  }
  throw std::invalid_argument("edge_resistance: unknown transition kind");
}

struct ResistanceEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  double resistance = 0.0;
  friend bool operator==(const ResistanceEdge&, const ResistanceEdge&) = default;
};

struct ResistanceGraph {
  std::vector<std::string> labels;
  std::vector<ResistanceEdge> edges;

  std::size_t add_vertex(std::string label) {
    labels.push_back(std::move(label));
    return labels.size() - 1;
  }
  void add_edge(std::size_t from, std::size_t to, double resistance) {
    if (resistance < 0.0) throw std::invalid_argument("resistance must be >= 0");
    edges.push_back({from, to, resistance});
  }
  std::size_t size() const { return labels.size(); }
};

struct RootedTree {
  std::vector<ResistanceEdge> edges;
  double resistance = 0.0;
};

/// Minimum-resistance spanning tree directed into `root`, by exhaustive
/// enumeration of one outgoing edge per non-root vertex (graphs up to 8
/// vertices).
inline RootedTree min_resistance_tree(const ResistanceGraph& graph, std::size_t root) {
  const std::size_t n = graph.size();
  if (root >= n) throw std::out_of_range("min_resistance_tree: root out of range");
  if (n > 8) throw BudgetExceeded("min_resistance_tree: at most 8 vertices supported");

  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto& edge = graph.edges[e];
    if (edge.from != edge.to && edge.from != root) out[edge.from].push_back(e);
  }
  std::vector<std::size_t> others;
  for (std::size_t v = 0; v < n; ++v) {
    if (v == root) continue;
    if (out[v].empty()) {
      throw std::invalid_argument("min_resistance_tree: root unreachable from " + graph.labels[v]);
    }
    others.push_back(v);
  }

  RootedTree best;
  best.resistance = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> choice(others.size(), 0);
  std::vector<std::size_t> parent_edge(n);
  for (;;) {
    for (std::size_t i = 0; i < others.size(); ++i) parent_edge[others[i]] = out[others[i]][choice[i]];
    bool valid = true;
    for (std::size_t v : others) {
      std::size_t cur = v;
      for (std::size_t steps = 0; cur != root && steps <= n; ++steps) {
        cur = graph.edges[parent_edge[cur]].to;
      }
      if (cur != root) {
        valid = false;
        break;
      }
    }
    if (valid) {
      double total = 0.0;
      for (std::size_t v : others) total += graph.edges[parent_edge[v]].resistance;
      if (total < best.resistance) {
        best.resistance = total;
        best.edges.clear();
        for (std::size_t v : others) best.edges.push_back(graph.edges[parent_edge[v]]);
      }
    }
    std::size_t i = 0;
    while (i < others.size() && ++choice[i] == out[others[i]].size()) choice[i++] = 0;
    if (i == others.size()) break;
  }
  if (others.empty()) best.resistance = 0.0;
  if (!std::isfinite(best.resistance)) {
    throw std::invalid_argument("min_resistance_tree: root unreachable");
  }
  return best;
}

/// Two content classes (y, z) and the all-discontent class (x), with the
/// three transition kinds as edge resistances.
inline ResistanceGraph content_discontent_graph(double k, const std::vector<double>& r) {
  ResistanceGraph g;
  const auto x = g.add_vertex("D0");
  const auto y = g.add_vertex("C0_y");
  const auto z = g.add_vertex("C0_z");
  const double cd = edge_resistance(TransitionKind::ContentToDiscontent, k, r);
  const double dc = edge_resistance(TransitionKind::DiscontentToContent, k, r);
  const double cc = edge_resistance(TransitionKind::ContentToContent, k, r);
  g.add_edge(x, y, dc);
  g.add_edge(x, z, dc);
  g.add_edge(y, x, cd);
  g.add_edge(z, x, cd);
  g.add_edge(y, z, cc);
  g.add_edge(z, y, cc);
  return g;
}

}  // namespace d2d

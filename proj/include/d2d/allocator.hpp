#pragma once

// Base-station side: the players' preference lists, the round-robin
// priority order within a frame, and the per-subframe orthogonal
// allocation with the CU-protection test.
//
// CU and player indices are 0-based here; c1/d1 in figures is index 0.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2d/channel.hpp"

namespace d2d {

/// Ordered K-tuple of distinct CU indices.
using D2dList = std::vector<int>;

inline void validate_list(const D2dList& list, std::size_t n_c) {
  std::vector<bool> seen(n_c, false);
  for (int c : list) {
    if (c < 0 || static_cast<std::size_t>(c) >= n_c) {
      throw std::invalid_argument("list entry out of range: " + std::to_string(c));
    }
    if (seen[static_cast<std::size_t>(c)]) {
      throw std::invalid_argument("list has duplicate CU " + std::to_string(c));
    }
    seen[static_cast<std::size_t>(c)] = true;
  }
}

/// Lexicographic ranking of the K-permutations of n_c CUs. There are
/// L = n_c! / (n_c - k)! of them; rank 0 is [0, 1, ..., k-1].
class ListSpace {
 public:
  ListSpace(std::size_t n_c, std::size_t k) : n_c_(n_c), k_(k) {
    if (k == 0 || k > n_c) {
      throw std::invalid_argument("list length must satisfy 1 <= K <= N_C");
    }
    size_ = 1;
    for (std::size_t i = 0; i < k; ++i) size_ *= static_cast<std::int64_t>(n_c - i);
    // Number of completions below each position: P(n_c - i - 1, k - i - 1).
    block_.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      std::int64_t b = 1;
      for (std::size_t j = i + 1; j < k; ++j) b *= static_cast<std::int64_t>(n_c - j);
      block_[i] = b;
    }
  }

  std::size_t num_cu() const { return n_c_; }
  std::size_t list_length() const { return k_; }
  std::int64_t size() const { return size_; }

  D2dList unrank(std::int64_t rank) const {
    if (rank < 0 || rank >= size_) throw std::out_of_range("list rank out of range");
    std::vector<int> pool(n_c_);
    std::iota(pool.begin(), pool.end(), 0);
    D2dList list;
    list.reserve(k_);
    for (std::size_t i = 0; i < k_; ++i) {
      const auto pick = static_cast<std::size_t>(rank / block_[i]);
      rank %= block_[i];
      list.push_back(pool[pick]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return list;
  }

  std::int64_t rank(const D2dList& list) const {
    if (list.size() != k_) throw std::invalid_argument("list has wrong length");
    validate_list(list, n_c_);
    std::vector<int> pool(n_c_);
    std::iota(pool.begin(), pool.end(), 0);
    std::int64_t r = 0;
    for (std::size_t i = 0; i < k_; ++i) {
      const auto it = std::find(pool.begin(), pool.end(), list[i]);
      r += static_cast<std::int64_t>(it - pool.begin()) * block_[i];
      pool.erase(it);
    }
    return r;
  }

 private:
  std::size_t n_c_;
  std::size_t k_;
  std::int64_t size_ = 0;
  std::vector<std::int64_t> block_;
};

/// Player priority order in subframe `subframe_in_frame` (1-based) of a
/// frame: [0, 1, ..., n_d-1] rotated left by subframe_in_frame - 1.
inline std::vector<int> rr_sequence(std::size_t subframe_in_frame, std::size_t n_d) {
  if (subframe_in_frame < 1 || subframe_in_frame > n_d) {
    throw std::out_of_range("rr_sequence: subframe index outside frame");
  }
  std::vector<int> order(n_d);
  for (std::size_t j = 0; j < n_d; ++j) {
    order[j] = static_cast<int>((j + subframe_in_frame - 1) % n_d);
  }
  return order;
}

struct AllocationProfile {
  std::vector<std::optional<int>> assignment;  // player -> CU
  std::vector<bool> passed_test;               // meaningful only when assigned

  explicit AllocationProfile(std::size_t n_d = 0)
      : assignment(n_d), passed_test(n_d, false) {}

  /// CU the player actually transmits on, if any.
  std::optional<int> transmitting_on(std::size_t d) const {
    if (assignment[d] && passed_test[d]) return assignment[d];
    return std::nullopt;
  }

  friend bool operator==(const AllocationProfile&, const AllocationProfile&) = default;
};

/// One subframe of the BS rule. Players are served in `order`; each takes
/// the first CU on its list not already taken this subframe. The test is
/// applied after assignment, and a CU that fails stays consumed.
///
/// `test(cu, player)` returns whether the reuse keeps the CU above target.
template <class AllocationTest>
AllocationProfile alloc_bs(const std::vector<D2dList>& lists,
                           const std::vector<int>& order, std::size_t n_c,
                           AllocationTest&& test) {
  const std::size_t n_d = lists.size();
  if (order.size() != n_d) throw std::invalid_argument("alloc_bs: order size mismatch");
  std::vector<bool> in_order(n_d, false);
  for (int d : order) {
    if (d < 0 || static_cast<std::size_t>(d) >= n_d || in_order[static_cast<std::size_t>(d)]) {
      throw std::invalid_argument("alloc_bs: order is not a permutation of players");
    }
    in_order[static_cast<std::size_t>(d)] = true;
  }
  for (const auto& l : lists) validate_list(l, n_c);

  AllocationProfile profile(n_d);
  std::vector<bool> taken(n_c, false);
  for (int d : order) {
    const auto player = static_cast<std::size_t>(d);
    for (int c : lists[player]) {
      if (!taken[static_cast<std::size_t>(c)]) {
        taken[static_cast<std::size_t>(c)] = true;
        profile.assignment[player] = c;
        break;
      }
    }
    if (profile.assignment[player]) {
      profile.passed_test[player] = test(*profile.assignment[player], d);
    }
  }
  return profile;
}

/// Allocation without the CU protection test.
inline AllocationProfile alloc_bs(const std::vector<D2dList>& lists,
                                  const std::vector<int>& order, std::size_t n_c) {
  return alloc_bs(lists, order, n_c, [](int, int) { return true; });
}

/// Passes when the CU's SINR under reuse stays at or above the target.
/// Uses only the gains the BS knows (CU->BS and D2D tx->BS).
inline bool allocation_test(std::size_t cu, std::size_t d2d, const BsChannelView& gains,
                            const PowerConfig& powers, double n0_mw,
                            double gamma_tgt_db) {
  const double sinr =
      cu_sinr(powers.p_c_mw, gains.g_cB(cu), powers.p_d_mw, gains.g_dB(d2d), n0_mw);
  return sinr >= db_to_linear(gamma_tgt_db);
}

}  // namespace d2d

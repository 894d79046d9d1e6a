#pragma once

// Column-balanced targeted dropout. Each matrix column is split into M
// interleaved subcolumns (row r belongs to subcolumn r mod M, one per PE);
// inside every subcolumn the floor((H/M)*gamma) smallest-magnitude elements
// are zeroed, each with probability alpha. At alpha = 1 every subcolumn is
// left with the same number of survivors, which is what makes the
// compressed format and the per-PE workload uniform.
//
// Dropout draws come from a counter-based hash of
// (seed, epoch, column, subcolumn, element), so results are independent of
// traversal or parallelization order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "spartus/matrix.hpp"
#include "spartus/rng.hpp"

namespace spartus {

struct PruneConfig {
  double gamma = 0.0;       // target sparsity in [0, 1]
  double alpha = 1.0;       // dropout probability in [0, 1]
  std::size_t m = 1;        // subcolumns per column (PEs per MAC array)
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (gamma < 0.0 || gamma > 1.0)
      throw std::invalid_argument("PruneConfig: gamma outside [0, 1]");
    if (alpha < 0.0 || alpha > 1.0)
      throw std::invalid_argument("PruneConfig: alpha outside [0, 1]");
    if (m == 0) throw std::invalid_argument("PruneConfig: M must be positive");
  }
};

// Number of drop candidates per subcolumn of length k.
inline std::size_t drop_candidates(std::size_t k, double gamma) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(k) * gamma));
}

// Survivors per subcolumn; equals ceil(k*(1-gamma)) for integer k.
inline std::size_t balanced_nonzeros(std::size_t k, double gamma) {
  return k - drop_candidates(k, gamma);
}

namespace detail {

template <typename T>
double magnitude_of(T v) {
  if constexpr (std::is_floating_point_v<T>) return std::fabs(v);
  else return static_cast<double>(std::llabs(static_cast<long long>(v)));
}

}  // namespace detail

// Algorithm: per (column, subcolumn), sort by magnitude (ties broken by row
// index) and zero the smallest candidates with probability alpha.
template <typename T>
Matrix<T> cbtd_prune(const Matrix<T>& a, const PruneConfig& cfg,
                     std::uint64_t epoch = 0) {
  cfg.validate();
  if (a.rows() % cfg.m != 0)
    throw std::invalid_argument("cbtd_prune: rows not divisible by M");
  const std::size_t k = a.rows() / cfg.m;
  const std::size_t drops = drop_candidates(k, cfg.gamma);

  Matrix<T> b = a;
  std::vector<std::size_t> order(k);
  for (std::size_t j = 0; j < a.cols(); ++j) {
    for (std::size_t sub = 0; sub < cfg.m; ++sub) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return detail::magnitude_of(a(x * cfg.m + sub, j)) <
               detail::magnitude_of(a(y * cfg.m + sub, j));
      });
      for (std::size_t c = 0; c < drops; ++c) {
        const std::size_t elem = order[c];
        const double u =
            uniform01(hash_key(cfg.rng_seed, epoch, j, sub, elem));
        if (u < cfg.alpha) b(elem * cfg.m + sub, j) = T{};
      }
    }
  }
  return b;
}

// Pads rows with zeros up to a multiple of M, then prunes. The extra
// all-zero rows survive trivially and decode back to nothing.
template <typename T>
Matrix<T> cbtd_prune_padded(const Matrix<T>& a, const PruneConfig& cfg,
                            std::uint64_t epoch = 0) {
  const std::size_t padded = ((a.rows() + cfg.m - 1) / cfg.m) * cfg.m;
  if (padded == a.rows()) return cbtd_prune(a, cfg, epoch);
  Matrix<T> p(padded, a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) p(r, c) = a(r, c);
  return cbtd_prune(p, cfg, epoch);
}

struct BalanceReport {
  bool balanced = false;
  std::size_t expected_nonzeros = 0;    // per subcolumn
  Matrix<std::uint32_t> counts;         // m x cols nonzero grid

  explicit operator bool() const { return balanced; }
};

// Checks that every subcolumn of every column carries exactly the balanced
// nonzero count; the count grid pinpoints offenders.
template <typename T>
BalanceReport verify_balance(const Matrix<T>& b, std::size_t m, double gamma) {
  if (m == 0 || b.rows() % m != 0)
    throw std::invalid_argument("verify_balance: rows not divisible by M");
  const std::size_t k = b.rows() / m;
  BalanceReport rep;
  rep.expected_nonzeros = balanced_nonzeros(k, gamma);
  rep.counts = Matrix<std::uint32_t>(m, b.cols(), 0);
  rep.balanced = true;
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t r = 0; r < b.rows(); ++r)
      if (b(r, j) != T{}) rep.counts(r % m, j)++;
    for (std::size_t sub = 0; sub < m; ++sub)
      if (rep.counts(sub, j) != rep.expected_nonzeros) rep.balanced = false;
  }
  return rep;
}

// Dropout-probability ramp: after n steps alpha = min(1, n * delta_alpha).
struct AlphaSchedule {
  double delta_alpha = 0.0;
  double current_alpha = 0.0;
  std::uint64_t steps_taken = 0;
};

inline AlphaSchedule schedule_step(AlphaSchedule s) {
  s.steps_taken += 1;
  s.current_alpha =
      std::min(1.0, static_cast<double>(s.steps_taken) * s.delta_alpha);
  return s;
}

// Epoch loop around the pruner: an external update hook (the training step
// in the original procedure) runs first, then the ramped prune. With no
// hook this is repeated pruning under a rising alpha.
template <typename T, typename Hook>
Matrix<T> iterative_prune(Matrix<T> a, const PruneConfig& cfg,
                          AlphaSchedule schedule, std::size_t epochs,
                          Hook&& update_hook) {
  for (std::size_t e = 0; e < epochs; ++e) {
    update_hook(a, e);
    schedule = schedule_step(schedule);
    PruneConfig step_cfg = cfg;
    step_cfg.alpha = schedule.current_alpha;
    a = cbtd_prune(a, step_cfg, e);
  }
  return a;
}

template <typename T>
Matrix<T> iterative_prune(Matrix<T> a, const PruneConfig& cfg,
                          AlphaSchedule schedule, std::size_t epochs) {
  return iterative_prune(std::move(a), cfg, schedule, epochs,
                         [](Matrix<T>&, std::size_t) {});
}

}  // namespace spartus

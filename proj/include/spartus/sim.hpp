#pragma once

// Cycle-approximate performance model of the accelerator. Functional
// results stay with the engine; this module only prices a delta trace:
// per timestep each MAC array drains the nonzero delta columns that map to
// its bank, one column costs BLEN cycles, and the step is gated by the
// slowest array plus a fixed pipeline overhead (activation generation,
// FIFO fill). An optional memory-bound mode additionally floors each step
// at the weight-fetch bandwidth, for configurations that stream weights
// from DRAM.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "spartus/cbcsc.hpp"
#include "spartus/delta.hpp"
#include "spartus/rng.hpp"

namespace spartus {

struct AcceleratorConfig {
  std::size_t pes = 64;               // M, PEs per MAC array
  std::size_t arrays = 8;             // N MAC arrays
  double clock_hz = 200e6;            // f_pl
  std::uint64_t pipeline_overhead = 60;  // fixed cycles per timestep
  int bits_per_weight_pair = 16;      // val + lidx bits fetched per entry
  double dram_energy_pj_per_bit = 20.3;
  bool memory_bound = false;          // floor steps at fetch bandwidth
  int dram_bits_per_cycle = 72;

  void validate() const {
    if (arrays == 0 || pes == 0)
      throw std::invalid_argument("AcceleratorConfig: M and N must be positive");
    if (pes % arrays != 0)
      throw std::invalid_argument("AcceleratorConfig: M must be divisible by N");
    if (!(clock_hz > 0))
      throw std::invalid_argument("AcceleratorConfig: clock must be positive");
    if (bits_per_weight_pair <= 0 || dram_bits_per_cycle <= 0)
      throw std::invalid_argument("AcceleratorConfig: bit widths must be positive");
  }
};

struct SimTrace {
  AcceleratorConfig cfg;
  std::size_t dense_cols = 0;   // Q
  std::size_t dense_rows = 0;   // H
  std::size_t blen = 0;
  std::size_t subcol_len = 0;   // H/M

  std::vector<std::vector<std::uint32_t>> workloads;  // [t][n]
  std::vector<std::uint64_t> step_cycles;
  std::uint64_t total_cycles = 0;
  std::uint64_t dense_op_count = 0;      // 2*H*Q per step
  std::uint64_t effective_op_count = 0;  // MACs actually issued
  std::uint64_t weight_bits_fetched = 0;

  std::size_t steps() const { return step_cycles.size(); }
  double wall_time_s() const {
    return static_cast<double>(total_cycles) / cfg.clock_hz;
  }
  double mean_step_latency_s() const {
    return steps() == 0 ? 0.0 : wall_time_s() / static_cast<double>(steps());
  }
};

// Price a delta trace against banked weights.
template <typename T, typename D>
SimTrace simulate_sequence(const BankedWeights<T>& banks,
                           const std::vector<SparseDeltaVector<D>>& trace,
                           const AcceleratorConfig& cfg) {
  cfg.validate();
  if (banks.arrays() != cfg.arrays)
    throw std::invalid_argument("simulate_sequence: bank count != configured arrays");
  if (banks.pes() != cfg.pes)
    throw std::invalid_argument("simulate_sequence: bank PE count != configured PEs");

  SimTrace out;
  out.cfg = cfg;
  out.dense_cols = banks.total_cols;
  out.dense_rows = banks.rows();
  out.blen = banks.blen();
  out.subcol_len = banks.rows() / banks.pes();
  out.workloads.reserve(trace.size());
  out.step_cycles.reserve(trace.size());

  for (const auto& ds : trace) {
    if (ds.dense_len != banks.total_cols)
      throw std::invalid_argument("simulate_sequence: delta length != banked columns");
    std::vector<std::uint32_t> wl(cfg.arrays, 0);
    for (std::uint32_t j : ds.nzi) wl[j % cfg.arrays]++;
    const std::uint32_t wl_max = *std::max_element(wl.begin(), wl.end());
    const std::uint64_t nnz = ds.nnz();

    std::uint64_t compute = static_cast<std::uint64_t>(wl_max) * out.blen;
    const std::uint64_t bits =
        nnz * out.blen * cfg.pes * static_cast<std::uint64_t>(cfg.bits_per_weight_pair);
    if (cfg.memory_bound) {
      const std::uint64_t fetch =
          (bits + cfg.dram_bits_per_cycle - 1) / cfg.dram_bits_per_cycle;
      compute = std::max(compute, fetch);
    }
    const std::uint64_t cycles = compute + cfg.pipeline_overhead;

    out.workloads.push_back(std::move(wl));
    out.step_cycles.push_back(cycles);
    out.total_cycles += cycles;
    out.dense_op_count +=
        2ULL * banks.rows() * banks.total_cols;
    out.effective_op_count += 2ULL * nnz * out.blen * cfg.pes;
    out.weight_bits_fetched += bits;
  }
  return out;
}

// Sum of per-step mean workloads over sum of per-step max workloads.
// A trace with no work at all returns 1 by convention.
inline double balance_ratio(const SimTrace& trace) {
  if (trace.steps() == 0)
    throw std::invalid_argument("balance_ratio: empty trace");
  double sum_mean = 0.0, sum_max = 0.0;
  for (const auto& wl : trace.workloads) {
    std::uint64_t total = 0, mx = 0;
    for (std::uint32_t w : wl) {
      total += w;
      mx = std::max<std::uint64_t>(mx, w);
    }
    sum_mean += static_cast<double>(total) / static_cast<double>(wl.size());
    sum_max += static_cast<double>(mx);
  }
  if (sum_max == 0.0) return 1.0;
  return sum_mean / sum_max;
}

// Theoretical ceiling: two ops (multiply + add) per MAC unit per cycle.
inline double peak_throughput(const AcceleratorConfig& cfg) {
  cfg.validate();
  return 2.0 * cfg.clock_hz * static_cast<double>(cfg.pes * cfg.arrays);
}

// Dense-equivalent ops per second the sparse run stands in for.
inline double effective_throughput(const SimTrace& trace, std::uint64_t dense_params) {
  const double wall = trace.wall_time_s();
  if (!(wall > 0)) throw std::invalid_argument("effective_throughput: zero wall time");
  return 2.0 * static_cast<double>(dense_params) *
         static_cast<double>(trace.steps()) / wall;
}

// Arithmetic saved by skipping zero weights and zero deltas.
inline double op_saving(double weight_sparsity, double temporal_sparsity) {
  if (weight_sparsity < 0 || weight_sparsity >= 1 || temporal_sparsity < 0 ||
      temporal_sparsity >= 1)
    throw std::invalid_argument("op_saving: sparsities must lie in [0, 1)");
  return 1.0 / ((1.0 - weight_sparsity) * (1.0 - temporal_sparsity));
}

// Weight-fetch energy for a priced trace under a given memory technology.
inline double dram_energy(const SimTrace& trace, const AcceleratorConfig& cfg) {
  return static_cast<double>(trace.weight_bits_fetched) *
         cfg.dram_energy_pj_per_bit * 1e-12;
}

// Unpruned, threshold-free baseline: every column of every step, full
// subcolumn depth.
inline std::uint64_t dense_baseline_cycles(const AcceleratorConfig& cfg,
                                           std::size_t rows, std::size_t cols,
                                           std::size_t steps) {
  cfg.validate();
  const std::uint64_t per_step =
      ((cols + cfg.arrays - 1) / cfg.arrays) * (rows / cfg.pes) +
      cfg.pipeline_overhead;
  return per_step * steps;
}

struct SpeedupReport {
  double spatial = 1.0;   // dense vs pruned at zero threshold
  double temporal = 1.0;  // residual gain from delta skipping
  double total = 1.0;
};

// Decompose the gain over the dense baseline into the pruning part and the
// delta part. The pruned zero-threshold reference is the same max-workload
// model with every column active.
inline SpeedupReport speedup_report(std::uint64_t dense_cycles, const SimTrace& sparse) {
  if (sparse.total_cycles == 0 || sparse.steps() == 0)
    throw std::invalid_argument("speedup_report: empty sparse trace");
  const auto& cfg = sparse.cfg;
  const std::uint64_t pruned_per_step =
      ((sparse.dense_cols + cfg.arrays - 1) / cfg.arrays) * sparse.blen +
      cfg.pipeline_overhead;
  const std::uint64_t pruned_cycles = pruned_per_step * sparse.steps();
  if (pruned_cycles == 0 || dense_cycles == 0)
    throw std::invalid_argument("speedup_report: zero baseline cycles");
  SpeedupReport rep;
  rep.total = static_cast<double>(dense_cycles) / static_cast<double>(sparse.total_cycles);
  rep.spatial = static_cast<double>(dense_cycles) / static_cast<double>(pruned_cycles);
  rep.temporal = rep.total / rep.spatial;
  return rep;
}

// Synthetic delta trace with an exact per-step nonzero count and a
// controlled balance ratio: one rotating hot bank carries
// ceil(mean / target_balance) columns, the rest share the remainder.
// Values are set to one delta LSB; only the index pattern matters to the
// performance model.
template <typename D>
std::vector<SparseDeltaVector<D>> synthetic_delta_trace(
    std::size_t dense_len, std::size_t arrays, std::size_t steps,
    std::size_t nonzeros_per_step, double target_balance, std::uint64_t seed,
    D fill_value = D{1}) {
  if (arrays == 0 || dense_len % arrays != 0)
    throw std::invalid_argument("synthetic_delta_trace: columns must divide across arrays");
  if (nonzeros_per_step > dense_len)
    throw std::invalid_argument("synthetic_delta_trace: more nonzeros than columns");
  if (!(target_balance > 0.0 && target_balance <= 1.0))
    throw std::invalid_argument("synthetic_delta_trace: balance target outside (0, 1]");
  const std::size_t per_bank = dense_len / arrays;
  const double mean = static_cast<double>(nonzeros_per_step) / arrays;
  std::size_t hot = std::min(
      per_bank, static_cast<std::size_t>(std::ceil(mean / target_balance)));
  hot = std::min(hot, nonzeros_per_step);

  std::vector<SparseDeltaVector<D>> trace(steps);
  std::vector<std::size_t> counts(arrays);
  std::vector<std::uint32_t> pool(per_bank);
  for (std::size_t t = 0; t < steps; ++t) {
    // Distribute: the hot bank first, then round-robin over the others.
    std::fill(counts.begin(), counts.end(), 0);
    const std::size_t hot_bank = arrays > 1 ? t % arrays : 0;
    counts[hot_bank] = hot;
    // rest fits because N*hot >= N*ceil(mean) >= nonzeros_per_step
    std::size_t rest = nonzeros_per_step - hot;
    std::size_t n = (hot_bank + 1) % arrays;
    while (rest > 0) {
      if (n != hot_bank && counts[n] < hot) {
        counts[n]++;
        rest--;
      }
      n = (n + 1) % arrays;
    }

    auto& ds = trace[t];
    ds.dense_len = static_cast<std::uint32_t>(dense_len);
    for (std::size_t bank = 0; bank < arrays; ++bank) {
      // Partial Fisher-Yates for `counts[bank]` distinct local columns.
      SplitMix rng(hash_key(seed, t, bank));
      for (std::uint32_t i = 0; i < per_bank; ++i) pool[i] = i;
      for (std::size_t i = 0; i < counts[bank]; ++i) {
        const std::size_t pick = i + rng.next_below(per_bank - i);
        std::swap(pool[i], pool[pick]);
        ds.nzi.push_back(pool[i] * static_cast<std::uint32_t>(arrays) +
                         static_cast<std::uint32_t>(bank));
        ds.nzv.push_back(fill_value);
      }
    }
    // Keep the canonical ordering invariant.
    std::vector<std::size_t> order(ds.nzi.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ds.nzi[a] < ds.nzi[b]; });
    SparseDeltaVector<D> sorted;
    sorted.dense_len = ds.dense_len;
    sorted.nzv.reserve(order.size());
    sorted.nzi.reserve(order.size());
    for (std::size_t i : order) {
      sorted.nzv.push_back(ds.nzv[i]);
      sorted.nzi.push_back(ds.nzi[i]);
    }
    ds = std::move(sorted);
  }
  return trace;
}

}  // namespace spartus

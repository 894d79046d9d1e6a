#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "spartus/params_util.hpp"
#include "spartus/sim.hpp"

using namespace spartus;

namespace {

// Build banked weights with a fixed blen from a dense all-ones balanced
// matrix; only the geometry matters to the performance model.
BankedWeights<double> toy_banks(std::size_t h, std::size_t q, std::size_t m,
                                std::size_t n, double gamma) {
  Matrix<double> a(h, q, 1.0);
  auto pruned = cbtd_prune(a, PruneConfig{gamma, 1.0, m, 1});
  return split_banks(cbcsc_encode(pruned, m, gamma, 16, EncodePolicy::kPadZeros), n);
}

std::vector<SparseDeltaVector<double>> trace_from_workloads(
    std::size_t q, std::size_t n,
    const std::vector<std::vector<std::uint32_t>>& wl) {
  std::vector<SparseDeltaVector<double>> trace(wl.size());
  for (std::size_t t = 0; t < wl.size(); ++t) {
    trace[t].dense_len = static_cast<std::uint32_t>(q);
    std::vector<std::uint32_t> idx;
    for (std::size_t bank = 0; bank < wl[t].size(); ++bank)
      for (std::uint32_t i = 0; i < wl[t][bank]; ++i)
        idx.push_back(static_cast<std::uint32_t>(i * n + bank));
    std::sort(idx.begin(), idx.end());
    for (std::uint32_t j : idx) {
      trace[t].nzi.push_back(j);
      trace[t].nzv.push_back(1.0);
    }
  }
  return trace;
}

// Literal event simulation: every PE of every array retires one weight per
// cycle; an array pops its next column once all its PEs finished the
// previous one; the step ends when every array has drained.
std::uint64_t event_sim_step(const std::vector<std::uint32_t>& wl,
                             std::size_t blen, std::uint64_t overhead) {
  std::uint64_t cycle = 0;
  std::vector<std::uint32_t> remaining_cols = wl;
  std::vector<std::uint32_t> in_flight(wl.size(), 0);
  bool busy = true;
  while (busy) {
    busy = false;
    for (std::size_t nn = 0; nn < wl.size(); ++nn) {
      if (in_flight[nn] == 0 && remaining_cols[nn] > 0) {
        remaining_cols[nn]--;
        in_flight[nn] = static_cast<std::uint32_t>(blen);
      }
      if (in_flight[nn] > 0) {
        in_flight[nn]--;  // all M PEs retire one weight this cycle
        busy = true;
      }
    }
    if (busy) ++cycle;
  }
  return cycle + overhead;
}

}  // namespace

TEST_CASE("empty deltas cost only the pipeline overhead") {
  auto banks = toy_banks(8, 8, 2, 2, 0.5);
  AcceleratorConfig cfg;
  cfg.pes = 2;
  cfg.arrays = 2;
  cfg.clock_hz = 1e6;
  cfg.pipeline_overhead = 7;
  std::vector<SparseDeltaVector<double>> trace(5);
  for (auto& ds : trace) ds.dense_len = 8;
  auto sim = simulate_sequence(banks, trace, cfg);
  CHECK(sim.total_cycles == 5 * 7);
  CHECK(sim.effective_op_count == 0);
}

TEST_CASE("single array cycles are nonzeros times blen plus overhead") {
  auto banks = toy_banks(8, 8, 4, 1, 0.5);  // blen = 1
  AcceleratorConfig cfg;
  cfg.pes = 4;
  cfg.arrays = 1;
  cfg.pipeline_overhead = 3;
  auto trace = trace_from_workloads(8, 1, {{5}, {2}, {0}});
  auto sim = simulate_sequence(banks, trace, cfg);
  REQUIRE(sim.blen == 1);
  CHECK(sim.step_cycles[0] == 5 * 1 + 3);
  CHECK(sim.step_cycles[1] == 2 * 1 + 3);
  CHECK(sim.step_cycles[2] == 3);
}

TEST_CASE("max workload bounds each step") {
  // workloads [[3,1],[2,2]], blen=4, overhead=0 -> 12 + 8 = 20
  auto banks = toy_banks(16, 8, 2, 2, 0.5);  // K=8, blen=4
  AcceleratorConfig cfg;
  cfg.pes = 2;
  cfg.arrays = 2;
  cfg.pipeline_overhead = 0;
  auto trace = trace_from_workloads(8, 2, {{3, 1}, {2, 2}});
  auto sim = simulate_sequence(banks, trace, cfg);
  REQUIRE(sim.blen == 4);
  CHECK(sim.total_cycles == 20);
}

TEST_CASE("balance ratio of the worked example is exactly 0.8") {
  auto banks = toy_banks(16, 8, 2, 2, 0.5);
  AcceleratorConfig cfg;
  cfg.pes = 2;
  cfg.arrays = 2;
  auto sim = simulate_sequence(banks, trace_from_workloads(8, 2, {{3, 1}, {2, 2}}), cfg);
  CHECK(balance_ratio(sim) == 0.8);
}

TEST_CASE("balance ratio edge cases") {
  auto banks1 = toy_banks(8, 8, 4, 1, 0.5);
  AcceleratorConfig cfg1;
  cfg1.pes = 4;
  cfg1.arrays = 1;
  auto sim1 = simulate_sequence(banks1, trace_from_workloads(8, 1, {{3}, {1}}), cfg1);
  CHECK(balance_ratio(sim1) == 1.0);  // N=1: mean == max

  auto banks2 = toy_banks(8, 8, 2, 2, 0.5);
  AcceleratorConfig cfg2;
  cfg2.pes = 2;
  cfg2.arrays = 2;
  auto equal = simulate_sequence(banks2, trace_from_workloads(8, 2, {{2, 2}, {1, 1}}), cfg2);
  CHECK(balance_ratio(equal) == 1.0);

  auto idle = simulate_sequence(banks2, trace_from_workloads(8, 2, {{0, 0}}), cfg2);
  CHECK(balance_ratio(idle) == 1.0);  // convention for all-zero workloads
}

TEST_CASE("peak throughput formula") {
  AcceleratorConfig big;
  big.pes = 64;
  big.arrays = 8;
  big.clock_hz = 200e6;
  CHECK(peak_throughput(big) == 204.8e9);

  AcceleratorConfig edge;
  edge.pes = 4;
  edge.arrays = 1;
  edge.clock_hz = 125e6;
  CHECK(peak_throughput(edge) == 1.0e9);

  AcceleratorConfig unit;
  unit.pes = 1;
  unit.arrays = 1;
  unit.clock_hz = 1.0;
  CHECK(peak_throughput(unit) == 2.0);
}

TEST_CASE("effective throughput is dense-equivalent work over wall time") {
  auto banks = toy_banks(8, 8, 2, 2, 0.5);
  AcceleratorConfig cfg;
  cfg.pes = 2;
  cfg.arrays = 2;
  cfg.clock_hz = 1e6;
  cfg.pipeline_overhead = 0;
  auto sim = simulate_sequence(banks, trace_from_workloads(8, 2, {{2, 2}}), cfg);
  // blen = 2, so max-workload 2 costs 4 cycles = 4 us at 1 MHz
  REQUIRE(sim.total_cycles == 4);
  CHECK_THAT(effective_throughput(sim, 64),
             Catch::Matchers::WithinRel(2.0 * 64 / 4e-6, 1e-12));
  // halving the cycles doubles the rate
  auto faster = sim;
  faster.total_cycles /= 2;
  CHECK_THAT(effective_throughput(faster, 64),
             Catch::Matchers::WithinRel(2.0 * effective_throughput(sim, 64), 1e-12));
}

TEST_CASE("op saving values") {
  CHECK_THAT(op_saving(0.9375, 0.0), Catch::Matchers::WithinAbs(16.0, 0.05));
  CHECK_THAT(op_saving(0.9375, 0.9060), Catch::Matchers::WithinAbs(170.2, 0.5));
  CHECK(op_saving(0.0, 0.0) == 1.0);
  CHECK_THROWS_AS(op_saving(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(op_saving(0.5, 1.0), std::invalid_argument);
}

TEST_CASE("dram energy scales linearly with fetched bits") {
  auto banks = toy_banks(16, 8, 2, 2, 0.5);  // blen 4, M 2
  AcceleratorConfig cfg;
  cfg.pes = 2;
  cfg.arrays = 2;
  cfg.bits_per_weight_pair = 18;
  cfg.dram_energy_pj_per_bit = 20.3;
  auto sim = simulate_sequence(banks, trace_from_workloads(8, 2, {{3, 1}, {2, 2}}), cfg);
  // 8 nonzero columns total, each fetching blen*M entries of 18 bits
  CHECK(sim.weight_bits_fetched == 8ULL * 4 * 2 * 18);
  CHECK_THAT(dram_energy(sim, cfg),
             Catch::Matchers::WithinRel(8.0 * 4 * 2 * 18 * 20.3e-12, 1e-12));

  auto empty = simulate_sequence(banks, trace_from_workloads(8, 2, {{0, 0}}), cfg);
  CHECK(dram_energy(empty, cfg) == 0.0);

  AcceleratorConfig ddr3l = cfg;
  ddr3l.dram_energy_pj_per_bit = 16.5;
  CHECK_THAT(dram_energy(sim, ddr3l),
             Catch::Matchers::WithinRel(dram_energy(sim, cfg) * 16.5 / 20.3, 1e-12));
}

TEST_CASE("memory-bound mode floors the step at the fetch bandwidth") {
  auto banks = toy_banks(16, 8, 4, 1, 0.0);  // dense: blen = 4
  AcceleratorConfig cfg;
  cfg.pes = 4;
  cfg.arrays = 1;
  cfg.pipeline_overhead = 0;
  cfg.memory_bound = true;
  cfg.bits_per_weight_pair = 18;
  cfg.dram_bits_per_cycle = 72;
  auto trace = trace_from_workloads(8, 1, {{2}});
  auto sim = simulate_sequence(banks, trace, cfg);
  // compute = 2*4 = 8; fetch = 2*4*4*18/72 = 8 -> equal by construction
  CHECK(sim.total_cycles == 8);

  cfg.dram_bits_per_cycle = 36;  // halve the bandwidth
  auto slow = simulate_sequence(banks, trace, cfg);
  CHECK(slow.total_cycles == 16);
}

TEST_CASE("speedup decomposition identities") {
  auto banks = toy_banks(16, 8, 2, 2, 0.5);  // blen 4
  AcceleratorConfig cfg;
  cfg.pes = 2;
  cfg.arrays = 2;
  cfg.pipeline_overhead = 0;

  // gamma=0, theta=0 baseline equals the dense formula, so all gains are 1
  auto dense_banks = toy_banks(16, 8, 2, 2, 0.0);
  auto dense_trace = trace_from_workloads(8, 2, {{4, 4}});
  auto dense_sim = simulate_sequence(dense_banks, dense_trace, cfg);
  const auto dense_cycles = dense_baseline_cycles(cfg, 16, 8, 1);
  CHECK(dense_sim.total_cycles == dense_cycles);
  auto unity = speedup_report(dense_cycles, dense_sim);
  CHECK_THAT(unity.total, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(unity.spatial, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(unity.temporal, Catch::Matchers::WithinAbs(1.0, 1e-12));

  // half the nonzero columns at equal balance -> temporal gain 2
  auto full = simulate_sequence(banks, trace_from_workloads(8, 2, {{4, 4}}), cfg);
  auto half = simulate_sequence(banks, trace_from_workloads(8, 2, {{2, 2}}), cfg);
  auto rep_full = speedup_report(dense_cycles, full);
  auto rep_half = speedup_report(dense_cycles, half);
  CHECK_THAT(rep_half.temporal / rep_full.temporal,
             Catch::Matchers::WithinAbs(2.0, 1e-12));
  CHECK_THAT(rep_half.spatial, Catch::Matchers::WithinAbs(rep_full.spatial, 1e-12));
}

TEST_CASE("cycle counts match a literal per-PE event simulation") {
  // exhaustive small instances
  for (std::size_t n : {1u, 2u}) {
    for (std::size_t m : {2u, 4u}) {
      if (m % n != 0) continue;
      const std::size_t h = 16, q = 8;
      for (double gamma : {0.0, 0.5}) {
        auto banks = toy_banks(h, q, m, n, gamma);
        AcceleratorConfig cfg;
        cfg.pes = m;
        cfg.arrays = n;
        cfg.pipeline_overhead = 11;
        const std::size_t blen = banks.blen();
        for (std::uint32_t pattern = 0; pattern < (1u << q); ++pattern) {
          SparseDeltaVector<double> ds;
          ds.dense_len = q;
          for (std::uint32_t j = 0; j < q; ++j)
            if (pattern & (1u << j)) {
              ds.nzi.push_back(j);
              ds.nzv.push_back(1.0);
            }
          std::vector<std::uint32_t> wl(n, 0);
          for (std::uint32_t j : ds.nzi) wl[j % n]++;
          std::vector<SparseDeltaVector<double>> one{ds};
          auto sim = simulate_sequence(banks, one, cfg);
          REQUIRE(sim.total_cycles == event_sim_step(wl, blen, 11));
        }
      }
    }
  }
}

TEST_CASE("simulator is deterministic and rejects mismatched traces") {
  auto banks = toy_banks(8, 8, 2, 2, 0.5);
  AcceleratorConfig cfg;
  cfg.pes = 2;
  cfg.arrays = 2;
  auto trace = trace_from_workloads(8, 2, {{1, 2}, {2, 0}});
  auto a = simulate_sequence(banks, trace, cfg);
  auto b = simulate_sequence(banks, trace, cfg);
  CHECK(a.step_cycles == b.step_cycles);
  CHECK(a.workloads == b.workloads);

  std::vector<SparseDeltaVector<double>> bad(1);
  bad[0].dense_len = 6;
  CHECK_THROWS_AS(simulate_sequence(banks, bad, cfg), std::invalid_argument);

  AcceleratorConfig wrong = cfg;
  wrong.arrays = 4;
  wrong.pes = 4;
  CHECK_THROWS_AS(simulate_sequence(banks, trace, wrong), std::invalid_argument);

  AcceleratorConfig invalid;
  invalid.pes = 3;
  invalid.arrays = 2;
  CHECK_THROWS_AS(invalid.validate(), std::invalid_argument);
}

TEST_CASE("synthetic trace hits the requested sparsity and balance") {
  const std::size_t q = 2048, n = 8, steps = 32, nnz = 192;
  auto trace = synthetic_delta_trace<double>(q, n, steps, nnz, 0.75, 99);
  REQUIRE(trace.size() == steps);
  for (const auto& ds : trace) {
    REQUIRE(ds.nnz() == nnz);
    ds.validate();
  }
  auto sparsity = measure_temporal_sparsity(trace, 1024);
  CHECK_THAT(sparsity.total, Catch::Matchers::WithinAbs(1.0 - 192.0 / 2048.0, 1e-12));

  auto banks = toy_banks(4096, q, 64, n, 0.94);
  AcceleratorConfig cfg;
  cfg.pes = 64;
  cfg.arrays = 8;
  auto sim = simulate_sequence(banks, trace, cfg);
  const double br = balance_ratio(sim);
  CHECK(br >= 0.69);
  CHECK(br <= 0.8);
}

TEST_CASE("cycles are monotone non-increasing in the threshold") {
  // same inputs, rising theta, through the real engine
  RealArith arith;
  auto p = random_lstm_params(8, 8, 919);
  auto stacked = stack_weights(p, 2);
  auto pruned = cbtd_prune(stacked.w, PruneConfig{0.5, 1.0, 2, 5});
  auto banks = split_banks(cbcsc_encode(pruned, 2, 0.5, 16, EncodePolicy::kPadZeros), 2);

  SplitMix rng(300);
  std::vector<std::vector<double>> xs;
  for (int t = 0; t < 12; ++t) {
    std::vector<double> x(8);
    for (auto& v : x) v = rng.next_unit() * 2.0 - 1.0;
    xs.push_back(x);
  }
  AcceleratorConfig cfg;
  cfg.pes = 2;
  cfg.arrays = 2;

  std::uint64_t prev_cycles = ~0ULL;
  for (double theta : {0.0, 0.02, 0.05, 0.1, 0.3}) {
    auto st = init_delta_state(p, 2, arith);
    std::vector<SparseDeltaVector<double>> trace;
    for (const auto& x : xs) {
      auto res = delta_lstm_step(banks, st, std::span<const double>(x),
                                 DeltaThreshold::from_real(theta, {16, 8}), arith);
      trace.push_back(std::move(res.deltas));
    }
    auto sim = simulate_sequence(banks, trace, cfg);
    REQUIRE(sim.total_cycles <= prev_cycles);
    prev_cycles = sim.total_cycles;
  }
}

TEST_CASE("effective throughput never exceeds the op-saving ceiling") {
  SplitMix rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 4, n = 2, h = 32, q = 16;
    const double gamma = 0.5;
    auto banks = toy_banks(h, q, m, n, gamma);
    AcceleratorConfig cfg;
    cfg.pes = m;
    cfg.arrays = n;
    cfg.pipeline_overhead = rng.next_below(20);
    const std::size_t nnz = 1 + rng.next_below(q - 1);
    auto trace = synthetic_delta_trace<double>(q, n, 16, nnz, 0.9, rng.next());
    auto sim = simulate_sequence(banks, trace, cfg);
    const double ws = 1.0 - static_cast<double>(banks.blen() * m) / h;
    const double ts = measure_temporal_sparsity(trace, q / 2).total;
    if (ws >= 1.0 || ts >= 1.0) continue;
    const double ceiling = peak_throughput(cfg) * op_saving(ws, ts);
    REQUIRE(effective_throughput(sim, static_cast<std::uint64_t>(h) * q) <=
            ceiling * (1.0 + 1e-9));
  }
}

TEST_CASE("a one-microsecond step over the large layer is 9.4 TOp/s") {
  SimTrace t;
  t.cfg.clock_hz = 200e6;
  t.step_cycles = {200};  // 1 us
  t.workloads = {{1}};
  t.total_cycles = 200;
  CHECK_THAT(effective_throughput(t, 4'700'000) / 1e12,
             Catch::Matchers::WithinAbs(9.4, 1e-9));
}

TEST_CASE("a run at the dense cycle count delivers exactly peak throughput") {
  AcceleratorConfig cfg;
  cfg.pes = 4;
  cfg.arrays = 2;
  cfg.clock_hz = 125e6;
  cfg.pipeline_overhead = 0;
  const std::size_t h = 16, q = 8, steps = 3;
  SimTrace t;
  t.cfg = cfg;
  t.total_cycles = dense_baseline_cycles(cfg, h, q, steps);
  t.step_cycles.assign(steps, t.total_cycles / steps);
  t.workloads.assign(steps, std::vector<std::uint32_t>(2, 4));
  CHECK_THAT(effective_throughput(t, h * q),
             Catch::Matchers::WithinRel(peak_throughput(cfg), 1e-12));
}

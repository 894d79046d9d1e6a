#pragma once

// The experiment pipeline behind the CLI: each stage reads its prerequisite
// sections from the container, appends its own section, and is idempotent
// under an unchanged configuration. Stages work in either numeric mode; the
// mode is fixed by the PARAMS section (real64 until `quantize` runs).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spartus/cbtd.hpp"
#include "spartus/params_util.hpp"
#include "spartus/section_codecs.hpp"

namespace spartus {

inline const char* kSecParams = "PARAMS";
inline const char* kSecStacked = "STACKED";
inline const char* kSecCbcsc = "CBCSC";
inline const char* kSecBanks = "BANKS";
inline const char* kSecConfig = "CONFIG";
inline const char* kSecTrace = "TRACE";
inline const char* kSecReport = "REPORT";

// ---------------------------------------------------------------------------
// init / quantize

inline void stage_init(Container& c, const RunConfig& cfg, std::size_t input_size,
                       std::size_t hidden_size) {
  cfg.validate();
  ParamsSection p;
  p.mode = kModeReal;
  p.real = random_lstm_params(input_size, hidden_size, cfg.seed);
  c.put(kSecParams, encode_params(p));
  c.put(kSecConfig, encode_config(cfg));
}

struct QuantizeSummary {
  std::vector<TensorError> per_tensor;
  double max_error = 0.0;
};

// Returns the per-tensor rounding errors, or nothing if the container was
// already quantized (the section is left unchanged).
inline std::optional<QuantizeSummary> stage_quantize(Container& c,
                                                     const RunConfig& cfg) {
  cfg.validate();
  ParamsSection p = decode_params(c.get(kSecParams));
  if (p.mode == kModeQuant) return std::nullopt;
  const QuantArith q = cfg.quant_arith();
  ParamsSection out;
  out.mode = kModeQuant;
  out.quant = quantize_params(p.real, q);
  QuantizeSummary summary;
  summary.per_tensor = quantization_errors(p.real, q);
  summary.max_error = max_quantization_error(p.real, q);
  c.put(kSecParams, encode_params(out));
  c.put(kSecConfig, encode_config(cfg));
  return summary;
}

// ---------------------------------------------------------------------------
// prune: PARAMS -> pruned STACKED

inline void stage_prune(Container& c, const RunConfig& cfg) {
  cfg.validate();
  ParamsSection p = decode_params(c.get(kSecParams));
  const std::size_t hidden = p.hidden_size();
  if ((4 * hidden) % cfg.pes != 0)
    throw std::runtime_error(
        "prune: stacked rows (4*hidden) must divide by the PE count M");

  StackedSection out;
  out.mode = p.mode;
  const PruneConfig prune_cfg{cfg.gamma, 1.0, cfg.pes, cfg.seed};
  const AlphaSchedule sched{cfg.delta_alpha, 0.0, 0};
  auto run = [&](const auto& params, auto& stacked_out) {
    auto stacked = stack_weights(params, cfg.pes);
    stacked_out = stacked;
    stacked_out.w = iterative_prune(stacked.w, prune_cfg, sched, cfg.epochs);
    out.shape = LayerShape{
        static_cast<std::uint32_t>(stacked.input_size),
        static_cast<std::uint32_t>(stacked.hidden_size),
        static_cast<std::uint32_t>(stacked.padded_input),
        static_cast<std::uint32_t>(stacked.padded_hidden),
        static_cast<std::uint32_t>(cfg.pes)};
  };
  if (p.mode == kModeReal)
    run(p.real, out.real);
  else
    run(p.quant, out.quant);
  c.put(kSecStacked, encode_stacked(out));
  c.put(kSecConfig, encode_config(cfg));
}

// ---------------------------------------------------------------------------
// encode: STACKED -> CBCSC + BANKS

inline void stage_encode(Container& c, const RunConfig& cfg) {
  cfg.validate();
  StackedSection s = decode_stacked(c.get(kSecStacked));
  if (cfg.pes != s.shape.alignment)
    throw std::runtime_error(
        "encode: PE count differs from the pruned stacked layout; re-run prune");

  CbcscSection enc;
  enc.mode = s.mode;
  enc.shape = s.shape;
  enc.gamma = cfg.gamma;
  BanksSection banks;
  banks.mode = s.mode;
  banks.shape = s.shape;
  banks.gamma = cfg.gamma;
  // Padding columns are all-zero, so the encoder runs in the zero-filling
  // mode; real columns still carry exactly BLEN survivors after pruning.
  if (s.mode == kModeReal) {
    enc.real = cbcsc_encode(s.real.w, cfg.pes, cfg.gamma, cfg.lidx_bits,
                            EncodePolicy::kPadZeros);
    banks.real = split_banks(enc.real, cfg.arrays);
  } else {
    enc.quant = cbcsc_encode(s.quant.w, cfg.pes, cfg.gamma, cfg.lidx_bits,
                             EncodePolicy::kPadZeros);
    banks.quant = split_banks(enc.quant, cfg.arrays);
  }
  c.put(kSecCbcsc, encode_cbcsc(enc));
  c.put(kSecBanks, encode_banks(banks));
  c.put(kSecConfig, encode_config(cfg));
}

// ---------------------------------------------------------------------------
// infer: BANKS + PARAMS + inputs -> TRACE

struct InferSummary {
  std::size_t steps = 0;
  TemporalSparsity sparsity;
};

inline InferSummary stage_infer(Container& c, const RunConfig& cfg,
                                const std::vector<std::vector<double>>& inputs) {
  cfg.validate();
  ParamsSection p = decode_params(c.get(kSecParams));
  BanksSection banks = decode_banks(c.get(kSecBanks));
  if (banks.mode != p.mode)
    throw std::runtime_error("infer: BANKS and PARAMS numeric modes differ");
  for (const auto& x : inputs)
    if (x.size() != p.input_size())
      throw std::runtime_error("infer: input vector length != layer input size");

  TraceSection trace;
  trace.mode = p.mode;
  trace.dense_len = banks.shape.q();
  trace.split = banks.shape.padded_input;
  trace.theta = cfg.theta;

  if (p.mode == kModeReal) {
    RealArith arith;
    auto st = init_delta_state(p.real, banks.shape.alignment, arith);
    const auto thr = DeltaThreshold::from_real(cfg.theta, cfg.act_fmt);
    for (const auto& x : inputs) {
      auto res = delta_lstm_step(banks.real, st, std::span<const double>(x), thr, arith);
      trace.real.push_back(std::move(res.deltas));
    }
  } else {
    const QuantArith arith = cfg.quant_arith();
    auto st = init_delta_state(p.quant, banks.shape.alignment, arith);
    const auto thr = DeltaThreshold::from_real(cfg.theta, cfg.act_fmt);
    std::vector<std::int16_t> qx;
    for (const auto& x : inputs) {
      qx.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) qx[i] = arith.state_from_real(x[i]);
      auto res = delta_lstm_step(banks.quant, st, std::span<const std::int16_t>(qx),
                                 thr, arith);
      trace.quant.push_back(std::move(res.deltas));
    }
  }
  c.put(kSecTrace, encode_trace(trace));
  c.put(kSecConfig, encode_config(cfg));

  InferSummary summary;
  summary.steps = inputs.size();
  if (!inputs.empty())
    summary.sparsity = trace.mode == kModeReal
                           ? measure_temporal_sparsity(trace.real, trace.split)
                           : measure_temporal_sparsity(trace.quant, trace.split);
  return summary;
}

// Synthetic replacement for infer at configuration scales where no trained
// network is at hand: exact per-step nonzero count, controlled balance.
inline InferSummary stage_synthetic_trace(Container& c, const RunConfig& cfg,
                                          std::size_t steps, double sparsity,
                                          double target_balance) {
  cfg.validate();
  if (sparsity < 0.0 || sparsity >= 1.0)
    throw std::runtime_error("synthetic trace: sparsity must lie in [0, 1)");
  BanksSection banks = decode_banks(c.get(kSecBanks));
  const std::size_t q = banks.shape.q();
  const auto nnz = static_cast<std::size_t>(
      std::llround(static_cast<double>(q) * (1.0 - sparsity)));

  TraceSection trace;
  trace.mode = banks.mode;
  trace.dense_len = static_cast<std::uint32_t>(q);
  trace.split = banks.shape.padded_input;
  trace.theta = cfg.theta;
  if (banks.mode == kModeReal)
    trace.real = synthetic_delta_trace<double>(q, cfg.arrays, steps, nnz,
                                               target_balance, cfg.seed, 1.0);
  else
    trace.quant = synthetic_delta_trace<std::int32_t>(q, cfg.arrays, steps, nnz,
                                                      target_balance, cfg.seed, 1);
  c.put(kSecTrace, encode_trace(trace));
  c.put(kSecConfig, encode_config(cfg));

  InferSummary summary;
  summary.steps = steps;
  if (steps > 0)
    summary.sparsity = trace.mode == kModeReal
                           ? measure_temporal_sparsity(trace.real, trace.split)
                           : measure_temporal_sparsity(trace.quant, trace.split);
  return summary;
}

// ---------------------------------------------------------------------------
// simulate / report

struct ReportBundle {
  std::uint8_t mode = kModeReal;
  LayerShape shape;
  RunConfig cfg;
  std::size_t blen = 0;
  double weight_sparsity = 0.0;           // guaranteed by the format
  double weight_sparsity_measured = 0.0;  // counting stored zeros too
  TemporalSparsity ts;
  SimTrace sim;
  double balance = 1.0;
  std::uint64_t dense_cycles = 0;
  double peak_ops = 0.0;
  double effective_ops = 0.0;
  double saving = 0.0;  // 0 when undefined (full sparsity)
  SpeedupReport speedup;
  double dram_joules = 0.0;

  std::string machine_text() const;
  std::string human_text() const;
};

namespace detail {

inline std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

template <typename T>
double measured_weight_sparsity(const BankedWeights<T>& banks, std::size_t h,
                                std::size_t q) {
  std::uint64_t nonzeros = 0;
  for (const auto& bank : banks.banks)
    for (const auto& v : bank.val)
      if (v != T{}) ++nonzeros;
  return 1.0 - static_cast<double>(nonzeros) / (static_cast<double>(h) * q);
}

}  // namespace detail

inline ReportBundle build_report(const Container& c, const RunConfig& cfg) {
  cfg.validate();
  BanksSection banks = decode_banks(c.get(kSecBanks));
  TraceSection trace = decode_trace(c.get(kSecTrace));
  if (trace.mode != banks.mode)
    throw std::runtime_error("report: TRACE and BANKS numeric modes differ");
  if (trace.dense_len != banks.shape.q())
    throw std::runtime_error("report: TRACE and BANKS disagree on the column count");

  ReportBundle rep;
  rep.mode = banks.mode;
  rep.shape = banks.shape;
  rep.cfg = cfg;
  const AcceleratorConfig accel = cfg.accel();

  if (banks.mode == kModeReal) {
    rep.sim = simulate_sequence(banks.real, trace.real, accel);
    rep.blen = banks.real.blen();
    rep.weight_sparsity_measured =
        detail::measured_weight_sparsity(banks.real, banks.shape.h(), banks.shape.q());
    rep.ts = measure_temporal_sparsity(trace.real, trace.split);
  } else {
    rep.sim = simulate_sequence(banks.quant, trace.quant, accel);
    rep.blen = banks.quant.blen();
    rep.weight_sparsity_measured =
        detail::measured_weight_sparsity(banks.quant, banks.shape.h(), banks.shape.q());
    rep.ts = measure_temporal_sparsity(trace.quant, trace.split);
  }
  rep.weight_sparsity =
      1.0 - static_cast<double>(rep.blen * cfg.pes) / banks.shape.h();
  rep.balance = balance_ratio(rep.sim);
  rep.dense_cycles = dense_baseline_cycles(accel, banks.shape.h(), banks.shape.q(),
                                           rep.sim.steps());
  rep.peak_ops = peak_throughput(accel);
  rep.effective_ops = effective_throughput(rep.sim, rep.shape.dense_params());
  rep.saving = (rep.weight_sparsity < 1.0 && rep.ts.total < 1.0)
                   ? op_saving(rep.weight_sparsity, rep.ts.total)
                   : 0.0;
  rep.speedup = speedup_report(rep.dense_cycles, rep.sim);
  rep.dram_joules = dram_energy(rep.sim, accel);
  return rep;
}

inline std::string ReportBundle::machine_text() const {
  using detail::fmt_g;
  std::ostringstream out;
  out << "report_version 1\n";
  out << "mode " << (mode == kModeReal ? "real64" : "quant") << "\n";
  out << "input_size " << shape.input_size << "\n";
  out << "hidden_size " << shape.hidden_size << "\n";
  out << "rows " << shape.h() << "\n";
  out << "cols " << shape.q() << "\n";
  out << "pes " << cfg.pes << "\n";
  out << "arrays " << cfg.arrays << "\n";
  out << "freq_mhz " << fmt_g(cfg.freq_mhz) << "\n";
  out << "gamma " << fmt_g(cfg.gamma) << "\n";
  out << "theta " << fmt_g(cfg.theta) << "\n";
  out << "blen " << blen << "\n";
  out << "lidx_bits " << cfg.lidx_bits << "\n";
  out << "overhead_cycles " << cfg.overhead_cycles << "\n";
  out << "weight_sparsity " << fmt_g(weight_sparsity) << "\n";
  out << "weight_sparsity_measured " << fmt_g(weight_sparsity_measured) << "\n";
  out << "temporal_sparsity_x " << fmt_g(ts.input) << "\n";
  out << "temporal_sparsity_h " << fmt_g(ts.hidden) << "\n";
  out << "temporal_sparsity " << fmt_g(ts.total) << "\n";
  out << "steps " << sim.steps() << "\n";
  out << "balance_ratio " << fmt_g(balance) << "\n";
  out << "cycles " << sim.total_cycles << "\n";
  out << "wall_s " << fmt_g(sim.wall_time_s()) << "\n";
  out << "latency_us " << fmt_g(sim.mean_step_latency_s() * 1e6) << "\n";
  out << "peak_gops " << fmt_g(peak_ops / 1e9) << "\n";
  out << "effective_gops " << fmt_g(effective_ops / 1e9) << "\n";
  out << "op_saving " << fmt_g(saving) << "\n";
  out << "speedup_spatial " << fmt_g(speedup.spatial) << "\n";
  out << "speedup_temporal " << fmt_g(speedup.temporal) << "\n";
  out << "speedup_total " << fmt_g(speedup.total) << "\n";
  out << "dense_cycles " << dense_cycles << "\n";
  out << "dense_params " << shape.dense_params() << "\n";
  out << "dram_type " << dram_type_name(cfg.dram) << "\n";
  out << "dram_pj_per_bit " << fmt_g(dram_energy_pj_per_bit(cfg.dram)) << "\n";
  out << "weight_bits_fetched " << sim.weight_bits_fetched << "\n";
  out << "dram_energy_uj " << fmt_g(dram_joules * 1e6) << "\n";
  out << "dram_energy_uj_per_step "
      << fmt_g(sim.steps() ? dram_joules * 1e6 / static_cast<double>(sim.steps()) : 0.0)
      << "\n";
  for (std::size_t t = 0; t < sim.steps(); ++t) {
    out << "step " << t << " cycles " << sim.step_cycles[t] << " wl";
    for (std::uint32_t w : sim.workloads[t]) out << " " << w;
    out << "\n";
  }
  return out.str();
}

inline std::string ReportBundle::human_text() const {
  using detail::fmt_g;
  std::ostringstream out;
  auto row = [&](const std::string& k, const std::string& v) {
    out << "  " << k;
    for (std::size_t i = k.size(); i < 28; ++i) out << ' ';
    out << v << "\n";
  };
  out << "=== run summary ===\n";
  row("mode", mode == kModeReal ? "real64" : "quant");
  row("layer", std::to_string(shape.input_size) + " -> " +
                   std::to_string(shape.hidden_size) + " hidden");
  row("stacked matrix", std::to_string(shape.h()) + " x " + std::to_string(shape.q()));
  row("PEs x arrays", std::to_string(cfg.pes) + " x " + std::to_string(cfg.arrays) +
                          " @ " + fmt_g(cfg.freq_mhz) + " MHz");
  row("gamma / theta", fmt_g(cfg.gamma) + " / " + fmt_g(cfg.theta));
  row("blen", std::to_string(blen));
  row("weight sparsity", fmt_g(weight_sparsity * 100.0) + " %");
  row("temporal sparsity x/h/all", fmt_g(ts.input * 100.0) + " / " +
                                       fmt_g(ts.hidden * 100.0) + " / " +
                                       fmt_g(ts.total * 100.0) + " %");
  row("balance ratio", fmt_g(balance));
  row("steps", std::to_string(sim.steps()));
  row("cycles", std::to_string(sim.total_cycles));
  row("mean step latency", fmt_g(sim.mean_step_latency_s() * 1e6) + " us");
  row("peak throughput", fmt_g(peak_ops / 1e9) + " GOp/s");
  row("effective throughput", fmt_g(effective_ops / 1e9) + " GOp/s");
  row("op saving", saving > 0 ? fmt_g(saving) + "x" : "n/a");
  row("speedup (spatial)", fmt_g(speedup.spatial) + "x");
  row("speedup (temporal)", fmt_g(speedup.temporal) + "x");
  row("speedup (total)", fmt_g(speedup.total) + "x");
  row("DRAM", dram_type_name(cfg.dram) + " @ " +
                  fmt_g(dram_energy_pj_per_bit(cfg.dram)) + " pJ/bit");
  row("DRAM energy / step", fmt_g(sim.steps() ? dram_joules * 1e6 / sim.steps() : 0.0) +
                                " uJ");
  return out.str();
}

inline ReportBundle stage_simulate(Container& c, const RunConfig& cfg) {
  ReportBundle rep = build_report(c, cfg);
  const std::string text = rep.machine_text();
  c.put(kSecReport, std::vector<std::uint8_t>(text.begin(), text.end()));
  c.put(kSecConfig, encode_config(cfg));
  return rep;
}

inline ReportBundle stage_report(Container& c, const RunConfig& cfg) {
  return stage_simulate(c, cfg);
}

// ---------------------------------------------------------------------------
// deterministic input generation for smoke runs

inline std::vector<std::vector<double>> random_inputs(std::size_t input_size,
                                                      std::size_t steps,
                                                      std::uint64_t seed) {
  SplitMix rng(hash_key(seed, 0x1e5u));
  std::vector<std::vector<double>> xs(steps, std::vector<double>(input_size));
  for (auto& x : xs)
    for (auto& v : x) v = rng.next_unit() * 2.0 - 1.0;
  return xs;
}

// ---------------------------------------------------------------------------
// flat-binary interchange (f64 little-endian data + JSON sidecar)

inline std::vector<std::uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

// Parameter file: sidecar {"input_size": I, "hidden_size": H}; matrices
// w_ii w_hi w_if w_hf w_ig w_hg w_io w_ho row-major, then biases
// b_ii b_hi b_if b_hf b_ig b_hg b_io b_ho.
inline LstmParams<RealArith> load_params_flat(const std::string& bin_path,
                                              const std::string& sidecar_path) {
  std::ifstream meta(sidecar_path);
  if (!meta) throw std::runtime_error("cannot open " + sidecar_path);
  const auto j = nlohmann::json::parse(meta);
  const auto input = j.at("input_size").get<std::size_t>();
  const auto hidden = j.at("hidden_size").get<std::size_t>();

  const auto bytes = read_binary_file(bin_path);
  ByteReader r(bytes);
  LstmParams<RealArith> p;
  p.input_size = input;
  p.hidden_size = hidden;
  auto mat = [&](std::size_t rows, std::size_t cols) {
    Matrix<double> m(rows, cols);
    for (auto& v : m.data()) v = r.f64();
    return m;
  };
  auto bias = [&]() {
    std::vector<double> b(hidden);
    for (auto& v : b) v = r.f64();
    return b;
  };
  p.w_ii = mat(hidden, input); p.w_hi = mat(hidden, hidden);
  p.w_if = mat(hidden, input); p.w_hf = mat(hidden, hidden);
  p.w_ig = mat(hidden, input); p.w_hg = mat(hidden, hidden);
  p.w_io = mat(hidden, input); p.w_ho = mat(hidden, hidden);
  p.b_ii = bias(); p.b_hi = bias(); p.b_if = bias(); p.b_hf = bias();
  p.b_ig = bias(); p.b_hg = bias(); p.b_io = bias(); p.b_ho = bias();
  if (!r.done()) throw std::runtime_error("trailing bytes in " + bin_path);
  p.validate();
  return p;
}

// Input sequence file: sidecar {"steps": T, "input_size": I}.
inline std::vector<std::vector<double>> load_inputs_flat(
    const std::string& bin_path, const std::string& sidecar_path) {
  std::ifstream meta(sidecar_path);
  if (!meta) throw std::runtime_error("cannot open " + sidecar_path);
  const auto j = nlohmann::json::parse(meta);
  const auto steps = j.at("steps").get<std::size_t>();
  const auto input = j.at("input_size").get<std::size_t>();
  const auto bytes = read_binary_file(bin_path);
  ByteReader r(bytes);
  std::vector<std::vector<double>> xs(steps, std::vector<double>(input));
  for (auto& x : xs)
    for (auto& v : x) v = r.f64();
  if (!r.done()) throw std::runtime_error("trailing bytes in " + bin_path);
  return xs;
}

}  // namespace spartus

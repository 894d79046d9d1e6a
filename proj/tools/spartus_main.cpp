// spartus — sparse delta-LSTM inference engine and accelerator model.
//
// Subcommands drive one experiment container through the pipeline:
//
//   init      create a container with a seeded random real64 layer
//   quantize  convert PARAMS to fixed point, report the max rounding error
//   prune     stack the weights and apply column-balanced targeted dropout
//   encode    compress the stacked matrix and split it into weight banks
//   infer     run the delta engine over an input sequence, record the trace
//   simulate  price the recorded (or a synthetic) trace on the array model
//   report    print the run summary (and refresh the REPORT section)
//   info      list the container's sections
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spartus/pipeline.hpp"

namespace {

using namespace spartus;

struct CommonFlags {
  std::optional<double> gamma, theta, freq_mhz, delta_alpha, lut_clip;
  std::optional<std::size_t> pes, arrays, epochs, lut_entries;
  std::optional<std::uint64_t> seed, overhead_cycles;
  std::optional<int> weight_bits, weight_frac, act_bits, act_frac, acc_bits,
      acc_frac, lidx_bits;
  std::optional<std::string> dram;
  bool preset_spartus = false;
  bool preset_edge = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_flag("--spartus", f.preset_spartus,
                "preset: M=64, N=8, 200 MHz, 8-bit lidx");
  cmd->add_flag("--edge", f.preset_edge,
                "preset: M=4, N=1, 125 MHz, 10-bit lidx, DRAM-bound");
  cmd->add_option("--gamma", f.gamma, "target weight sparsity in [0,1]");
  cmd->add_option("--theta", f.theta, "delta threshold (>= 0)");
  cmd->add_option("--pes", f.pes, "PEs per MAC array (M)");
  cmd->add_option("--arrays", f.arrays, "MAC arrays (N)");
  cmd->add_option("--freq-mhz", f.freq_mhz, "clock frequency in MHz");
  cmd->add_option("--seed", f.seed, "seed for all stochastic components");
  cmd->add_option("--weight-bits", f.weight_bits, "weight total bits (<= 8)");
  cmd->add_option("--weight-frac", f.weight_frac, "weight fractional bits");
  cmd->add_option("--act-bits", f.act_bits, "activation total bits (<= 16)");
  cmd->add_option("--act-frac", f.act_frac, "activation fractional bits");
  cmd->add_option("--acc-bits", f.acc_bits, "accumulator total bits (<= 48)");
  cmd->add_option("--acc-frac", f.acc_frac, "accumulator fractional bits");
  cmd->add_option("--lidx-bits", f.lidx_bits, "local index bits (<= 16)");
  cmd->add_option("--lut-entries", f.lut_entries, "activation table entries (power of 2)");
  cmd->add_option("--lut-clip", f.lut_clip, "activation table input clip");
  cmd->add_option("--overhead-cycles", f.overhead_cycles,
                  "fixed pipeline cycles per timestep");
  cmd->add_option("--dram", f.dram, "dram type: ddr3, ddr3l, gddr6, hbm2")
      ->check(CLI::IsMember({"ddr3", "ddr3l", "gddr6", "hbm2"}));
  cmd->add_option("--delta-alpha", f.delta_alpha, "dropout probability step per epoch");
  cmd->add_option("--epochs", f.epochs, "pruning epochs to run");
}

RunConfig apply_flags(RunConfig cfg, const CommonFlags& f) {
  if (f.preset_spartus && f.preset_edge)
    throw CLI::ValidationError("--spartus and --edge are mutually exclusive");
  if (f.preset_spartus) {
    const RunConfig p = RunConfig::spartus_preset();
    cfg.pes = p.pes;
    cfg.arrays = p.arrays;
    cfg.freq_mhz = p.freq_mhz;
    cfg.lidx_bits = p.lidx_bits;
    cfg.dram = p.dram;
    cfg.memory_bound = p.memory_bound;
  }
  if (f.preset_edge) {
    const RunConfig p = RunConfig::edge_preset();
    cfg.pes = p.pes;
    cfg.arrays = p.arrays;
    cfg.freq_mhz = p.freq_mhz;
    cfg.lidx_bits = p.lidx_bits;
    cfg.dram = p.dram;
    cfg.memory_bound = p.memory_bound;
    cfg.dram_bits_per_cycle = p.dram_bits_per_cycle;
  }
  if (f.gamma) cfg.gamma = *f.gamma;
  if (f.theta) cfg.theta = *f.theta;
  if (f.pes) cfg.pes = *f.pes;
  if (f.arrays) cfg.arrays = *f.arrays;
  if (f.freq_mhz) cfg.freq_mhz = *f.freq_mhz;
  if (f.seed) cfg.seed = *f.seed;
  if (f.weight_bits) cfg.weight_fmt.total_bits = *f.weight_bits;
  if (f.weight_frac) cfg.weight_fmt.frac_bits = *f.weight_frac;
  if (f.act_bits) cfg.act_fmt.total_bits = *f.act_bits;
  if (f.act_frac) cfg.act_fmt.frac_bits = *f.act_frac;
  if (f.acc_bits) cfg.acc_fmt.total_bits = *f.acc_bits;
  if (f.acc_frac) cfg.acc_fmt.frac_bits = *f.acc_frac;
  if (f.lidx_bits) cfg.lidx_bits = *f.lidx_bits;
  if (f.lut_entries) cfg.lut_entries = *f.lut_entries;
  if (f.lut_clip) cfg.lut_clip = *f.lut_clip;
  if (f.overhead_cycles) cfg.overhead_cycles = *f.overhead_cycles;
  if (f.dram) cfg.dram = dram_type_from_name(*f.dram);
  if (f.delta_alpha) cfg.delta_alpha = *f.delta_alpha;
  if (f.epochs) cfg.epochs = *f.epochs;
  cfg.validate();
  return cfg;
}

RunConfig config_from_container(const Container& c) {
  if (c.has(kSecConfig)) return decode_config(c.get(kSecConfig));
  return RunConfig{};
}

int run(int argc, char** argv) {
  CLI::App app{"sparse delta-LSTM engine and accelerator model"};
  app.require_subcommand(1);

  std::string file;
  CommonFlags flags;

  // init
  auto* init = app.add_subcommand("init", "create a container with a random layer");
  std::size_t init_input = 8, init_hidden = 16;
  init->add_option("file", file, "container path")->required();
  init->add_option("--input", init_input, "layer input size");
  init->add_option("--hidden", init_hidden, "layer hidden size");
  std::string import_bin, import_meta;
  init->add_option("--import", import_bin, "flat f64 parameter file to import");
  init->add_option("--import-meta", import_meta, "JSON sidecar with the shapes");
  add_common_flags(init, flags);

  // quantize
  auto* quantize = app.add_subcommand("quantize", "fix-point the parameters");
  quantize->add_option("file", file)->required();
  add_common_flags(quantize, flags);

  // prune
  auto* prune = app.add_subcommand("prune", "column-balanced targeted dropout");
  prune->add_option("file", file)->required();
  add_common_flags(prune, flags);

  // encode
  auto* encode = app.add_subcommand("encode", "compress and bank the weights");
  encode->add_option("file", file)->required();
  add_common_flags(encode, flags);

  // infer
  auto* infer = app.add_subcommand("infer", "run the delta engine, record the trace");
  infer->add_option("file", file)->required();
  std::string input_bin, input_meta;
  std::size_t random_steps = 0;
  infer->add_option("--input", input_bin, "flat f64 input sequence");
  infer->add_option("--input-meta", input_meta, "JSON sidecar with steps/input_size");
  infer->add_option("--random-steps", random_steps,
                    "generate this many random input steps instead");
  add_common_flags(infer, flags);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "price the trace on the array model");
  simulate->add_option("file", file)->required();
  std::size_t synth_steps = 0;
  double synth_sparsity = -1.0, synth_balance = 0.75;
  simulate->add_option("--synthetic-steps", synth_steps,
                       "generate a synthetic trace with this many steps");
  simulate->add_option("--synthetic-sparsity", synth_sparsity,
                       "temporal sparsity of the synthetic trace");
  simulate->add_option("--synthetic-balance", synth_balance,
                       "target balance ratio of the synthetic trace");
  add_common_flags(simulate, flags);

  // report
  auto* report = app.add_subcommand("report", "print the run summary");
  report->add_option("file", file)->required();
  bool machine_only = false;
  report->add_flag("--machine", machine_only, "print only the machine-readable record");
  add_common_flags(report, flags);

  // info
  auto* info = app.add_subcommand("info", "list container sections");
  info->add_option("file", file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (init->parsed()) {
    Container c;
    RunConfig cfg = apply_flags(RunConfig{}, flags);
    if (!import_bin.empty()) {
      if (import_meta.empty())
        throw CLI::ValidationError("--import requires --import-meta");
      ParamsSection p;
      p.mode = kModeReal;
      p.real = load_params_flat(import_bin, import_meta);
      c.put(kSecParams, encode_params(p));
      c.put(kSecConfig, encode_config(cfg));
      std::cout << "imported " << p.real.input_size << " -> " << p.real.hidden_size
                << " layer into " << file << "\n";
    } else {
      stage_init(c, cfg, init_input, init_hidden);
      std::cout << "created " << init_input << " -> " << init_hidden
                << " random layer in " << file << "\n";
    }
    c.save(file);
    return 0;
  }

  Container c = Container::load(file);
  RunConfig cfg = apply_flags(config_from_container(c), flags);

  if (quantize->parsed()) {
    auto summary = stage_quantize(c, cfg);
    if (summary) {
      for (const auto& t : summary->per_tensor)
        std::cout << "  " << t.name << " max rounding error " << t.max_error << "\n";
      std::cout << "quantized: max parameter rounding error " << summary->max_error
                << "\n";
    } else {
      std::cout << "already quantized; PARAMS unchanged\n";
    }
    c.save(file);
  } else if (prune->parsed()) {
    stage_prune(c, cfg);
    auto st = decode_stacked(c.get(kSecStacked));
    std::cout << "pruned stacked matrix " << st.shape.h() << " x " << st.shape.q()
              << " at gamma " << cfg.gamma << "\n";
    c.save(file);
  } else if (encode->parsed()) {
    stage_encode(c, cfg);
    auto banks = decode_banks(c.get(kSecBanks));
    const std::size_t blen =
        banks.mode == kModeReal ? banks.real.blen() : banks.quant.blen();
    std::cout << "encoded " << cfg.arrays << " banks, blen " << blen << "\n";
    c.save(file);
  } else if (infer->parsed()) {
    std::vector<std::vector<double>> xs;
    if (!input_bin.empty()) {
      if (input_meta.empty())
        throw CLI::ValidationError("--input requires --input-meta");
      xs = load_inputs_flat(input_bin, input_meta);
    } else if (random_steps > 0) {
      ParamsSection p = decode_params(c.get(kSecParams));
      xs = random_inputs(p.input_size(), random_steps, cfg.seed);
    } else {
      throw CLI::ValidationError("infer needs --input or --random-steps");
    }
    auto summary = stage_infer(c, cfg, xs);
    std::cout << "inferred " << summary.steps << " steps; temporal sparsity x/h/all "
              << summary.sparsity.input << " / " << summary.sparsity.hidden << " / "
              << summary.sparsity.total << "\n";
    c.save(file);
  } else if (simulate->parsed()) {
    if (synth_steps > 0) {
      if (synth_sparsity < 0)
        throw CLI::ValidationError("--synthetic-steps needs --synthetic-sparsity");
      stage_synthetic_trace(c, cfg, synth_steps, synth_sparsity, synth_balance);
    }
    auto rep = stage_simulate(c, cfg);
    std::cout << "simulated " << rep.sim.steps() << " steps: " << rep.sim.total_cycles
              << " cycles, balance ratio " << rep.balance << ", mean latency "
              << rep.sim.mean_step_latency_s() * 1e6 << " us\n";
    c.save(file);
  } else if (report->parsed()) {
    auto rep = stage_report(c, cfg);
    if (!machine_only) std::cout << rep.human_text() << "\n";
    std::cout << rep.machine_text();
    c.save(file);
  } else if (info->parsed()) {
    for (const auto& s : c.sections())
      std::cout << s.name << "  " << s.payload.size() << " bytes\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

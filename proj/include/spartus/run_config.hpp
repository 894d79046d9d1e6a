#pragma once

// Run configuration shared by every pipeline stage: sparsity targets, the
// array geometry, number formats, schedule and cost constants. Stored in
// the container's CONFIG section as JSON so experiment files are
// self-describing.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spartus/fixed_point.hpp"
#include "spartus/sim.hpp"

namespace spartus {

enum class DramType { Ddr3, Ddr3l, Gddr6, Hbm2 };

inline double dram_energy_pj_per_bit(DramType t) {
  switch (t) {
    case DramType::Ddr3: return 20.3;
    case DramType::Ddr3l: return 16.5;
    case DramType::Gddr6: return 5.5;
    case DramType::Hbm2: return 3.9;
  }
  throw std::invalid_argument("unknown DRAM type");
}

inline std::string dram_type_name(DramType t) {
  switch (t) {
    case DramType::Ddr3: return "ddr3";
    case DramType::Ddr3l: return "ddr3l";
    case DramType::Gddr6: return "gddr6";
    case DramType::Hbm2: return "hbm2";
  }
  return "ddr3";
}

inline DramType dram_type_from_name(const std::string& s) {
  if (s == "ddr3") return DramType::Ddr3;
  if (s == "ddr3l") return DramType::Ddr3l;
  if (s == "gddr6") return DramType::Gddr6;
  if (s == "hbm2") return DramType::Hbm2;
  throw std::invalid_argument("unknown DRAM type: " + s);
}

struct RunConfig {
  // sparsity knobs
  double gamma = 0.0;
  double theta = 0.0;
  double delta_alpha = 1.0 / 30.0;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;

  // array geometry and clock
  std::size_t pes = 64;    // M
  std::size_t arrays = 8;  // N
  double freq_mhz = 200.0;

  // number formats
  FixedPointFormat weight_fmt{8, 6};
  FixedPointFormat act_fmt{16, 8};
  FixedPointFormat acc_fmt{48, 14};
  int lidx_bits = 8;
  double lut_clip = 8.0;
  std::size_t lut_entries = 1024;

  // cost model
  std::uint64_t overhead_cycles = 60;
  DramType dram = DramType::Ddr3;
  bool memory_bound = false;
  int dram_bits_per_cycle = 72;

  static RunConfig spartus_preset() {
    RunConfig c;
    c.pes = 64;
    c.arrays = 8;
    c.freq_mhz = 200.0;
    c.lidx_bits = 8;
    return c;
  }

  // Small configuration streaming weights from DRAM.
  static RunConfig edge_preset() {
    RunConfig c;
    c.pes = 4;
    c.arrays = 1;
    c.freq_mhz = 125.0;
    c.lidx_bits = 10;
    c.dram = DramType::Ddr3l;
    c.memory_bound = true;
    c.dram_bits_per_cycle = 72;
    return c;
  }

  void validate() const {
    if (gamma < 0.0 || gamma > 1.0)
      throw std::invalid_argument("config: gamma outside [0, 1]");
    if (theta < 0.0) throw std::invalid_argument("config: theta must be >= 0");
    if (delta_alpha < 0.0 || delta_alpha > 1.0)
      throw std::invalid_argument("config: delta_alpha outside [0, 1]");
    if (pes == 0 || arrays == 0 || pes % arrays != 0)
      throw std::invalid_argument("config: PE count must be a positive multiple of the array count");
    if (!(freq_mhz > 0)) throw std::invalid_argument("config: clock must be positive");
    require_valid(weight_fmt);
    require_valid(act_fmt);
    require_valid(acc_fmt);
    if (weight_fmt.total_bits > 8)
      throw std::invalid_argument(
          "config: weight format is limited to 8 total bits (formats up to 48 "
          "bits exist only for the accumulator)");
    if (act_fmt.total_bits > 16)
      throw std::invalid_argument("config: activation format is limited to 16 total bits");
    if (lidx_bits < 1 || lidx_bits > 16)
      throw std::invalid_argument("config: lidx bits outside [1, 16]");
    if (lut_entries < 2 || (lut_entries & (lut_entries - 1)) != 0)
      throw std::invalid_argument("config: LUT entries must be a power of two");
  }

  double clock_hz() const { return freq_mhz * 1e6; }

  AcceleratorConfig accel() const {
    AcceleratorConfig a;
    a.pes = pes;
    a.arrays = arrays;
    a.clock_hz = clock_hz();
    a.pipeline_overhead = overhead_cycles;
    a.bits_per_weight_pair = weight_fmt.total_bits + lidx_bits;
    a.dram_energy_pj_per_bit = dram_energy_pj_per_bit(dram);
    a.memory_bound = memory_bound;
    a.dram_bits_per_cycle = dram_bits_per_cycle;
    return a;
  }

  QuantArith quant_arith() const {
    return QuantArith(weight_fmt, act_fmt, acc_fmt, lut_clip, lut_entries);
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"gamma", gamma},
        {"theta", theta},
        {"delta_alpha", delta_alpha},
        {"epochs", epochs},
        {"seed", seed},
        {"pes", pes},
        {"arrays", arrays},
        {"freq_mhz", freq_mhz},
        {"weight_bits", weight_fmt.total_bits},
        {"weight_frac", weight_fmt.frac_bits},
        {"act_bits", act_fmt.total_bits},
        {"act_frac", act_fmt.frac_bits},
        {"acc_bits", acc_fmt.total_bits},
        {"acc_frac", acc_fmt.frac_bits},
        {"lidx_bits", lidx_bits},
        {"lut_clip", lut_clip},
        {"lut_entries", lut_entries},
        {"overhead_cycles", overhead_cycles},
        {"dram", dram_type_name(dram)},
        {"memory_bound", memory_bound},
        {"dram_bits_per_cycle", dram_bits_per_cycle},
    };
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    c.gamma = j.at("gamma").get<double>();
    c.theta = j.at("theta").get<double>();
    c.delta_alpha = j.at("delta_alpha").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.pes = j.at("pes").get<std::size_t>();
    c.arrays = j.at("arrays").get<std::size_t>();
    c.freq_mhz = j.at("freq_mhz").get<double>();
    c.weight_fmt = {j.at("weight_bits").get<int>(), j.at("weight_frac").get<int>()};
    c.act_fmt = {j.at("act_bits").get<int>(), j.at("act_frac").get<int>()};
    c.acc_fmt = {j.at("acc_bits").get<int>(), j.at("acc_frac").get<int>()};
    c.lidx_bits = j.at("lidx_bits").get<int>();
    c.lut_clip = j.at("lut_clip").get<double>();
    c.lut_entries = j.at("lut_entries").get<std::size_t>();
    c.overhead_cycles = j.at("overhead_cycles").get<std::uint64_t>();
    c.dram = dram_type_from_name(j.at("dram").get<std::string>());
    c.memory_bound = j.at("memory_bound").get<bool>();
    c.dram_bits_per_cycle = j.at("dram_bits_per_cycle").get<int>();
    c.validate();
    return c;
  }
};

}  // namespace spartus

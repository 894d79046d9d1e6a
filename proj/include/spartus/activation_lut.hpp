#pragma once

// Table-based sigmoid and tanh, mirroring the activation blocks of the
// hardware processing elements. A table is addressed by the raw input value
// in a coarse fixed-point format whose full representable range is exactly
// the table: total_bits = log2(entries), so index = raw - min_raw.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "spartus/fixed_point.hpp"

namespace spartus {

enum class ActivationKind { Sigmoid, Tanh };

// Derive the table input format from a saturation bound and a table size.
// Both must be powers of two; step = 2*clip/entries = one input LSB.
inline FixedPointFormat lut_input_format(double input_clip, std::size_t entries) {
  if (input_clip <= 0 || (entries & (entries - 1)) != 0 || entries < 2)
    throw std::invalid_argument("lut_input_format: clip > 0 and entries a power of two required");
  int clip_log2 = static_cast<int>(std::lround(std::log2(input_clip)));
  if (std::ldexp(1.0, clip_log2) != input_clip)
    throw std::invalid_argument("lut_input_format: input_clip must be a power of two");
  int total = 0;
  for (std::size_t e = entries; e > 1; e >>= 1) ++total;
  FixedPointFormat fmt{total, total - 1 - clip_log2};
  if (!fmt.valid())
    throw std::invalid_argument("lut_input_format: clip/entries combination not representable");
  return fmt;
}

class ActivationLut {
 public:
  ActivationLut() = default;

  ActivationLut(ActivationKind kind, const FixedPointFormat& input_fmt,
                const FixedPointFormat& output_fmt)
      : kind_(kind), input_fmt_(input_fmt), output_fmt_(output_fmt) {
    require_valid(input_fmt);
    require_valid(output_fmt);
    input_clip_ = dequantize(-input_fmt.min_raw(), input_fmt);
    const std::int64_t lo = input_fmt.min_raw();
    const std::int64_t hi = input_fmt.max_raw();
    entries_.resize(static_cast<std::size_t>(hi - lo + 1));
    for (std::int64_t raw = lo; raw <= hi; ++raw) {
      const double x = dequantize(raw, input_fmt);
      const double y = kind == ActivationKind::Sigmoid
                           ? 1.0 / (1.0 + std::exp(-x))
                           : std::tanh(x);
      entries_[static_cast<std::size_t>(raw - lo)] =
          static_cast<std::int32_t>(quantize(y, output_fmt));
    }
  }

  static ActivationLut sigmoid(const FixedPointFormat& in, const FixedPointFormat& out) {
    return ActivationLut(ActivationKind::Sigmoid, in, out);
  }
  static ActivationLut tanh(const FixedPointFormat& in, const FixedPointFormat& out) {
    return ActivationLut(ActivationKind::Tanh, in, out);
  }

  // Clips to the covered range, then looks up. raw_in is in input_format units.
  std::int32_t eval(std::int64_t raw_in) const {
    const std::int64_t clipped = saturate(raw_in, input_fmt_);
    return entries_[static_cast<std::size_t>(clipped - input_fmt_.min_raw())];
  }

  ActivationKind kind() const { return kind_; }
  const FixedPointFormat& input_format() const { return input_fmt_; }
  const FixedPointFormat& output_format() const { return output_fmt_; }
  double input_clip() const { return input_clip_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::int32_t>& entries() const { return entries_; }

 private:
  ActivationKind kind_ = ActivationKind::Sigmoid;
  FixedPointFormat input_fmt_{10, 6};
  FixedPointFormat output_fmt_{16, 8};
  double input_clip_ = 8.0;
  std::vector<std::int32_t> entries_;
};

}  // namespace spartus

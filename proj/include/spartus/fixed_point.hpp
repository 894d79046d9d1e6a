#pragma once

// Signed fixed-point formats and conversions used across the engine.
//
// A value v is stored as the raw integer round(v * 2^frac_bits), saturated
// to the two's-complement range of total_bits. Rounding is round-to-nearest,
// ties-to-even everywhere, so repeated conversions carry no bias.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace spartus {

struct FixedPointFormat {
  int total_bits = 16;
  int frac_bits = 8;

  constexpr bool valid() const {
    return total_bits > 0 && total_bits <= 48 && frac_bits >= 0 &&
           frac_bits < total_bits;
  }

  constexpr std::int64_t min_raw() const {
    return -(std::int64_t{1} << (total_bits - 1));
  }
  constexpr std::int64_t max_raw() const {
    return (std::int64_t{1} << (total_bits - 1)) - 1;
  }

  // Real magnitude of one raw step.
  double lsb() const { return std::ldexp(1.0, -frac_bits); }

  friend constexpr bool operator==(const FixedPointFormat&,
                                   const FixedPointFormat&) = default;
};

inline void require_valid(const FixedPointFormat& fmt) {
  if (!fmt.valid()) {
    throw std::invalid_argument("invalid fixed-point format {" +
                                std::to_string(fmt.total_bits) + ", " +
                                std::to_string(fmt.frac_bits) + "}");
  }
}

inline std::int64_t saturate(std::int64_t raw, const FixedPointFormat& fmt) {
  if (raw < fmt.min_raw()) return fmt.min_raw();
  if (raw > fmt.max_raw()) return fmt.max_raw();
  return raw;
}

// Round-to-nearest-even quantization with saturation. Never fails.
inline std::int64_t quantize(double value, const FixedPointFormat& fmt) {
  const double scaled = std::ldexp(value, fmt.frac_bits);
  // Clamp before the integer cast; nearbyint uses the default
  // round-to-nearest-even mode.
  const double lo = static_cast<double>(fmt.min_raw());
  const double hi = static_cast<double>(fmt.max_raw());
  if (!(scaled > lo)) return fmt.min_raw();  // also catches NaN -> min
  if (scaled > hi) return fmt.max_raw();
  return saturate(static_cast<std::int64_t>(std::nearbyint(scaled)), fmt);
}

inline double dequantize(std::int64_t raw, const FixedPointFormat& fmt) {
  return std::ldexp(static_cast<double>(raw), -fmt.frac_bits);
}

// Shift a raw value between fractional scales, RNE on right shifts,
// saturating to the destination range.
inline std::int64_t rescale(std::int64_t raw, const FixedPointFormat& from,
                            const FixedPointFormat& to) {
  const int shift = to.frac_bits - from.frac_bits;
  if (shift >= 0) {
    if (shift >= 63) return saturate(raw < 0 ? to.min_raw() : raw == 0 ? 0 : to.max_raw(), to);
    // Detect overflow of the widening shift before it happens.
    const std::int64_t hi = to.max_raw() >> shift;
    const std::int64_t lo = to.min_raw() >> shift;
    if (raw > hi) return to.max_raw();
    if (raw < lo) return to.min_raw();
    return saturate(raw << shift, to);
  }
  const int s = -shift;
  if (s >= 63) return saturate(raw < 0 ? -1 : 0, to);
  // Arithmetic shift is floor division, so the remainder is non-negative
  // and one RNE correction covers both signs.
  std::int64_t q = raw >> s;
  const std::int64_t rem = raw - (q << s);
  const std::int64_t half = std::int64_t{1} << (s - 1);
  if (rem > half || (rem == half && (q & 1))) ++q;
  return saturate(q, to);
}

// Flat tensor of raw values in one shared format.
struct QuantizedTensor {
  std::vector<std::size_t> shape;
  std::vector<std::int64_t> data;
  FixedPointFormat fmt;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }

  void validate() const {
    require_valid(fmt);
    if (data.size() != element_count())
      throw std::invalid_argument("QuantizedTensor: data length != shape product");
    for (std::int64_t raw : data) {
      if (raw < fmt.min_raw() || raw > fmt.max_raw())
        throw std::out_of_range("QuantizedTensor: raw value outside format range");
    }
  }
};

inline QuantizedTensor quantize_tensor(const std::vector<std::size_t>& shape,
                                       const std::vector<double>& values,
                                       const FixedPointFormat& fmt) {
  require_valid(fmt);
  QuantizedTensor t{shape, {}, fmt};
  t.data.reserve(values.size());
  for (double v : values) t.data.push_back(quantize(v, fmt));
  t.validate();
  return t;
}

}  // namespace spartus

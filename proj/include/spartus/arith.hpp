#pragma once

// Numeric modes for the engine. The recurrent cores are templated on one of
// these policies:
//
//   RealArith  — double everywhere; the reference semantics.
//   QuantArith — raw fixed-point integers with the accelerator's widths:
//                weights in a <=8-bit format, states in a <=16-bit format,
//                MAC accumulation in a <=48-bit format, sigmoid/tanh via
//                lookup tables.
//
// Mixed-format rules in QuantArith: a weight*delta product carries
// weight.frac + state.frac fractional bits and is rescaled into the
// accumulator format (exact left shift when the accumulator has at least
// that many fractional bits, RNE otherwise). Pointwise state products are
// rescaled back to the state format. Every add saturates.

#include <cmath>
#include <cstdint>

#include "spartus/activation_lut.hpp"
#include "spartus/fixed_point.hpp"

namespace spartus {

struct RealArith {
  using weight_type = double;
  using state_type = double;
  using delta_type = double;
  using acc_type = double;
  static constexpr bool is_quantized = false;

  acc_type mac(acc_type acc, weight_type w, delta_type d) const { return acc + w * d; }
  acc_type acc_add(acc_type a, acc_type b) const { return a + b; }

  state_type gate_sigmoid(acc_type a) const { return 1.0 / (1.0 + std::exp(-a)); }
  state_type gate_tanh(acc_type a) const { return std::tanh(a); }
  state_type state_tanh(state_type s) const { return std::tanh(s); }

  state_type mul(state_type a, state_type b) const { return a * b; }
  state_type add(state_type a, state_type b) const { return a + b; }
  delta_type sub(state_type cur, state_type prev) const { return cur - prev; }

  weight_type weight_from_real(double v) const { return v; }
  acc_type bias_from_real(double v) const { return v; }
  state_type state_from_real(double v) const { return v; }
  double weight_to_real(weight_type v) const { return v; }
  double state_to_real(state_type v) const { return v; }
  double acc_to_real(acc_type v) const { return v; }
};

class QuantArith {
 public:
  using weight_type = std::int8_t;
  using state_type = std::int16_t;
  using delta_type = std::int32_t;
  using acc_type = std::int64_t;
  static constexpr bool is_quantized = true;

  QuantArith(const FixedPointFormat& weight_fmt, const FixedPointFormat& state_fmt,
             const FixedPointFormat& acc_fmt, double lut_clip = 8.0,
             std::size_t lut_entries = 1024)
      : weight_fmt_(weight_fmt),
        state_fmt_(state_fmt),
        acc_fmt_(acc_fmt),
        lut_in_fmt_(lut_input_format(lut_clip, lut_entries)),
        sigmoid_(ActivationKind::Sigmoid, lut_in_fmt_, state_fmt),
        tanh_(ActivationKind::Tanh, lut_in_fmt_, state_fmt) {
    require_valid(weight_fmt);
    require_valid(state_fmt);
    require_valid(acc_fmt);
    if (weight_fmt.total_bits > 8)
      throw std::invalid_argument("QuantArith: weight format wider than 8 bits");
    if (state_fmt.total_bits > 16)
      throw std::invalid_argument("QuantArith: state format wider than 16 bits");
    product_fmt_ = FixedPointFormat{48, weight_fmt.frac_bits + state_fmt.frac_bits};
  }

  acc_type mac(acc_type acc, weight_type w, delta_type d) const {
    const std::int64_t p = static_cast<std::int64_t>(w) * d;
    return acc_add(acc, rescale(p, product_fmt_, acc_fmt_));
  }

  acc_type acc_add(acc_type a, acc_type b) const { return saturate(a + b, acc_fmt_); }

  state_type gate_sigmoid(acc_type a) const {
    return static_cast<state_type>(sigmoid_.eval(rescale(a, acc_fmt_, lut_in_fmt_)));
  }
  state_type gate_tanh(acc_type a) const {
    return static_cast<state_type>(tanh_.eval(rescale(a, acc_fmt_, lut_in_fmt_)));
  }
  state_type state_tanh(state_type s) const {
    return static_cast<state_type>(tanh_.eval(rescale(s, state_fmt_, lut_in_fmt_)));
  }

  // Pointwise product of two state-format values, back in state format.
  state_type mul(state_type a, state_type b) const {
    const std::int64_t p = static_cast<std::int64_t>(a) * b;
    const FixedPointFormat pf{48, 2 * state_fmt_.frac_bits};
    return static_cast<state_type>(rescale(p, pf, state_fmt_));
  }
  state_type add(state_type a, state_type b) const {
    return static_cast<state_type>(
        saturate(static_cast<std::int64_t>(a) + b, state_fmt_));
  }
  delta_type sub(state_type cur, state_type prev) const {
    return static_cast<delta_type>(cur) - prev;
  }

  weight_type weight_from_real(double v) const {
    return static_cast<weight_type>(quantize(v, weight_fmt_));
  }
  acc_type bias_from_real(double v) const { return quantize(v, acc_fmt_); }
  state_type state_from_real(double v) const {
    return static_cast<state_type>(quantize(v, state_fmt_));
  }
  double weight_to_real(weight_type v) const { return dequantize(v, weight_fmt_); }
  double state_to_real(state_type v) const { return dequantize(v, state_fmt_); }
  double acc_to_real(acc_type v) const { return dequantize(v, acc_fmt_); }

  const FixedPointFormat& weight_format() const { return weight_fmt_; }
  const FixedPointFormat& state_format() const { return state_fmt_; }
  const FixedPointFormat& acc_format() const { return acc_fmt_; }
  const ActivationLut& sigmoid_lut() const { return sigmoid_; }
  const ActivationLut& tanh_lut() const { return tanh_; }

 private:
  FixedPointFormat weight_fmt_;
  FixedPointFormat state_fmt_;
  FixedPointFormat acc_fmt_;
  FixedPointFormat product_fmt_;
  FixedPointFormat lut_in_fmt_;
  ActivationLut sigmoid_;
  ActivationLut tanh_;
};

}  // namespace spartus

#pragma once

// Conversions between real-valued and raw fixed-point layer parameters,
// plus a seeded random layer generator for demos and smoke runs.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spartus/arith.hpp"
#include "spartus/lstm.hpp"
#include "spartus/rng.hpp"

namespace spartus {

namespace detail {

template <typename FromA, typename ToA, typename FW, typename FB>
LstmParams<ToA> convert_params(const LstmParams<FromA>& p, FW&& weight_fn, FB&& bias_fn) {
  LstmParams<ToA> out;
  out.input_size = p.input_size;
  out.hidden_size = p.hidden_size;
  auto conv_m = [&](const auto& src) {
    Matrix<typename ToA::weight_type> dst(src.rows(), src.cols());
    for (std::size_t i = 0; i < src.data().size(); ++i)
      dst.data()[i] = weight_fn(src.data()[i]);
    return dst;
  };
  auto conv_b = [&](const auto& src) {
    std::vector<typename ToA::acc_type> dst(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = bias_fn(src[i]);
    return dst;
  };
  out.w_ii = conv_m(p.w_ii); out.w_hi = conv_m(p.w_hi);
  out.w_if = conv_m(p.w_if); out.w_hf = conv_m(p.w_hf);
  out.w_ig = conv_m(p.w_ig); out.w_hg = conv_m(p.w_hg);
  out.w_io = conv_m(p.w_io); out.w_ho = conv_m(p.w_ho);
  out.b_ii = conv_b(p.b_ii); out.b_hi = conv_b(p.b_hi);
  out.b_if = conv_b(p.b_if); out.b_hf = conv_b(p.b_hf);
  out.b_ig = conv_b(p.b_ig); out.b_hg = conv_b(p.b_hg);
  out.b_io = conv_b(p.b_io); out.b_ho = conv_b(p.b_ho);
  return out;
}

}  // namespace detail

inline LstmParams<QuantArith> quantize_params(const LstmParams<RealArith>& p,
                                              const QuantArith& q) {
  return detail::convert_params<RealArith, QuantArith>(
      p, [&](double v) { return q.weight_from_real(v); },
      [&](double v) { return q.bias_from_real(v); });
}

inline LstmParams<RealArith> dequantize_params(const LstmParams<QuantArith>& p,
                                               const QuantArith& q) {
  return detail::convert_params<QuantArith, RealArith>(
      p, [&](std::int8_t v) { return q.weight_to_real(v); },
      [&](std::int64_t v) { return q.acc_to_real(v); });
}

// Largest |dequantize(quantize(v)) - v| per tensor, in declaration order.
struct TensorError {
  std::string name;
  double max_error = 0.0;
};

inline std::vector<TensorError> quantization_errors(const LstmParams<RealArith>& p,
                                                    const QuantArith& q) {
  std::vector<TensorError> out;
  auto scan_m = [&](const char* name, const Matrix<double>& m) {
    double worst = 0.0;
    for (double v : m.data())
      worst = std::max(worst, std::fabs(q.weight_to_real(q.weight_from_real(v)) - v));
    out.push_back({name, worst});
  };
  auto scan_b = [&](const char* name, const std::vector<double>& b) {
    double worst = 0.0;
    for (double v : b)
      worst = std::max(worst, std::fabs(q.acc_to_real(q.bias_from_real(v)) - v));
    out.push_back({name, worst});
  };
  scan_m("w_ii", p.w_ii); scan_m("w_hi", p.w_hi);
  scan_m("w_if", p.w_if); scan_m("w_hf", p.w_hf);
  scan_m("w_ig", p.w_ig); scan_m("w_hg", p.w_hg);
  scan_m("w_io", p.w_io); scan_m("w_ho", p.w_ho);
  scan_b("b_ii", p.b_ii); scan_b("b_hi", p.b_hi);
  scan_b("b_if", p.b_if); scan_b("b_hf", p.b_hf);
  scan_b("b_ig", p.b_ig); scan_b("b_hg", p.b_hg);
  scan_b("b_io", p.b_io); scan_b("b_ho", p.b_ho);
  return out;
}

inline double max_quantization_error(const LstmParams<RealArith>& p,
                                     const QuantArith& q) {
  double worst = 0.0;
  for (const auto& t : quantization_errors(p, q))
    worst = std::max(worst, t.max_error);
  return worst;
}

// Uniform random layer with fan-in scaled weights, deterministic in the seed.
inline LstmParams<RealArith> random_lstm_params(std::size_t input_size,
                                                std::size_t hidden_size,
                                                std::uint64_t seed,
                                                double weight_scale = 0.0) {
  if (weight_scale <= 0.0)
    weight_scale = 1.0 / std::sqrt(static_cast<double>(input_size + hidden_size));
  LstmParams<RealArith> p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  SplitMix rng(splitmix64(seed));
  auto mk_m = [&](std::size_t rows, std::size_t cols) {
    Matrix<double> m(rows, cols);
    for (auto& v : m.data()) v = (rng.next_unit() * 2.0 - 1.0) * weight_scale;
    return m;
  };
  auto mk_b = [&](std::size_t n) {
    std::vector<double> b(n);
    for (auto& v : b) v = (rng.next_unit() * 2.0 - 1.0) * weight_scale;
    return b;
  };
  p.w_ii = mk_m(hidden_size, input_size); p.w_hi = mk_m(hidden_size, hidden_size);
  p.w_if = mk_m(hidden_size, input_size); p.w_hf = mk_m(hidden_size, hidden_size);
  p.w_ig = mk_m(hidden_size, input_size); p.w_hg = mk_m(hidden_size, hidden_size);
  p.w_io = mk_m(hidden_size, input_size); p.w_ho = mk_m(hidden_size, hidden_size);
  p.b_ii = mk_b(hidden_size); p.b_hi = mk_b(hidden_size);
  p.b_if = mk_b(hidden_size); p.b_hf = mk_b(hidden_size);
  p.b_ig = mk_b(hidden_size); p.b_hg = mk_b(hidden_size);
  p.b_io = mk_b(hidden_size); p.b_ho = mk_b(hidden_size);
  return p;
}

}  // namespace spartus

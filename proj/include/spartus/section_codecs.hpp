#pragma once

// Binary payload codecs for the container sections. Every multi-byte value
// is little-endian; numeric mode byte 0 = real64 (f64 weights and biases),
// 1 = quantized (i8 weights, i64 biases in accumulator units, i16 states,
// i32 deltas).

#include <cstdint>
#include <string>
#include <vector>

#include "spartus/arith.hpp"
#include "spartus/cbcsc.hpp"
#include "spartus/container.hpp"
#include "spartus/delta.hpp"
#include "spartus/lstm.hpp"
#include "spartus/run_config.hpp"

namespace spartus {

inline constexpr std::uint8_t kModeReal = 0;
inline constexpr std::uint8_t kModeQuant = 1;

// Geometry of a stacked layer, carried alongside the weight payloads so
// later stages can rebuild engine state without the dense section.
struct LayerShape {
  std::uint32_t input_size = 0;
  std::uint32_t hidden_size = 0;
  std::uint32_t padded_input = 0;
  std::uint32_t padded_hidden = 0;
  std::uint32_t alignment = 1;  // M used for padding

  std::uint32_t q() const { return padded_input + padded_hidden; }
  std::uint32_t h() const { return 4 * hidden_size; }
  std::uint64_t dense_params() const {
    return 4ull * hidden_size * (input_size + hidden_size);
  }
};

inline void write_shape(ByteWriter& w, const LayerShape& s) {
  w.u32(s.input_size);
  w.u32(s.hidden_size);
  w.u32(s.padded_input);
  w.u32(s.padded_hidden);
  w.u32(s.alignment);
}

inline LayerShape read_shape(ByteReader& r) {
  LayerShape s;
  s.input_size = r.u32();
  s.hidden_size = r.u32();
  s.padded_input = r.u32();
  s.padded_hidden = r.u32();
  s.alignment = r.u32();
  return s;
}

// ---------------------------------------------------------------------------
// CONFIG

inline std::vector<std::uint8_t> encode_config(const RunConfig& cfg) {
  const std::string text = cfg.to_json().dump(2);
  return std::vector<std::uint8_t>(text.begin(), text.end());
}

inline RunConfig decode_config(const std::vector<std::uint8_t>& payload) {
  return RunConfig::from_json(
      nlohmann::json::parse(std::string(payload.begin(), payload.end())));
}

// ---------------------------------------------------------------------------
// PARAMS

struct ParamsSection {
  std::uint8_t mode = kModeReal;
  LstmParams<RealArith> real;
  LstmParams<QuantArith> quant;

  std::size_t input_size() const {
    return mode == kModeReal ? real.input_size : quant.input_size;
  }
  std::size_t hidden_size() const {
    return mode == kModeReal ? real.hidden_size : quant.hidden_size;
  }
};

namespace detail {

template <typename A, typename FW, typename FB>
void write_params(ByteWriter& w, const LstmParams<A>& p, FW&& put_w, FB&& put_b) {
  w.u32(static_cast<std::uint32_t>(p.input_size));
  w.u32(static_cast<std::uint32_t>(p.hidden_size));
  auto mat = [&](const auto& m) {
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (const auto& v : m.data()) put_w(v);
  };
  auto bias = [&](const auto& b) {
    w.u32(static_cast<std::uint32_t>(b.size()));
    for (const auto& v : b) put_b(v);
  };
  mat(p.w_ii); mat(p.w_hi); mat(p.w_if); mat(p.w_hf);
  mat(p.w_ig); mat(p.w_hg); mat(p.w_io); mat(p.w_ho);
  bias(p.b_ii); bias(p.b_hi); bias(p.b_if); bias(p.b_hf);
  bias(p.b_ig); bias(p.b_hg); bias(p.b_io); bias(p.b_ho);
}

template <typename A, typename FW, typename FB>
LstmParams<A> read_params(ByteReader& r, FW&& get_w, FB&& get_b) {
  LstmParams<A> p;
  p.input_size = r.u32();
  p.hidden_size = r.u32();
  auto mat = [&]() {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Matrix<typename A::weight_type> m(rows, cols);
    for (auto& v : m.data()) v = get_w();
    return m;
  };
  auto bias = [&]() {
    const std::uint32_t n = r.u32();
    std::vector<typename A::acc_type> b(n);
    for (auto& v : b) v = get_b();
    return b;
  };
  p.w_ii = mat(); p.w_hi = mat(); p.w_if = mat(); p.w_hf = mat();
  p.w_ig = mat(); p.w_hg = mat(); p.w_io = mat(); p.w_ho = mat();
  p.b_ii = bias(); p.b_hi = bias(); p.b_if = bias(); p.b_hf = bias();
  p.b_ig = bias(); p.b_hg = bias(); p.b_io = bias(); p.b_ho = bias();
  p.validate();
  return p;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_params(const ParamsSection& s) {
  ByteWriter w;
  w.u8(s.mode);
  if (s.mode == kModeReal) {
    detail::write_params(w, s.real, [&](double v) { w.f64(v); },
                         [&](double v) { w.f64(v); });
  } else {
    detail::write_params(w, s.quant, [&](std::int8_t v) { w.i8(v); },
                         [&](std::int64_t v) { w.i64(v); });
  }
  return std::move(w.bytes);
}

inline ParamsSection decode_params(const std::vector<std::uint8_t>& payload) {
  ByteReader r(payload);
  ParamsSection s;
  s.mode = r.u8();
  if (s.mode == kModeReal) {
    s.real = detail::read_params<RealArith>(r, [&]() { return r.f64(); },
                                            [&]() { return r.f64(); });
  } else if (s.mode == kModeQuant) {
    s.quant = detail::read_params<QuantArith>(r, [&]() { return r.i8(); },
                                              [&]() { return r.i64(); });
  } else {
    throw std::runtime_error("PARAMS: unknown numeric mode");
  }
  return s;
}

// ---------------------------------------------------------------------------
// STACKED

struct StackedSection {
  std::uint8_t mode = kModeReal;
  LayerShape shape;
  StackedWeights<double> real;
  StackedWeights<std::int8_t> quant;
};

namespace detail {

template <typename T, typename F>
void write_stacked(ByteWriter& w, const StackedWeights<T>& s, F&& put) {
  w.u32(static_cast<std::uint32_t>(s.w.rows()));
  w.u32(static_cast<std::uint32_t>(s.w.cols()));
  for (const auto& v : s.w.data()) put(v);
}

template <typename T, typename F>
StackedWeights<T> read_stacked(ByteReader& r, const LayerShape& shape, F&& get) {
  StackedWeights<T> s;
  s.input_size = shape.input_size;
  s.hidden_size = shape.hidden_size;
  s.padded_input = shape.padded_input;
  s.padded_hidden = shape.padded_hidden;
  s.alignment = shape.alignment;
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  s.w = Matrix<T>(rows, cols);
  for (auto& v : s.w.data()) v = get();
  if (rows != shape.h() || cols != shape.q())
    throw std::runtime_error("STACKED: dimensions disagree with shape header");
  return s;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_stacked(const StackedSection& s) {
  ByteWriter w;
  w.u8(s.mode);
  write_shape(w, s.shape);
  if (s.mode == kModeReal)
    detail::write_stacked(w, s.real, [&](double v) { w.f64(v); });
  else
    detail::write_stacked(w, s.quant, [&](std::int8_t v) { w.i8(v); });
  return std::move(w.bytes);
}

inline StackedSection decode_stacked(const std::vector<std::uint8_t>& payload) {
  ByteReader r(payload);
  StackedSection s;
  s.mode = r.u8();
  s.shape = read_shape(r);
  if (s.mode == kModeReal)
    s.real = detail::read_stacked<double>(r, s.shape, [&]() { return r.f64(); });
  else if (s.mode == kModeQuant)
    s.quant = detail::read_stacked<std::int8_t>(r, s.shape, [&]() { return r.i8(); });
  else
    throw std::runtime_error("STACKED: unknown numeric mode");
  return s;
}

// ---------------------------------------------------------------------------
// CBCSC and BANKS. VAL is stored as i8 in quantized mode (f64 otherwise);
// LIDX always occupies 16-bit cells regardless of the nominal index width.

namespace detail {

template <typename T, typename F>
void write_cbcsc_matrix(ByteWriter& w, const CbcscMatrix<T>& m, double gamma, F&& put) {
  w.u32(static_cast<std::uint32_t>(m.h));
  w.u32(static_cast<std::uint32_t>(m.q));
  w.u32(static_cast<std::uint32_t>(m.m));
  w.f64(gamma);
  w.u32(static_cast<std::uint32_t>(m.blen));
  w.u8(static_cast<std::uint8_t>(m.lidx_bits));
  w.u64(m.val.size());
  for (const auto& v : m.val) put(v);
  for (std::uint16_t v : m.lidx) w.u16(v);
}

template <typename T, typename F>
CbcscMatrix<T> read_cbcsc_matrix(ByteReader& r, F&& get) {
  CbcscMatrix<T> m;
  m.h = r.u32();
  m.q = r.u32();
  m.m = r.u32();
  r.f64();  // gamma, written for inspection; blen is authoritative
  m.blen = r.u32();
  m.lidx_bits = r.u8();
  const std::uint64_t n = r.u64();
  m.val.resize(n);
  for (auto& v : m.val) v = get();
  m.lidx.resize(n);
  for (auto& v : m.lidx) v = r.u16();
  m.validate();
  return m;
}

}  // namespace detail

struct CbcscSection {
  std::uint8_t mode = kModeReal;
  LayerShape shape;
  double gamma = 0.0;
  CbcscMatrix<double> real;
  CbcscMatrix<std::int8_t> quant;
};

inline std::vector<std::uint8_t> encode_cbcsc(const CbcscSection& s) {
  ByteWriter w;
  w.u8(s.mode);
  write_shape(w, s.shape);
  if (s.mode == kModeReal)
    detail::write_cbcsc_matrix(w, s.real, s.gamma, [&](double v) { w.f64(v); });
  else
    detail::write_cbcsc_matrix(w, s.quant, s.gamma, [&](std::int8_t v) { w.i8(v); });
  return std::move(w.bytes);
}

inline CbcscSection decode_cbcsc(const std::vector<std::uint8_t>& payload) {
  ByteReader r(payload);
  CbcscSection s;
  s.mode = r.u8();
  s.shape = read_shape(r);
  if (s.mode == kModeReal)
    s.real = detail::read_cbcsc_matrix<double>(r, [&]() { return r.f64(); });
  else if (s.mode == kModeQuant)
    s.quant = detail::read_cbcsc_matrix<std::int8_t>(r, [&]() { return r.i8(); });
  else
    throw std::runtime_error("CBCSC: unknown numeric mode");
  return s;
}

struct BanksSection {
  std::uint8_t mode = kModeReal;
  LayerShape shape;
  double gamma = 0.0;
  BankedWeights<double> real;
  BankedWeights<std::int8_t> quant;
};

inline std::vector<std::uint8_t> encode_banks(const BanksSection& s) {
  ByteWriter w;
  w.u8(s.mode);
  write_shape(w, s.shape);
  auto write_all = [&](const auto& banked, auto&& put) {
    w.u32(static_cast<std::uint32_t>(banked.banks.size()));
    w.u64(banked.total_cols);
    for (const auto& bank : banked.banks)
      detail::write_cbcsc_matrix(w, bank, s.gamma, put);
  };
  if (s.mode == kModeReal)
    write_all(s.real, [&](double v) { w.f64(v); });
  else
    write_all(s.quant, [&](std::int8_t v) { w.i8(v); });
  return std::move(w.bytes);
}

inline BanksSection decode_banks(const std::vector<std::uint8_t>& payload) {
  ByteReader r(payload);
  BanksSection s;
  s.mode = r.u8();
  s.shape = read_shape(r);
  if (s.mode == kModeReal) {
    const std::uint32_t n = r.u32();
    s.real.total_cols = r.u64();
    for (std::uint32_t i = 0; i < n; ++i)
      s.real.banks.push_back(
          detail::read_cbcsc_matrix<double>(r, [&]() { return r.f64(); }));
  } else if (s.mode == kModeQuant) {
    const std::uint32_t n = r.u32();
    s.quant.total_cols = r.u64();
    for (std::uint32_t i = 0; i < n; ++i)
      s.quant.banks.push_back(
          detail::read_cbcsc_matrix<std::int8_t>(r, [&]() { return r.i8(); }));
  } else {
    throw std::runtime_error("BANKS: unknown numeric mode");
  }
  return s;
}

// ---------------------------------------------------------------------------
// TRACE: the per-step sparse delta vectors an inference produced (or a
// synthetic generator emitted), replayable by the simulator.

struct TraceSection {
  std::uint8_t mode = kModeReal;
  std::uint32_t dense_len = 0;
  std::uint32_t split = 0;  // input/hidden boundary
  double theta = 0.0;
  std::vector<SparseDeltaVector<double>> real;
  std::vector<SparseDeltaVector<std::int32_t>> quant;

  std::size_t steps() const {
    return mode == kModeReal ? real.size() : quant.size();
  }
};

inline std::vector<std::uint8_t> encode_trace(const TraceSection& s) {
  ByteWriter w;
  w.u8(s.mode);
  w.u32(s.dense_len);
  w.u32(s.split);
  w.f64(s.theta);
  auto write_all = [&](const auto& trace, auto&& put) {
    w.u32(static_cast<std::uint32_t>(trace.size()));
    for (const auto& ds : trace) {
      w.u32(static_cast<std::uint32_t>(ds.nnz()));
      for (std::uint32_t i : ds.nzi) w.u32(i);
      for (const auto& v : ds.nzv) put(v);
    }
  };
  if (s.mode == kModeReal)
    write_all(s.real, [&](double v) { w.f64(v); });
  else
    write_all(s.quant, [&](std::int32_t v) { w.i32(v); });
  return std::move(w.bytes);
}

inline TraceSection decode_trace(const std::vector<std::uint8_t>& payload) {
  ByteReader r(payload);
  TraceSection s;
  s.mode = r.u8();
  s.dense_len = r.u32();
  s.split = r.u32();
  s.theta = r.f64();
  auto read_all = [&](auto& trace, auto&& get) {
    const std::uint32_t steps = r.u32();
    trace.resize(steps);
    for (auto& ds : trace) {
      ds.dense_len = s.dense_len;
      const std::uint32_t nnz = r.u32();
      ds.nzi.resize(nnz);
      for (auto& i : ds.nzi) i = r.u32();
      ds.nzv.resize(nnz);
      for (auto& v : ds.nzv) v = get();
      ds.validate();
    }
  };
  if (s.mode == kModeReal)
    read_all(s.real, [&]() { return r.f64(); });
  else if (s.mode == kModeQuant)
    read_all(s.quant, [&]() { return r.i32(); });
  else
    throw std::runtime_error("TRACE: unknown numeric mode");
  return s;
}

}  // namespace spartus

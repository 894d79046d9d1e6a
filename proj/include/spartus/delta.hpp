#pragma once

// Delta-network LSTM inference: state changes below a threshold are
// suppressed and the surviving deltas drive sparse matrix-vector updates of
// per-gate pre-activation memories. Caches hold the last transmitted value
// of each state element so suppression never accumulates error.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "spartus/lstm.hpp"

namespace spartus {

struct DeltaThreshold {
  double theta = 0.0;           // real-valued threshold
  std::int64_t raw_theta = 0;   // threshold in state-format raw units

  static DeltaThreshold zero() { return {}; }

  static DeltaThreshold from_real(double theta, const FixedPointFormat& state_fmt) {
    if (theta < 0) throw std::invalid_argument("DeltaThreshold: theta must be >= 0");
    return DeltaThreshold{theta, quantize(theta, state_fmt)};
  }
};

namespace detail {
inline bool exceeds(double diff, const DeltaThreshold& t) {
  return std::fabs(diff) > t.theta;
}
inline bool exceeds(std::int32_t diff, const DeltaThreshold& t) {
  return std::llabs(static_cast<long long>(diff)) > t.raw_theta;
}
}  // namespace detail

// Nonzero values and indices of a thresholded delta state vector.
template <typename D>
struct SparseDeltaVector {
  std::vector<D> nzv;
  std::vector<std::uint32_t> nzi;
  std::uint32_t dense_len = 0;

  std::size_t nnz() const { return nzv.size(); }

  void validate() const {
    if (nzv.size() != nzi.size())
      throw std::invalid_argument("SparseDeltaVector: nzv/nzi length mismatch");
    std::uint32_t prev = 0;
    for (std::size_t k = 0; k < nzi.size(); ++k) {
      if (nzi[k] >= dense_len)
        throw std::out_of_range("SparseDeltaVector: index out of range");
      if (k > 0 && nzi[k] <= prev)
        throw std::invalid_argument("SparseDeltaVector: indices not strictly increasing");
      prev = nzi[k];
      if (nzv[k] == D{})
        throw std::invalid_argument("SparseDeltaVector: stored zero delta");
    }
  }
};

namespace detail {

// Shared encode kernel: appends surviving deltas with a base index offset
// and refreshes the cache in place. `current` may be shorter than the
// cache; missing elements are treated as zero (padding positions).
template <typename A, typename D>
void delta_encode_into(std::span<const typename A::state_type> current,
                       std::vector<typename A::state_type>& cache,
                       const DeltaThreshold& thr, std::uint32_t index_base,
                       SparseDeltaVector<D>& out, const A& arith) {
  for (std::size_t i = 0; i < cache.size(); ++i) {
    const typename A::state_type cur =
        i < current.size() ? current[i] : typename A::state_type{};
    const D diff = arith.sub(cur, cache[i]);
    if (exceeds(diff, thr)) {
      out.nzv.push_back(diff);
      out.nzi.push_back(index_base + static_cast<std::uint32_t>(i));
      cache[i] = cur;
    }
  }
}

}  // namespace detail

// Threshold one state vector against its cache (strict ">" comparison).
template <typename A>
SparseDeltaVector<typename A::delta_type> delta_encode(
    std::span<const typename A::state_type> current,
    std::vector<typename A::state_type>& cache, const DeltaThreshold& thr,
    const A& arith) {
  if (current.size() != cache.size())
    throw std::invalid_argument("delta_encode: length mismatch");
  SparseDeltaVector<typename A::delta_type> out;
  out.dense_len = static_cast<std::uint32_t>(cache.size());
  detail::delta_encode_into(current, cache, thr, 0, out, arith);
  return out;
}

// Running state of one delta layer. Delta memories start at the per-gate
// bias sums so the first step reproduces the dense pre-activations; the
// caches start at zero so the first input is transmitted in full.
template <typename A>
struct DeltaLayerState {
  using S = typename A::state_type;
  using Acc = typename A::acc_type;

  std::size_t input_size = 0;
  std::vector<S> x_cache;                 // length padded_input
  std::vector<S> h_cache;                 // length padded_hidden
  std::vector<S> h, c;                    // length hidden
  std::array<std::vector<Acc>, 4> delta_mem;  // indexed by Gate

  std::size_t padded_input() const { return x_cache.size(); }
  std::size_t padded_hidden() const { return h_cache.size(); }
  std::size_t dense_len() const { return x_cache.size() + h_cache.size(); }
};

template <typename A>
DeltaLayerState<A> init_delta_state(const LstmParams<A>& p, std::size_t m,
                                    const A& arith) {
  p.validate();
  DeltaLayerState<A> st;
  st.input_size = p.input_size;
  st.x_cache.assign(round_up_multiple(p.input_size, m), 0);
  st.h_cache.assign(round_up_multiple(p.hidden_size, m), 0);
  st.h.assign(p.hidden_size, 0);
  st.c.assign(p.hidden_size, 0);
  for (Gate g : kStackedGateOrder) {
    auto& d = st.delta_mem[static_cast<std::size_t>(g)];
    d.resize(p.hidden_size);
    const auto& bi = p.input_bias(g);
    const auto& bh = p.hidden_bias(g);
    for (std::size_t r = 0; r < p.hidden_size; ++r)
      d[r] = arith.acc_add(bi[r], bh[r]);
  }
  return st;
}

// Dense-path column gather for the stacked matrix: adds v times column j
// into the four gate memories. The CBCSC-banked overload lives with the
// sparse codec.
template <typename A, typename T>
void accumulate_delta(const StackedWeights<T>& w,
                      const SparseDeltaVector<typename A::delta_type>& ds,
                      std::array<std::vector<typename A::acc_type>, 4>& gate_mem,
                      const A& arith) {
  const std::size_t hidden = w.hidden_size;
  if (ds.dense_len != w.cols())
    throw std::invalid_argument("accumulate_delta: delta length != stacked columns");
  for (std::size_t k = 0; k < ds.nnz(); ++k) {
    const std::uint32_t j = ds.nzi[k];
    const auto v = ds.nzv[k];
    for (std::size_t block = 0; block < 4; ++block) {
      auto& mem = gate_mem[static_cast<std::size_t>(kStackedGateOrder[block])];
      const std::size_t r0 = block * hidden;
      for (std::size_t r = 0; r < hidden; ++r)
        mem[r] = arith.mac(mem[r], w.w(r0 + r, j), v);
    }
  }
}

template <typename A>
struct DeltaStepResult {
  std::vector<typename A::state_type> h;
  SparseDeltaVector<typename A::delta_type> deltas;
};

// One delta step: threshold the input and previous hidden state against
// their caches, fold the surviving deltas into the gate memories through
// the weights, then run the pointwise cell/hidden update.
template <typename A, typename W>
DeltaStepResult<A> delta_lstm_step(const W& weights, DeltaLayerState<A>& st,
                                   std::span<const typename A::state_type> x,
                                   const DeltaThreshold& thr, const A& arith) {
  using S = typename A::state_type;
  if (x.size() != st.input_size)
    throw std::invalid_argument("delta_lstm_step: input length mismatch");
  if (st.delta_mem[0].empty())
    throw std::invalid_argument("delta_lstm_step: uninitialized delta memory");

  SparseDeltaVector<typename A::delta_type> ds;
  ds.dense_len = static_cast<std::uint32_t>(st.dense_len());
  detail::delta_encode_into(x, st.x_cache, thr, 0, ds, arith);
  detail::delta_encode_into(std::span<const S>(st.h), st.h_cache, thr,
                            static_cast<std::uint32_t>(st.x_cache.size()), ds,
                            arith);

  accumulate_delta(weights, ds, st.delta_mem, arith);

  const auto& d_i = st.delta_mem[static_cast<std::size_t>(Gate::Input)];
  const auto& d_f = st.delta_mem[static_cast<std::size_t>(Gate::Forget)];
  const auto& d_g = st.delta_mem[static_cast<std::size_t>(Gate::Cell)];
  const auto& d_o = st.delta_mem[static_cast<std::size_t>(Gate::Output)];
  for (std::size_t r = 0; r < st.h.size(); ++r) {
    const S i = arith.gate_sigmoid(d_i[r]);
    const S f = arith.gate_sigmoid(d_f[r]);
    const S g = arith.gate_tanh(d_g[r]);
    const S o = arith.gate_sigmoid(d_o[r]);
    st.c[r] = arith.add(arith.mul(f, st.c[r]), arith.mul(i, g));
    st.h[r] = arith.mul(o, arith.state_tanh(st.c[r]));
  }
  return DeltaStepResult<A>{st.h, std::move(ds)};
}

struct TemporalSparsity {
  double input = 0.0;   // over the [0, split) index block
  double hidden = 0.0;  // over the [split, Q) block
  double total = 0.0;
};

// Fraction of zero elements in the delta vectors of a trace, split into
// input-block and hidden-block shares.
template <typename D>
TemporalSparsity measure_temporal_sparsity(
    const std::vector<SparseDeltaVector<D>>& trace, std::size_t split) {
  if (trace.empty())
    throw std::invalid_argument("measure_temporal_sparsity: empty trace");
  std::uint64_t nz_x = 0, nz_h = 0;
  const std::size_t q = trace.front().dense_len;
  if (split > q)
    throw std::invalid_argument("measure_temporal_sparsity: split > dense length");
  for (const auto& ds : trace) {
    if (ds.dense_len != q)
      throw std::invalid_argument("measure_temporal_sparsity: inconsistent trace");
    for (std::uint32_t i : ds.nzi) (i < split ? nz_x : nz_h)++;
  }
  const double steps = static_cast<double>(trace.size());
  TemporalSparsity s;
  s.input = split == 0 ? 1.0 : 1.0 - static_cast<double>(nz_x) / (steps * split);
  s.hidden = q == split ? 1.0 : 1.0 - static_cast<double>(nz_h) / (steps * (q - split));
  s.total = 1.0 - static_cast<double>(nz_x + nz_h) / (steps * q);
  return s;
}

}  // namespace spartus

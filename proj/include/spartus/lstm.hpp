#pragma once

// Dense LSTM reference layer and the gate-stacked weight matrix shared by
// the delta engine, the sparse codec and the simulator.
//
// Stacked layout: the eight per-gate matrices are stored as one H x Q
// matrix with H = 4*hidden rows in gate blocks (input, cell, forget,
// output) from top to bottom, and Q = padded_input + padded_hidden columns;
// the left column block holds input weights, the right block recurrent
// weights. Each side is zero-padded to a multiple of the PE count so state
// vectors can be streamed in full beats.

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "spartus/arith.hpp"
#include "spartus/matrix.hpp"

namespace spartus {

enum class Gate { Input = 0, Cell = 1, Forget = 2, Output = 3 };

// Row-block order of the stacked matrix, top to bottom.
inline constexpr std::array<Gate, 4> kStackedGateOrder = {
    Gate::Input, Gate::Cell, Gate::Forget, Gate::Output};

// Storage block index of a gate inside the stacked matrix.
inline constexpr std::size_t stacked_block_of(Gate g) {
  switch (g) {
    case Gate::Input: return 0;
    case Gate::Cell: return 1;
    case Gate::Forget: return 2;
    case Gate::Output: return 3;
  }
  return 0;
}

inline constexpr std::size_t round_up_multiple(std::size_t n, std::size_t m) {
  return m == 0 ? n : ((n + m - 1) / m) * m;
}

template <typename A>
struct LstmParams {
  using W = typename A::weight_type;
  using B = typename A::acc_type;

  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  // Weight matrices of Eq-style gate order; *_i* is hidden x input,
  // *_h* is hidden x hidden.
  Matrix<W> w_ii, w_hi, w_if, w_hf, w_ig, w_hg, w_io, w_ho;
  std::vector<B> b_ii, b_hi, b_if, b_hf, b_ig, b_hg, b_io, b_ho;

  const Matrix<W>& input_weights(Gate g) const {
    switch (g) {
      case Gate::Input: return w_ii;
      case Gate::Forget: return w_if;
      case Gate::Cell: return w_ig;
      case Gate::Output: return w_io;
    }
    return w_ii;
  }
  const Matrix<W>& hidden_weights(Gate g) const {
    switch (g) {
      case Gate::Input: return w_hi;
      case Gate::Forget: return w_hf;
      case Gate::Cell: return w_hg;
      case Gate::Output: return w_ho;
    }
    return w_hi;
  }
  const std::vector<B>& input_bias(Gate g) const {
    switch (g) {
      case Gate::Input: return b_ii;
      case Gate::Forget: return b_if;
      case Gate::Cell: return b_ig;
      case Gate::Output: return b_io;
    }
    return b_ii;
  }
  const std::vector<B>& hidden_bias(Gate g) const {
    switch (g) {
      case Gate::Input: return b_hi;
      case Gate::Forget: return b_hf;
      case Gate::Cell: return b_hg;
      case Gate::Output: return b_ho;
    }
    return b_hi;
  }

  void validate() const {
    if (input_size == 0 || hidden_size == 0)
      throw std::invalid_argument("LstmParams: zero layer size");
    for (Gate g : kStackedGateOrder) {
      const auto& wi = input_weights(g);
      const auto& wh = hidden_weights(g);
      if (wi.rows() != hidden_size || wi.cols() != input_size)
        throw std::invalid_argument("LstmParams: input weight shape mismatch");
      if (wh.rows() != hidden_size || wh.cols() != hidden_size)
        throw std::invalid_argument("LstmParams: hidden weight shape mismatch");
      if (input_bias(g).size() != hidden_size || hidden_bias(g).size() != hidden_size)
        throw std::invalid_argument("LstmParams: bias length mismatch");
    }
  }
};

template <typename A>
struct LstmState {
  std::vector<typename A::state_type> h;
  std::vector<typename A::state_type> c;
};

template <typename A>
LstmState<A> zero_state(const LstmParams<A>& p) {
  return LstmState<A>{std::vector<typename A::state_type>(p.hidden_size, 0),
                      std::vector<typename A::state_type>(p.hidden_size, 0)};
}

template <typename T>
struct StackedWeights {
  Matrix<T> w;  // H x Q
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::size_t padded_input = 0;
  std::size_t padded_hidden = 0;
  std::size_t alignment = 1;  // the M the columns were padded to

  std::size_t rows() const { return w.rows(); }  // H = 4*hidden
  std::size_t cols() const { return w.cols(); }  // Q
  std::size_t split() const { return padded_input; }
  std::size_t gate_row_offset(Gate g) const { return stacked_block_of(g) * hidden_size; }

  // Read a gate's blocks back out (unpadded shapes).
  Matrix<T> input_block(Gate g) const {
    Matrix<T> out(hidden_size, input_size);
    const std::size_t r0 = gate_row_offset(g);
    for (std::size_t r = 0; r < hidden_size; ++r)
      for (std::size_t c = 0; c < input_size; ++c) out(r, c) = w(r0 + r, c);
    return out;
  }
  Matrix<T> hidden_block(Gate g) const {
    Matrix<T> out(hidden_size, hidden_size);
    const std::size_t r0 = gate_row_offset(g);
    for (std::size_t r = 0; r < hidden_size; ++r)
      for (std::size_t c = 0; c < hidden_size; ++c)
        out(r, c) = w(r0 + r, padded_input + c);
    return out;
  }
};

// Build the stacked matrix with zero padding columns on both sides.
template <typename A>
StackedWeights<typename A::weight_type> stack_weights(const LstmParams<A>& p,
                                                      std::size_t m) {
  if (m == 0) throw std::invalid_argument("stack_weights: M must be positive");
  p.validate();
  StackedWeights<typename A::weight_type> s;
  s.input_size = p.input_size;
  s.hidden_size = p.hidden_size;
  s.padded_input = round_up_multiple(p.input_size, m);
  s.padded_hidden = round_up_multiple(p.hidden_size, m);
  s.alignment = m;
  s.w = Matrix<typename A::weight_type>(4 * p.hidden_size,
                                        s.padded_input + s.padded_hidden);
  for (Gate g : kStackedGateOrder) {
    const std::size_t r0 = s.gate_row_offset(g);
    const auto& wi = p.input_weights(g);
    const auto& wh = p.hidden_weights(g);
    for (std::size_t r = 0; r < p.hidden_size; ++r) {
      for (std::size_t c = 0; c < p.input_size; ++c) s.w(r0 + r, c) = wi(r, c);
      for (std::size_t c = 0; c < p.hidden_size; ++c)
        s.w(r0 + r, s.padded_input + c) = wh(r, c);
    }
  }
  return s;
}

// One Eq-1 step: gates from the current input and previous state, then the
// cell and hidden updates.
template <typename A>
LstmState<A> lstm_step(const LstmParams<A>& p, const LstmState<A>& prev,
                       std::span<const typename A::state_type> x, const A& arith) {
  using Acc = typename A::acc_type;
  using S = typename A::state_type;
  if (x.size() != p.input_size)
    throw std::invalid_argument("lstm_step: input length mismatch");
  if (prev.h.size() != p.hidden_size || prev.c.size() != p.hidden_size)
    throw std::invalid_argument("lstm_step: state length mismatch");

  LstmState<A> next{std::vector<S>(p.hidden_size), std::vector<S>(p.hidden_size)};
  std::array<std::vector<Acc>, 4> pre;
  for (Gate g : kStackedGateOrder) {
    const auto& wi = p.input_weights(g);
    const auto& wh = p.hidden_weights(g);
    const auto& bi = p.input_bias(g);
    const auto& bh = p.hidden_bias(g);
    auto& dst = pre[static_cast<std::size_t>(g)];
    dst.resize(p.hidden_size);
    for (std::size_t r = 0; r < p.hidden_size; ++r) {
      Acc acc = arith.acc_add(bi[r], bh[r]);
      for (std::size_t c = 0; c < p.input_size; ++c)
        acc = arith.mac(acc, wi(r, c), x[c]);
      for (std::size_t c = 0; c < p.hidden_size; ++c)
        acc = arith.mac(acc, wh(r, c), prev.h[c]);
      dst[r] = acc;
    }
  }
  for (std::size_t r = 0; r < p.hidden_size; ++r) {
    const S i = arith.gate_sigmoid(pre[static_cast<std::size_t>(Gate::Input)][r]);
    const S f = arith.gate_sigmoid(pre[static_cast<std::size_t>(Gate::Forget)][r]);
    const S g = arith.gate_tanh(pre[static_cast<std::size_t>(Gate::Cell)][r]);
    const S o = arith.gate_sigmoid(pre[static_cast<std::size_t>(Gate::Output)][r]);
    next.c[r] = arith.add(arith.mul(f, prev.c[r]), arith.mul(i, g));
    next.h[r] = arith.mul(o, arith.state_tanh(next.c[r]));
  }
  return next;
}

template <typename A>
std::vector<LstmState<A>> lstm_forward(
    const LstmParams<A>& p, const LstmState<A>& initial,
    const std::vector<std::vector<typename A::state_type>>& xs, const A& arith) {
  std::vector<LstmState<A>> out;
  out.reserve(xs.size());
  const LstmState<A>* prev = &initial;
  for (const auto& x : xs) {
    out.push_back(lstm_step(p, *prev, std::span(x), arith));
    prev = &out.back();
  }
  return out;
}

}  // namespace spartus

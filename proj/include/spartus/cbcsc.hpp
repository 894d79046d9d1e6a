#pragma once

// Column-balanced compressed sparse column codec and the banked
// sparse-matrix x sparse-delta-vector kernel.
//
// A balanced matrix (equal nonzeros per interleaved subcolumn) compresses
// into three parts:
//
//   VAL  — nonzero values, column-major; inside a column ordered by
//          subcolumn 0..M-1, inside a subcolumn by ascending local index.
//   LIDX — the element's position within its subcolumn (0-based, < H/M),
//          parallel to VAL.
//   BLEN — the uniform per-subcolumn nonzero count, ceil((H/M)*(1-gamma)).
//
// Because every (column, subcolumn) group holds exactly BLEN entries, the
// group's offset is pure arithmetic — ((j*M)+sub)*BLEN — and no column
// pointer array is needed. Global row recovery is row = lidx*M + subcolumn,
// the inverse of the pruning interleave.
//
// For weight storage the matrix is further split into N banks; bank n keeps
// the interleaved columns {j : j mod N = n} so each MAC array owns an
// independent weight memory.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "spartus/cbtd.hpp"
#include "spartus/delta.hpp"
#include "spartus/lstm.hpp"
#include "spartus/matrix.hpp"

namespace spartus {

template <typename T>
struct CbcscMatrix {
  std::vector<T> val;
  std::vector<std::uint16_t> lidx;
  std::size_t blen = 0;
  std::size_t h = 0;   // dense rows
  std::size_t q = 0;   // dense columns
  std::size_t m = 1;   // subcolumns per column
  int lidx_bits = 16;  // index width the encoding is sized for

  std::size_t subcol_len() const { return m == 0 ? 0 : h / m; }
  std::size_t group_offset(std::size_t col, std::size_t sub) const {
    return (col * m + sub) * blen;
  }

  void validate() const {
    if (m == 0 || h % m != 0)
      throw std::invalid_argument("CbcscMatrix: rows not divisible by M");
    if (val.size() != lidx.size() || val.size() != q * m * blen)
      throw std::invalid_argument("CbcscMatrix: VAL/LIDX size mismatch");
    if (lidx_bits < 1 || lidx_bits > 16)
      throw std::invalid_argument("CbcscMatrix: lidx_bits outside [1, 16]");
    if (subcol_len() > (std::size_t{1} << lidx_bits))
      throw std::invalid_argument("CbcscMatrix: subcolumn length exceeds lidx width");
    for (std::size_t col = 0; col < q; ++col) {
      for (std::size_t sub = 0; sub < m; ++sub) {
        const std::size_t base = group_offset(col, sub);
        for (std::size_t k = 0; k < blen; ++k) {
          if (lidx[base + k] >= subcol_len())
            throw std::out_of_range("CbcscMatrix: LIDX out of range");
          if (k > 0 && lidx[base + k] <= lidx[base + k - 1])
            throw std::invalid_argument("CbcscMatrix: LIDX not strictly increasing");
        }
      }
    }
  }
};

enum class EncodePolicy {
  kStrict,    // reject any subcolumn whose nonzero count != BLEN
  kPadZeros,  // fill short subcolumns with explicit zero-valued entries
};

// Encode a column-balanced matrix. Strict mode requires the exact balanced
// count everywhere; the lenient mode admits subcolumns with fewer nonzeros
// (all-zero padding columns, natural zeros) by storing zero-valued filler
// entries at unused indices.
template <typename T>
CbcscMatrix<T> cbcsc_encode(const Matrix<T>& b, std::size_t m, double gamma,
                            int lidx_bits = 16,
                            EncodePolicy policy = EncodePolicy::kStrict) {
  if (m == 0 || b.rows() % m != 0)
    throw std::invalid_argument("cbcsc_encode: rows not divisible by M");
  const std::size_t k = b.rows() / m;
  CbcscMatrix<T> enc;
  enc.h = b.rows();
  enc.q = b.cols();
  enc.m = m;
  enc.blen = balanced_nonzeros(k, gamma);
  enc.lidx_bits = lidx_bits;
  if (k > (std::size_t{1} << lidx_bits))
    throw std::invalid_argument("cbcsc_encode: subcolumn length exceeds lidx width");
  enc.val.reserve(enc.q * m * enc.blen);
  enc.lidx.reserve(enc.q * m * enc.blen);

  std::vector<std::uint16_t> used;
  for (std::size_t col = 0; col < enc.q; ++col) {
    for (std::size_t sub = 0; sub < m; ++sub) {
      used.clear();
      for (std::size_t i = 0; i < k; ++i)
        if (b(i * m + sub, col) != T{}) used.push_back(static_cast<std::uint16_t>(i));
      if (used.size() > enc.blen)
        throw std::invalid_argument("cbcsc_encode: subcolumn exceeds BLEN nonzeros");
      if (used.size() < enc.blen) {
        if (policy == EncodePolicy::kStrict)
          throw std::invalid_argument(
              "cbcsc_encode: unbalanced subcolumn (strict mode)");
        // Claim the smallest unused local indices for zero filler.
        std::size_t need = enc.blen - used.size();
        std::size_t cursor = 0;
        auto taken = used;  // sorted already (scan order)
        for (std::size_t i = 0; i < k && need > 0; ++i) {
          while (cursor < taken.size() && taken[cursor] < i) ++cursor;
          if (cursor < taken.size() && taken[cursor] == i) continue;
          used.push_back(static_cast<std::uint16_t>(i));
          --need;
        }
        std::sort(used.begin(), used.end());
      }
      for (std::uint16_t i : used) {
        enc.val.push_back(b(static_cast<std::size_t>(i) * m + sub, col));
        enc.lidx.push_back(i);
      }
    }
  }
  return enc;
}

template <typename T>
Matrix<T> cbcsc_decode(const CbcscMatrix<T>& enc) {
  enc.validate();
  Matrix<T> out(enc.h, enc.q);
  for (std::size_t col = 0; col < enc.q; ++col) {
    for (std::size_t sub = 0; sub < enc.m; ++sub) {
      const std::size_t base = enc.group_offset(col, sub);
      for (std::size_t kk = 0; kk < enc.blen; ++kk) {
        const std::size_t row =
            static_cast<std::size_t>(enc.lidx[base + kk]) * enc.m + sub;
        out(row, col) = enc.val[base + kk];
      }
    }
  }
  return out;
}

template <typename T>
struct BankedWeights {
  std::vector<CbcscMatrix<T>> banks;  // bank n holds columns {j : j mod N = n}
  std::size_t total_cols = 0;         // Q across all banks

  std::size_t arrays() const { return banks.size(); }
  std::size_t rows() const { return banks.empty() ? 0 : banks.front().h; }
  std::size_t pes() const { return banks.empty() ? 1 : banks.front().m; }
  std::size_t blen() const { return banks.empty() ? 0 : banks.front().blen; }
};

// Split an encoding into N banks of interleaved columns. Column counts that
// do not divide evenly are padded with all-zero columns first (only
// representable when BLEN filler entries are acceptable, i.e. decode of the
// padded columns yields zeros).
template <typename T>
BankedWeights<T> split_banks(const CbcscMatrix<T>& enc, std::size_t n) {
  if (n == 0) throw std::invalid_argument("split_banks: N must be positive");
  const std::size_t padded_q = round_up_multiple(enc.q, n);
  BankedWeights<T> out;
  out.total_cols = padded_q;
  out.banks.resize(n);
  const std::size_t cols_per_bank = padded_q / n;
  for (std::size_t bank = 0; bank < n; ++bank) {
    auto& bk = out.banks[bank];
    bk.h = enc.h;
    bk.q = cols_per_bank;
    bk.m = enc.m;
    bk.blen = enc.blen;
    bk.lidx_bits = enc.lidx_bits;
    bk.val.reserve(cols_per_bank * enc.m * enc.blen);
    bk.lidx.reserve(cols_per_bank * enc.m * enc.blen);
    for (std::size_t local = 0; local < cols_per_bank; ++local) {
      const std::size_t j = local * n + bank;
      if (j < enc.q) {
        const std::size_t base = enc.group_offset(j, 0);
        bk.val.insert(bk.val.end(), enc.val.begin() + base,
                      enc.val.begin() + base + enc.m * enc.blen);
        bk.lidx.insert(bk.lidx.end(), enc.lidx.begin() + base,
                       enc.lidx.begin() + base + enc.m * enc.blen);
      } else {
        // zero padding column: filler entries at indices 0..blen-1
        for (std::size_t sub = 0; sub < enc.m; ++sub)
          for (std::size_t kk = 0; kk < enc.blen; ++kk) {
            bk.val.push_back(T{});
            bk.lidx.push_back(static_cast<std::uint16_t>(kk));
          }
      }
    }
  }
  return out;
}

// Inverse of split_banks over the original column count.
template <typename T>
CbcscMatrix<T> merge_banks(const BankedWeights<T>& bw, std::size_t q) {
  if (bw.banks.empty()) throw std::invalid_argument("merge_banks: no banks");
  CbcscMatrix<T> enc;
  const auto& first = bw.banks.front();
  enc.h = first.h;
  enc.q = q;
  enc.m = first.m;
  enc.blen = first.blen;
  enc.lidx_bits = first.lidx_bits;
  const std::size_t n = bw.banks.size();
  for (std::size_t j = 0; j < q; ++j) {
    const auto& bk = bw.banks[j % n];
    const std::size_t base = bk.group_offset(j / n, 0);
    enc.val.insert(enc.val.end(), bk.val.begin() + base,
                   bk.val.begin() + base + enc.m * enc.blen);
    enc.lidx.insert(enc.lidx.end(), bk.lidx.begin() + base,
                    bk.lidx.begin() + base + enc.m * enc.blen);
  }
  return enc;
}

namespace detail {

// One stored column into the gate accumulators: each of the M subcolumns
// contributes exactly BLEN weights, routed to global row lidx*M + sub and
// from there into the gate block the row belongs to.
template <typename A, typename T>
void scatter_column(const CbcscMatrix<T>& bk, std::size_t local_col,
                    typename A::delta_type v, std::size_t hidden,
                    std::array<std::vector<typename A::acc_type>, 4>& gate_mem,
                    const A& arith) {
  for (std::size_t sub = 0; sub < bk.m; ++sub) {
    const std::size_t base = bk.group_offset(local_col, sub);
    for (std::size_t e = 0; e < bk.blen; ++e) {
      const std::size_t row = static_cast<std::size_t>(bk.lidx[base + e]) * bk.m + sub;
      if (row >= bk.h) throw std::out_of_range("spmspv: reconstructed row out of range");
      auto& mem = gate_mem[static_cast<std::size_t>(kStackedGateOrder[row / hidden])];
      mem[row % hidden] = arith.mac(mem[row % hidden], bk.val[base + e], v);
    }
  }
}

template <typename A>
void check_gate_accumulators(
    std::size_t h, const std::array<std::vector<typename A::acc_type>, 4>& gate_mem) {
  if (h % 4 != 0)
    throw std::invalid_argument("spmspv: rows not divisible into gate blocks");
  for (std::size_t g = 0; g < 4; ++g)
    if (gate_mem[g].size() != h / 4)
      throw std::invalid_argument("spmspv: gate accumulator length != H/4");
}

}  // namespace detail

// Sparse matrix x sparse delta vector. Every nonzero delta v at global
// column j activates column j/N of bank j%N; the result equals the dense
// stacked product restricted to the nonzero delta columns.
template <typename A, typename T>
void spmspv(const BankedWeights<T>& banks,
            const SparseDeltaVector<typename A::delta_type>& ds,
            std::array<std::vector<typename A::acc_type>, 4>& gate_mem,
            const A& arith) {
  const std::size_t n = banks.arrays();
  if (n == 0) throw std::invalid_argument("spmspv: no banks");
  detail::check_gate_accumulators<A>(banks.rows(), gate_mem);
  if (ds.dense_len != banks.total_cols)
    throw std::invalid_argument("spmspv: delta length != banked columns");
  const std::size_t hidden = banks.rows() / 4;
  for (std::size_t kk = 0; kk < ds.nnz(); ++kk) {
    const std::uint32_t j = ds.nzi[kk];
    detail::scatter_column(banks.banks[j % n], j / n, ds.nzv[kk], hidden, gate_mem,
                           arith);
  }
}

// Adapter so the delta engine can run straight off banked weights.
template <typename A, typename T>
void accumulate_delta(const BankedWeights<T>& banks,
                      const SparseDeltaVector<typename A::delta_type>& ds,
                      std::array<std::vector<typename A::acc_type>, 4>& gate_mem,
                      const A& arith) {
  spmspv(banks, ds, gate_mem, arith);
}

// An unsplit encoding behaves like a single bank.
template <typename A, typename T>
void accumulate_delta(const CbcscMatrix<T>& enc,
                      const SparseDeltaVector<typename A::delta_type>& ds,
                      std::array<std::vector<typename A::acc_type>, 4>& gate_mem,
                      const A& arith) {
  detail::check_gate_accumulators<A>(enc.h, gate_mem);
  if (ds.dense_len != enc.q)
    throw std::invalid_argument("spmspv: delta length != encoded columns");
  const std::size_t hidden = enc.h / 4;
  for (std::size_t kk = 0; kk < ds.nnz(); ++kk)
    detail::scatter_column(enc, ds.nzi[kk], ds.nzv[kk], hidden, gate_mem, arith);
}

}  // namespace spartus

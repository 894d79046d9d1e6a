#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "spartus/cbcsc.hpp"
#include "spartus/params_util.hpp"

using namespace spartus;

namespace {

Matrix<double> random_balanced(std::size_t h, std::size_t q, std::size_t m,
                               double gamma, std::uint64_t seed) {
  SplitMix rng(seed);
  Matrix<double> a(h, q);
  for (auto& v : a.data()) v = rng.next_unit() * 2.0 - 1.0;
  return cbtd_prune(a, PruneConfig{gamma, 1.0, m, seed});
}

// Dense oracle: W_s * ds restricted to gate blocks.
std::array<std::vector<double>, 4> dense_gate_product(
    const Matrix<double>& w, const SparseDeltaVector<double>& ds) {
  const std::size_t hidden = w.rows() / 4;
  std::array<std::vector<double>, 4> out;
  for (auto& v : out) v.assign(hidden, 0.0);
  for (std::size_t k = 0; k < ds.nnz(); ++k) {
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const Gate g = kStackedGateOrder[r / hidden];
      out[static_cast<std::size_t>(g)][r % hidden] += w(r, ds.nzi[k]) * ds.nzv[k];
    }
  }
  return out;
}

SparseDeltaVector<double> random_delta(std::size_t q, double density,
                                       std::uint64_t seed) {
  SplitMix rng(seed);
  SparseDeltaVector<double> ds;
  ds.dense_len = static_cast<std::uint32_t>(q);
  for (std::size_t j = 0; j < q; ++j) {
    if (rng.next_unit() < density) {
      ds.nzi.push_back(static_cast<std::uint32_t>(j));
      ds.nzv.push_back(rng.next_unit() * 2.0 - 1.0);
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("hand-traced single column encode") {
  // column [a, 0, 0, d], M=2: subcol0 = rows {0,2}, subcol1 = rows {1,3}
  Matrix<double> a = Matrix<double>::from_data(4, 1, {0.5, 0.0, 0.0, -0.25});
  auto enc = cbcsc_encode(a, 2, 0.5);
  CHECK(enc.blen == 1);
  REQUIRE(enc.val.size() == 2);
  CHECK(enc.val[0] == 0.5);
  CHECK(enc.val[1] == -0.25);
  CHECK(enc.lidx[0] == 0);
  CHECK(enc.lidx[1] == 1);
  CHECK(cbcsc_decode(enc) == a);
}

TEST_CASE("dense matrix encodes with full subcolumns") {
  SplitMix rng(1);
  Matrix<double> a(8, 3);
  for (auto& v : a.data()) v = rng.next_unit() + 0.5;  // strictly nonzero
  auto enc = cbcsc_encode(a, 2, 0.0);
  CHECK(enc.blen == 4);
  CHECK(enc.val.size() == 3 * 2 * 4);
  for (std::size_t g = 0; g < enc.val.size(); g += enc.blen)
    for (std::size_t k = 0; k < enc.blen; ++k) CHECK(enc.lidx[g + k] == k);
  CHECK(cbcsc_decode(enc) == a);
}

TEST_CASE("blen formula on the large-layer configuration") {
  // H=4096, M=64, gamma=0.94 -> ceil(64 * 0.06) = 4
  CHECK(balanced_nonzeros(4096 / 64, 0.94) == 4);
  // and the compressed parameter count of the full-size stacked layer
  const std::size_t q = 1152;  // padded 123-feature input block + 1024 hidden
  CHECK(q * 64 * 4 == 294912);  // ~0.29 M nonzero weights
}

TEST_CASE("all-zero matrix at gamma one encodes to nothing") {
  Matrix<double> z(8, 2, 0.0);
  auto enc = cbcsc_encode(z, 4, 1.0);
  CHECK(enc.blen == 0);
  CHECK(enc.val.empty());
  CHECK(cbcsc_decode(enc) == z);
}

TEST_CASE("round-trip identity on random balanced matrices") {
  SplitMix rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = std::size_t{1} << rng.next_below(4);
    const std::size_t k = 1 + rng.next_below(8);
    const std::size_t q = 1 + rng.next_below(12);
    const double gamma = rng.next_unit();
    auto b = random_balanced(m * k, q, m, gamma, rng.next());
    auto enc = cbcsc_encode(b, m, gamma);
    REQUIRE(cbcsc_decode(enc) == b);
    REQUIRE(enc.val.size() == q * m * balanced_nonzeros(k, gamma));
  }
}

TEST_CASE("strict mode rejects unbalanced input, lenient mode pads") {
  // blen = 1 at gamma 0.5, but column 1 is empty and subcolumn (1, col 0)
  // holds no nonzero either
  Matrix<double> b(4, 2, 0.0);
  b(0, 0) = 1.0;
  CHECK_THROWS_AS(cbcsc_encode(b, 2, 0.5), std::invalid_argument);

  auto enc = cbcsc_encode(b, 2, 0.5, 16, EncodePolicy::kPadZeros);
  CHECK(enc.val.size() == 2 * 2 * 1);
  CHECK(cbcsc_decode(enc) == b);
  enc.validate();

  // over-full subcolumns cannot be represented even leniently
  Matrix<double> over(4, 2, 0.0);
  over(0, 0) = 1.0;
  over(2, 0) = 2.0;  // subcolumn (0, col 0) has 2 nonzeros, blen = 1
  CHECK_THROWS_AS(cbcsc_encode(over, 2, 0.5, 16, EncodePolicy::kPadZeros),
                  std::invalid_argument);
}

TEST_CASE("bank split interleaves columns and reassembles exactly") {
  auto b = random_balanced(16, 8, 4, 0.5, 7);
  auto enc = cbcsc_encode(b, 4, 0.5);

  auto single = split_banks(enc, 1);
  CHECK(single.banks.size() == 1);
  CHECK(single.banks[0].val == enc.val);
  CHECK(single.banks[0].lidx == enc.lidx);

  auto banks = split_banks(enc, 2);
  REQUIRE(banks.banks.size() == 2);
  // bank0 = columns {0,2,4,6}, bank1 = {1,3,5,7}
  auto dec0 = cbcsc_decode(banks.banks[0]);
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t r = 0; r < 16; ++r) REQUIRE(dec0(r, j) == b(r, 2 * j));

  auto merged = merge_banks(banks, enc.q);
  REQUIRE(merged.val == enc.val);
  REQUIRE(merged.lidx == enc.lidx);
}

TEST_CASE("bank split pads ragged column counts with zero columns") {
  auto b = random_balanced(8, 5, 2, 0.5, 21);
  auto enc = cbcsc_encode(b, 2, 0.5);
  auto banks = split_banks(enc, 2);
  CHECK(banks.total_cols == 6);
  auto dec1 = cbcsc_decode(banks.banks[1]);  // columns 1, 3, 5(pad)
  for (std::size_t r = 0; r < 8; ++r) CHECK(dec1(r, 2) == 0.0);
}

TEST_CASE("spmspv equals the dense stacked product") {
  SplitMix rng(77);
  RealArith arith;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = std::size_t{1} << rng.next_below(3);
    const std::size_t hidden = m * (1 + rng.next_below(3));
    const std::size_t h = 4 * hidden;  // rows divide into gate blocks
    const std::size_t n = 1 + rng.next_below(2);
    const std::size_t q = n * m * (1 + rng.next_below(3));
    const double gamma = rng.next_unit();
    auto b = random_balanced(h, q, m, gamma, rng.next());
    auto banks = split_banks(cbcsc_encode(b, m, gamma), n);
    auto ds = random_delta(q, rng.next_unit(), rng.next());

    std::array<std::vector<double>, 4> acc;
    for (auto& v : acc) v.assign(hidden, 0.0);
    spmspv(banks, ds, acc, arith);

    auto oracle = dense_gate_product(b, ds);
    for (std::size_t g = 0; g < 4; ++g)
      for (std::size_t r = 0; r < hidden; ++r)
        REQUIRE_THAT(acc[g][r], Catch::Matchers::WithinAbs(oracle[g][r], 1e-12));
  }
}

TEST_CASE("empty delta leaves accumulators untouched") {
  RealArith arith;
  auto b = random_balanced(8, 4, 2, 0.5, 3);
  auto banks = split_banks(cbcsc_encode(b, 2, 0.5), 2);
  SparseDeltaVector<double> empty;
  empty.dense_len = 4;
  std::array<std::vector<double>, 4> acc;
  for (auto& v : acc) v.assign(2, 1.5);
  spmspv(banks, empty, acc, arith);
  for (const auto& v : acc)
    for (double e : v) CHECK(e == 1.5);
}

TEST_CASE("single nonzero delta touches exactly blen*M accumulator slots") {
  RealArith arith;
  auto b = random_balanced(16, 4, 4, 0.5, 5);
  auto banks = split_banks(cbcsc_encode(b, 4, 0.5), 2);
  SparseDeltaVector<double> ds;
  ds.dense_len = 4;
  ds.nzi = {1};
  ds.nzv = {2.0};
  std::array<std::vector<double>, 4> acc;
  for (auto& v : acc) v.assign(4, 0.0);
  spmspv(banks, ds, acc, arith);
  std::size_t touched = 0;
  for (const auto& v : acc)
    for (double e : v)
      if (e != 0.0) ++touched;
  // blen=2, M=4 -> 8 products, all nonzero with random weights
  CHECK(touched == 8);
}

TEST_CASE("per-PE fetch counts are uniform by construction") {
  auto b = random_balanced(32, 6, 8, 0.75, 13);
  auto enc = cbcsc_encode(b, 8, 0.75);
  // every (column, subcolumn) group holds exactly blen entries
  for (std::size_t j = 0; j < enc.q; ++j)
    for (std::size_t sub = 0; sub < enc.m; ++sub) {
      const std::size_t base = enc.group_offset(j, sub);
      std::size_t stored = 0;
      for (std::size_t k = 0; k < enc.blen; ++k)
        stored += (base + k < enc.val.size()) ? 1 : 0;
      REQUIRE(stored == enc.blen);
    }
}

TEST_CASE("quantized spmspv matches the dense stacked gather bit for bit") {
  QuantArith quant({8, 6}, {16, 8}, {48, 14});
  SplitMix rng(55);
  auto p = random_lstm_params(4, 4, 71);
  auto qp = quantize_params(p, quant);
  auto stacked = stack_weights(qp, 4);
  auto pruned = cbtd_prune(stacked.w, PruneConfig{0.5, 1.0, 4, 10});
  auto banks = split_banks(
      cbcsc_encode(pruned, 4, 0.5, 8, EncodePolicy::kPadZeros), 2);

  SparseDeltaVector<std::int32_t> ds;
  ds.dense_len = static_cast<std::uint32_t>(stacked.cols());
  for (std::size_t j = 0; j < stacked.cols(); j += 2) {
    ds.nzi.push_back(static_cast<std::uint32_t>(j));
    ds.nzv.push_back(static_cast<std::int32_t>(rng.next_below(512)) - 256);
  }

  std::array<std::vector<std::int64_t>, 4> a1, a2;
  for (auto& v : a1) v.assign(4, 0);
  for (auto& v : a2) v.assign(4, 0);
  spmspv(banks, ds, a1, quant);

  StackedWeights<std::int8_t> pruned_stacked = stacked;
  pruned_stacked.w = pruned;
  accumulate_delta(pruned_stacked, ds, a2, quant);
  REQUIRE(a1 == a2);
}

TEST_CASE("malformed encodings are rejected") {
  auto b = random_balanced(8, 2, 2, 0.5, 17);
  auto enc = cbcsc_encode(b, 2, 0.5);
  auto broken = enc;
  broken.lidx[0] = static_cast<std::uint16_t>(enc.subcol_len());
  CHECK_THROWS_AS(cbcsc_decode(broken), std::out_of_range);
  if (enc.blen >= 2) {
    auto swapped = enc;
    std::swap(swapped.lidx[0], swapped.lidx[1]);
    CHECK_THROWS_AS(cbcsc_decode(swapped), std::invalid_argument);
  }
  // lidx width too narrow for the subcolumn length
  CHECK_THROWS_AS(cbcsc_encode(random_balanced(1024, 2, 2, 0.0, 1), 2, 0.0, 8),
                  std::invalid_argument);
}

TEST_CASE("the delta engine accepts an unsplit encoding directly") {
  RealArith arith;
  auto p = random_lstm_params(4, 4, 137);
  auto stacked = stack_weights(p, 2);
  auto pruned = cbtd_prune(stacked.w, PruneConfig{0.5, 1.0, 2, 9});
  auto enc = cbcsc_encode(pruned, 2, 0.5, 16, EncodePolicy::kPadZeros);
  auto banks = split_banks(enc, 2);

  auto st_enc = init_delta_state(p, 2, arith);
  auto st_banked = init_delta_state(p, 2, arith);
  SplitMix rng(7);
  for (int t = 0; t < 5; ++t) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.next_unit() * 2.0 - 1.0;
    auto a = delta_lstm_step(enc, st_enc, std::span<const double>(x),
                             DeltaThreshold::zero(), arith);
    auto b = delta_lstm_step(banks, st_banked, std::span<const double>(x),
                             DeltaThreshold::zero(), arith);
    for (std::size_t r = 0; r < 4; ++r)
      REQUIRE_THAT(a.h[r], Catch::Matchers::WithinAbs(b.h[r], 1e-12));
    REQUIRE(a.deltas.nzi == b.deltas.nzi);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "meanba/rng.hpp"
#include "meanba/vmeanba.hpp"
#include "oracles.hpp"

using namespace meanba;
using namespace meanba::vmeanba;

namespace {

// Copies channel 0 of every per-channel input to all channels.
template <typename T>
ssm::DiscreteInputs<T> homogenize(ssm::DiscreteInputs<T> in) {
  const std::size_t B = in.u.batch(), D = in.u.channels(), L = in.u.length(), N = in.a_bar.state();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 1; d < D; ++d)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t n = 0; n < N; ++n) {
          in.a_bar(b, d, l, n) = in.a_bar(b, 0, l, n);
          in.b_bar_u(b, d, l, n) = in.b_bar_u(b, 0, l, n);
        }
  return in;
}

// Two-pass variance oracle over the channel axis.
std::vector<double> two_pass_variance(const Tensor3<double>& y) {
  const std::size_t B = y.batch(), D = y.channels(), L = y.length();
  std::vector<double> out(L, 0.0);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t b = 0; b < B; ++b) {
      double s = 0;
      for (std::size_t d = 0; d < D; ++d) s += y(b, d, l);
      const double m = s / static_cast<double>(D);
      double ss = 0;
      for (std::size_t d = 0; d < D; ++d) ss += (y(b, d, l) - m) * (y(b, d, l) - m);
      out[l] += ss / static_cast<double>(D - 1) / static_cast<double>(B);
    }
  return out;
}

}  // namespace

TEST_CASE("reduce_inputs") {
  SUBCASE("single channel is unchanged") {
    Rng rng(40);
    const auto in = oracle::random_inputs<float>(rng, 2, 1, 9, 3);
    const auto r = reduce_inputs(in);
    CHECK(r.a_bar == in.a_bar);
    CHECK(r.b_bar_u == in.b_bar_u);
    CHECK(r.channels == 1);
  }
  SUBCASE("identical channels reduce to that channel") {
    Rng rng(41);
    const auto in = homogenize(oracle::random_inputs<double>(rng, 2, 5, 7, 3));
    const auto r = reduce_inputs(in);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t l = 0; l < 7; ++l)
        for (std::size_t n = 0; n < 3; ++n) {
          CHECK(r.a_bar(b, 0, l, n) == doctest::Approx(in.a_bar(b, 0, l, n)).epsilon(1e-15));
          CHECK(r.b_bar_u(b, 0, l, n) == doctest::Approx(in.b_bar_u(b, 0, l, n)).epsilon(1e-15));
        }
  }
  SUBCASE("matches a naive channel average and keeps c") {
    Rng rng(42);
    const auto in = oracle::random_inputs<double>(rng, 3, 6, 5, 4);
    const auto r = reduce_inputs(in);
    CHECK(r.c == in.c);
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t l = 0; l < 5; ++l)
        for (std::size_t n = 0; n < 4; ++n) {
          double sa = 0, sb = 0;
          for (std::size_t d = 0; d < 6; ++d) {
            sa += in.a_bar.values()[((b * 6 + d) * 5 + l) * 4 + n];
            sb += in.b_bar_u.values()[((b * 6 + d) * 5 + l) * 4 + n];
          }
          CHECK(std::abs(r.a_bar(b, 0, l, n) - sa / 6) <= 1e-15);
          CHECK(std::abs(r.b_bar_u(b, 0, l, n) - sb / 6) <= 1e-15);
        }
  }
}

TEST_CASE("scan_vmeanba") {
  SUBCASE("state readout is shared by every channel") {
    Rng rng(43);
    const auto in = oracle::random_inputs<double>(rng, 2, 4, 33, 3);
    const auto y = scan_vmeanba(reduce_inputs(in));
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t l = 0; l < 33; ++l) {
        const double shared = y(b, 0, l) - in.skip_gain[0] * in.u(b, 0, l);
        for (std::size_t d = 1; d < 4; ++d)
          CHECK(std::abs(y(b, d, l) - in.skip_gain[d] * in.u(b, d, l) - shared) <= 1e-14);
      }
  }
  SUBCASE("homogeneous channels are exact") {
    Rng rng(44);
    for (int trial = 0; trial < 10; ++trial) {
      const auto in = homogenize(oracle::random_inputs<double>(rng, 2, 1 + rng.below(8), 1 + rng.below(200), 4));
      const auto exact = oracle::recurrence(in);
      const auto approx = scan_vmeanba(reduce_inputs(in));
      CHECK(oracle::max_abs_diff(approx.values(), exact) <= 1e-12);
      CHECK(approximation_error(in).max_abs <= 1e-12);
    }
  }
  SUBCASE("parallel reduced scan agrees with the sequential one") {
    Rng rng(45);
    const auto in = oracle::random_inputs<float>(rng, 1, 8, 500, 4);
    const auto r = reduce_inputs(in);
    CHECK(oracle::max_rel_error(scan_vmeanba(r, ssm::ScanImpl::parallel).values(),
                                scan_vmeanba(r, ssm::ScanImpl::sequential).values()) <= 1e-5);
  }
  SUBCASE("mismatched skip gain") {
    Rng rng(46);
    auto r = reduce_inputs(oracle::random_inputs<double>(rng, 1, 3, 4, 2));
    r.skip_gain.pop_back();
    CHECK_THROWS_AS(scan_vmeanba(r), std::invalid_argument);
  }
}

TEST_CASE("channel_stats") {
  SUBCASE("two channels") {
    Tensor3<double> y(1, 2, 1, std::vector<double>{1.0, 3.0});
    const auto s = channel_stats(y);
    CHECK(s.mean[0] == 2.0);
    CHECK(s.variance[0] == 2.0);
    CHECK(s.max_deviation[0] == 2.0);
    CHECK(s.max_abs_deviation == 2.0);
  }
  SUBCASE("single channel has zero variance") {
    Tensor3<double> y(2, 1, 3, 5.0);
    const auto s = channel_stats(y);
    CHECK(s.max_variance == 0.0);
    CHECK(s.max_abs_deviation == 0.0);
  }
  SUBCASE("agrees with a two-pass oracle") {
    Rng rng(47);
    Tensor3<double> y(3, 9, 40);
    for (auto& v : y.data()) v = rng.uniform(-10, 10);
    const auto s = channel_stats(y);
    const auto ref = two_pass_variance(y);
    double mx = 0, total = 0;
    for (std::size_t l = 0; l < 40; ++l) {
      CHECK(std::abs(s.variance[l] - ref[l]) <= 1e-10);
      CHECK(s.variance[l] >= 0.0);
      mx = std::max(mx, ref[l]);
      total += ref[l];
    }
    CHECK(std::abs(s.max_variance - mx) <= 1e-10);
    CHECK(std::abs(s.mean_variance - total / 40) <= 1e-10);
    CHECK(s.variance_p50 <= s.variance_p90);
    CHECK(s.variance_p90 <= s.variance_p99);
    CHECK(s.variance_p99 <= s.max_variance);
  }
}

TEST_CASE("approximation_error") {
  SUBCASE("zero for a single channel") {
    Rng rng(48);
    const auto e = approximation_error(oracle::random_inputs<double>(rng, 2, 1, 50, 3));
    CHECK(e.max_abs <= 1e-14);
    CHECK(e.rel_l2 <= 1e-14);
  }
  SUBCASE("positive for heterogeneous channels") {
    Rng rng(49);
    const auto e = approximation_error(oracle::random_inputs<double>(rng, 1, 4, 50, 3));
    CHECK(e.max_abs > 0.0);
    CHECK(e.mean_abs <= e.max_abs);
  }
}

TEST_CASE("flop_count") {
  SUBCASE("reference shape") {
    const auto r = flop_count(1, 512, 3136, FlopMode::vmeanba);
    CHECK(r.flops_original == 14450688);
    CHECK(r.flops_reduced == 1636992);
    CHECK(r.flops_reduce_op == 1608768);
    CHECK(r.flops_broadcast == 0);
    CHECK(std::abs(r.reduction_ratio - 0.8867) <= 5e-5);
  }
  SUBCASE("ten channels") {
    const auto r = flop_count(1, 10, 1, FlopMode::vmeanba);
    CHECK(r.flops_original == 90);
    CHECK(r.flops_reduced == 20);
    CHECK(std::abs(r.reduction_ratio - 7.0 / 9.0) <= 1e-15);
  }
  SUBCASE("one channel costs more than the original") {
    const auto r = flop_count(3, 1, 17, FlopMode::vmeanba);
    CHECK(r.flops_reduced == 11 * 3 * 17);
    CHECK(std::abs(r.reduction_ratio + 2.0 / 9.0) <= 1e-15);
  }
  SUBCASE("original mode") {
    const auto r = flop_count(2, 64, 100, FlopMode::original);
    CHECK(r.flops_reduced == r.flops_original);
    CHECK(r.reduction_ratio == 0.0);
  }
  SUBCASE("ratio grows with channels") {
    double prev = -1;
    for (std::uint64_t d = 1; d <= 2048; d *= 2) {
      const double ratio = flop_count(1, d, 64, FlopMode::vmeanba).reduction_ratio;
      CHECK(ratio > prev);
      CHECK(ratio < 8.0 / 9.0);
      prev = ratio;
    }
  }
  SUBCASE("zero dimensions are rejected") {
    CHECK_THROWS_AS(flop_count(0, 1, 1, FlopMode::original), std::invalid_argument);
    CHECK_THROWS_AS(flop_count(1, 0, 1, FlopMode::vmeanba), std::invalid_argument);
    CHECK_THROWS_AS(flop_count(1, 1, 0, FlopMode::vmeanba), std::invalid_argument);
  }
  SUBCASE("json round trip") {
    const auto r = flop_count(2, 96, 3136, FlopMode::vmeanba);
    const nlohmann::json j = r;
    CHECK(j.at("flops_original") == r.flops_original);
    const auto back = j.get<CostReport>();
    CHECK(back.flops_reduced == r.flops_reduced);
    CHECK(back.reduction_ratio == r.reduction_ratio);
  }
}

TEST_CASE("instrumented_scan counters match the closed form") {
  Rng rng(50);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t B = 1 + rng.below(3), D = 1 + rng.below(12), L = 1 + rng.below(40), N = 1 + rng.below(5);
    const auto in = oracle::random_inputs<double>(rng, B, D, L, N);
    for (auto mode : {FlopMode::original, FlopMode::vmeanba}) {
      const auto res = instrumented_scan(in, mode);
      CHECK(res.flops.total() == flop_count(B, D, L, mode).flops_reduced);
    }
    const auto orig = instrumented_scan(in, FlopMode::original);
    CHECK(oracle::max_abs_diff(orig.y.values(), oracle::recurrence(in)) <= 1e-12);
    const auto red = instrumented_scan(in, FlopMode::vmeanba);
    CHECK(oracle::max_abs_diff(red.y.values(), scan_vmeanba(reduce_inputs(in)).values()) <= 1e-12);
  }
}

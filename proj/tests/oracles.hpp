#pragma once

// Test-only reference implementations. These are written against flat
// arrays with their own index arithmetic and never call into the library's
// kernels, so they stay independent of the code paths they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "meanba/rng.hpp"
#include "meanba/ssm.hpp"

namespace oracle {

// Naive f64 recurrence over flat (B, D, L, N) / (B, N, L) / (B, D, L) arrays.
template <typename T>
std::vector<double> recurrence(const meanba::ssm::DiscreteInputs<T>& in) {
  const std::size_t B = in.u.batch(), D = in.u.channels(), L = in.u.length(), N = in.a_bar.state();
  const auto a = in.a_bar.values();
  const auto bu = in.b_bar_u.values();
  const auto c = in.c.values();
  const auto u = in.u.values();
  std::vector<double> y(B * D * L);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d) {
      std::vector<double> h(N, 0.0);
      for (std::size_t l = 0; l < L; ++l) {
        double out = 0;
        for (std::size_t n = 0; n < N; ++n) {
          const std::size_t k = ((b * D + d) * L + l) * N + n;
          h[n] = static_cast<double>(a[k]) * h[n] + static_cast<double>(bu[k]);
          out += static_cast<double>(c[(b * N + n) * L + l]) * h[n];
        }
        const std::size_t i = (b * D + d) * L + l;
        y[i] = out + static_cast<double>(in.skip_gain[d]) * static_cast<double>(u[i]);
      }
    }
  return y;
}

inline double softplus(double x) { return std::log(1.0 + std::exp(x)); }

// Random discrete inputs with a_bar in (0, 1) from a stable ZOH-like draw.
template <typename T>
meanba::ssm::DiscreteInputs<T> random_inputs(meanba::Rng& rng, std::size_t B, std::size_t D, std::size_t L,
                                             std::size_t N) {
  meanba::Tensor4<T> a(B, D, L, N), bu(B, D, L, N);
  meanba::Tensor3<T> c(B, N, L), u(B, D, L);
  for (auto& v : a.data()) v = static_cast<T>(std::exp(-rng.uniform(0.001, 1.0)));
  for (auto& v : bu.data()) v = static_cast<T>(rng.uniform(-1, 1));
  for (auto& v : c.data()) v = static_cast<T>(rng.uniform(-1, 1));
  for (auto& v : u.data()) v = static_cast<T>(rng.uniform(-1, 1));
  std::vector<T> skip(D);
  for (auto& v : skip) v = static_cast<T>(rng.uniform(-1, 1));
  return {std::move(a), std::move(bu), std::move(c), std::move(skip), std::move(u)};
}

template <typename T>
meanba::ssm::SsmParams<T> random_params(meanba::Rng& rng, std::size_t D, std::size_t N) {
  auto fill = [&](std::size_t n, double lo, double hi) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
    return v;
  };
  return {D, N, fill(D * N, -2.0, -0.1), fill(N * D, -1, 1), fill(N * D, -1, 1), fill(D, -0.5, 0.5),
          fill(D, -3.0, 0.0), fill(D, -1, 1)};
}

template <typename A, typename B>
double max_abs_diff(const A& x, const B& y) {
  double m = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i])));
  return m;
}

template <typename A>
double max_abs(const A& x) {
  double m = 0;
  for (auto v : x) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

// max|x - y| / max|y|, falling back to the absolute error when y is all zero.
template <typename A, typename B>
double max_rel_error(const A& x, const B& reference) {
  const double scale = max_abs(reference);
  const double diff = max_abs_diff(x, reference);
  return scale > 0 ? diff / scale : diff;
}

}  // namespace oracle

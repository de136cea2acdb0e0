#include <limits>
#include <stdexcept>
#include <string>

#include "meanba/ssm.hpp"

namespace meanba::ssm {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

template <typename T>
SsmParams<T>::SsmParams(std::size_t channels, std::size_t state, std::vector<T> a,
                        std::vector<T> b_proj, std::vector<T> c_proj, std::vector<T> delta_proj,
                        std::vector<T> delta_bias, std::vector<T> skip_gain)
    : channels(channels),
      state(state),
      a(std::move(a)),
      b_proj(std::move(b_proj)),
      c_proj(std::move(c_proj)),
      delta_proj(std::move(delta_proj)),
      delta_bias(std::move(delta_bias)),
      skip_gain(std::move(skip_gain)) {
  validate();
}

template <typename T>
void SsmParams<T>::validate() const {
  const std::size_t D = channels, N = state;
  require(D >= 1 && N >= 1, "SsmParams: channels and state must be >= 1");
  require(a.size() == D * N, "SsmParams: A must be D x N");
  require(b_proj.size() == N * D, "SsmParams: B projection must be N x D");
  require(c_proj.size() == N * D, "SsmParams: C projection must be N x D");
  require(delta_proj.size() == D, "SsmParams: delta projection must be 1 x D");
  require(delta_bias.size() == D, "SsmParams: delta bias must have D entries");
  require(skip_gain.size() == D, "SsmParams: skip gain must have D entries");
  for (T v : a) require(std::isfinite(v) && v < T(0), "SsmParams: A entries must be finite and negative");
}

template <typename T>
void DiscreteInputs<T>::validate() const {
  const std::size_t B = u.batch(), D = u.channels(), L = u.length(), N = a_bar.state();
  require(a_bar.shape() == b_bar_u.shape(), "DiscreteInputs: a_bar and b_bar_u shapes differ");
  require(a_bar.batch() == B && a_bar.channels() == D && a_bar.length() == L,
          "DiscreteInputs: a_bar does not match u");
  require(c.batch() == B && c.channels() == N && c.length() == L, "DiscreteInputs: c must be (B, N, L)");
  require(skip_gain.size() == D, "DiscreteInputs: skip gain must have D entries");
}

template <typename T>
Selection<T> selection(const Tensor3<T>& u, const SsmParams<T>& params) {
  params.validate();
  const std::size_t B = u.batch(), D = u.channels(), L = u.length(), N = params.state;
  require(D == params.channels, "selection: u channel count does not match params");

  Selection<T> out{Tensor3<T>(B, D, L), Tensor3<T>(B, N, L), Tensor3<T>(B, N, L)};
  std::vector<T> col(D);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t d = 0; d < D; ++d) col[d] = u(b, d, l);
      for (std::size_t n = 0; n < N; ++n) {
        T sb = 0, sc = 0;
        for (std::size_t d = 0; d < D; ++d) {
          sb += params.b_proj[n * D + d] * col[d];
          sc += params.c_proj[n * D + d] * col[d];
        }
        out.b(b, n, l) = sb;
        out.c(b, n, l) = sc;
      }
      T s = 0;
      for (std::size_t d = 0; d < D; ++d) s += params.delta_proj[d] * col[d];
      for (std::size_t d = 0; d < D; ++d) {
        T dt = softplus(params.delta_bias[d] + s);
        // softplus underflows to 0 only for very negative arguments; keep delta > 0.
        out.delta(b, d, l) = dt > T(0) ? dt : std::numeric_limits<T>::min();
      }
    }
  }
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> discretize_zoh(const Tensor3<T>& delta, std::span<const T> a,
                                                 const Tensor3<T>& b_t, const Tensor3<T>& u) {
  const std::size_t B = u.batch(), D = u.channels(), L = u.length(), N = b_t.channels();
  require(delta.shape() == u.shape(), "discretize_zoh: delta and u shapes differ");
  require(b_t.batch() == B && b_t.length() == L, "discretize_zoh: B_t must be (B, N, L)");
  require(a.size() == D * N, "discretize_zoh: A must be D x N");
  for (T v : delta.data()) require(v > T(0), "discretize_zoh: delta must be positive");

  Tensor4<T> a_bar(B, D, L, N), b_bar_u(B, D, L, N);
  const std::ptrdiff_t lanes = static_cast<std::ptrdiff_t>(B * D);
#pragma omp parallel for schedule(static) if (B * D * L * N > (1u << 16))
  for (std::ptrdiff_t lane = 0; lane < lanes; ++lane) {
    const std::size_t b = static_cast<std::size_t>(lane) / D, d = static_cast<std::size_t>(lane) % D;
    const T* a_row = a.data() + d * N;
    for (std::size_t l = 0; l < L; ++l) {
      const T dt = delta(b, d, l), ul = u(b, d, l);
      T* ab = &a_bar(b, d, l, 0);
      T* bu = &b_bar_u(b, d, l, 0);
      for (std::size_t n = 0; n < N; ++n) {
        const T x = dt * a_row[n];
        ab[n] = std::exp(x);
        bu[n] = zoh_factor(x) * dt * b_t(b, n, l) * ul;
      }
    }
  }
  return {std::move(a_bar), std::move(b_bar_u)};
}

template <typename T>
DiscreteInputs<T> discretize(const Tensor3<T>& u, const SsmParams<T>& params) {
  auto sel = selection(u, params);
  auto [a_bar, b_bar_u] = discretize_zoh(sel.delta, std::span<const T>(params.a), sel.b, u);
  return {std::move(a_bar), std::move(b_bar_u), std::move(sel.c), params.skip_gain, u};
}

#define MEANBA_INSTANTIATE(T)                                                                     \
  template struct SsmParams<T>;                                                                   \
  template void DiscreteInputs<T>::validate() const;                                              \
  template Selection<T> selection(const Tensor3<T>&, const SsmParams<T>&);                        \
  template std::pair<Tensor4<T>, Tensor4<T>> discretize_zoh(const Tensor3<T>&, std::span<const T>, \
                                                            const Tensor3<T>&, const Tensor3<T>&); \
  template DiscreteInputs<T> discretize(const Tensor3<T>&, const SsmParams<T>&);

MEANBA_INSTANTIATE(float)
MEANBA_INSTANTIATE(double)

#undef MEANBA_INSTANTIATE

}  // namespace meanba::ssm

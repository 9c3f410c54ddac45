// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_FFT_HPP_
#define FBAEC_FFT_HPP_

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "fbaec/common.hpp"

namespace fbaec {

// Mixed-radix Cooley-Tukey FFT, double precision. Handles any length whose
// prime factors are small (960 = 2^6 * 3 * 5 is the size the pipeline uses);
// a generic O(n*p) butterfly covers stray primes. Single-threaded and
// allocation-reusing so results are bit-deterministic.
class Fft {
 public:
  explicit Fft(int n) : n_(n), twiddle_(static_cast<size_t>(n)) {
    if (n <= 0) throw ConfigError("fft: size must be positive");
    const double step = -2.0 * kPi / n;
    for (int j = 0; j < n; ++j)
      twiddle_[static_cast<size_t>(j)] =
          std::complex<double>(std::cos(step * j), std::sin(step * j));
    factorize();
  }

  int size() const { return n_; }

  void forward(std::vector<std::complex<double>>& x) const {
    check(x);
    work(x, false);
  }

  void inverse(std::vector<std::complex<double>>& x) const {
    check(x);
    work(x, true);
    const double s = 1.0 / n_;
    for (auto& v : x) v *= s;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  void check(const std::vector<std::complex<double>>& x) const {
    if (static_cast<int>(x.size()) != n_)
      throw ContractError("fft: input length does not match plan size");
  }

  void factorize() {
    int m = n_;
    for (int p : {2, 3, 5, 7}) {
      while (m % p == 0) {
        factors_.push_back(p);
        m /= p;
      }
    }
    for (int p = 11; m > 1; p += 2) {
      while (m % p == 0) {
        factors_.push_back(p);
        m /= p;
      }
    }
  }

  void work(std::vector<std::complex<double>>& x, bool inv) const {
    scratch_.resize(x.size());
    recurse(x.data(), scratch_.data(), n_, 1, 0, inv);
  }

  // Decimation in time over the factor list. The sub-transform owns elements
  // x[0], x[stride], ..., x[(n-1)*stride] of the original array.
  void recurse(std::complex<double>* x, std::complex<double>* tmp, int n,
               int stride, size_t level, bool inv) const {
    if (n == 1) return;
    const int p = factors_[level];
    const int m = n / p;
    for (int r = 0; r < p; ++r)
      recurse(x + static_cast<ptrdiff_t>(r) * stride, tmp, m, stride * p,
              level + 1, inv);
    // X[k] = sum_r w_n^(r*k) Y_r[k mod m]; Y_r[j] sits at x[(r + j*p)*stride].
    const int scale = n_ / n;
    for (int k = 0; k < n; ++k) {
      const int km = k % m;
      std::complex<double> acc(0.0, 0.0);
      for (int r = 0; r < p; ++r) {
        const long idx = static_cast<long>(r) * k % n * scale;
        std::complex<double> w = twiddle_[static_cast<size_t>(idx)];
        if (inv) w = std::conj(w);
        acc += w * x[static_cast<ptrdiff_t>(r + km * p) * stride];
      }
      tmp[k] = acc;
    }
    for (int k = 0; k < n; ++k) x[static_cast<ptrdiff_t>(k) * stride] = tmp[k];
  }

  int n_;
  std::vector<std::complex<double>> twiddle_;
  std::vector<int> factors_;
  mutable std::vector<std::complex<double>> scratch_;
};

// Transform helpers with a per-thread plan cache keyed by length.
inline void fft_transform(std::vector<std::complex<double>>& x, bool inverse) {
  thread_local std::vector<std::unique_ptr<Fft>> cache;
  const int n = static_cast<int>(x.size());
  Fft* plan = nullptr;
  for (auto& e : cache)
    if (e->size() == n) plan = e.get();
  if (!plan) {
    cache.push_back(std::make_unique<Fft>(n));
    plan = cache.back().get();
  }
  if (inverse)
    plan->inverse(x);
  else
    plan->forward(x);
}

inline void fft_forward(std::vector<std::complex<double>>& x) {
  fft_transform(x, false);
}
inline void fft_inverse(std::vector<std::complex<double>>& x) {
  fft_transform(x, true);
}

// Linear convolution via zero-padded power-of-two FFT.
inline std::vector<double> fft_convolve(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  const size_t out_len = a.size() + b.size() - 1;
  size_t n = 1;
  while (n < out_len) n <<= 1;
  std::vector<std::complex<double>> fa(n), fb(n);
  for (size_t i = 0; i < a.size(); ++i) fa[i] = a[i];
  for (size_t i = 0; i < b.size(); ++i) fb[i] = b[i];
  fft_forward(fa);
  fft_forward(fb);
  for (size_t i = 0; i < n; ++i) fa[i] *= fb[i];
  fft_inverse(fa);
  std::vector<double> out(out_len);
  for (size_t i = 0; i < out_len; ++i) out[i] = fa[i].real();
  return out;
}

}  // namespace fbaec

#endif  // FBAEC_FFT_HPP_

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace polylearn {

enum class ConvolutionMethod { automatic, naive, fft };

namespace detail {

/// Below this operand length the quadratic product beats the transform.
inline constexpr std::size_t kNaiveThreshold = 32;

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

inline const std::vector<std::complex<double>>& fft_roots(std::size_t size) {
  thread_local std::map<std::size_t, std::vector<std::complex<double>>> cache;
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  std::vector<std::complex<double>> roots(size / 2);
  for (std::size_t j = 0; j < roots.size(); ++j) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) /
                         static_cast<double>(size);
    roots[j] = {std::cos(angle), std::sin(angle)};
  }
  return cache.emplace(size, std::move(roots)).first->second;
}

/// In-place iterative radix-2 transform; `a.size()` must be a power of two.
inline void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& roots = fft_roots(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < half; ++j) {
        std::complex<double> w = roots[j * stride];
        if (inverse) w = std::conj(w);
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + half] * w;
        a[i + j] = u + v;
        a[i + j + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= scale;
  }
}

inline std::vector<double> convolve_naive(const std::vector<double>& a,
                                          const std::vector<double>& b,
                                          std::size_t out_len) {
  std::vector<double> out(out_len, 0.0);
  for (std::size_t i = 0; i < a.size() && i < out_len; ++i) {
    if (a[i] == 0.0) continue;
    const std::size_t lim = std::min(b.size(), out_len - i);
    for (std::size_t j = 0; j < lim; ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

/// Real convolution through one complex transform: both inputs are packed as
/// the real and imaginary parts, then separated by conjugate symmetry.
inline std::vector<double> convolve_fft(const std::vector<double>& a,
                                        const std::vector<double>& b,
                                        std::size_t out_len) {
  const std::size_t size = next_pow2(a.size() + b.size() - 1);
  std::vector<std::complex<double>> z(size);
  for (std::size_t i = 0; i < a.size(); ++i) z[i].real(a[i]);
  for (std::size_t i = 0; i < b.size(); ++i) z[i].imag(b[i]);
  fft(z, false);
  std::vector<std::complex<double>> prod(size);
  for (std::size_t k = 0; k < size; ++k) {
    const std::complex<double> zk = z[k];
    const std::complex<double> zc = std::conj(z[(size - k) & (size - 1)]);
    const std::complex<double> fa = 0.5 * (zk + zc);
    const std::complex<double> fb = std::complex<double>(0.0, -0.5) * (zk - zc);
    prod[k] = fa * fb;
  }
  fft(prod, true);
  std::vector<double> out(out_len, 0.0);
  for (std::size_t i = 0; i < out_len && i < size; ++i) out[i] = prod[i].real();
  return out;
}

}  // namespace detail

/// Product of two coefficient sequences truncated to `out_len` terms.
/// Coefficients of the true product are nonnegative here, so rounding residue
/// below 1e-12 of the largest coefficient is clamped to zero.
inline std::vector<double> convolve(const std::vector<double>& a,
                                    const std::vector<double>& b,
                                    std::size_t out_len,
                                    ConvolutionMethod method = ConvolutionMethod::automatic) {
  if (a.empty() || b.empty() || out_len == 0) return std::vector<double>(out_len, 0.0);
  const std::size_t la = std::min(a.size(), out_len);
  const std::size_t lb = std::min(b.size(), out_len);
  if (method == ConvolutionMethod::automatic) {
    method = std::min(la, lb) <= detail::kNaiveThreshold ? ConvolutionMethod::naive
                                                         : ConvolutionMethod::fft;
  }
  if (method == ConvolutionMethod::naive) return detail::convolve_naive(a, b, out_len);

  std::vector<double> ta(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(la));
  std::vector<double> tb(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(lb));
  std::vector<double> out = detail::convolve_fft(ta, tb, out_len);
  double top = 0.0;
  for (double x : out) top = std::max(top, std::abs(x));
  for (double& x : out) {
    if (x < 0.0) {
      if (-x > 1e-12 * top) {
        throw std::logic_error("convolve: negative coefficient beyond rounding level");
      }
      x = 0.0;
    }
  }
  return out;
}

/// Polynomial with nonnegative coefficients of z^0..z^degree, stored as
/// coeffs * exp(log_scale) so long products stay inside double range.
class TruncatedPoly {
 public:
  TruncatedPoly() = default;
  explicit TruncatedPoly(std::size_t degree) : coeffs_(degree + 1, 0.0) {}
  TruncatedPoly(std::vector<double> coeffs, double log_scale = 0.0)
      : coeffs_(std::move(coeffs)), log_scale_(log_scale) {}

  /// The multiplicative identity truncated at `degree`.
  static TruncatedPoly one(std::size_t degree) {
    TruncatedPoly p(degree);
    p.coeffs_[0] = 1.0;
    return p;
  }

  std::size_t degree() const { return coeffs_.empty() ? 0 : coeffs_.size() - 1; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  std::vector<double>& coeffs() { return coeffs_; }
  double log_scale() const { return log_scale_; }
  double operator[](std::size_t i) const { return i < coeffs_.size() ? coeffs_[i] : 0.0; }

  /// Divide by the largest coefficient and fold it into the log scale.
  void normalize() {
    double top = 0.0;
    for (double x : coeffs_) top = std::max(top, x);
    if (top > 0.0) {
      for (double& x : coeffs_) x /= top;
      log_scale_ += std::log(top);
    }
  }

  /// Product truncated to this polynomial's degree, renormalized.
  TruncatedPoly times(const TruncatedPoly& other,
                      ConvolutionMethod method = ConvolutionMethod::automatic) const {
    TruncatedPoly out(convolve(coeffs_, other.coeffs_, coeffs_.size(), method),
                      log_scale_ + other.log_scale_);
    out.normalize();
    return out;
  }

  /// Multiply by (1 + c z), truncated; used by the subset partition functions.
  void times_linear(double c) {
    for (std::size_t y = coeffs_.size(); y-- > 1;) coeffs_[y] += c * coeffs_[y - 1];
    normalize();
  }

 private:
  std::vector<double> coeffs_;
  double log_scale_ = 0.0;
};

}  // namespace polylearn

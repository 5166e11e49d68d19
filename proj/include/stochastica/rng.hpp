#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace stochastica::rng {

using Block = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon, Moraes, Dror, Shaw; SC'11).
inline Block philox4x32_10(Block ctr, Key key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Inverse of the standard normal CDF: Wichura's AS241 (PPND16),
/// relative accuracy about 1e-16 over (0, 1).
inline double inverse_normal_cdf(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    value = num / den;
  }
  return q < 0.0 ? -value : value;
}

/// Independent draw streams sharing one seed.
enum class Stream : std::uint32_t { paths = 0, kernel_sampler = 1, exact_sampler = 2, test = 255 };

/// Pure map (seed, stream, path, draw index) -> draw. Nothing is advanced or
/// cached, so draws are identical no matter which worker asks.
///
/// Draw q of a path lives in lane q & 1 of the Philox block with counter
/// {path, q >> 1, stream}. Per step a model with K noise components uses
/// q = step * K + component.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, Stream stream = Stream::paths, std::uint32_t components = 1)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(static_cast<std::uint32_t>(stream)),
        components_(components == 0 ? 1 : components) {}

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform(std::uint64_t path, std::uint32_t step, std::uint32_t component) const {
    const std::uint64_t q = static_cast<std::uint64_t>(step) * components_ + component;
    const Block out = block(path, q >> 1);
    return to_unit(out, static_cast<std::size_t>(q & 1));
  }

  double normal(std::uint64_t path, std::uint32_t step, std::uint32_t component) const {
    return inverse_normal_cdf(uniform(path, step, component));
  }

  /// count consecutive normals of one path starting at draw index q0.
  void normals(std::uint64_t path, std::uint64_t q0, std::size_t count, double* out) const {
    std::size_t i = 0;
    std::uint64_t q = q0;
    if (count > 0 && (q & 1)) {
      out[i++] = inverse_normal_cdf(to_unit(block(path, q >> 1), 1));
      ++q;
    }
    for (; i + 1 < count; i += 2, q += 2) {
      const Block b = block(path, q >> 1);
      out[i] = inverse_normal_cdf(to_unit(b, 0));
      out[i + 1] = inverse_normal_cdf(to_unit(b, 1));
    }
    if (i < count) out[i] = inverse_normal_cdf(to_unit(block(path, q >> 1), 0));
  }

  std::uint32_t components() const { return components_; }

 private:
  Block block(std::uint64_t path, std::uint64_t b) const {
    return philox4x32_10({static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
                          static_cast<std::uint32_t>(b),
                          (stream_ << 24) | static_cast<std::uint32_t>((b >> 32) & 0xFFFFFFu)},
                         key_);
  }

  static double to_unit(const Block& out, std::size_t lane) {
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(out[2 * lane]) << 32) | out[2 * lane + 1];
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  Key key_;
  std::uint32_t stream_;
  std::uint32_t components_;
};

/// SplitMix64 finalizer, for deriving unrelated seeds from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace stochastica::rng

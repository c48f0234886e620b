#ifndef RECIPRANK_COMMON_HPP
#define RECIPRANK_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace reciprank {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Deterministic RNG: mt19937_64 engine with hand-rolled transforms so that
/// streams are identical across standard libraries (std distributions are
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64-style mix; used to derive independent sub-stream seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// FNV-1a over a string; stage cache keys are built from these.
std::uint64_t fnv1a64(std::string_view s);

/// Shortest exact text form of a double (round-trips bitwise via strtod).
std::string format_double(double v);

double parse_double(std::string_view s, const std::string& what);
std::int64_t parse_int(std::string_view s, const std::string& what);

std::vector<std::string> split_csv_line(std::string_view line);
std::string trim(std::string_view s);

}  // namespace reciprank

#endif

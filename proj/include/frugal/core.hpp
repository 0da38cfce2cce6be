#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace frugal {

inline constexpr std::string_view kVersion = "0.3.1";

// Error hierarchy. Everything thrown by the library derives from Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParameterError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

// No candidate left to select from.
struct PoolExhausted : Error {
  PoolExhausted() : Error("pool exhausted: no unlabeled candidates remain") {}
};

struct IngestError : Error {
  IngestError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  // Rows picked in the given order.
  Matrix select_rows(std::span<const std::size_t> which) const {
    Matrix out(which.size(), cols_);
    for (std::size_t i = 0; i < which.size(); ++i) {
      auto src = row(which[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    s += diff * diff;
  }
  return s;
}

// x log x with 0 log 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// ---------------------------------------------------------------------------
// Random numbers.
//
// Distributions from <random> are implementation-defined, so every draw the
// library makes goes through the helpers below. Streams are keyed by
// (seed, purpose, index) which keeps each subsystem's draws independent and
// lets a suspended session resume without storing engine state.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ (index * 0xD1B54A32D192ED03ull));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1].
  double uniform_positive() { return 1.0 - uniform(); }

  // Uniform integer in [0, bound), unbiased by rejection.
  std::size_t below(std::size_t bound) {
    if (bound == 0) throw ParameterError("Rng::below: empty range");
    const std::uint64_t b = bound;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % b;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % b);
  }

  // Box-Muller, one value per call.
  double normal() {
    const double u1 = uniform_positive();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // k distinct elements of [0, n) by partial Fisher-Yates, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + below(n - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  std::uint64_t state_;
};

// Stream identifiers for derive_seed.
namespace stream {
inline constexpr std::uint64_t kClustering = 1;
inline constexpr std::uint64_t kSolver = 2;
inline constexpr std::uint64_t kRlInit = 3;
inline constexpr std::uint64_t kRlChoose = 4;
inline constexpr std::uint64_t kHoldout = 5;
inline constexpr std::uint64_t kInitialDisplay = 6;
inline constexpr std::uint64_t kStrategy = 7;
inline constexpr std::uint64_t kSplit = 8;
inline constexpr std::uint64_t kGenerator = 9;
}  // namespace stream

// FNV-1a, used for config hashes.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace frugal

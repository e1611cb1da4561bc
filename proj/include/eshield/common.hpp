#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace eshield {

// Calibration-time failure carrying the eigenvalue spectrum for diagnosis.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, std::vector<double> spectrum)
      : std::runtime_error(what), spectrum_(std::move(spectrum)) {}
  const std::vector<double>& spectrum() const { return spectrum_; }

 private:
  std::vector<double> spectrum_;
};

class CorruptFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Sub-seed k of a master seed: splitmix64(master + GOLDEN * (k + 1)).
// Every sampler in the library derives its stream from one master seed
// through this counter scheme.
inline std::uint64_t subseed(std::uint64_t master, std::uint64_t counter) {
  return splitmix64(master + 0x9e3779b97f4a7c15ull * (counter + 1));
}

// Type-7 quantile: linear interpolation between order statistics at
// position h = (n-1)q. The single quantile convention used everywhere.
inline double quantile_type7(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile of empty sequence");
  if (q < 0.0 || q > 1.0) throw std::domain_error("quantile level outside [0,1]");
  std::sort(xs.begin(), xs.end());
  const double h = static_cast<double>(xs.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= xs.size()) return xs.back();
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

inline double median(std::vector<double> xs) {
  return quantile_type7(std::move(xs), 0.5);
}

// Thread cap: ESHIELD_THREADS if set, else hardware concurrency.
inline unsigned max_threads() {
  if (const char* env = std::getenv("ESHIELD_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1u;
}

// Index-parallel loop. Each index writes only its own slot, so results are
// schedule-independent.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned nt = std::min<std::size_t>(max_threads(), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(nt);
  for (unsigned t = 0; t < nt; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += nt) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace eshield

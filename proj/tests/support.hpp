// Test helpers: scratch directories, small corpora, and reference
// implementations that must stay independent of src/.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name) {
    static std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("aepo-" + name + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Symmetric, zero-diagonal, entries uniform in [0, 1] on a 1e-3 grid so
// ties occur now and then.
inline std::vector<double> random_dense(size_t n, std::mt19937_64& rng, int grid = 1000) {
  std::uniform_int_distribution<int> cell(0, grid);
  std::vector<double> d(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = static_cast<double>(cell(rng)) / grid;
    }
  }
  return d;
}

// Euclidean distances of random points in the unit square, divided by the
// diameter sqrt(2) so every entry lies in [0, 1]. A metric by construction.
inline std::vector<double> euclidean_dense(size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<double, double>> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  std::vector<double> d(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double dx = pts[i].first - pts[j].first;
      const double dy = pts[i].second - pts[j].second;
      d[i * n + j] = d[j * n + i] = std::sqrt(dx * dx + dy * dy) / std::sqrt(2.0);
    }
  }
  return d;
}

// Brute-force maximiser of f_rep + lambda * f_div, written from the formula:
// visits subsets in lexicographic order and keeps the first strict maximum.
struct BruteForceResult {
  std::vector<size_t> subset;
  double objective;
};

inline double brute_objective(const std::vector<double>& d, size_t n, const std::vector<size_t>& y, double lambda) {
  double rep = 0.0;
  for (size_t a : y) {
    double row = 0.0;
    for (size_t j = 0; j < n; ++j) row += d[a * n + j];
    rep += -(row / static_cast<double>(n));
  }
  double div = 0.0;
  for (size_t a : y) {
    for (size_t b : y) {
      if (a != b) div += d[a * n + b];
    }
  }
  div /= static_cast<double>(y.size());
  return rep + lambda * div;
}

inline BruteForceResult brute_force_best(const std::vector<double>& d, size_t n, size_t k, double lambda) {
  BruteForceResult best{{}, -1e300};
  std::vector<size_t> y(k);
  for (size_t i = 0; i < k; ++i) y[i] = i;
  while (true) {
    const double v = brute_objective(d, n, y, lambda);
    if (best.subset.empty() || v > best.objective) best = {y, v};
    size_t i = k;
    while (i > 0 && y[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++y[i - 1];
    for (size_t j = i; j < k; ++j) y[j] = y[j - 1] + 1;
  }
  return best;
}

// Optimal k-center radius by enumerating every center set.
inline double brute_force_k_center(const std::vector<double>& d, size_t n, size_t k) {
  double best = 1e300;
  std::vector<bool> mask(n, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), true);
  do {
    double radius = 0.0;
    for (size_t p = 0; p < n; ++p) {
      double nearest = 1e300;
      for (size_t c = 0; c < n; ++c) {
        if (mask[c]) nearest = std::min(nearest, d[p * n + c]);
      }
      radius = std::max(radius, nearest);
    }
    best = std::min(best, radius);
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

}  // namespace testing

#pragma once

// Reference implementations the library is checked against. They favour
// obviousness over speed and share no code with src/.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

struct Run {
  std::size_t start = 0;
  std::size_t period = 0;
  std::size_t copies = 0;
  friend bool operator==(const Run&, const Run&) = default;
};

// Every (start, period >= 10) pair in order of start, then period (pairs with
// no room for min_copies copies cannot qualify and are skipped). The copy
// count at (start, p) is 1 + floor(m / p) where m is the length of the run of
// positions j >= start with t[j] == t[j + p]; runs are tabulated per period.
inline std::optional<Run> degenerate_run(const std::u32string& t, std::size_t min_period = 10,
                                         std::size_t min_copies = 5, std::size_t ratio = 20) {
  const std::size_t n = t.size();
  std::vector<std::vector<std::size_t>> match(n + 1);
  for (std::size_t p = min_period; p * min_copies <= n; ++p) {
    auto& m = match[p];
    m.assign(n + 1, 0);
    for (std::size_t j = n - p; j-- > 0;) m[j] = t[j] == t[j + p] ? m[j + 1] + 1 : 0;
  }
  for (std::size_t start = 0; start < n; ++start) {
    for (std::size_t p = min_period; start + p * min_copies <= n; ++p) {
      const std::size_t copies = 1 + match[p][start] / p;
      if (copies >= min_copies && copies * p * ratio >= n) return Run{start, p, copies};
    }
  }
  return std::nullopt;
}

// JSD as the entropy of the mixture minus the mean entropy, base 2, in long
// double.
inline double jsd(const std::vector<double>& p, const std::vector<double>& q) {
  const auto h = [](long double x) { return x > 0 ? -x * std::log2(x) : 0.0L; };
  long double hm = 0, hp = 0, hq = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    hm += h((static_cast<long double>(p[i]) + q[i]) / 2);
    hp += h(p[i]);
    hq += h(q[i]);
  }
  return static_cast<double>(hm - (hp + hq) / 2);
}

// Softmax cross-entropy with L2 on the weights, written as plain loops.
// w is k x d row-major, x is n x d row-major.
inline double softmax_loss(const std::vector<double>& w, const std::vector<double>& b, const std::vector<double>& x,
                           const std::vector<int>& y, std::size_t k, std::size_t d, double l2) {
  const std::size_t n = y.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z(k);
    double zmax = -INFINITY;
    for (std::size_t c = 0; c < k; ++c) {
      z[c] = b[c];
      for (std::size_t j = 0; j < d; ++j) z[c] += w[c * d + j] * x[i * d + j];
      zmax = std::max(zmax, z[c]);
    }
    double s = 0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(z[c] - zmax);
    total += std::log(s) + zmax - z[static_cast<std::size_t>(y[i])];
  }
  double reg = 0;
  for (double v : w) reg += v * v;
  return total / static_cast<double>(n) + 0.5 * l2 * reg;
}

// Index of the closest class mean (squared Euclidean distance).
inline std::size_t nearest_centroid(const std::vector<std::vector<double>>& centroids, const std::vector<double>& x) {
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double dist = 0;
    for (std::size_t j = 0; j < x.size(); ++j) dist += (x[j] - centroids[c][j]) * (x[j] - centroids[c][j]);
    if (dist < best_d) {
      best_d = dist;
      best = c;
    }
  }
  return best;
}

}  // namespace oracle

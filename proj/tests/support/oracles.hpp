#pragma once

// Independent reference computations for the unit and acceptance tests.
// Deliberately naive: loops over plain indices, no shared code with src/.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Minimum cost over all n! permutations.
inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline double euclid(const Eigen::MatrixXd& a, int i, const Eigen::MatrixXd& b, int j) {
  double s = 0.0;
  for (int c = 0; c < a.cols(); ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
  return std::sqrt(s);
}

/// Textbook LOF (novelty setting): k-distance and lrd over the training set
/// excluding each point itself, then mean neighbour lrd over query lrd.
inline std::vector<double> lof(const Eigen::MatrixXd& train, const Eigen::MatrixXd& query, int k,
                               double eps = 1e-12) {
  const int n = static_cast<int>(train.rows());
  const auto knn = [&](const Eigen::MatrixXd& src, int row, int skip) {
    std::vector<std::pair<double, int>> d;
    for (int j = 0; j < n; ++j)
      if (j != skip) d.push_back({euclid(src, row, train, j), j});
    std::sort(d.begin(), d.end());
    d.resize(k);
    return d;
  };
  std::vector<double> kdist(n), lrd(n);
  std::vector<std::vector<std::pair<double, int>>> nb(n);
  for (int i = 0; i < n; ++i) {
    nb[i] = knn(train, i, i);
    kdist[i] = nb[i].back().first;
  }
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (auto [d, j] : nb[i]) s += std::max(kdist[j], d);
    lrd[i] = 1.0 / (eps + s / k);
  }
  std::vector<double> out;
  for (int q = 0; q < query.rows(); ++q) {
    const auto nq = knn(query, q, -1);
    double s = 0.0, l = 0.0;
    for (auto [d, j] : nq) {
      s += std::max(kdist[j], d);
      l += lrd[j];
    }
    const double lrd_q = 1.0 / (eps + s / k);
    out.push_back(l / k / lrd_q);
  }
  return out;
}

/// NMI = I(a;b) / sqrt(H(a) H(b)) from the joint count table.
inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> cab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    cab[{a[i], b[i]}] += 1;
  }
  double ha = 0, hb = 0, mi = 0;
  for (auto [k, c] : ca) ha -= c / n * std::log(c / n);
  for (auto [k, c] : cb) hb -= c / n * std::log(c / n);
  for (auto [kk, c] : cab) mi += c / n * std::log((c / n) / ((ca[kk.first] / n) * (cb[kk.second] / n)));
  if (ha == 0 && hb == 0) return 1.0;
  if (ha == 0 || hb == 0) return 0.0;
  return mi / std::sqrt(ha * hb);
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix. Eigenvalues
/// descending, eigenvectors as columns.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen(Eigen::MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) > a(j, j); });
  Eigen::VectorXd values(n);
  Eigen::MatrixXd vectors(n, n);
  for (int i = 0; i < n; ++i) {
    values(i) = a(order[i], order[i]);
    vectors.col(i) = v.col(order[i]);
  }
  return {values, vectors};
}

/// Central finite differences of f at x.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace oracle

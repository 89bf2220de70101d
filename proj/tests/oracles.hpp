#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "edcrit/tensor.hpp"

namespace oracle {

/// Independent dense evaluation of sum_i t_i prod_l u_{i,l}[idx_l] by explicit loops.
inline double entry(const std::vector<std::vector<Eigen::VectorXd>>& factors, const std::vector<double>& weights,
                    const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (std::size_t t = 0; t < factors.size(); ++t) {
    double p = weights[t];
    for (std::size_t l = 0; l < idx.size(); ++l) p *= factors[t][l](static_cast<Eigen::Index>(idx[l]));
    s += p;
  }
  return s;
}

/// All permutations of 0..d-1.
inline std::vector<std::vector<std::size_t>> permutations(std::size_t d) {
  std::vector<std::size_t> p(d);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<std::size_t>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ();
}

/// Applies q to every mode by explicit summation.
inline edcrit::DenseTensor transform_all_modes(const edcrit::DenseTensor& t, const Eigen::MatrixXd& q) {
  edcrit::DenseTensor out(t.shape());
  std::vector<std::size_t> i(t.order(), 0);
  do {
    double s = 0.0;
    std::vector<std::size_t> j(t.order(), 0);
    do {
      double p = t(j);
      for (std::size_t l = 0; l < i.size(); ++l) p *= q(static_cast<Eigen::Index>(i[l]), static_cast<Eigen::Index>(j[l]));
      s += p;
    } while (edcrit::next_index(j, t.shape()));
    out(i) = s;
  } while (edcrit::next_index(i, t.shape()));
  return out;
}

}  // namespace oracle

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace edcrit {

using Shape = std::vector<std::size_t>;
using MultiIndex = std::vector<std::size_t>;

/// Thrown when a numerical procedure fails to produce a usable answer
/// (no convergence, no surviving candidates, singular systems).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// d-mode real tensor, row-major flat storage (last index fastest).
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<double> data);
  DenseTensor(Shape shape, const Eigen::VectorXd& flat);

  const Shape& shape() const { return shape_; }
  const std::vector<std::size_t>& strides() const { return strides_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool is_cubical() const;

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  std::size_t offset(std::span<const std::size_t> index) const;
  MultiIndex index_of(std::size_t offset) const;
  double operator()(std::span<const std::size_t> index) const { return data_[offset(index)]; }
  double& operator()(std::span<const std::size_t> index) { return data_[offset(index)]; }
  double operator()(std::initializer_list<std::size_t> index) const;
  double& operator()(std::initializer_list<std::size_t> index);

  Eigen::Map<const Eigen::VectorXd> flat() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }
  Eigen::Map<Eigen::VectorXd> flat() { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }

  DenseTensor& operator+=(const DenseTensor& other);
  DenseTensor& operator-=(const DenseTensor& other);
  DenseTensor& operator*=(double s);

 private:
  Shape shape_;
  std::vector<std::size_t> strides_;
  std::vector<double> data_;
};

DenseTensor operator+(DenseTensor a, const DenseTensor& b);
DenseTensor operator-(DenseTensor a, const DenseTensor& b);
DenseTensor operator*(double s, DenseTensor a);

/// Advances `index` to the next multi-index in row-major order. Returns false after the last.
bool next_index(MultiIndex& index, const Shape& shape);

double hs_inner(const DenseTensor& x, const DenseTensor& y);
double hs_norm(const DenseTensor& x);

/// Mode-n unfolding: rows indexed by mode n, columns by the remaining modes in row-major order.
Eigen::MatrixXd unfold(const DenseTensor& t, std::size_t mode);

/// sigma(T)[i_1..i_d] = T[i_{perm[0]}, ..., i_{perm[d-1]}] (0-based permutation).
DenseTensor permute_modes(const DenseTensor& t, std::span<const std::size_t> perm);

// ---------------------------------------------------------------------------
// Sorted multi-indices 0 <= i_1 <= ... <= i_d < m, enumerated lexicographically.

std::size_t binomial(std::size_t n, std::size_t k);
std::vector<MultiIndex> sorted_indices(std::size_t m, std::size_t d);
std::size_t sorted_rank(std::span<const std::size_t> sorted, std::size_t m);
/// Number of distinct orderings of the multiset `sorted`, i.e. d!/prod(mult!).
std::size_t orbit_size(std::span<const std::size_t> sorted);

/// Symmetric tensor stored by sorted multi-index. The stored value is the entry of
/// the densified tensor at any ordering of the index (not the orbit sum); the
/// coefficient on the orbit-sum basis element is value * orbit_size.
template <class Scalar>
class BasicSymTensor {
 public:
  BasicSymTensor() = default;
  BasicSymTensor(std::size_t m, std::size_t d)
      : m_(m), d_(d), coeffs_(binomial(m + d - 1, d), Scalar(0)) {
    if (m == 0 || d == 0) throw std::invalid_argument("SymTensor: m and d must be positive");
  }
  BasicSymTensor(std::size_t m, std::size_t d, std::vector<Scalar> coeffs) : m_(m), d_(d), coeffs_(std::move(coeffs)) {
    if (m == 0 || d == 0) throw std::invalid_argument("SymTensor: m and d must be positive");
    if (coeffs_.size() != binomial(m + d - 1, d))
      throw std::invalid_argument("SymTensor: coefficient count must equal binom(m+d-1,d)");
  }

  std::size_t m() const { return m_; }
  std::size_t d() const { return d_; }
  const std::vector<Scalar>& coeffs() const { return coeffs_; }
  std::vector<Scalar>& coeffs() { return coeffs_; }

  /// Any ordering of the index is accepted.
  const Scalar& at(std::span<const std::size_t> index) const { return coeffs_[rank_of(index)]; }
  Scalar& at(std::span<const std::size_t> index) { return coeffs_[rank_of(index)]; }
  const Scalar& at(std::initializer_list<std::size_t> index) const {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }
  Scalar& at(std::initializer_list<std::size_t> index) {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }

  bool operator==(const BasicSymTensor& other) const = default;

 private:
  std::size_t rank_of(std::span<const std::size_t> index) const {
    if (index.size() != d_) throw std::invalid_argument("SymTensor: index length must equal d");
    MultiIndex sorted(index.begin(), index.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.back() >= m_) throw std::out_of_range("SymTensor: index out of range");
    return sorted_rank(sorted, m_);
  }

  std::size_t m_ = 0;
  std::size_t d_ = 0;
  std::vector<Scalar> coeffs_;
};

using SymTensor = BasicSymTensor<double>;

/// Orthogonal projection onto symmetric tensors: averages each S_d orbit.
SymTensor symmetrize(const DenseTensor& t);
DenseTensor densify(const SymTensor& s);
bool is_symmetric(const DenseTensor& t, double tol);

// ---------------------------------------------------------------------------

/// weight * u_1 (x) ... (x) u_d with unit factors. Construction normalizes the
/// given factors and folds their norms into the weight.
class RankOneTerm {
 public:
  RankOneTerm() = default;
  RankOneTerm(double weight, std::vector<Eigen::VectorXd> factors);

  double weight() const { return weight_; }
  const std::vector<Eigen::VectorXd>& factors() const { return factors_; }
  std::size_t order() const { return factors_.size(); }
  Shape shape() const;

 private:
  double weight_ = 0.0;
  std::vector<Eigen::VectorXd> factors_;
};

/// t * (x)^d u
RankOneTerm symmetric_term(double weight, const Eigen::VectorXd& u, std::size_t d);

DenseTensor rank_one(const RankOneTerm& term);
DenseTensor outer(std::span<const Eigen::VectorXd> factors);

/// Grouping of d modes into three consecutive blocks of sizes a, b, c.
struct ModeSplit {
  std::size_t a = 1;
  std::size_t b = 1;
  std::size_t c = 1;

  std::size_t total() const { return a + b + c; }
  /// (1, floor((d-1)/2), ceil((d-1)/2))
  static ModeSplit canonical(std::size_t d);
};

/// Views a cubical d-mode tensor as a 3-mode tensor of shape (m^a, m^b, m^c).
DenseTensor unfold_split(const DenseTensor& t, const ModeSplit& split);

}  // namespace edcrit

#include "edcrit/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace edcrit {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  return os.str();
}

namespace {

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("DenseTensor: order must be at least 1");
  for (auto s : shape)
    if (s == 0) throw std::invalid_argument("DenseTensor: mode sizes must be positive");
}

void require_same_shape(const DenseTensor& x, const DenseTensor& y, const char* what) {
  if (x.shape() != y.shape())
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(x.shape()) + " vs " +
                                shape_string(y.shape()));
}

}  // namespace

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  validate_shape(shape_);
  strides_ = row_major_strides(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_size(shape_))
    throw std::invalid_argument("DenseTensor: data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
  strides_ = row_major_strides(shape_);
}

DenseTensor::DenseTensor(Shape shape, const Eigen::VectorXd& flat)
    : DenseTensor(std::move(shape), std::vector<double>(flat.data(), flat.data() + flat.size())) {}

bool DenseTensor::is_cubical() const {
  return std::all_of(shape_.begin(), shape_.end(), [&](auto s) { return s == shape_.front(); });
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw std::invalid_argument("DenseTensor: index has wrong order");
  std::size_t off = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[i]) throw std::out_of_range("DenseTensor: index out of range");
    off += index[i] * strides_[i];
  }
  return off;
}

MultiIndex DenseTensor::index_of(std::size_t off) const {
  MultiIndex index(shape_.size());
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    index[i] = off / strides_[i];
    off %= strides_[i];
  }
  return index;
}

double DenseTensor::operator()(std::initializer_list<std::size_t> index) const {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

double& DenseTensor::operator()(std::initializer_list<std::size_t> index) {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

bool next_index(MultiIndex& index, const Shape& shape) {
  for (std::size_t i = shape.size(); i-- > 0;) {
    if (++index[i] < shape[i]) return true;
    index[i] = 0;
  }
  return false;
}

double hs_inner(const DenseTensor& x, const DenseTensor& y) {
  require_same_shape(x, y, "hs_inner");
  return x.flat().dot(y.flat());
}

double hs_norm(const DenseTensor& x) { return x.flat().norm(); }

Eigen::MatrixXd unfold(const DenseTensor& t, std::size_t mode) {
  if (mode >= t.order()) throw std::invalid_argument("unfold: mode out of range");
  const auto& shape = t.shape();
  const std::size_t rows = shape[mode];
  Eigen::MatrixXd out(rows, t.size() / rows);
  MultiIndex idx(t.order(), 0);
  std::vector<std::size_t> col_count(rows, 0);
  std::size_t off = 0;
  do {
    const std::size_t r = idx[mode];
    out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col_count[r]++)) = t.data()[off++];
  } while (next_index(idx, shape));
  return out;
}

DenseTensor permute_modes(const DenseTensor& t, std::span<const std::size_t> perm) {
  const std::size_t d = t.order();
  if (perm.size() != d) throw std::invalid_argument("permute_modes: permutation length mismatch");
  std::vector<bool> seen(d, false);
  for (auto p : perm) {
    if (p >= d || seen[p]) throw std::invalid_argument("permute_modes: not a permutation");
    seen[p] = true;
  }
  Shape out_shape(d);
  for (std::size_t k = 0; k < d; ++k) out_shape[perm[k]] = t.shape()[k];
  // out[j] = t[(j_{perm[0]}, ..., j_{perm[d-1]})]
  DenseTensor out(out_shape);
  MultiIndex j(d, 0), src(d);
  std::size_t off = 0;
  do {
    for (std::size_t k = 0; k < d; ++k) src[k] = j[perm[k]];
    out.data()[off++] = t(src);
  } while (next_index(j, out_shape));
  return out;
}

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<MultiIndex> sorted_indices(std::size_t m, std::size_t d) {
  std::vector<MultiIndex> out;
  out.reserve(binomial(m + d - 1, d));
  MultiIndex idx(d, 0);
  while (true) {
    out.push_back(idx);
    std::size_t pos = d;
    while (pos > 0 && idx[pos - 1] == m - 1) --pos;
    if (pos == 0) break;
    const std::size_t v = idx[pos - 1] + 1;
    for (std::size_t k = pos - 1; k < d; ++k) idx[k] = v;
  }
  return out;
}

std::size_t sorted_rank(std::span<const std::size_t> sorted, std::size_t m) {
  // Count nondecreasing sequences that precede `sorted` lexicographically.
  const std::size_t d = sorted.size();
  std::size_t rank = 0;
  std::size_t lo = 0;
  for (std::size_t pos = 0; pos < d; ++pos) {
    const std::size_t rest = d - pos - 1;
    for (std::size_t v = lo; v < sorted[pos]; ++v) rank += binomial(m - v + rest - 1, rest);
    lo = sorted[pos];
  }
  return rank;
}

std::size_t orbit_size(std::span<const std::size_t> sorted) {
  std::size_t result = 1;
  std::size_t run = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    run = (i > 0 && sorted[i] == sorted[i - 1]) ? run + 1 : 1;
    result = result * (i + 1) / run;
  }
  return result;
}

SymTensor symmetrize(const DenseTensor& t) {
  if (!t.is_cubical()) throw std::invalid_argument("symmetrize: all modes must have equal size");
  const std::size_t m = t.shape().front();
  const std::size_t d = t.order();
  SymTensor out(m, d);
  std::vector<std::size_t> counts(out.coeffs().size(), 0);
  MultiIndex idx(d, 0), sorted(d);
  std::size_t off = 0;
  do {
    sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    const auto r = sorted_rank(sorted, m);
    out.coeffs()[r] += t.data()[off++];
    ++counts[r];
  } while (next_index(idx, t.shape()));
  for (std::size_t r = 0; r < counts.size(); ++r) out.coeffs()[r] /= static_cast<double>(counts[r]);
  return out;
}

DenseTensor densify(const SymTensor& s) {
  DenseTensor out(Shape(s.d(), s.m()));
  MultiIndex idx(s.d(), 0), sorted(s.d());
  std::size_t off = 0;
  do {
    sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    out.data()[off++] = s.coeffs()[sorted_rank(sorted, s.m())];
  } while (next_index(idx, out.shape()));
  return out;
}

bool is_symmetric(const DenseTensor& t, double tol) {
  if (!t.is_cubical()) return false;
  return hs_norm(t - densify(symmetrize(t))) <= tol;
}

RankOneTerm::RankOneTerm(double weight, std::vector<Eigen::VectorXd> factors)
    : weight_(weight), factors_(std::move(factors)) {
  if (factors_.empty()) throw std::invalid_argument("RankOneTerm: at least one factor required");
  for (auto& f : factors_) {
    const double n = f.norm();
    if (f.size() == 0 || !(n > 0.0) || !std::isfinite(n))
      throw std::invalid_argument("RankOneTerm: factors must be nonzero and finite");
    f /= n;
    weight_ *= n;
  }
}

Shape RankOneTerm::shape() const {
  Shape s;
  for (const auto& f : factors_) s.push_back(static_cast<std::size_t>(f.size()));
  return s;
}

RankOneTerm symmetric_term(double weight, const Eigen::VectorXd& u, std::size_t d) {
  return RankOneTerm(weight, std::vector<Eigen::VectorXd>(d, u));
}

DenseTensor outer(std::span<const Eigen::VectorXd> factors) {
  Shape shape;
  for (const auto& f : factors) shape.push_back(static_cast<std::size_t>(f.size()));
  DenseTensor out(shape);
  MultiIndex idx(shape.size(), 0);
  std::size_t off = 0;
  do {
    double v = 1.0;
    for (std::size_t k = 0; k < idx.size(); ++k) v *= factors[k](static_cast<Eigen::Index>(idx[k]));
    out.data()[off++] = v;
  } while (next_index(idx, shape));
  return out;
}

DenseTensor rank_one(const RankOneTerm& term) {
  auto t = outer(term.factors());
  t *= term.weight();
  return t;
}

ModeSplit ModeSplit::canonical(std::size_t d) {
  if (d < 3) throw std::invalid_argument("ModeSplit::canonical: d must be at least 3");
  return {1, (d - 1) / 2, d - 1 - (d - 1) / 2};
}

DenseTensor unfold_split(const DenseTensor& t, const ModeSplit& split) {
  if (!t.is_cubical()) throw std::invalid_argument("unfold_split: all modes must have equal size");
  if (split.a == 0 || split.b == 0 || split.c == 0 || split.total() != t.order())
    throw std::invalid_argument("unfold_split: split (" + std::to_string(split.a) + "," + std::to_string(split.b) +
                                "," + std::to_string(split.c) + ") does not partition order " +
                                std::to_string(t.order()));
  const std::size_t m = t.shape().front();
  auto power = [m](std::size_t e) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < e; ++i) r *= m;
    return r;
  };
  // Row-major storage groups consecutive modes, so the data is reused verbatim.
  return DenseTensor({power(split.a), power(split.b), power(split.c)}, t.data());
}

}  // namespace edcrit

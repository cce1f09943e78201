#include "dusk/tensor.hpp"

#include <cmath>
#include <numeric>

namespace dusk {

std::size_t numel(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

DenseTensor::DenseTensor(std::vector<std::size_t> shape,
                         std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_.empty()) throw ArgumentError("tensor order must be >= 1");
  for (std::size_t d : shape_) {
    if (d == 0) throw ArgumentError("mode dimensions must be >= 1");
  }
  if (values_.size() != numel(shape_)) {
    throw ShapeError("value count " + std::to_string(values_.size()) +
                     " does not match shape product " +
                     std::to_string(numel(shape_)));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ArgumentError("non-finite tensor entry");
  }
}

DenseTensor DenseTensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = numel(shape);
  return DenseTensor(std::move(shape), std::vector<double>(n, 0.0));
}

double DenseTensor::at(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size())
    throw ShapeError("index order does not match tensor order");
  std::size_t lin = 0;
  for (std::size_t m = 0; m < shape_.size(); ++m) {
    if (index[m] >= shape_[m]) throw ArgumentError("index out of range");
    lin = lin * shape_[m] + index[m];
  }
  return values_[lin];
}

double inner_product(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("inner_product requires equal shapes");
  const auto& av = a.values();
  const auto& bv = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return s;
}

double norm(const DenseTensor& a) {
  return std::sqrt(inner_product(a, a));
}

DenseTensor tensor_product(std::span<const FactorVector> vectors) {
  if (vectors.empty()) throw ArgumentError("tensor_product needs >= 1 vector");
  const std::size_t n_modes = vectors.size();
  std::vector<std::size_t> shape(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    if (vectors[m].mode != m)
      throw ArgumentError("factor vectors must be ordered by mode");
    if (vectors[m].entries.empty())
      throw ArgumentError("empty factor vector");
    shape[m] = vectors[m].entries.size();
  }
  std::vector<double> out(numel(shape));
  std::vector<std::size_t> idx(n_modes, 0);
  for (std::size_t lin = 0; lin < out.size(); ++lin) {
    double p = 1.0;
    for (std::size_t m = 0; m < n_modes; ++m) p *= vectors[m].entries[idx[m]];
    out[lin] = p;
    for (std::size_t m = n_modes; m-- > 0;) {
      if (++idx[m] < shape[m]) break;
      idx[m] = 0;
    }
  }
  return DenseTensor(std::move(shape), std::move(out));
}

double rank_one_inner(std::span<const FactorVector> x,
                      std::span<const FactorVector> y) {
  if (x.size() != y.size() || x.empty())
    throw ShapeError("rank_one_inner requires matching non-empty mode lists");
  double p = 1.0;
  for (std::size_t m = 0; m < x.size(); ++m) {
    if (x[m].entries.size() != y[m].entries.size())
      throw ShapeError("rank_one_inner mode length mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < x[m].entries.size(); ++i)
      dot += x[m].entries[i] * y[m].entries[i];
    p *= dot;
  }
  return p;
}

Eigen::MatrixXd unfold(const DenseTensor& a, std::size_t mode) {
  const auto& sh = a.shape();
  if (mode >= sh.size()) throw ArgumentError("unfold mode out of range");
  const std::size_t rows = sh[mode];
  const std::size_t cols = a.size() / rows;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows),
                      static_cast<Eigen::Index>(cols));
  std::vector<std::size_t> idx(sh.size(), 0);
  for (std::size_t lin = 0; lin < a.size(); ++lin) {
    std::size_t col = 0;
    for (std::size_t m = 0; m < sh.size(); ++m)
      if (m != mode) col = col * sh[m] + idx[m];
    out(static_cast<Eigen::Index>(idx[mode]),
        static_cast<Eigen::Index>(col)) = a.values()[lin];
    for (std::size_t m = sh.size(); m-- > 0;) {
      if (++idx[m] < sh[m]) break;
      idx[m] = 0;
    }
  }
  return out;
}

DenseTensor refold(const Eigen::MatrixXd& m, std::vector<std::size_t> shape,
                   std::size_t mode) {
  if (mode >= shape.size()) throw ArgumentError("refold mode out of range");
  const std::size_t total = numel(shape);
  if (static_cast<std::size_t>(m.rows()) != shape[mode] ||
      static_cast<std::size_t>(m.rows() * m.cols()) != total)
    throw ShapeError("refold matrix does not match target shape");
  std::vector<double> vals(total);
  std::vector<std::size_t> idx(shape.size(), 0);
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::size_t col = 0;
    for (std::size_t mm = 0; mm < shape.size(); ++mm)
      if (mm != mode) col = col * shape[mm] + idx[mm];
    vals[lin] = m(static_cast<Eigen::Index>(idx[mode]),
                  static_cast<Eigen::Index>(col));
    for (std::size_t mm = shape.size(); mm-- > 0;) {
      if (++idx[mm] < shape[mm]) break;
      idx[mm] = 0;
    }
  }
  return DenseTensor(std::move(shape), std::move(vals));
}

}  // namespace dusk

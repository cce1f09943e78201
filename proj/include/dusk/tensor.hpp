#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dusk/errors.hpp"

namespace dusk {

// Dense N-order tensor. Values are linearized row-major (last index fastest).
// Immutable after construction; construction rejects non-finite entries.
class DenseTensor {
 public:
  DenseTensor(std::vector<std::size_t> shape, std::vector<double> values);

  static DenseTensor zeros(std::vector<std::size_t> shape);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }

  double at(std::span<const std::size_t> index) const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

// One mode's vector of a rank-one component; `mode` is the 0-based axis it
// belongs to.
struct FactorVector {
  std::size_t mode = 0;
  std::vector<double> entries;
};

std::size_t numel(std::span<const std::size_t> shape);

// Sum of entrywise products; both tensors must share a shape.
double inner_product(const DenseTensor& a, const DenseTensor& b);

// Frobenius norm.
double norm(const DenseTensor& a);

// Outer product of one vector per mode; the result is rank one.
DenseTensor tensor_product(std::span<const FactorVector> vectors);

// Inner product of two rank-one tensors given only their factor vectors:
// the product over modes of per-mode dot products.
double rank_one_inner(std::span<const FactorVector> x,
                      std::span<const FactorVector> y);

// Mode-n matricization: rows index mode n, columns run through the remaining
// modes in row-major order (earlier modes slower, last mode fastest).
Eigen::MatrixXd unfold(const DenseTensor& a, std::size_t mode);

// Inverse of unfold for the given shape/mode.
DenseTensor refold(const Eigen::MatrixXd& m, std::vector<std::size_t> shape,
                   std::size_t mode);

}  // namespace dusk

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dusk/cp.hpp"

namespace dusk {

enum class KernelKind { linear, rbf };

// Constituent vector kernel applied per mode inside the tensor kernel.
// Note the RBF convention: k(u,v) = exp(-sigma * ||u-v||^2), sigma acting as
// a precision, not exp(-||u-v||^2 / (2 sigma^2)).
struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  double sigma = 0.0;

  static KernelSpec linear() { return {KernelKind::linear, 0.0}; }
  static KernelSpec rbf(double sigma);
};

double vector_kernel(const KernelSpec& spec, std::span<const double> u,
                     std::span<const double> v);

// Product over modes of the constituent kernel; both models must be rank 1.
double naive_rank_one_kernel(const KernelSpec& spec, const CpModel& x,
                             const CpModel& y);

// Tensor kernel over CP representations: sum over all component pairs (i,j)
// of the product over modes of the constituent kernel. With RBF constituents
// each pair term is a single exponential of the summed per-mode squared
// distances.
double dusk(const KernelSpec& spec, const CpModel& x, const CpModel& y);

// R x R table of sum-over-modes squared distances between components of x
// and y; the RBF kernel value is exp(-sigma * table).sum().
Eigen::MatrixXd dusk_sqdist_table(const CpModel& x, const CpModel& y);

class GramMatrix {
 public:
  GramMatrix(Eigen::MatrixXd entries, KernelSpec spec, std::size_t rank);

  std::size_t size() const { return static_cast<std::size_t>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  const KernelSpec& spec() const { return spec_; }
  std::size_t rank() const { return rank_; }

 private:
  Eigen::MatrixXd entries_;
  KernelSpec spec_;
  std::size_t rank_;
};

// Symmetric kernel matrix; each unordered pair is evaluated once and
// mirrored. `threads` splits the pair list; results do not depend on the
// thread count.
GramMatrix gram(const KernelSpec& spec, std::span<const CpModel> models,
                std::size_t threads = 1);

// entry (t, i) = kernel(test[t], train[i]).
Eigen::MatrixXd gram_cross(const KernelSpec& spec,
                           std::span<const CpModel> train,
                           std::span<const CpModel> test,
                           std::size_t threads = 1);

// (min eigenvalue, max eigenvalue) of a symmetric matrix.
std::pair<double, double> eigen_range(const Eigen::MatrixXd& m);

// min eigenvalue >= -tol_factor * max eigenvalue.
bool is_psd(const Eigen::MatrixXd& m, double tol_factor = 1e-8);

}  // namespace dusk

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dusk/tensor.hpp"

namespace dusk {

struct CpOptions {
  std::size_t max_iter = 500;
  double tol = 1e-6;  // stop when the relative fit change drops below this
  std::uint64_t seed = 0;
  bool line_search = false;  // extrapolation between sweeps, rejected if it
                             // does not improve the fit
};

// Rank-R CP representation: one In x R factor matrix per mode, column r of
// each mode forming the r-th rank-one component. Component weights are
// absorbed into the factors (column norms equalized across modes).
class CpModel {
 public:
  CpModel(std::vector<std::size_t> shape,
          std::vector<Eigen::MatrixXd> factors);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t rank() const { return rank_; }
  const std::vector<Eigen::MatrixXd>& factors() const { return factors_; }
  const Eigen::MatrixXd& factor(std::size_t mode) const {
    return factors_.at(mode);
  }

 private:
  std::vector<std::size_t> shape_;
  std::size_t rank_;
  std::vector<Eigen::MatrixXd> factors_;
};

struct CpFitReport {
  std::size_t iterations = 0;
  double final_fit = 0.0;  // 1 - ||x - xhat||_F / ||x||_F
  bool converged = false;
  std::vector<double> fit_history;
};

// Alternating least squares fit of a rank-R CP model. Deterministic for a
// fixed seed. Throws ArgumentError for rank 0 / bad options and
// DegenerateInputError for the zero tensor.
std::pair<CpModel, CpFitReport> cp_als(const DenseTensor& x, std::size_t rank,
                                       const CpOptions& opts = {});

// Evaluates the sum of rank-one components as a dense tensor.
DenseTensor reconstruct(const CpModel& m);

// One cp_als per instance with a per-instance seed derived from
// (opts.seed, index); results are independent of processing order.
std::vector<CpModel> factorize_dataset(std::span<const DenseTensor> xs,
                                       std::size_t rank,
                                       const CpOptions& opts = {});

// Deterministic per-instance seed derivation (splitmix64 over base ^ index).
std::uint64_t instance_seed(std::uint64_t base, std::uint64_t index);

// Process-wide count of ALS sweeps executed; used to observe cache hits.
std::uint64_t als_sweep_count();
void reset_als_sweep_count();

}  // namespace dusk

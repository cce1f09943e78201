#pragma once

#include <span>
#include <vector>

#include "dusk/kernels.hpp"

namespace dusk {

struct TrainConfig {
  double c = 1.0;
  double kkt_tol = 1e-3;
  // Budget of full passes (M two-variable updates each); 0 means 10 * M.
  // Exhausting it without reaching kkt_tol raises NumericalError.
  std::size_t max_passes = 0;
};

// Converged dual solution. alphas/labels cover the whole training set;
// support_models retains the CP representations of instances with alpha > 0
// so the model can classify fresh data on its own.
struct SvmModel {
  std::vector<double> alphas;
  std::vector<int> labels;
  double bias = 0.0;
  std::vector<std::size_t> support_indices;
  KernelSpec spec;
  std::size_t rank = 0;
  double c = 0.0;
  std::vector<CpModel> support_models;
};

// SMO over a precomputed Gram matrix with maximal-violating-pair selection.
// Requires both classes present and a Gram passing the PSD tolerance.
SvmModel train(const GramMatrix& gram, std::span<const int> labels,
               const TrainConfig& cfg,
               std::span<const CpModel> models = {});

// Pre-sign decision values; `cross` columns must index the full training set.
std::vector<double> decision_values(const SvmModel& model,
                                    const Eigen::MatrixXd& cross);

// Same, with `cross` columns indexing only the retained support vectors.
std::vector<double> decision_values_support(const SvmModel& model,
                                            const Eigen::MatrixXd& cross);

// sign of the decision value; sign(0) is +1.
std::vector<int> predict(const SvmModel& model, const Eigen::MatrixXd& cross);
std::vector<int> predict_support(const SvmModel& model,
                                 const Eigen::MatrixXd& cross);

// sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
double dual_objective(const GramMatrix& gram, std::span<const int> labels,
                      std::span<const double> alphas);

}  // namespace dusk

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dusk/data_io.hpp"
#include "dusk/kernels.hpp"
#include "dusk/svm.hpp"

namespace dusk {

// Which instance representation feeds the kernel: CP models with the tensor
// kernel, or flattened instances with a plain vector kernel (baseline).
enum class Pipeline { cp_dusk, flat_vector };

struct GridConfig {
  std::vector<double> c_grid;
  std::vector<double> sigma_grid;
  std::vector<std::size_t> rank_grid;
  std::size_t inner_folds = 5;
  std::uint64_t seed = 0;

  // C in {2^-5..2^9}, sigma in {2^-4..2^9}, R in {1..12}.
  static GridConfig defaults();
  // Coarse grids for CI-speed runs.
  static GridConfig fast();
};

struct ScoreCell {
  std::size_t rank = 0;  // 0 for the flat-vector pipeline
  double c = 0.0;
  double sigma = 0.0;
  double cv_accuracy = 0.0;
};

struct GridSearchResult {
  std::size_t rank = 0;
  double c = 0.0;
  double sigma = 0.0;
  double best_score = 0.0;
  std::vector<ScoreCell> table;
};

struct RepeatRecord {
  std::size_t repeat = 0;
  std::uint64_t split_seed = 0;
  std::size_t rank = 0;
  double c = 0.0;
  double sigma = 0.0;
  double test_accuracy = 0.0;
};

struct EvalReport {
  std::vector<RepeatRecord> repeats;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population (divide by n)
  double factorize_seconds = 0.0;
  double search_seconds = 0.0;
  double eval_seconds = 0.0;
};

double accuracy(std::span<const int> predictions, std::span<const int> labels);

// Stratified train/test index split; per-class proportions hold to +-1.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    std::span<const int> labels, double train_frac, std::uint64_t seed);

// Fold id (0..k-1) per position, class-balanced round robin after a seeded
// per-class shuffle.
std::vector<std::size_t> stratified_folds(std::span<const int> labels,
                                          std::size_t k, std::uint64_t seed);

// Inner-CV grid search over (R, C, sigma) (C and sigma only for the
// flat-vector pipeline; sigma only when kind is rbf). Ties break toward
// smaller R, then smaller C, then larger sigma. CP factorization happens
// once per rank and is shared across the (C, sigma) sweep.
GridSearchResult grid_search(const TensorDataset& ds, const GridConfig& grid,
                             KernelKind kind,
                             Pipeline pipeline = Pipeline::cp_dusk,
                             const CpOptions& cp_opts = {},
                             std::size_t threads = 1);

// Same, restricted to a subset of instance positions. Hyperparameter
// selection sees only the labels at `indices`.
GridSearchResult grid_search_subset(const TensorDataset& ds,
                                    std::span<const std::size_t> indices,
                                    const GridConfig& grid, KernelKind kind,
                                    Pipeline pipeline = Pipeline::cp_dusk,
                                    const CpOptions& cp_opts = {},
                                    std::size_t threads = 1);

// Repeated stratified holdout: per repeat, split, grid-search on the
// training portion, retrain with the chosen hyperparameters, score the
// held-out fraction. Factorization seeds depend only on the dataset-global
// instance index, never on the split.
EvalReport repeated_holdout(const TensorDataset& ds, const GridConfig& grid,
                            std::size_t repeats, double train_frac,
                            KernelKind kind,
                            Pipeline pipeline = Pipeline::cp_dusk,
                            const CpOptions& cp_opts = {},
                            std::size_t threads = 1);

std::string eval_report_csv(const EvalReport& report);
std::string score_table_csv(const GridSearchResult& result);
std::string format_mean_std(const EvalReport& report);  // "0.750000 (0.180000)"

}  // namespace dusk

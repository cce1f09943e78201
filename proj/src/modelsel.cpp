#include "dusk/modelsel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <thread>

namespace dusk {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t b = std::min(t * chunk, n);
    const std::size_t e = std::min(b + chunk, n);
    if (b < e) pool.emplace_back(fn, b, e);
  }
  for (auto& th : pool) th.join();
}

void validate_grid(const GridConfig& grid) {
  if (grid.c_grid.empty() || grid.sigma_grid.empty() ||
      grid.rank_grid.empty() || grid.inner_folds < 2)
    throw ArgumentError("grid config needs non-empty grids and >= 2 folds");
  for (double c : grid.c_grid)
    if (!(c > 0.0) || !std::isfinite(c))
      throw ArgumentError("C grid values must be positive and finite");
  for (double s : grid.sigma_grid)
    if (!(s > 0.0) || !std::isfinite(s))
      throw ArgumentError("sigma grid values must be positive and finite");
  for (std::size_t r : grid.rank_grid)
    if (r == 0) throw ArgumentError("rank grid values must be >= 1");
}

// Shared per-dataset state: factorizations keyed by rank and pairwise
// kernel precursors, both independent of any train/test split.
struct Context {
  const TensorDataset& ds;
  CpOptions cp_opts;
  Pipeline pipeline;
  KernelKind kind;
  std::size_t threads;
  double factorize_seconds = 0.0;

  std::map<std::size_t, std::vector<CpModel>> models_by_rank;
  // Upper-triangle (i <= j, index i*M+j) tables of summed per-mode squared
  // distances between CP components; exp(-sigma * .) sums give the kernel.
  std::map<std::size_t, std::vector<Eigen::MatrixXd>> rbf_tables_by_rank;
  std::map<std::size_t, Eigen::MatrixXd> linear_gram_by_rank;
  Eigen::MatrixXd flat_sqdist;
  Eigen::MatrixXd flat_dot;
  bool flat_ready = false;

  Context(const TensorDataset& ds_, const CpOptions& cp, Pipeline p,
          KernelKind k, std::size_t th)
      : ds(ds_), cp_opts(cp), pipeline(p), kind(k), threads(th) {}

  const std::vector<CpModel>& models(std::size_t rank) {
    auto it = models_by_rank.find(rank);
    if (it != models_by_rank.end()) return it->second;
    const auto t0 = Clock::now();
    CpOptions per = cp_opts;
    per.seed = instance_seed(cp_opts.seed, rank);
    auto models = factorize_dataset(ds.instances, rank, per);
    factorize_seconds += seconds_since(t0);
    return models_by_rank.emplace(rank, std::move(models)).first->second;
  }

  void ensure_flat() {
    if (flat_ready) return;
    const std::size_t m = ds.size();
    flat_sqdist.resize(m, m);
    flat_dot.resize(m, m);
    parallel_for(m, threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const auto& vi = ds.instances[i].values();
        for (std::size_t j = i; j < m; ++j) {
          const auto& vj = ds.instances[j].values();
          double d2 = 0.0, dot = 0.0;
          for (std::size_t v = 0; v < vi.size(); ++v) {
            const double d = vi[v] - vj[v];
            d2 += d * d;
            dot += vi[v] * vj[v];
          }
          flat_sqdist(i, j) = d2;
          flat_dot(i, j) = dot;
        }
      }
    });
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        flat_sqdist(j, i) = flat_sqdist(i, j);
        flat_dot(j, i) = flat_dot(i, j);
      }
    flat_ready = true;
  }

  const std::vector<Eigen::MatrixXd>& rbf_tables(std::size_t rank) {
    auto it = rbf_tables_by_rank.find(rank);
    if (it != rbf_tables_by_rank.end()) return it->second;
    const auto& mods = models(rank);
    const std::size_t m = mods.size();
    std::vector<Eigen::MatrixXd> tables(m * m);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) pairs.emplace_back(i, j);
    parallel_for(pairs.size(), threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        const auto [i, j] = pairs[p];
        tables[i * m + j] = dusk_sqdist_table(mods[i], mods[j]);
      }
    });
    return rbf_tables_by_rank.emplace(rank, std::move(tables)).first->second;
  }

  // Full M x M kernel matrix for one grid cell's (rank, sigma).
  Eigen::MatrixXd full_gram(std::size_t rank, double sigma) {
    const std::size_t m = ds.size();
    Eigen::MatrixXd g(m, m);
    if (pipeline == Pipeline::flat_vector) {
      ensure_flat();
      if (kind == KernelKind::rbf)
        g = (-sigma * flat_sqdist).array().exp();
      else
        g = flat_dot;
      return g;
    }
    if (kind == KernelKind::rbf) {
      const auto& tables = rbf_tables(rank);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
          g(i, j) = (-sigma * tables[i * m + j]).array().exp().sum();
          g(j, i) = g(i, j);
        }
      return g;
    }
    auto it = linear_gram_by_rank.find(rank);
    if (it == linear_gram_by_rank.end()) {
      const auto& mods = models(rank);
      Eigen::MatrixXd lin(m, m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
          lin(i, j) = dusk(KernelSpec::linear(), mods[i], mods[j]);
          lin(j, i) = lin(i, j);
        }
      it = linear_gram_by_rank.emplace(rank, std::move(lin)).first;
    }
    return it->second;
  }

  KernelSpec spec_for(double sigma) const {
    return kind == KernelKind::rbf ? KernelSpec::rbf(sigma)
                                   : KernelSpec::linear();
  }
};

Eigen::MatrixXd slice(const Eigen::MatrixXd& g,
                      std::span<const std::size_t> rows,
                      std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(i, j) = g(rows[i], cols[j]);
  return out;
}

// Mean fold accuracy of one (gram, C) cell under a fixed fold assignment.
double cv_score(const Eigen::MatrixXd& g_full,
                std::span<const std::size_t> indices,
                const std::vector<int>& full_labels,
                const std::vector<std::size_t>& fold_of, std::size_t k,
                double c, const KernelSpec& spec, std::size_t rank) {
  double acc_sum = 0.0;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_g, test_g;
    std::vector<int> train_y, test_y;
    for (std::size_t p = 0; p < indices.size(); ++p) {
      if (fold_of[p] == f) {
        test_g.push_back(indices[p]);
        test_y.push_back(full_labels[indices[p]]);
      } else {
        train_g.push_back(indices[p]);
        train_y.push_back(full_labels[indices[p]]);
      }
    }
    GramMatrix sub(slice(g_full, train_g, train_g), spec, rank);
    SvmModel model = train(sub, train_y, TrainConfig{c, 1e-3, 0});
    const auto preds = predict(model, slice(g_full, test_g, train_g));
    acc_sum += accuracy(preds, test_y);
  }
  return acc_sum / static_cast<double>(k);
}

GridSearchResult run_grid(Context& ctx, std::span<const std::size_t> indices,
                          const GridConfig& grid) {
  validate_grid(grid);
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i : indices)
    (ctx.ds.labels[i] == 1 ? n_pos : n_neg)++;
  const std::size_t min_class = std::min(n_pos, n_neg);
  if (min_class < 2)
    throw ArgumentError(
        "cannot stratify: each class needs >= 2 training instances");
  std::size_t k = grid.inner_folds;
  if (min_class < k) {
    k = min_class;
    std::cerr << "warning: shrinking inner folds to " << k
              << " (smallest class has " << min_class << " instances)\n";
  }
  std::vector<int> labels_at;
  labels_at.reserve(indices.size());
  for (std::size_t i : indices) labels_at.push_back(ctx.ds.labels[i]);
  const auto fold_of =
      stratified_folds(labels_at, k, instance_seed(grid.seed, 0x666f6c64));

  const bool flat = ctx.pipeline == Pipeline::flat_vector;
  const std::vector<std::size_t> ranks =
      flat ? std::vector<std::size_t>{0} : grid.rank_grid;
  const std::vector<double> sigmas = ctx.kind == KernelKind::rbf
                                         ? grid.sigma_grid
                                         : std::vector<double>{0.0};

  GridSearchResult res;
  for (std::size_t rank : ranks) {
    for (double sigma : sigmas) {
      const Eigen::MatrixXd g = ctx.full_gram(rank, sigma);
      const KernelSpec spec = ctx.spec_for(sigma);
      for (double c : grid.c_grid) {
        ScoreCell cell{rank, c, sigma, 0.0};
        cell.cv_accuracy = cv_score(g, indices, ctx.ds.labels, fold_of, k, c,
                                    spec, std::max<std::size_t>(rank, 1));
        res.table.push_back(cell);
      }
    }
  }

  // argmax with ties toward smaller R, then smaller C, then larger sigma
  const ScoreCell* best = nullptr;
  for (const auto& cell : res.table) {
    if (!best || cell.cv_accuracy > best->cv_accuracy ||
        (cell.cv_accuracy == best->cv_accuracy &&
         (cell.rank < best->rank ||
          (cell.rank == best->rank &&
           (cell.c < best->c ||
            (cell.c == best->c && cell.sigma > best->sigma))))))
      best = &cell;
  }
  res.rank = best->rank;
  res.c = best->c;
  res.sigma = best->sigma;
  res.best_score = best->cv_accuracy;
  return res;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

GridConfig GridConfig::defaults() {
  GridConfig g;
  for (int e = -5; e <= 9; ++e) g.c_grid.push_back(std::ldexp(1.0, e));
  for (int e = -4; e <= 9; ++e) g.sigma_grid.push_back(std::ldexp(1.0, e));
  for (std::size_t r = 1; r <= 12; ++r) g.rank_grid.push_back(r);
  return g;
}

GridConfig GridConfig::fast() {
  GridConfig g;
  g.c_grid = {0.125, 1.0, 8.0, 64.0};
  g.sigma_grid = {0.25, 1.0, 4.0, 16.0};
  g.rank_grid = {1, 2, 3, 4};
  return g;
}

double accuracy(std::span<const int> predictions,
                std::span<const int> labels) {
  if (predictions.empty() || predictions.size() != labels.size())
    throw ArgumentError("accuracy needs matching non-empty inputs");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    std::span<const int> labels, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0) || !(train_frac < 1.0))
    throw ArgumentError("train_frac must lie in (0, 1)");
  std::vector<std::size_t> train, test;
  for (int cls : {1, -1}) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) pool.push_back(i);
    if (pool.empty()) continue;
    std::mt19937_64 rng(instance_seed(seed, cls == 1 ? 1 : 2));
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t n_train = static_cast<std::size_t>(
        std::lround(train_frac * static_cast<double>(pool.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, pool.size() > 1
                                                      ? pool.size() - 1
                                                      : pool.size());
    train.insert(train.end(), pool.begin(), pool.begin() + n_train);
    test.insert(test.end(), pool.begin() + n_train, pool.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels,
                                          std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("stratified_folds needs k >= 2");
  std::vector<std::size_t> fold_of(labels.size(), 0);
  for (int cls : {1, -1}) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) pool.push_back(i);
    std::mt19937_64 rng(instance_seed(seed, cls == 1 ? 3 : 4));
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t p = 0; p < pool.size(); ++p) fold_of[pool[p]] = p % k;
  }
  return fold_of;
}

GridSearchResult grid_search(const TensorDataset& ds, const GridConfig& grid,
                             KernelKind kind, Pipeline pipeline,
                             const CpOptions& cp_opts, std::size_t threads) {
  const auto idx = all_indices(ds.size());
  return grid_search_subset(ds, idx, grid, kind, pipeline, cp_opts, threads);
}

GridSearchResult grid_search_subset(const TensorDataset& ds,
                                    std::span<const std::size_t> indices,
                                    const GridConfig& grid, KernelKind kind,
                                    Pipeline pipeline,
                                    const CpOptions& cp_opts,
                                    std::size_t threads) {
  Context ctx(ds, cp_opts, pipeline, kind, threads);
  return run_grid(ctx, indices, grid);
}

EvalReport repeated_holdout(const TensorDataset& ds, const GridConfig& grid,
                            std::size_t repeats, double train_frac,
                            KernelKind kind, Pipeline pipeline,
                            const CpOptions& cp_opts, std::size_t threads) {
  validate_grid(grid);
  if (repeats < 1) throw ArgumentError("repeats must be >= 1");
  Context ctx(ds, cp_opts, pipeline, kind, threads);
  EvalReport report;

  for (std::size_t rep = 0; rep < repeats; ++rep) {
    const std::uint64_t rep_seed = instance_seed(grid.seed, rep);
    const auto [train_idx, test_idx] =
        stratified_split(ds.labels, train_frac, rep_seed);
    if (test_idx.empty())
      throw ArgumentError("holdout split left no test instances");

    GridConfig rep_grid = grid;
    rep_grid.seed = rep_seed;
    const auto t_search = Clock::now();
    GridSearchResult best;
    try {
      best = run_grid(ctx, train_idx, rep_grid);
    } catch (const Error& e) {
      throw Error("repeat " + std::to_string(rep) + " (seed " +
                  std::to_string(rep_seed) + ") failed: " + e.what());
    }
    report.search_seconds += seconds_since(t_search);

    const auto t_eval = Clock::now();
    const Eigen::MatrixXd g = ctx.full_gram(best.rank, best.sigma);
    const KernelSpec spec = ctx.spec_for(best.sigma);
    std::vector<int> train_y, test_y;
    for (std::size_t i : train_idx) train_y.push_back(ds.labels[i]);
    for (std::size_t i : test_idx) test_y.push_back(ds.labels[i]);
    GramMatrix sub(slice(g, train_idx, train_idx), spec,
                   std::max<std::size_t>(best.rank, 1));
    SvmModel model = train(sub, train_y, TrainConfig{best.c, 1e-3, 0});
    const auto preds = predict(model, slice(g, test_idx, train_idx));
    const double acc = accuracy(preds, test_y);
    report.eval_seconds += seconds_since(t_eval);

    report.repeats.push_back(
        {rep, rep_seed, best.rank, best.c, best.sigma, acc});
  }

  double mean = 0.0;
  for (const auto& r : report.repeats) mean += r.test_accuracy;
  mean /= static_cast<double>(report.repeats.size());
  double var = 0.0;
  for (const auto& r : report.repeats) {
    const double d = r.test_accuracy - mean;
    var += d * d;
  }
  var /= static_cast<double>(report.repeats.size());
  report.mean_accuracy = mean;
  report.std_accuracy = std::sqrt(var);
  report.factorize_seconds = ctx.factorize_seconds;
  return report;
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out = "repeat,seed,rank,c,sigma,test_accuracy\n";
  char line[160];
  for (const auto& r : report.repeats) {
    std::snprintf(line, sizeof line, "%zu,%llu,%zu,%.10g,%.10g,%.6f\n",
                  r.repeat, static_cast<unsigned long long>(r.split_seed),
                  r.rank, r.c, r.sigma, r.test_accuracy);
    out += line;
  }
  return out;
}

std::string score_table_csv(const GridSearchResult& result) {
  std::string out = "rank,c,sigma,cv_accuracy\n";
  char line[128];
  for (const auto& cell : result.table) {
    std::snprintf(line, sizeof line, "%zu,%.10g,%.10g,%.6f\n", cell.rank,
                  cell.c, cell.sigma, cell.cv_accuracy);
    out += line;
  }
  return out;
}

std::string format_mean_std(const EvalReport& report) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f (%.6f)", report.mean_accuracy,
                report.std_accuracy);
  return buf;
}

}  // namespace dusk

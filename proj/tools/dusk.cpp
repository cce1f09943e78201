#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dusk/bench.hpp"
#include "dusk/data_io.hpp"
#include "dusk/modelsel.hpp"

namespace {

std::vector<std::size_t> parse_shape(const std::string& s) {
  std::vector<std::size_t> shape;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    const long v = std::stol(part);
    if (v <= 0) throw dusk::ArgumentError("shape dimensions must be positive");
    shape.push_back(static_cast<std::size_t>(v));
  }
  if (shape.empty()) throw dusk::ArgumentError("empty shape");
  return shape;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(std::stod(part));
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const long v = std::stol(part);
    if (v <= 0) throw dusk::ArgumentError("list entries must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  dusk::atomic_write(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

dusk::TensorDataset load_any(const std::string& path, bool normalize) {
  dusk::TensorDataset ds =
      path.ends_with(".txt") ? dusk::load_dataset_text(path)
                             : dusk::load_dataset(path);
  if (normalize) ds = dusk::rescale_dataset(ds);
  return ds;
}

dusk::KernelKind parse_kernel(const std::string& k) {
  if (k == "linear") return dusk::KernelKind::linear;
  if (k == "rbf") return dusk::KernelKind::rbf;
  throw dusk::ArgumentError("--kernel must be linear or rbf");
}

struct GridFlags {
  std::string c_grid, sigma_grid, rank_grid;
  std::size_t folds = 5;
  bool fast = false;

  dusk::GridConfig build(std::uint64_t seed) const {
    dusk::GridConfig g =
        fast ? dusk::GridConfig::fast() : dusk::GridConfig::defaults();
    if (!c_grid.empty()) g.c_grid = parse_double_list(c_grid);
    if (!sigma_grid.empty()) g.sigma_grid = parse_double_list(sigma_grid);
    if (!rank_grid.empty()) g.rank_grid = parse_size_list(rank_grid);
    g.inner_folds = folds;
    g.seed = seed;
    return g;
  }
};

void add_grid_flags(CLI::App* cmd, GridFlags& gf) {
  cmd->add_option("--c-grid", gf.c_grid, "comma list of C values");
  cmd->add_option("--sigma-grid", gf.sigma_grid, "comma list of sigma values");
  cmd->add_option("--rank-grid", gf.rank_grid, "comma list of ranks");
  cmd->add_option("--folds", gf.folds, "inner CV folds (default 5)");
  cmd->add_flag("--fast", gf.fast, "coarse grids and few repeats (CI profile)");
}

dusk::Pipeline parse_pipeline(const std::string& p) {
  if (p == "dusk") return dusk::Pipeline::cp_dusk;
  if (p == "vector") return dusk::Pipeline::flat_vector;
  throw dusk::ArgumentError("--pipeline must be dusk or vector");
}

int run(int argc, char** argv) {
  CLI::App app{"Tensor classification with CP-compressed kernel SVMs"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_shape = "10x10x10", synth_out;
  std::size_t synth_rank = 2, synth_m = 40;
  double synth_noise = 0.1;
  std::uint64_t synth_seed = 0;
  synth->add_option("--shape", synth_shape, "instance shape, e.g. 10x10x10");
  synth->add_option("--rank", synth_rank, "ground-truth signal rank");
  synth->add_option("--m", synth_m, "total instances (split evenly)");
  synth->add_option("--noise", synth_noise, "relative noise level");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("-o,--out", synth_out, "output .dten path")->required();

  // factorize
  auto* fact = app.add_subcommand("factorize", "CP-factorize a dataset");
  std::string fact_in, fact_out;
  std::size_t fact_rank = 1, fact_max_iter = 500;
  double fact_tol = 1e-6;
  std::uint64_t fact_seed = 0;
  bool fact_ls = false, fact_norm = false;
  fact->add_option("input", fact_in, "dataset path")->required();
  fact->add_option("--rank", fact_rank, "CP rank")->required();
  fact->add_option("--seed", fact_seed, "factorization seed");
  fact->add_option("--max-iter", fact_max_iter, "ALS iteration cap");
  fact->add_option("--tol", fact_tol, "relative fit-change tolerance");
  fact->add_flag("--line-search", fact_ls, "enable extrapolation");
  fact->add_flag("--normalize", fact_norm, "per-instance [0,1] rescale");
  fact->add_option("-o,--out", fact_out, "output .dcpc cache")->required();

  // gram
  auto* gramc = app.add_subcommand("gram", "kernel matrix from a CP cache");
  std::string gram_cache, gram_kernel = "rbf", gram_out;
  double gram_sigma = 1.0;
  std::size_t gram_threads = 1;
  gramc->add_option("cache", gram_cache, "input .dcpc cache")->required();
  gramc->add_option("--kernel", gram_kernel, "linear|rbf");
  gramc->add_option("--sigma", gram_sigma, "rbf bandwidth");
  gramc->add_option("--threads", gram_threads, "worker threads");
  gramc->add_option("-o,--out", gram_out, "output .dgrm path")->required();

  // train
  auto* traincmd = app.add_subcommand("train", "train a kernel SVM");
  std::string train_in, train_kernel = "rbf", train_out;
  std::size_t train_rank = 2, train_threads = 1;
  double train_sigma = 1.0, train_c = 1.0;
  std::uint64_t train_seed = 0;
  bool train_norm = false;
  traincmd->add_option("input", train_in, "dataset path")->required();
  traincmd->add_option("--rank", train_rank, "CP rank");
  traincmd->add_option("--kernel", train_kernel, "linear|rbf");
  traincmd->add_option("--sigma", train_sigma, "rbf bandwidth");
  traincmd->add_option("--c", train_c, "margin/error trade-off");
  traincmd->add_option("--seed", train_seed, "factorization seed");
  traincmd->add_option("--threads", train_threads, "worker threads");
  traincmd->add_flag("--normalize", train_norm, "per-instance [0,1] rescale");
  traincmd->add_option("-o,--out", train_out, "output .dsvm path")->required();

  // predict
  auto* pred = app.add_subcommand("predict", "classify a dataset");
  std::string pred_model, pred_in, pred_out;
  std::uint64_t pred_seed = 0;
  bool pred_norm = false;
  pred->add_option("--model", pred_model, "trained .dsvm model")->required();
  pred->add_option("input", pred_in, "dataset path")->required();
  pred->add_option("--seed", pred_seed, "test factorization seed");
  pred->add_flag("--normalize", pred_norm, "per-instance [0,1] rescale");
  pred->add_option("-o,--out", pred_out, "predictions CSV path");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "repeated holdout evaluation");
  std::string eval_in, eval_kernel = "rbf", eval_pipeline = "dusk", eval_out;
  std::size_t eval_repeats = 50, eval_threads = 1;
  double eval_frac = 0.8;
  std::uint64_t eval_seed = 0;
  bool eval_norm = false;
  GridFlags eval_grid;
  eval->add_option("input", eval_in, "dataset path")->required();
  eval->add_option("--repeats", eval_repeats, "holdout repeats (default 50)");
  eval->add_option("--train-frac", eval_frac, "training fraction (default 0.8)");
  eval->add_option("--seed", eval_seed, "protocol seed");
  eval->add_option("--kernel", eval_kernel, "linear|rbf");
  eval->add_option("--pipeline", eval_pipeline, "dusk|vector");
  eval->add_option("--threads", eval_threads, "worker threads");
  eval->add_flag("--normalize", eval_norm, "per-instance [0,1] rescale");
  eval->add_option("-o,--out", eval_out, "per-repeat CSV path");
  add_grid_flags(eval, eval_grid);

  // gridsearch
  auto* gs = app.add_subcommand("gridsearch", "grid search on a full dataset");
  std::string gs_in, gs_kernel = "rbf", gs_pipeline = "dusk", gs_out;
  std::uint64_t gs_seed = 0;
  std::size_t gs_threads = 1;
  bool gs_norm = false;
  GridFlags gs_grid;
  gs->add_option("input", gs_in, "dataset path")->required();
  gs->add_option("--seed", gs_seed, "fold seed");
  gs->add_option("--kernel", gs_kernel, "linear|rbf");
  gs->add_option("--pipeline", gs_pipeline, "dusk|vector");
  gs->add_option("--threads", gs_threads, "worker threads");
  gs->add_flag("--normalize", gs_norm, "per-instance [0,1] rescale");
  gs->add_option("-o,--out", gs_out, "score table CSV path");
  add_grid_flags(gs, gs_grid);

  // bench
  auto* bench = app.add_subcommand("bench", "kernel scaling measurements");
  std::string bench_out;
  std::uint64_t bench_seed = 0;
  bench->add_option("--seed", bench_seed, "bench seed");
  bench->add_option("-o,--out", bench_out, "timing CSV path");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    if (synth_m < 2 || synth_m % 2 != 0)
      throw dusk::ArgumentError("--m must be an even count >= 2");
    auto res = dusk::synth_lowrank(parse_shape(synth_shape), synth_rank,
                                   synth_m / 2, synth_noise, synth_seed);
    dusk::save_dataset(res.dataset, synth_out);
    std::printf("wrote %s (M=%zu, hash %016llx)\n", synth_out.c_str(),
                res.dataset.size(),
                static_cast<unsigned long long>(res.dataset.content_hash));
    return 0;
  }

  if (fact->parsed()) {
    const auto ds = load_any(fact_in, fact_norm);
    dusk::CpOptions opts{fact_max_iter, fact_tol, fact_seed, fact_ls};
    const auto cache = dusk::cache_load_or_compute(ds, fact_rank, opts, fact_out);
    std::printf("wrote %s (M=%zu, R=%zu)\n", fact_out.c_str(),
                cache.models.size(), cache.rank);
    return 0;
  }

  if (gramc->parsed()) {
    const auto cache = dusk::load_cp_cache(gram_cache);
    const auto kind = parse_kernel(gram_kernel);
    const auto spec = kind == dusk::KernelKind::rbf
                          ? dusk::KernelSpec::rbf(gram_sigma)
                          : dusk::KernelSpec::linear();
    const auto g = dusk::gram(spec, cache.models, gram_threads);
    dusk::save_gram(g, gram_out);
    std::printf("wrote %s (%zux%zu)\n", gram_out.c_str(), g.size(), g.size());
    return 0;
  }

  if (traincmd->parsed()) {
    const auto ds = load_any(train_in, train_norm);
    const auto kind = parse_kernel(train_kernel);
    const auto spec = kind == dusk::KernelKind::rbf
                          ? dusk::KernelSpec::rbf(train_sigma)
                          : dusk::KernelSpec::linear();
    dusk::CpOptions opts;
    opts.seed = train_seed;
    const auto models = dusk::factorize_dataset(ds.instances, train_rank, opts);
    const auto g = dusk::gram(spec, models, train_threads);
    const auto model =
        dusk::train(g, ds.labels, dusk::TrainConfig{train_c, 1e-3, 0}, models);
    dusk::save_svm_model(model, train_out);
    std::printf("wrote %s (%zu support vectors of %zu)\n", train_out.c_str(),
                model.support_indices.size(), ds.size());
    return 0;
  }

  if (pred->parsed()) {
    const auto model = dusk::load_svm_model(pred_model);
    if (model.support_models.empty())
      throw dusk::ArgumentError("model retains no support representations");
    const auto ds = load_any(pred_in, pred_norm);
    dusk::CpOptions opts;
    opts.seed = pred_seed;
    const auto test_models =
        dusk::factorize_dataset(ds.instances, model.rank, opts);
    const auto cross =
        dusk::gram_cross(model.spec, model.support_models, test_models);
    const auto values = dusk::decision_values_support(model, cross);
    const auto preds = dusk::predict_support(model, cross);
    if (!pred_out.empty()) {
      std::string csv = "index,decision_value,prediction,label\n";
      char line[96];
      for (std::size_t i = 0; i < preds.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%.10g,%d,%d\n", i, values[i],
                      preds[i], ds.labels[i]);
        csv += line;
      }
      write_text(pred_out, csv);
    }
    std::printf("accuracy %.6f\n", dusk::accuracy(preds, ds.labels));
    return 0;
  }

  if (eval->parsed()) {
    const auto ds = load_any(eval_in, eval_norm);
    if (eval_grid.fast && eval->count("--repeats") == 0) eval_repeats = 5;
    const auto grid = eval_grid.build(eval_seed);
    const auto report = dusk::repeated_holdout(
        ds, grid, eval_repeats, eval_frac, parse_kernel(eval_kernel),
        parse_pipeline(eval_pipeline), dusk::CpOptions{}, eval_threads);
    if (!eval_out.empty()) write_text(eval_out, dusk::eval_report_csv(report));
    std::fprintf(stderr, "timing: factorize %.2fs search %.2fs eval %.2fs\n",
                 report.factorize_seconds, report.search_seconds,
                 report.eval_seconds);
    std::printf("%s\n", dusk::format_mean_std(report).c_str());
    return 0;
  }

  if (gs->parsed()) {
    const auto ds = load_any(gs_in, gs_norm);
    const auto grid = gs_grid.build(gs_seed);
    const auto res = dusk::grid_search(ds, grid, parse_kernel(gs_kernel),
                                       parse_pipeline(gs_pipeline),
                                       dusk::CpOptions{}, gs_threads);
    if (!gs_out.empty()) write_text(gs_out, dusk::score_table_csv(res));
    std::printf("best rank=%zu c=%.10g sigma=%.10g cv_accuracy=%.6f\n",
                res.rank, res.c, res.sigma, res.best_score);
    return 0;
  }

  if (bench->parsed()) {
    const auto res = dusk::run_scaling_bench(bench_seed);
    if (!bench_out.empty()) write_text(bench_out, dusk::bench_csv(res));
    std::printf("rank slope %.3f (expect ~2), dim slope %.3f (expect ~1)\n",
                res.rank_slope, res.dim_slope);
    std::printf("gram timing: cp-kernel %.4fs, flat rbf %.4fs\n",
                res.dusk_gram_seconds, res.flat_gram_seconds);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dusk::ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const dusk::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const dusk::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

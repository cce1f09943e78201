// End-to-end acceptance checks. Each numbered check prints one PASS/FAIL
// line; the process exit code is the number of failed required checks.

#include <chrono>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "dusk/bench.hpp"
#include "dusk/data_io.hpp"
#include "dusk/modelsel.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int number, const char* name, bool pass, double seconds,
            const std::string& detail, bool required = true) {
  std::printf("%2d. %-38s %s  (%.1fs)  %s%s\n", number, name,
              pass ? "PASS" : "FAIL", seconds, detail.c_str(),
              !pass && !required ? "  [informational]" : "");
  if (!pass && required) ++g_failures;
  std::fflush(stdout);
}

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1: linear-constituent kernel on exact CP pairs equals the dense inner
// product.
void check_linear_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const std::vector<std::vector<std::size_t>> shapes{
      {8, 9, 10}, {5, 6, 4}, {3, 7, 2}, {6, 6}, {4, 3, 5, 2}};
  bool pass = true;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto& shape = shapes[trial % shapes.size()];
    const std::size_t rank = 1 + trial % 3;
    const auto [x, xd] = oracle::random_exact_cp(shape, rank, rng);
    const auto [y, yd] = oracle::random_exact_cp(shape, rank, rng);
    const double k = dusk::dusk(dusk::KernelSpec::linear(), x, y);
    const double dense = dusk::inner_product(xd, yd);
    const double rel = std::abs(k - dense) / std::max(1e-300, std::abs(dense));
    worst = std::max(worst, rel);
    pass = pass && rel <= 1e-10;
  }
  const double sec = elapsed(t0);
  char buf[64];
  std::snprintf(buf, sizeof buf, "max rel err %.2e", worst);
  report(1, "linear kernel equals dense product", pass && sec < 5.0, sec, buf);
}

// 2: rbf kernel matrices stay positive semidefinite.
void check_psd_grams() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(102);
  const double sigmas[] = {0.25, 1.0, 4.0};
  bool pass = true;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rank = 1 + trial % 5;
    std::vector<dusk::CpModel> models;
    for (int i = 0; i < 30; ++i)
      models.push_back(oracle::random_exact_cp({5, 4, 6}, rank, rng).first);
    const auto g =
        dusk::gram(dusk::KernelSpec::rbf(sigmas[trial % 3]), models, 4);
    const auto [lo, hi] = dusk::eigen_range(g.entries());
    worst = std::min(worst, lo / hi);
    pass = pass && lo >= -1e-8 * hi;
  }
  const double sec = elapsed(t0);
  char buf[64];
  std::snprintf(buf, sizeof buf, "worst min/max eig ratio %.2e", worst);
  report(2, "rbf kernel matrices are PSD", pass && sec < 30.0, sec, buf);
}

// 3: order-1 rank-1 representations reduce to the classical vector rbf.
void check_vector_degeneration() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(103);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int m = 15;
  const double sigma = 0.5;
  std::vector<std::vector<double>> vecs(m, std::vector<double>(8));
  std::vector<dusk::CpModel> models;
  for (auto& v : vecs) {
    for (double& e : v) e = gauss(rng);
    models.push_back(oracle::model_from_columns({8}, {{v}}));
  }
  const auto g = dusk::gram(dusk::KernelSpec::rbf(sigma), models);
  bool pass = true;
  double worst = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double ref = oracle::rbf_vector(sigma, vecs[i], vecs[j]);
      const double rel = std::abs(g.entries()(i, j) - ref) / std::abs(ref);
      worst = std::max(worst, rel);
      pass = pass && rel <= 1e-12;
    }
  char buf[64];
  std::snprintf(buf, sizeof buf, "max rel err %.2e", worst);
  report(3, "degenerates to the vector rbf", pass, elapsed(t0), buf);
}

// 4: solver optimality against an independent QP reference.
void check_smo_against_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(104);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  bool pass = true;
  double worst_gap = 0.0, worst_kkt = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 6 + trial % 7;
    std::vector<std::vector<double>> pts(m, std::vector<double>(3));
    std::vector<int> y(m);
    for (int i = 0; i < m; ++i) {
      for (double& e : pts[i]) e = gauss(rng);
      y[i] = coin(rng) ? 1 : -1;
    }
    y[0] = 1;
    y[1] = -1;
    const bool linear = trial % 2 == 0;
    Eigen::MatrixXd k(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double dot = 0.0;
        for (int d = 0; d < 3; ++d) dot += pts[i][d] * pts[j][d];
        k(i, j) = linear ? dot : oracle::rbf_vector(1.0, pts[i], pts[j]);
      }
    const double c = trial % 3 == 0 ? 0.5 : 4.0;
    const auto spec =
        linear ? dusk::KernelSpec::linear() : dusk::KernelSpec::rbf(1.0);
    const dusk::GramMatrix gram(k, spec, 1);
    const auto model = dusk::train(gram, y, {c, 1e-6, 0});

    const double dual = dusk::dual_objective(gram, y, model.alphas);
    const double ref = oracle::qp_dual_objective(k, y, c);
    worst_gap = std::max(worst_gap, std::abs(dual - ref));

    double sum_ay = 0.0;
    std::vector<double> f(m);
    for (int i = 0; i < m; ++i) {
      sum_ay += model.alphas[i] * y[i];
      f[i] = -y[i];
      for (int j = 0; j < m; ++j)
        f[i] += model.alphas[j] * y[j] * k(i, j);
    }
    worst_sum = std::max(worst_sum, std::abs(sum_ay));
    double f_up = 1e300, f_low = -1e300;
    for (int i = 0; i < m; ++i) {
      const bool up = (y[i] == 1 && model.alphas[i] < c) ||
                      (y[i] == -1 && model.alphas[i] > 0);
      const bool low = (y[i] == -1 && model.alphas[i] < c) ||
                       (y[i] == 1 && model.alphas[i] > 0);
      if (up) f_up = std::min(f_up, f[i]);
      if (low) f_low = std::max(f_low, f[i]);
    }
    worst_kkt = std::max(worst_kkt, f_low - f_up);
  }
  pass = worst_gap <= 1e-4 && worst_kkt <= 1e-3 && worst_sum <= 1e-9;
  const double sec = elapsed(t0);
  char buf[96];
  std::snprintf(buf, sizeof buf, "gap %.2e kkt %.2e sum %.2e", worst_gap,
                worst_kkt, worst_sum);
  report(4, "solver matches the QP reference", pass && sec < 20.0, sec, buf);
}

// 5: rank-one recovery with a monotone fit history.
void check_rank_one_recovery() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(105);
  std::uniform_int_distribution<std::size_t> dim(2, 20), order(1, 4);
  bool pass = true;
  double worst_fit = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> shape(order(rng));
    for (auto& d : shape) d = dim(rng);
    const auto fs = oracle::random_factors(shape, rng);
    const auto x = dusk::tensor_product(fs);
    const auto [model, rep] = dusk::cp_als(
        x, 1, {.max_iter = 50, .seed = static_cast<std::uint64_t>(trial)});
    worst_fit = std::min(worst_fit, rep.final_fit);
    pass = pass && rep.final_fit >= 1.0 - 1e-8 && rep.iterations <= 50;
    for (std::size_t i = 1; i < rep.fit_history.size(); ++i)
      pass = pass && rep.fit_history[i] >= rep.fit_history[i - 1] - 1e-10;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "worst fit %.12f", worst_fit);
  report(5, "rank-one tensors recovered exactly", pass, elapsed(t0), buf);
}

// 6: tensor-kernel pipeline at least matches the flat-vector baseline on
// low-rank synthetic data.
void check_pipeline_comparison() {
  const auto t0 = Clock::now();
  dusk::GridConfig grid = dusk::GridConfig::fast();
  double mean_dusk = 0.0, mean_flat = 0.0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto ds =
        dusk::synth_lowrank({10, 10, 10}, 2, 20, 0.1,
                            static_cast<std::uint64_t>(seed))
            .dataset;
    grid.seed = static_cast<std::uint64_t>(seed);
    const auto rd = dusk::repeated_holdout(ds, grid, 1, 0.8,
                                           dusk::KernelKind::rbf,
                                           dusk::Pipeline::cp_dusk, {}, 4);
    const auto rf = dusk::repeated_holdout(ds, grid, 1, 0.8,
                                           dusk::KernelKind::rbf,
                                           dusk::Pipeline::flat_vector, {}, 4);
    mean_dusk += rd.mean_accuracy;
    mean_flat += rf.mean_accuracy;
  }
  mean_dusk /= seeds;
  mean_flat /= seeds;
  const double sec = elapsed(t0);
  char buf[96];
  std::snprintf(buf, sizeof buf, "tensor %.4f vs flat %.4f", mean_dusk,
                mean_flat);
  report(6, "tensor pipeline beats flat baseline",
         mean_dusk >= mean_flat && sec < 600.0, sec, buf);
}

// 7: the accuracy-vs-rank curve peaks at a small rank on rank-2 data.
void check_rank_curve_peak() {
  const auto t0 = Clock::now();
  dusk::GridConfig grid = dusk::GridConfig::fast();
  grid.rank_grid = {1, 2, 3, 4, 5, 6, 7, 8};
  int small_peaks = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto ds =
        dusk::synth_lowrank({10, 10, 10}, 2, 20, 0.1,
                            static_cast<std::uint64_t>(1000 + seed))
            .dataset;
    grid.seed = static_cast<std::uint64_t>(seed);
    const auto res =
        dusk::grid_search(ds, grid, dusk::KernelKind::rbf,
                          dusk::Pipeline::cp_dusk, {}, 4);
    if (res.rank >= 1 && res.rank <= 6) ++small_peaks;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d of %d peaks in 1..6", small_peaks, seeds);
  report(7, "best rank concentrates near truth", small_peaks >= 15,
         elapsed(t0), buf);
}

// 8: kernel cost scaling trends (informational).
void check_scaling_trends() {
  const auto t0 = Clock::now();
  const auto res = dusk::run_scaling_bench(1);
  const bool pass = res.rank_slope >= 1.5 && res.rank_slope <= 2.5 &&
                    res.dim_slope >= 0.5 && res.dim_slope <= 1.5;
  char buf[96];
  std::snprintf(buf, sizeof buf, "rank slope %.2f, dim slope %.2f",
                res.rank_slope, res.dim_slope);
  report(8, "kernel cost scaling trends", pass, elapsed(t0), buf, false);
  if (!pass)
    std::printf("    note: timing slopes are machine dependent; rerun on an"
                " idle machine before treating this as a defect\n");
}

// 9: the evaluate subcommand emits byte-identical CSV at any thread count.
void check_cli_determinism() {
  const auto t0 = Clock::now();
#ifndef DUSK_CLI_PATH
  report(9, "command line output is deterministic", false, 0.0,
         "CLI path not configured");
  return;
#else
  const std::string cli = DUSK_CLI_PATH;
  const fs::path dir = fs::temp_directory_path() / "dusk_acceptance";
  fs::create_directories(dir);
  const std::string data = (dir / "d.dten").string();
  auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  bool pass =
      run("synth --shape 6x6x6 --rank 2 --m 16 --noise 0.1 --seed 7 -o " +
          data) == 0;
  std::vector<std::string> csvs;
  for (const std::string threads : {"1", "1", "3"}) {
    const std::string out = (dir / ("e" + threads + ".csv")).string();
    pass = pass && run("evaluate " + data +
                       " --fast --repeats 2 --seed 7 --threads " + threads +
                       " -o " + out) == 0;
    std::ifstream in(out, std::ios::binary);
    csvs.emplace_back(std::istreambuf_iterator<char>(in),
                      std::istreambuf_iterator<char>());
  }
  pass = pass && csvs.size() == 3 && !csvs[0].empty() && csvs[0] == csvs[1] &&
         csvs[0] == csvs[2];
  report(9, "command line output is deterministic", pass, elapsed(t0),
         pass ? "3 runs, identical bytes" : "outputs differ or runs failed");
#endif
}

// 10: serialization round trip and malformed-file diagnostics.
void check_serialization() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(110);
  std::vector<dusk::DenseTensor> xs;
  std::vector<int> ys;
  for (int i = 0; i < 100; ++i) {
    xs.push_back(oracle::random_tensor({4, 3, 2}, rng));
    ys.push_back(i % 2 == 0 ? 1 : -1);
  }
  const auto ds = dusk::make_dataset(std::move(xs), std::move(ys), "big");
  const fs::path dir = fs::temp_directory_path() / "dusk_acceptance";
  fs::create_directories(dir);
  const auto p = dir / "big.dten";
  dusk::save_dataset(ds, p);
  const auto back = dusk::load_dataset(p);
  bool pass = back.content_hash == ds.content_hash && back.size() == 100;

  std::ifstream in(p, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  auto expect = [&](std::vector<std::uint8_t> mutated, auto check_throw) {
    const auto bad = dir / "bad.dten";
    std::ofstream out(bad, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(mutated.data()),
              static_cast<std::streamsize>(mutated.size()));
    out.close();
    return check_throw(bad);
  };

  auto b = bytes;
  b[0] = 'Z';
  pass = pass && expect(b, [](const fs::path& f) {
    try { dusk::load_dataset(f); } catch (const dusk::MagicError&) { return true; }
    catch (...) {}
    return false;
  });
  b = bytes;
  b.resize(b.size() - 3);
  pass = pass && expect(b, [](const fs::path& f) {
    try { dusk::load_dataset(f); } catch (const dusk::TruncationError&) { return true; }
    catch (...) {}
    return false;
  });
  b = bytes;
  b[4 + 2 + 4 + 12 + 4] = 5;  // first label byte
  pass = pass && expect(b, [](const fs::path& f) {
    try { dusk::load_dataset(f); } catch (const dusk::LabelError&) { return true; }
    catch (...) {}
    return false;
  });
  b = bytes;
  const double nan = std::nan("");
  std::memcpy(b.data() + 4 + 2 + 4 + 12 + 4 + 1, &nan, sizeof nan);
  pass = pass && expect(b, [](const fs::path& f) {
    try { dusk::load_dataset(f); } catch (const dusk::ValueError&) { return true; }
    catch (...) {}
    return false;
  });

  report(10, "serialization and error diagnostics", pass, elapsed(t0),
         pass ? "round trip + 4 fixtures" : "mismatch");
}

}  // namespace

int main() {
  check_linear_identity();
  check_psd_grams();
  check_vector_degeneration();
  check_smo_against_oracle();
  check_rank_one_recovery();
  check_pipeline_comparison();
  check_rank_curve_peak();
  check_scaling_trends();
  check_cli_determinism();
  check_serialization();
  if (g_failures > 0)
    std::printf("%d required check(s) failed\n", g_failures);
  else
    std::printf("all required checks passed\n");
  return g_failures;
}

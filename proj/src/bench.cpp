#include "dusk/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "dusk/kernels.hpp"

namespace dusk {

namespace {

using Clock = std::chrono::steady_clock;

CpModel random_model(const std::vector<std::size_t>& shape, std::size_t rank,
                     std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::MatrixXd> factors(shape.size());
  for (std::size_t m = 0; m < shape.size(); ++m) {
    factors[m].resize(static_cast<Eigen::Index>(shape[m]),
                      static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < factors[m].rows(); ++i)
      for (Eigen::Index r = 0; r < factors[m].cols(); ++r)
        factors[m](i, r) = gauss(rng);
  }
  return CpModel(shape, std::move(factors));
}

volatile double g_sink = 0.0;

// Time one kernel evaluation by repeating until ~25 ms elapsed; best of
// three trials to damp scheduler noise.
double time_eval(const CpModel& x, const CpModel& y, const KernelSpec& spec) {
  double best = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 3; ++trial) {
    std::size_t evals = 0;
    const auto t0 = Clock::now();
    double elapsed = 0.0;
    while (elapsed < 0.025) {
      for (int k = 0; k < 16; ++k) g_sink = dusk(spec, x, y);
      evals += 16;
      elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    }
    best = std::min(best, elapsed / static_cast<double>(evals));
  }
  return best;
}

}  // namespace

double loglog_slope(const std::vector<BenchPoint>& points) {
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : points) {
    const double lx = std::log(p.x), ly = std::log(p.seconds_per_eval);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

BenchResult run_scaling_bench(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const KernelSpec spec = KernelSpec::rbf(1.0);
  BenchResult res;

  const std::vector<std::size_t> fixed_shape{16, 16, 16};
  for (std::size_t rank : {4, 8, 16, 32}) {
    const CpModel x = random_model(fixed_shape, rank, rng);
    const CpModel y = random_model(fixed_shape, rank, rng);
    res.rank_sweep.push_back(
        {static_cast<double>(rank), time_eval(x, y, spec)});
  }
  res.rank_slope = loglog_slope(res.rank_sweep);

  for (std::size_t dim : {8, 16, 32, 64}) {
    const std::vector<std::size_t> shape{dim, dim, dim};
    const CpModel x = random_model(shape, 4, rng);
    const CpModel y = random_model(shape, 4, rng);
    res.dim_sweep.push_back(
        {static_cast<double>(3 * dim), time_eval(x, y, spec)});
  }
  res.dim_slope = loglog_slope(res.dim_sweep);

  // Paired Gram timing: CP-kernel Gram vs plain RBF on flattened tensors.
  {
    const std::vector<std::size_t> shape{20, 20, 20};
    const std::size_t m = 50, rank = 3;
    std::vector<CpModel> models;
    for (std::size_t i = 0; i < m; ++i)
      models.push_back(random_model(shape, rank, rng));
    auto t0 = Clock::now();
    const GramMatrix g = gram(spec, models);
    res.dusk_gram_seconds =
        std::chrono::duration<double>(Clock::now() - t0).count();
    g_sink = g.entries()(0, 0);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> flat(m,
                                          std::vector<double>(numel(shape)));
    for (auto& v : flat)
      for (double& e : v) e = gauss(rng);
    t0 = Clock::now();
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j)
        acc += vector_kernel(spec, flat[i], flat[j]);
    g_sink = acc;
    res.flat_gram_seconds =
        std::chrono::duration<double>(Clock::now() - t0).count();
  }
  return res;
}

std::string bench_csv(const BenchResult& result) {
  std::string out = "sweep,x,seconds_per_eval\n";
  char line[96];
  for (const auto& p : result.rank_sweep) {
    std::snprintf(line, sizeof line, "rank,%.10g,%.6e\n", p.x,
                  p.seconds_per_eval);
    out += line;
  }
  for (const auto& p : result.dim_sweep) {
    std::snprintf(line, sizeof line, "dim_sum,%.10g,%.6e\n", p.x,
                  p.seconds_per_eval);
    out += line;
  }
  std::snprintf(line, sizeof line, "slope,rank,%.4f\n", result.rank_slope);
  out += line;
  std::snprintf(line, sizeof line, "slope,dim_sum,%.4f\n", result.dim_slope);
  out += line;
  return out;
}

}  // namespace dusk

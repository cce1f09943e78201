#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dusk {

// Scaling measurements for the tensor kernel: per-evaluation wall time
// swept over rank at a fixed shape and over the summed mode dimensions at a
// fixed rank, plus log-log slopes fitted to both sweeps. The kernel cost is
// quadratic in rank and linear in the dimension sum, so the expected slopes
// are about 2 and 1.
struct BenchPoint {
  double x = 0.0;  // rank, or sum of mode dimensions
  double seconds_per_eval = 0.0;
};

struct BenchResult {
  std::vector<BenchPoint> rank_sweep;
  std::vector<BenchPoint> dim_sweep;
  double rank_slope = 0.0;
  double dim_slope = 0.0;
  // paired Gram timing at shape 20x20x20, R=3, M=50
  double dusk_gram_seconds = 0.0;
  double flat_gram_seconds = 0.0;
};

double loglog_slope(const std::vector<BenchPoint>& points);

BenchResult run_scaling_bench(std::uint64_t seed);

std::string bench_csv(const BenchResult& result);

}  // namespace dusk

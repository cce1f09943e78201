#include "dusk/cp.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <random>

namespace dusk {

namespace {

std::atomic<std::uint64_t> g_sweeps{0};

// Khatri-Rao product of the factor matrices of all modes except `skip`,
// modes in increasing order (earlier modes vary slower). Column ordering
// matches the column ordering of unfold(x, skip).
Eigen::MatrixXd khatri_rao_skip(const std::vector<Eigen::MatrixXd>& factors,
                                std::size_t skip) {
  const std::size_t rank = static_cast<std::size_t>(factors[0].cols());
  std::size_t rows = 1;
  for (std::size_t m = 0; m < factors.size(); ++m)
    if (m != skip) rows *= static_cast<std::size_t>(factors[m].rows());
  Eigen::MatrixXd kr(static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(rank));
  for (std::size_t r = 0; r < rank; ++r) {
    Eigen::VectorXd acc = Eigen::VectorXd::Ones(1);
    for (std::size_t m = 0; m < factors.size(); ++m) {
      if (m == skip) continue;
      const Eigen::VectorXd col = factors[m].col(static_cast<Eigen::Index>(r));
      Eigen::VectorXd next(acc.size() * col.size());
      for (Eigen::Index i = 0; i < acc.size(); ++i)
        next.segment(i * col.size(), col.size()) = acc(i) * col;
      acc = std::move(next);
    }
    kr.col(static_cast<Eigen::Index>(r)) = acc;
  }
  return kr;
}

// Moore-Penrose pseudo-inverse with singular values below
// 1e-12 * sigma_max truncated; keeps ALS stable on rank-deficient Gramians.
Eigen::MatrixXd pinv(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-12 * (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::VectorXd inv = sv;
  for (Eigen::Index i = 0; i < inv.size(); ++i)
    inv(i) = sv(i) > cutoff ? 1.0 / sv(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Scale column r of every mode so each carries lambda_r^(1/N), where
// lambda_r is the product of the per-mode column norms. The represented
// tensor is unchanged.
void equalize_columns(std::vector<Eigen::MatrixXd>& factors) {
  const std::size_t n_modes = factors.size();
  const Eigen::Index rank = factors[0].cols();
  for (Eigen::Index r = 0; r < rank; ++r) {
    std::vector<double> norms(n_modes);
    double lambda = 1.0;
    for (std::size_t m = 0; m < n_modes; ++m) {
      norms[m] = factors[m].col(r).norm();
      lambda *= norms[m];
    }
    if (lambda <= 0.0) {
      for (std::size_t m = 0; m < n_modes; ++m) factors[m].col(r).setZero();
      continue;
    }
    const double target = std::pow(lambda, 1.0 / static_cast<double>(n_modes));
    for (std::size_t m = 0; m < n_modes; ++m)
      factors[m].col(r) *= target / norms[m];
  }
}

double reconstruction_error(const DenseTensor& x,
                            const std::vector<Eigen::MatrixXd>& factors) {
  const auto& sh = x.shape();
  const Eigen::Index rank = factors[0].cols();
  double err2 = 0.0;
  std::vector<std::size_t> idx(sh.size(), 0);
  for (std::size_t lin = 0; lin < x.size(); ++lin) {
    double v = 0.0;
    for (Eigen::Index r = 0; r < rank; ++r) {
      double p = 1.0;
      for (std::size_t m = 0; m < sh.size(); ++m)
        p *= factors[m](static_cast<Eigen::Index>(idx[m]), r);
      v += p;
    }
    const double d = x.values()[lin] - v;
    err2 += d * d;
    for (std::size_t m = sh.size(); m-- > 0;) {
      if (++idx[m] < sh[m]) break;
      idx[m] = 0;
    }
  }
  return std::sqrt(err2);
}

}  // namespace

CpModel::CpModel(std::vector<std::size_t> shape,
                 std::vector<Eigen::MatrixXd> factors)
    : shape_(std::move(shape)), factors_(std::move(factors)) {
  if (shape_.empty() || factors_.size() != shape_.size())
    throw ShapeError("CpModel needs one factor matrix per mode");
  rank_ = static_cast<std::size_t>(factors_[0].cols());
  if (rank_ == 0) throw RankError("CpModel rank must be >= 1");
  for (std::size_t m = 0; m < shape_.size(); ++m) {
    if (static_cast<std::size_t>(factors_[m].rows()) != shape_[m] ||
        static_cast<std::size_t>(factors_[m].cols()) != rank_)
      throw ShapeError("factor matrix dimensions do not match shape/rank");
    if (!factors_[m].allFinite())
      throw ArgumentError("non-finite factor entry");
  }
}

std::pair<CpModel, CpFitReport> cp_als(const DenseTensor& x, std::size_t rank,
                                       const CpOptions& opts) {
  if (rank == 0) throw ArgumentError("cp_als rank must be >= 1");
  if (opts.max_iter < 1) throw ArgumentError("cp_als max_iter must be >= 1");
  if (!(opts.tol > 0.0)) throw ArgumentError("cp_als tol must be > 0");
  const double x_norm = norm(x);
  if (x_norm == 0.0)
    throw DegenerateInputError("cp_als: zero tensor has no defined fit");

  const auto& sh = x.shape();
  const std::size_t n_modes = sh.size();
  const Eigen::Index r_cols = static_cast<Eigen::Index>(rank);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::MatrixXd> factors(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    factors[m].resize(static_cast<Eigen::Index>(sh[m]), r_cols);
    for (Eigen::Index i = 0; i < factors[m].rows(); ++i)
      for (Eigen::Index r = 0; r < r_cols; ++r) factors[m](i, r) = gauss(rng);
  }

  std::vector<Eigen::MatrixXd> unfoldings(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) unfoldings[m] = unfold(x, m);

  std::vector<Eigen::MatrixXd> grams(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m)
    grams[m] = factors[m].transpose() * factors[m];

  CpFitReport report;
  double prev_fit = -std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> prev_factors;

  for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
    g_sweeps.fetch_add(1, std::memory_order_relaxed);
    std::vector<Eigen::MatrixXd> before_sweep = factors;

    for (std::size_t n = 0; n < n_modes; ++n) {
      Eigen::MatrixXd v = Eigen::MatrixXd::Ones(r_cols, r_cols);
      for (std::size_t m = 0; m < n_modes; ++m)
        if (m != n) v = v.cwiseProduct(grams[m]);
      const Eigen::MatrixXd mttkrp = unfoldings[n] * khatri_rao_skip(factors, n);
      factors[n] = mttkrp * pinv(v);
      grams[n] = factors[n].transpose() * factors[n];
    }

    equalize_columns(factors);
    for (std::size_t m = 0; m < n_modes; ++m)
      grams[m] = factors[m].transpose() * factors[m];
    double err = reconstruction_error(x, factors);

    // Optional extrapolation past the sweep; kept only when it lowers the
    // reconstruction error, which preserves fit monotonicity.
    if (opts.line_search && !prev_factors.empty()) {
      const double step = std::cbrt(static_cast<double>(iter + 1));
      std::vector<Eigen::MatrixXd> cand(n_modes);
      for (std::size_t m = 0; m < n_modes; ++m)
        cand[m] = prev_factors[m] + step * (factors[m] - prev_factors[m]);
      const double cand_err = reconstruction_error(x, cand);
      if (cand_err < err) {
        factors = std::move(cand);
        equalize_columns(factors);
        for (std::size_t m = 0; m < n_modes; ++m)
          grams[m] = factors[m].transpose() * factors[m];
        err = reconstruction_error(x, factors);
      }
    }
    prev_factors = before_sweep;

    const double fit = 1.0 - err / x_norm;
    report.fit_history.push_back(fit);
    report.iterations = iter + 1;
    if (iter > 0 && std::abs(fit - prev_fit) < opts.tol) {
      report.converged = true;
      prev_fit = fit;
      break;
    }
    prev_fit = fit;
  }

  // Resolve the sign ambiguity of each component deterministically: flip
  // every non-leading mode whose dominant entry is negative, compensating in
  // mode 0 so the represented tensor is unchanged. Factorizations of similar
  // tensors then land near each other in factor space.
  for (Eigen::Index r = 0; r < r_cols; ++r) {
    for (std::size_t m = 1; m < n_modes; ++m) {
      Eigen::Index dom = 0;
      factors[m].col(r).cwiseAbs().maxCoeff(&dom);
      if (factors[m](dom, r) < 0.0) {
        factors[m].col(r) = -factors[m].col(r);
        factors[0].col(r) = -factors[0].col(r);
      }
    }
  }

  report.final_fit = prev_fit;
  return {CpModel(sh, std::move(factors)), std::move(report)};
}

DenseTensor reconstruct(const CpModel& m) {
  const auto& sh = m.shape();
  const Eigen::Index rank = static_cast<Eigen::Index>(m.rank());
  std::vector<double> vals(numel(sh));
  std::vector<std::size_t> idx(sh.size(), 0);
  for (std::size_t lin = 0; lin < vals.size(); ++lin) {
    double v = 0.0;
    for (Eigen::Index r = 0; r < rank; ++r) {
      double p = 1.0;
      for (std::size_t mm = 0; mm < sh.size(); ++mm)
        p *= m.factor(mm)(static_cast<Eigen::Index>(idx[mm]), r);
      v += p;
    }
    vals[lin] = v;
    for (std::size_t mm = sh.size(); mm-- > 0;) {
      if (++idx[mm] < sh[mm]) break;
      idx[mm] = 0;
    }
  }
  return DenseTensor(sh, std::move(vals));
}

std::uint64_t instance_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<CpModel> factorize_dataset(std::span<const DenseTensor> xs,
                                       std::size_t rank,
                                       const CpOptions& opts) {
  if (xs.empty()) throw ArgumentError("factorize_dataset: empty dataset");
  for (const auto& x : xs)
    if (x.shape() != xs[0].shape())
      throw ShapeError("factorize_dataset: instances must share one shape");
  std::vector<CpModel> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CpOptions per = opts;
    per.seed = instance_seed(opts.seed, i);
    try {
      out.push_back(cp_als(xs[i], rank, per).first);
    } catch (const DegenerateInputError& e) {
      throw DegenerateInputError("instance " + std::to_string(i) + ": " +
                                 e.what());
    } catch (const ArgumentError& e) {
      throw ArgumentError("instance " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::uint64_t als_sweep_count() {
  return g_sweeps.load(std::memory_order_relaxed);
}

void reset_als_sweep_count() { g_sweeps.store(0, std::memory_order_relaxed); }

}  // namespace dusk

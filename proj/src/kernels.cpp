#include "dusk/kernels.hpp"

#include <cmath>
#include <thread>

namespace dusk {

namespace {

void check_compatible(const CpModel& x, const CpModel& y) {
  if (x.shape() != y.shape())
    throw ShapeError("kernel operands must share a shape");
  if (x.rank() != y.rank())
    throw RankError("kernel operands must share a rank");
}

}  // namespace

KernelSpec KernelSpec::rbf(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ArgumentError("rbf bandwidth must be finite and > 0");
  return {KernelKind::rbf, sigma};
}

double vector_kernel(const KernelSpec& spec, std::span<const double> u,
                     std::span<const double> v) {
  if (u.size() != v.size())
    throw ShapeError("vector_kernel length mismatch");
  if (spec.kind == KernelKind::linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    d2 += d * d;
  }
  return std::exp(-spec.sigma * d2);
}

double naive_rank_one_kernel(const KernelSpec& spec, const CpModel& x,
                             const CpModel& y) {
  if (x.rank() != 1 || y.rank() != 1)
    throw RankError("naive_rank_one_kernel requires rank-1 operands");
  check_compatible(x, y);
  double p = 1.0;
  for (std::size_t m = 0; m < x.order(); ++m) {
    const auto& xm = x.factor(m);
    const auto& ym = y.factor(m);
    p *= vector_kernel(spec, {xm.col(0).data(), (std::size_t)xm.rows()},
                       {ym.col(0).data(), (std::size_t)ym.rows()});
  }
  return p;
}

Eigen::MatrixXd dusk_sqdist_table(const CpModel& x, const CpModel& y) {
  check_compatible(x, y);
  const Eigen::Index r = static_cast<Eigen::Index>(x.rank());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(r, r);
  for (std::size_t m = 0; m < x.order(); ++m) {
    const auto& xm = x.factor(m);
    const auto& ym = y.factor(m);
    const Eigen::VectorXd xn = xm.colwise().squaredNorm();
    const Eigen::VectorXd yn = ym.colwise().squaredNorm();
    d += xn.replicate(1, r) + yn.transpose().replicate(r, 1) -
         2.0 * (xm.transpose() * ym);
  }
  return d.cwiseMax(0.0);  // roundoff can take tiny distances negative
}

double dusk(const KernelSpec& spec, const CpModel& x, const CpModel& y) {
  check_compatible(x, y);
  const Eigen::Index r = static_cast<Eigen::Index>(x.rank());
  if (spec.kind == KernelKind::linear) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Ones(r, r);
    for (std::size_t m = 0; m < x.order(); ++m)
      h = h.cwiseProduct(x.factor(m).transpose() * y.factor(m));
    return h.sum();
  }
  const Eigen::MatrixXd d = dusk_sqdist_table(x, y);
  return (-spec.sigma * d).array().exp().sum();
}

GramMatrix::GramMatrix(Eigen::MatrixXd entries, KernelSpec spec,
                       std::size_t rank)
    : entries_(std::move(entries)), spec_(spec), rank_(rank) {
  if (entries_.rows() != entries_.cols())
    throw ShapeError("Gram matrix must be square");
}

GramMatrix gram(const KernelSpec& spec, std::span<const CpModel> models,
                std::size_t threads) {
  if (models.empty()) throw ArgumentError("gram: empty model list");
  for (const auto& m : models) check_compatible(models[0], m);
  const std::size_t n = models.size();
  Eigen::MatrixXd g(n, n);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) pairs.emplace_back(i, j);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto [i, j] = pairs[p];
      g(i, j) = dusk(spec, models[i], models[j]);
    }
  };
  if (threads <= 1) {
    work(0, pairs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (pairs.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = std::min(t * chunk, pairs.size());
      const std::size_t e = std::min(b + chunk, pairs.size());
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) g(j, i) = g(i, j);
  return GramMatrix(std::move(g), spec, models[0].rank());
}

Eigen::MatrixXd gram_cross(const KernelSpec& spec,
                           std::span<const CpModel> train,
                           std::span<const CpModel> test,
                           std::size_t threads) {
  if (train.empty()) throw ArgumentError("gram_cross: empty training list");
  for (const auto& m : train) check_compatible(train[0], m);
  for (const auto& m : test) check_compatible(train[0], m);
  Eigen::MatrixXd g(test.size(), train.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t)
      for (std::size_t i = 0; i < train.size(); ++i)
        g(t, i) = dusk(spec, test[t], train[i]);
  };
  if (threads <= 1 || test.size() <= 1) {
    work(0, test.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (test.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t b = std::min(t * chunk, test.size());
      const std::size_t e = std::min(b + chunk, test.size());
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return g;
}

std::pair<double, double> eigen_range(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m,
                                                    Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev(0), ev(ev.size() - 1)};
}

bool is_psd(const Eigen::MatrixXd& m, double tol_factor) {
  const auto [lo, hi] = eigen_range(m);
  return lo >= -tol_factor * std::max(hi, 0.0);
}

}  // namespace dusk

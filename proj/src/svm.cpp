#include "dusk/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dusk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

SvmModel train(const GramMatrix& gram, std::span<const int> labels,
               const TrainConfig& cfg, std::span<const CpModel> models) {
  const std::size_t m = gram.size();
  if (labels.size() != m)
    throw ShapeError("label count does not match Gram size");
  if (!(cfg.c > 0.0) || !(cfg.kkt_tol > 0.0))
    throw ArgumentError("TrainConfig values must be positive");
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1) has_pos = true;
    else if (y == -1) has_neg = true;
    else throw ArgumentError("labels must be -1 or +1");
  }
  if (!has_pos || !has_neg)
    throw DegenerateInputError("training requires both classes");
  if (!is_psd(gram.entries()))
    throw NumericalError("Gram matrix is not positive semidefinite");

  const Eigen::MatrixXd& k = gram.entries();
  const double c = cfg.c;
  std::vector<double> alpha(m, 0.0);
  // f_i = sum_j alpha_j y_j K_ij - y_i; zero alphas give f_i = -y_i.
  std::vector<double> f(m);
  for (std::size_t i = 0; i < m; ++i) f[i] = -static_cast<double>(labels[i]);

  auto in_up = [&](std::size_t i) {
    return (labels[i] == 1 && alpha[i] < c) || (labels[i] == -1 && alpha[i] > 0);
  };
  auto in_low = [&](std::size_t i) {
    return (labels[i] == -1 && alpha[i] < c) || (labels[i] == 1 && alpha[i] > 0);
  };

  // The budget counts consecutive iterations that fail to shrink the best
  // violation gap seen so far; steady progress never exhausts it, a stalled
  // solver does after max_passes full passes' worth of updates.
  const std::size_t passes = cfg.max_passes == 0 ? 10 * m : cfg.max_passes;
  const std::size_t stall_budget = passes * m;
  std::size_t stalled = 0;
  double best_gap = kInf;
  bool converged = false;

  while (true) {
    // Maximal violating pair: i minimizes f over the up set, j maximizes f
    // over the low set. KKT holds when f_j - f_i <= tol.
    std::size_t i = m, j = m;
    double fi = kInf, fj = -kInf;
    for (std::size_t t = 0; t < m; ++t) {
      if (in_up(t) && f[t] < fi) { fi = f[t]; i = t; }
      if (in_low(t) && f[t] > fj) { fj = f[t]; j = t; }
    }
    if (i == m || j == m || fj - fi <= cfg.kkt_tol) {
      converged = true;
      break;
    }
    if (fj - fi < best_gap * (1.0 - 1e-12)) {
      best_gap = fj - fi;
      stalled = 0;
    } else if (++stalled >= stall_budget) {
      break;
    }

    const double eta = k(i, i) + k(j, j) - 2.0 * k(i, j);
    // Feasible step sizes keeping both alphas in [0, C] while preserving
    // sum(alpha * y): alpha_i moves by +y_i * delta, alpha_j by -y_j * delta.
    const double bound_i = labels[i] == 1 ? c - alpha[i] : alpha[i];
    const double bound_j = labels[j] == 1 ? alpha[j] : c - alpha[j];
    double delta = eta > 1e-12 ? (fj - fi) / eta : kInf;
    delta = std::min({delta, bound_i, bound_j});
    if (!(delta > 0.0)) break;  // worst pair still violates but cannot move
    alpha[i] += labels[i] == 1 ? delta : -delta;
    alpha[i] = std::clamp(alpha[i], 0.0, c);
    alpha[j] += labels[j] == 1 ? -delta : delta;
    alpha[j] = std::clamp(alpha[j], 0.0, c);
    for (std::size_t t = 0; t < m; ++t)
      f[t] += delta * (k(t, i) - k(t, j));
  }

  if (!converged)
    throw NumericalError("SMO exhausted its pass budget before reaching tol");

  SvmModel model;
  model.labels.assign(labels.begin(), labels.end());
  model.spec = gram.spec();
  model.rank = gram.rank();
  model.c = c;

  // Bias: mean of -f over free support vectors; otherwise the midpoint of
  // the feasible interval implied by the bound vectors.
  double bias_sum = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < m; ++t) {
    if (alpha[t] > 0.0 && alpha[t] < c) {
      bias_sum += -f[t];
      ++n_free;
    }
  }
  if (n_free > 0) {
    model.bias = bias_sum / static_cast<double>(n_free);
  } else {
    double lo = -kInf, hi = kInf;
    for (std::size_t t = 0; t < m; ++t) {
      if (in_up(t)) hi = std::min(hi, -f[t]);
      if (in_low(t)) lo = std::max(lo, -f[t]);
    }
    model.bias = (lo + hi) / 2.0;
  }

  for (std::size_t t = 0; t < m; ++t) {
    if (alpha[t] > 0.0) {
      model.support_indices.push_back(t);
      if (!models.empty()) model.support_models.push_back(models[t]);
    }
  }
  model.alphas = std::move(alpha);
  return model;
}

std::vector<double> decision_values(const SvmModel& model,
                                    const Eigen::MatrixXd& cross) {
  if (static_cast<std::size_t>(cross.cols()) != model.alphas.size())
    throw ShapeError("cross matrix columns must match training size");
  std::vector<double> out(static_cast<std::size_t>(cross.rows()));
  for (Eigen::Index t = 0; t < cross.rows(); ++t) {
    double v = model.bias;
    for (std::size_t i = 0; i < model.alphas.size(); ++i)
      v += model.alphas[i] * model.labels[i] * cross(t, i);
    out[static_cast<std::size_t>(t)] = v;
  }
  return out;
}

std::vector<double> decision_values_support(const SvmModel& model,
                                            const Eigen::MatrixXd& cross) {
  if (static_cast<std::size_t>(cross.cols()) != model.support_indices.size())
    throw ShapeError("cross matrix columns must match support count");
  std::vector<double> out(static_cast<std::size_t>(cross.rows()));
  for (Eigen::Index t = 0; t < cross.rows(); ++t) {
    double v = model.bias;
    for (std::size_t s = 0; s < model.support_indices.size(); ++s) {
      const std::size_t i = model.support_indices[s];
      v += model.alphas[i] * model.labels[i] * cross(t, s);
    }
    out[static_cast<std::size_t>(t)] = v;
  }
  return out;
}

namespace {
std::vector<int> signs(const std::vector<double>& values) {
  std::vector<int> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = values[i] < 0.0 ? -1 : 1;
  return out;
}
}  // namespace

std::vector<int> predict(const SvmModel& model, const Eigen::MatrixXd& cross) {
  return signs(decision_values(model, cross));
}

std::vector<int> predict_support(const SvmModel& model,
                                 const Eigen::MatrixXd& cross) {
  return signs(decision_values_support(model, cross));
}

double dual_objective(const GramMatrix& gram, std::span<const int> labels,
                      std::span<const double> alphas) {
  const std::size_t m = gram.size();
  if (labels.size() != m || alphas.size() != m)
    throw ShapeError("dual_objective size mismatch");
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    lin += alphas[i];
    for (std::size_t j = 0; j < m; ++j)
      quad += alphas[i] * alphas[j] * labels[i] * labels[j] *
              gram.entries()(i, j);
  }
  return lin - 0.5 * quad;
}

}  // namespace dusk

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <random>

#include "dusk/data_io.hpp"
#include "dusk/modelsel.hpp"
#include "oracles.hpp"

using dusk::GridConfig;
using dusk::KernelKind;
using dusk::Pipeline;

namespace {

dusk::TensorDataset easy_dataset(std::size_t per_class, std::uint64_t seed) {
  return dusk::synth_lowrank({4, 4, 4}, 1, per_class, 0.05, seed).dataset;
}

GridConfig tiny_grid() {
  GridConfig g;
  g.c_grid = {1.0, 8.0};
  g.sigma_grid = {0.5, 2.0};
  g.rank_grid = {1, 2};
  g.inner_folds = 3;
  g.seed = 0;
  return g;
}

}  // namespace

TEST_CASE("accuracy counts exact matches") {
  CHECK(dusk::accuracy(std::vector<int>{1, -1}, std::vector<int>{1, -1}) ==
        1.0);
  CHECK(dusk::accuracy(std::vector<int>{1, -1}, std::vector<int>{-1, 1}) ==
        0.0);
  CHECK(dusk::accuracy(std::vector<int>{1, 1, 1, -1},
                       std::vector<int>{1, 1, 1, 1}) == 0.75);
  CHECK_THROWS_AS(dusk::accuracy(std::vector<int>{}, std::vector<int>{}),
                  dusk::ArgumentError);
  CHECK_THROWS_AS(dusk::accuracy(std::vector<int>{1}, std::vector<int>{1, 1}),
                  dusk::ArgumentError);
}

TEST_CASE("stratified splits preserve class proportions within one") {
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(i < 18 ? 1 : -1);
  const auto [train, test] = dusk::stratified_split(labels, 0.8, 77);
  CHECK(train.size() + test.size() == labels.size());
  std::size_t train_pos = 0;
  for (std::size_t i : train) train_pos += labels[i] == 1;
  // 18 positives at 80% -> 14 or 15; 12 negatives -> 9 or 10
  CHECK(std::llabs(static_cast<long long>(train_pos) - 14) <= 1);
  CHECK(std::llabs(static_cast<long long>(train.size() - train_pos) - 10) <=
        1);
  // disjoint and covering
  std::vector<bool> seen(labels.size(), false);
  for (std::size_t i : train) seen[i] = true;
  for (std::size_t i : test) {
    CHECK_FALSE(seen[i]);
    seen[i] = true;
  }
  for (bool s : seen) CHECK(s);

  const auto again = dusk::stratified_split(labels, 0.8, 77);
  CHECK(again.first == train);
  const auto other = dusk::stratified_split(labels, 0.8, 78);
  CHECK(other.first != train);

  CHECK_THROWS_AS(dusk::stratified_split(labels, 0.0, 1), dusk::ArgumentError);
  CHECK_THROWS_AS(dusk::stratified_split(labels, 1.0, 1), dusk::ArgumentError);
}

TEST_CASE("stratified folds balance each class across folds") {
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) labels.push_back(i < 12 ? 1 : -1);
  const auto fold_of = dusk::stratified_folds(labels, 4, 5);
  std::map<std::pair<std::size_t, int>, std::size_t> count;
  for (std::size_t i = 0; i < labels.size(); ++i)
    count[{fold_of[i], labels[i]}]++;
  for (std::size_t f = 0; f < 4; ++f) {
    CHECK(count[{f, 1}] == 3);
    CHECK(count[{f, -1}] == 2);
  }
  CHECK_THROWS_AS(dusk::stratified_folds(labels, 1, 5), dusk::ArgumentError);
}

TEST_CASE("a single-cell grid is returned verbatim") {
  const auto ds = easy_dataset(6, 100);
  GridConfig g;
  g.c_grid = {4.0};
  g.sigma_grid = {1.0};
  g.rank_grid = {2};
  g.inner_folds = 3;
  const auto res = dusk::grid_search(ds, g, KernelKind::rbf);
  CHECK(res.rank == 2);
  CHECK(res.c == 4.0);
  CHECK(res.sigma == 1.0);
  CHECK(res.table.size() == 1);
}

TEST_CASE("the score table enumerates the full grid") {
  const auto ds = easy_dataset(6, 101);
  const auto g = tiny_grid();
  const auto res = dusk::grid_search(ds, g, KernelKind::rbf);
  CHECK(res.table.size() == 2 * 2 * 2);
  const auto lin = dusk::grid_search(ds, g, KernelKind::linear);
  CHECK(lin.table.size() == 2 * 2);  // sigma collapses for linear constituents
  const auto flat =
      dusk::grid_search(ds, g, KernelKind::rbf, Pipeline::flat_vector);
  CHECK(flat.table.size() == 2 * 2);  // rank collapses for the flat baseline
}

TEST_CASE("ties prefer smaller rank then smaller c then larger sigma") {
  const auto ds = easy_dataset(8, 102);
  const auto g = tiny_grid();
  // well separated classes: every cell scores 1.0, so the tie-break decides
  const auto res = dusk::grid_search(ds, g, KernelKind::rbf);
  REQUIRE(res.best_score == doctest::Approx(1.0));
  bool all_tied = true;
  for (const auto& cell : res.table)
    all_tied = all_tied && cell.cv_accuracy == res.best_score;
  REQUIRE(all_tied);
  CHECK(res.rank == 1);
  CHECK(res.c == 1.0);
  CHECK(res.sigma == 2.0);
}

TEST_CASE("hyperparameter selection ignores labels outside its subset") {
  const auto base = easy_dataset(8, 103);
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < 12; ++i) subset.push_back(i);

  auto flipped_labels = base.labels;
  for (std::size_t i = 12; i < base.size(); ++i)
    flipped_labels[i] = -flipped_labels[i];
  const auto flipped =
      dusk::make_dataset(base.instances, flipped_labels, base.name);

  const auto g = tiny_grid();
  const auto a = dusk::grid_search_subset(base, subset, g, KernelKind::rbf);
  const auto b = dusk::grid_search_subset(flipped, subset, g, KernelKind::rbf);
  CHECK(a.rank == b.rank);
  CHECK(a.c == b.c);
  CHECK(a.sigma == b.sigma);
  REQUIRE(a.table.size() == b.table.size());
  for (std::size_t i = 0; i < a.table.size(); ++i)
    CHECK(a.table[i].cv_accuracy == b.table[i].cv_accuracy);
}

TEST_CASE("impossible stratification is an error, small classes shrink folds") {
  const auto ds = easy_dataset(3, 104);  // 3 per class, fewer than 5 folds
  GridConfig g = tiny_grid();
  g.inner_folds = 5;
  CHECK_NOTHROW(dusk::grid_search(ds, g, KernelKind::rbf));  // shrinks to 3

  std::vector<std::size_t> subset{0, 1, 3};  // only one negative inside
  const auto sub = dusk::make_dataset(ds.instances, ds.labels, ds.name);
  CHECK_THROWS_AS(dusk::grid_search_subset(sub, subset, g, KernelKind::rbf),
                  dusk::ArgumentError);
}

TEST_CASE("repeated holdout on separable data reaches full accuracy") {
  const auto ds = easy_dataset(8, 105);
  const auto report = dusk::repeated_holdout(ds, tiny_grid(), 1, 0.8,
                                             KernelKind::rbf);
  REQUIRE(report.repeats.size() == 1);
  CHECK(report.mean_accuracy == doctest::Approx(1.0));
}

TEST_CASE("the evaluation report is a pure function of its seed") {
  const auto ds = easy_dataset(6, 106);
  const auto r1 = dusk::repeated_holdout(ds, tiny_grid(), 3, 0.8,
                                         KernelKind::rbf);
  const auto r2 = dusk::repeated_holdout(ds, tiny_grid(), 3, 0.8,
                                         KernelKind::rbf);
  CHECK(dusk::eval_report_csv(r1) == dusk::eval_report_csv(r2));
  const auto r4 = dusk::repeated_holdout(ds, tiny_grid(), 3, 0.8,
                                         KernelKind::rbf, Pipeline::cp_dusk,
                                         {}, 4);
  CHECK(dusk::eval_report_csv(r1) == dusk::eval_report_csv(r4));
}

TEST_CASE("summary statistics use the population convention") {
  const auto ds = easy_dataset(6, 107);
  const auto report = dusk::repeated_holdout(ds, tiny_grid(), 4, 0.8,
                                             KernelKind::rbf);
  double mean = 0.0;
  for (const auto& r : report.repeats) mean += r.test_accuracy;
  mean /= 4.0;
  double var = 0.0;
  for (const auto& r : report.repeats) {
    const double d = r.test_accuracy - mean;
    var += d * d;
  }
  var /= 4.0;  // divide by n, not n - 1
  CHECK(report.mean_accuracy == doctest::Approx(mean).epsilon(1e-12));
  CHECK(report.std_accuracy == doctest::Approx(std::sqrt(var)).epsilon(1e-12));

  // the two-value case: accuracies {0.6, 0.8} must summarize as 0.7 (0.1)
  dusk::EvalReport two;
  two.repeats = {{0, 0, 1, 1.0, 1.0, 0.6}, {1, 0, 1, 1.0, 1.0, 0.8}};
  two.mean_accuracy = 0.7;
  two.std_accuracy = 0.1;
  CHECK(dusk::format_mean_std(two) == "0.700000 (0.100000)");
}

TEST_CASE("csv emitters use fixed headers and row counts") {
  const auto ds = easy_dataset(6, 108);
  const auto report =
      dusk::repeated_holdout(ds, tiny_grid(), 2, 0.8, KernelKind::rbf);
  const auto csv = dusk::eval_report_csv(report);
  CHECK(csv.rfind("repeat,seed,rank,c,sigma,test_accuracy\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  const auto gs = dusk::grid_search(ds, tiny_grid(), KernelKind::rbf);
  const auto table = dusk::score_table_csv(gs);
  CHECK(table.rfind("rank,c,sigma,cv_accuracy\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 1 + 8);
}

TEST_CASE("grid validation rejects empty or non-positive grids") {
  const auto ds = easy_dataset(6, 109);
  GridConfig g = tiny_grid();
  g.c_grid.clear();
  CHECK_THROWS_AS(dusk::grid_search(ds, g, KernelKind::rbf),
                  dusk::ArgumentError);
  g = tiny_grid();
  g.sigma_grid = {-1.0};
  CHECK_THROWS_AS(dusk::grid_search(ds, g, KernelKind::rbf),
                  dusk::ArgumentError);
  g = tiny_grid();
  g.rank_grid = {0};
  CHECK_THROWS_AS(dusk::grid_search(ds, g, KernelKind::rbf),
                  dusk::ArgumentError);
  CHECK_THROWS_AS(
      dusk::repeated_holdout(ds, tiny_grid(), 0, 0.8, KernelKind::rbf),
      dusk::ArgumentError);
}

TEST_CASE("default grids span the documented powers of two") {
  const auto g = GridConfig::defaults();
  REQUIRE(g.c_grid.size() == 15);
  CHECK(g.c_grid.front() == doctest::Approx(std::ldexp(1.0, -5)));
  CHECK(g.c_grid.back() == doctest::Approx(512.0));
  REQUIRE(g.sigma_grid.size() == 14);
  CHECK(g.sigma_grid.front() == doctest::Approx(0.0625));
  CHECK(g.sigma_grid.back() == doctest::Approx(512.0));
  REQUIRE(g.rank_grid.size() == 12);
  CHECK(g.rank_grid.front() == 1);
  CHECK(g.rank_grid.back() == 12);
  CHECK(g.inner_folds == 5);
}

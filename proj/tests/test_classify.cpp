#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "spoofprint/classify.hpp"
#include "spoofprint/eval.hpp"
#include "spoofprint/rng.hpp"

using namespace spoofprint;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

struct Data {
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
};

Data gaussian_data(std::uint64_t seed, std::size_t n, std::size_t dim) {
  Xorshift64Star rng(seed);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    const bool spoof = i % 2;
    std::vector<double> row(dim);
    for (std::size_t k = 0; k < dim; ++k) row[k] = rng.normal(spoof ? 0.5 * (k + 1) : 0.0, 1.0 + k);
    d.rows.push_back(row);
    d.labels.push_back(spoof ? Label::spoof : Label::bonafide);
  }
  return d;
}

const std::vector<std::size_t> kOne = {85};

}  // namespace

TEST(ScoreSetTest, Validation) {
  EXPECT_THROW(ScoreSet({}, {1.0}), DataError);
  EXPECT_THROW(ScoreSet({1.0}, {}), DataError);
  EXPECT_THROW(ScoreSet({INFINITY}, {1.0}), DataError);
  const std::vector<double> s = {1, 2, 3};
  const std::vector<Label> l = {Label::bonafide, Label::spoof, Label::spoof};
  const auto set = ScoreSet::from_items(s, l);
  EXPECT_EQ(set.bonafide().size(), 1u);
  EXPECT_EQ(set.spoof().size(), 2u);
  EXPECT_EQ(set.negated().spoof()[1], -3.0);
}

TEST(Score, StandardisationAlgebra) {
  LinearModel m{{1.0}, 0.0, {85}, {0.0}, {1.0}, std::string(kRegistryVersion), ""};
  const std::vector<double> x = {0.3};
  EXPECT_DOUBLE_EQ(score(m, x), 0.3);
  m.means = {2.0};
  m.stds = {2.0};
  const std::vector<double> y = {4.0};
  EXPECT_DOUBLE_EQ(score(m, y), 1.0);
  const std::vector<double> wrong = {1.0, 2.0};
  try {
    score(m, wrong);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos);
  }
}

// Property: score is affine in x with slope w/sigma per coordinate.
TEST(Score, PropertyAffine) {
  Xorshift64Star rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.below(5);
    LinearModel m;
    m.bias = rng.normal();
    for (std::size_t k = 0; k < d; ++k) {
      m.weights.push_back(rng.normal());
      m.means.push_back(rng.normal(0, 5));
      m.stds.push_back(0.1 + rng.uniform() * 3);
      m.feature_indices.push_back(k);
    }
    std::vector<double> x(d), x2(d);
    for (auto& v : x) v = rng.normal(0, 4);
    const std::size_t k = rng.below(d);
    const double delta = rng.normal();
    x2 = x;
    x2[k] += delta;
    EXPECT_NEAR(score(m, x2) - score(m, x), m.weights[k] * delta / m.stds[k], 1e-9);
    double expected = m.bias;
    for (std::size_t j = 0; j < d; ++j) expected += m.weights[j] * (x[j] - m.means[j]) / m.stds[j];
    EXPECT_NEAR(score(m, x), expected, 1e-12);
  }
}

TEST(Train, SeparableOneD) {
  const std::vector<std::vector<double>> rows = {{-1}, {-1}, {1}, {1}};
  const std::vector<Label> labels = {Label::bonafide, Label::bonafide, Label::spoof, Label::spoof};
  const auto r = train_model(rows, labels, kOne);
  EXPECT_GT(r.model.weights[0], 0.0);
  std::vector<double> s;
  for (const auto& row : rows) s.push_back(score(r.model, row));
  EXPECT_LT(std::max(s[0], s[1]), std::min(s[2], s[3]));
  EXPECT_EQ(compute_eer(ScoreSet::from_items(s, labels)).eer_percent, 0.0);
  EXPECT_EQ(r.model.feature_indices, kOne);
}

TEST(Train, LabelSwapFlipsWeight) {
  const auto d = gaussian_data(8, 200, 1);
  auto swapped = d.labels;
  for (auto& l : swapped) l = l == Label::spoof ? Label::bonafide : Label::spoof;
  const auto a = train_model(d.rows, d.labels, kOne).model;
  const auto b = train_model(d.rows, swapped, kOne).model;
  EXPECT_LT(std::abs(a.weights[0] + b.weights[0]), 1e-6);
  EXPECT_LT(std::abs(a.bias + b.bias), 1e-6);

  // Spearman correlation of training scores is -1.
  std::vector<double> sa, sb;
  for (const auto& row : d.rows) {
    sa.push_back(score(a, row));
    sb.push_back(score(b, row));
  }
  EXPECT_NEAR(pearson(ranks(sa), ranks(sb)), -1.0, 1e-12);
}

TEST(Train, LabelSwapMultiDimensionalSpearman) {
  const auto d = gaussian_data(21, 300, 4);
  auto swapped = d.labels;
  for (auto& l : swapped) l = l == Label::spoof ? Label::bonafide : Label::spoof;
  const std::vector<std::size_t> idx = {0, 1, 2, 3};
  const auto a = train_model(d.rows, d.labels, idx).model;
  const auto b = train_model(d.rows, swapped, idx).model;
  std::vector<double> sa, sb;
  for (const auto& row : d.rows) {
    sa.push_back(score(a, row));
    sb.push_back(score(b, row));
  }
  EXPECT_NEAR(pearson(ranks(sa), ranks(sb)), -1.0, 1e-12);
}

TEST(Train, LossMonotone) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (std::size_t dim : {1u, 5u, 24u}) {
      const auto d = gaussian_data(seed, 400, dim);
      std::vector<std::size_t> idx(dim);
      std::iota(idx.begin(), idx.end(), 0);
      const auto r = train_model(d.rows, d.labels, idx);
      ASSERT_EQ(r.loss_history.size(), 1001u);
      EXPECT_NEAR(r.loss_history.front(), std::log(2.0), 1e-12);
      for (std::size_t e = 1; e < r.loss_history.size(); ++e)
        // equal up to rounding once converged
        ASSERT_LE(r.loss_history[e], r.loss_history[e - 1] * (1.0 + 1e-12)) << "epoch " << e;
      EXPECT_LT(r.loss_history.back(), r.loss_history.front());
    }
  }
}

TEST(Train, Errors) {
  const std::vector<std::vector<double>> rows = {{1}, {2}, {3}};
  const std::vector<Label> same = {Label::spoof, Label::spoof, Label::spoof};
  try {
    train_model(rows, same, kOne);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("need both classes"), std::string::npos);
  }
  const std::vector<Label> one_bona = {Label::bonafide, Label::spoof, Label::spoof};
  EXPECT_THROW(train_model(rows, one_bona, kOne), DataError);
  const std::vector<std::vector<double>> nan_rows = {{1}, {NAN}, {3}, {4}};
  const std::vector<Label> l4 = {Label::bonafide, Label::bonafide, Label::spoof, Label::spoof};
  EXPECT_THROW(train_model(nan_rows, l4, kOne), DataError);
  TrainConfig wild;
  wild.lr = 50.0;
  const auto d = gaussian_data(4, 100, 3);
  const std::vector<std::size_t> idx = {0, 1, 2};
  EXPECT_THROW(train_model(d.rows, d.labels, idx, wild), DataError);
}

TEST(Train, ConstantFeatureDropped) {
  auto d = gaussian_data(5, 100, 2);
  for (auto& row : d.rows) row.push_back(7.0);
  const std::vector<std::size_t> idx = {10, 11, 12};
  const auto r = train_model(d.rows, d.labels, idx);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("12"), std::string::npos);
  EXPECT_EQ(r.model.feature_indices, (std::vector<std::size_t>{10, 11}));
  EXPECT_EQ(r.model.dim(), 2u);

  std::vector<std::vector<double>> constant(d.rows.size(), std::vector<double>{1.0});
  EXPECT_THROW(train_model(constant, d.labels, kOne), DataError);
}

TEST(Train, Deterministic) {
  const auto d = gaussian_data(6, 120, 3);
  const std::vector<std::size_t> idx = {0, 1, 2};
  EXPECT_EQ(to_json(train_model(d.rows, d.labels, idx).model).dump(),
            to_json(train_model(d.rows, d.labels, idx).model).dump());
}

TEST(RawScores, Passthrough) {
  const std::vector<std::optional<double>> v = {0.18, 0.09};
  const std::vector<Label> l = {Label::bonafide, Label::spoof};
  const auto s = raw_feature_scores(v, l);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.bonafide()[0], 0.18);
  EXPECT_EQ(s.spoof()[0], 0.09);
  const std::vector<Label> one_class = {Label::spoof, Label::spoof};
  EXPECT_THROW(raw_feature_scores(v, one_class), DataError);
  const std::vector<std::optional<double>> missing = {0.18, std::nullopt};
  EXPECT_THROW(raw_feature_scores(missing, l), DataError);
}

TEST(ModelFile, RoundTrip) {
  const auto d = gaussian_data(7, 60, 2);
  const std::vector<std::size_t> idx = {3, 85};
  auto m = train_model(d.rows, d.labels, idx).model;
  m.trained_on = "A10";
  const auto j = to_json(m);
  EXPECT_EQ(j.begin().key(), "weights");
  const auto back = linear_model_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.feature_indices, m.feature_indices);
  EXPECT_EQ(back.trained_on, "A10");
  auto bad = nlohmann::json::parse(j.dump());
  bad["stds"][0] = 0.0;
  EXPECT_THROW(linear_model_from_json(bad), DataError);
  bad = nlohmann::json::parse(j.dump());
  bad.erase("bias");
  EXPECT_THROW(linear_model_from_json(bad), DataError);
}

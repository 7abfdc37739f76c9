#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofprint/corpus.hpp"
#include "spoofprint/error.hpp"
#include "spoofprint/features.hpp"

namespace spoofprint {

/// Scores of a two-class evaluation set.
class ScoreSet {
 public:
  ScoreSet(std::vector<double> bonafide, std::vector<double> spoof)
      : bonafide_(std::move(bonafide)), spoof_(std::move(spoof)) {
    if (bonafide_.empty() || spoof_.empty()) throw DataError("score set needs both classes");
    for (double s : bonafide_)
      if (!std::isfinite(s)) throw DataError("non-finite score");
    for (double s : spoof_)
      if (!std::isfinite(s)) throw DataError("non-finite score");
  }

  static ScoreSet from_items(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
    std::vector<double> b, s;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == Label::spoof ? s : b).push_back(scores[i]);
    return ScoreSet(std::move(b), std::move(s));
  }

  const std::vector<double>& bonafide() const { return bonafide_; }
  const std::vector<double>& spoof() const { return spoof_; }
  std::size_t size() const { return bonafide_.size() + spoof_.size(); }

  ScoreSet negated() const {
    auto b = bonafide_, s = spoof_;
    for (double& v : b) v = -v;
    for (double& v : s) v = -v;
    return ScoreSet(std::move(b), std::move(s));
  }

 private:
  std::vector<double> bonafide_;
  std::vector<double> spoof_;
};

/// Affine scorer w . z(x) + b over standardised inputs z = (x - mean) / std.
/// Higher scores mean spoof.
struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<std::size_t> feature_indices;
  std::vector<double> means;
  std::vector<double> stds;
  std::string registry_version{kRegistryVersion};
  std::string trained_on;

  std::size_t dim() const { return weights.size(); }
};

/// Score of an already-selected feature row (one value per model weight).
inline double score(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.dim())
    throw DataError("dimension mismatch: model has " + std::to_string(model.dim()) + " inputs, row has " +
                    std::to_string(x.size()));
  double z = model.bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += model.weights[i] * (x[i] - model.means[i]) / model.stds[i];
  return z;
}

/// Selects the model's slots from a full feature vector.
inline std::vector<double> select_features(const FeatureVector& fv, std::span<const std::size_t> indices) {
  std::vector<double> row;
  row.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= kFeatureCount || !fv.values[idx])
      throw DataError("utterance '" + fv.utt_id + "': feature slot " + std::to_string(idx) + " unavailable");
    row.push_back(*fv.values[idx]);
  }
  return row;
}

inline double score(const LinearModel& model, const FeatureVector& fv) {
  return score(model, select_features(fv, model.feature_indices));
}

struct TrainConfig {
  double lr = 0.1;
  std::size_t epochs = 1000;
  double l2 = 1e-4;
};

struct TrainResult {
  LinearModel model;
  std::vector<double> loss_history;  // loss before each epoch, plus the final loss
  std::vector<std::string> warnings;
};

namespace detail {

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// Full-batch gradient descent on the L2-regularised logistic loss (spoof = 1)
/// after z-scoring each column with training statistics. Constant columns are
/// dropped with a warning. Throws if the loss becomes non-finite or increases.
inline TrainResult train_model(const std::vector<std::vector<double>>& rows, std::span<const Label> labels,
                               std::span<const std::size_t> feature_indices, const TrainConfig& cfg = {}) {
  if (rows.size() != labels.size()) throw DataError("rows and labels differ in length");
  std::size_t n_spoof = 0;
  for (Label l : labels) n_spoof += l == Label::spoof ? 1 : 0;
  const std::size_t n_bona = labels.size() - n_spoof;
  if (n_spoof == 0 || n_bona == 0) throw DataError("need both classes");
  if (n_spoof < 2 || n_bona < 2) throw DataError("need at least 2 examples per class");
  const std::size_t width = feature_indices.size();
  if (width == 0) throw DataError("no features selected");
  for (const auto& r : rows) {
    if (r.size() != width) throw DataError("feature row width does not match feature_indices");
    for (double v : r)
      if (!std::isfinite(v)) throw DataError("non-finite feature value in training data");
  }

  TrainResult result;
  const double n = static_cast<double>(rows.size());
  std::vector<std::size_t> keep;
  std::vector<double> means, stds;
  for (std::size_t c = 0; c < width; ++c) {
    double m = 0.0;
    for (const auto& r : rows) m += r[c];
    m /= n;
    double var = 0.0;
    for (const auto& r : rows) var += (r[c] - m) * (r[c] - m);
    const double sd = std::sqrt(var / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(m)))) {
      result.warnings.push_back("feature slot " + std::to_string(feature_indices[c]) +
                                " is constant on the training pool; dropped");
      continue;
    }
    keep.push_back(c);
    means.push_back(m);
    stds.push_back(sd);
  }
  if (keep.empty()) throw DataError("all selected features are constant on the training pool");

  const std::size_t d = keep.size();
  std::vector<double> z(rows.size() * d);
  std::vector<double> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) z[i * d + k] = (rows[i][keep[k]] - means[k]) / stds[k];
    y[i] = labels[i] == Label::spoof ? 1.0 : 0.0;
  }

  std::vector<double> w(d, 0.0), grad(d), margin(rows.size());
  double b = 0.0;
  auto loss_at = [&]() {
    double loss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double s = b;
      for (std::size_t k = 0; k < d; ++k) s += w[k] * z[i * d + k];
      margin[i] = s;
      // -[y log p + (1-y) log(1-p)] with p = sigmoid(s)
      loss += y[i] > 0.5 ? detail::softplus(-s) : detail::softplus(s);
    }
    double reg = 0.0;
    for (double wk : w) reg += wk * wk;
    return loss / n + 0.5 * cfg.l2 * reg;
  };

  double loss = loss_at();
  result.loss_history.reserve(cfg.epochs + 1);
  result.loss_history.push_back(loss);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double r = detail::sigmoid(margin[i]) - y[i];
      grad_b += r;
      for (std::size_t k = 0; k < d; ++k) grad[k] += r * z[i * d + k];
    }
    for (std::size_t k = 0; k < d; ++k) w[k] -= cfg.lr * (grad[k] / n + cfg.l2 * w[k]);
    b -= cfg.lr * grad_b / n;

    const double next = loss_at();
    if (!std::isfinite(next))
      throw DataError("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1));
    if (next > loss + 1e-12 * std::max(1.0, loss))
      throw DataError("training loss increased at epoch " + std::to_string(epoch + 1) + " (" +
                      std::to_string(loss) + " -> " + std::to_string(next) + "); lower the learning rate");
    loss = next;
    result.loss_history.push_back(loss);
  }

  auto& m = result.model;
  m.weights = std::move(w);
  m.bias = b;
  m.means = std::move(means);
  m.stds = std::move(stds);
  for (std::size_t c : keep) m.feature_indices.push_back(feature_indices[c]);
  return result;
}

/// Raw feature values used directly as scores, without training.
inline ScoreSet raw_feature_scores(std::span<const std::optional<double>> values, std::span<const Label> labels) {
  if (values.size() != labels.size()) throw DataError("values and labels differ in length");
  std::vector<double> b, s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) throw DataError("feature slot unavailable for utterance " + std::to_string(i));
    (labels[i] == Label::spoof ? s : b).push_back(*values[i]);
  }
  if (b.empty() || s.empty()) throw DataError("score set needs both classes");
  return ScoreSet(std::move(b), std::move(s));
}

inline nlohmann::ordered_json to_json(const LinearModel& m) {
  nlohmann::ordered_json j;
  j["weights"] = m.weights;
  j["bias"] = m.bias;
  j["feature_indices"] = m.feature_indices;
  j["means"] = m.means;
  j["stds"] = m.stds;
  j["registry_version"] = m.registry_version;
  j["trained_on"] = m.trained_on;
  return j;
}

inline LinearModel linear_model_from_json(const nlohmann::json& j) {
  try {
    LinearModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.feature_indices = j.at("feature_indices").get<std::vector<std::size_t>>();
    m.means = j.at("means").get<std::vector<double>>();
    m.stds = j.at("stds").get<std::vector<double>>();
    m.registry_version = j.at("registry_version").get<std::string>();
    m.trained_on = j.at("trained_on").get<std::string>();
    const std::size_t d = m.weights.size();
    if (d == 0 || m.feature_indices.size() != d || m.means.size() != d || m.stds.size() != d)
      throw DataError("model: inconsistent dimensions");
    for (double s : m.stds)
      if (!(s > 0.0)) throw DataError("model: standardisation std must be positive");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  }
}

}  // namespace spoofprint

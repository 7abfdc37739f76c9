#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofprint/classify.hpp"
#include "spoofprint/corpus.hpp"
#include "spoofprint/error.hpp"
#include "spoofprint/features.hpp"

namespace spoofprint {

enum class Polarity { fixed_higher_is_spoof, best_of_both };

struct EerResult {
  double eer_percent = 0.0;
  double threshold = 0.0;  // operating point in the original score space
  bool inverted = false;   // best_of_both picked "lower is spoof"
};

namespace detail {

inline EerResult eer_fixed(const std::vector<double>& bona_in, const std::vector<double>& spoof_in) {
  std::vector<double> bona = bona_in, spoof = spoof_in;
  std::sort(bona.begin(), bona.end());
  std::sort(spoof.begin(), spoof.end());
  std::vector<double> uniq;
  uniq.reserve(bona.size() + spoof.size());
  std::merge(bona.begin(), bona.end(), spoof.begin(), spoof.end(), std::back_inserter(uniq));
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  const double nb = static_cast<double>(bona.size());
  const double ns = static_cast<double>(spoof.size());
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Sweep point k: threshold -inf (k = 0), midpoint between uniq[k-1] and
  // uniq[k], or +inf (k = uniq.size()). Scores >= t count as spoof.
  auto threshold_at = [&](std::size_t k) {
    if (k == 0) return -inf;
    if (k == uniq.size()) return inf;
    return 0.5 * (uniq[k - 1] + uniq[k]);
  };
  std::size_t bona_below = 0, spoof_below = 0;  // scores < current threshold
  double prev_fpr = 1.0, prev_fnr = 0.0, prev_t = -inf;
  for (std::size_t k = 1; k <= uniq.size(); ++k) {
    const double t = threshold_at(k);
    while (bona_below < bona.size() && bona[bona_below] < t) ++bona_below;
    while (spoof_below < spoof.size() && spoof[spoof_below] < t) ++spoof_below;
    const double fpr = (nb - static_cast<double>(bona_below)) / nb;
    const double fnr = static_cast<double>(spoof_below) / ns;
    const double d_prev = prev_fpr - prev_fnr;
    const double d = fpr - fnr;
    if (d <= 0.0) {
      const double alpha = d_prev / (d_prev - d);
      const double eer = prev_fpr + alpha * (fpr - prev_fpr);
      double thr;
      if (std::isinf(prev_t)) thr = std::isinf(t) ? 0.0 : t;
      else if (std::isinf(t)) thr = prev_t;
      else thr = prev_t + alpha * (t - prev_t);
      return {100.0 * eer, thr, false};
    }
    prev_fpr = fpr;
    prev_fnr = fnr;
    prev_t = t;
  }
  return {0.0, 0.0, false};  // unreachable: d = -1 at +inf
}

}  // namespace detail

/// Equal error rate by a threshold sweep over midpoints of consecutive unique
/// scores plus +-inf, with linear interpolation at the FPR/FNR crossing.
/// best_of_both also evaluates the negated scores and keeps the smaller EER.
inline EerResult compute_eer(const ScoreSet& s, Polarity polarity = Polarity::fixed_higher_is_spoof) {
  auto fixed = detail::eer_fixed(s.bonafide(), s.spoof());
  if (polarity == Polarity::fixed_higher_is_spoof) return fixed;
  const auto neg = s.negated();
  auto flipped = detail::eer_fixed(neg.bonafide(), neg.spoof());
  if (flipped.eer_percent < fixed.eer_percent) {
    flipped.threshold = -flipped.threshold;
    flipped.inverted = true;
    return flipped;
  }
  return fixed;
}

// ---- protocol data selection ----

/// Labelled rows of one attack's evaluation set: bona fide from the pool plus Aj.
struct ProtocolSplit {
  std::vector<const FeatureVector*> bonafide;
  std::vector<const FeatureVector*> spoof;
};

inline ProtocolSplit select_split(const FeatureTable& features, const PoolAssignment& pools, Pool pool,
                                  AttackId attack) {
  ProtocolSplit split;
  for (const auto& [id, fv] : features) {
    if (!fv.label) throw DataError("feature row '" + id + "' has no label");
    if (!pools.contains(id, pool)) continue;
    if (*fv.label == Label::bonafide) split.bonafide.push_back(&fv);
    else if (fv.attack == attack) split.spoof.push_back(&fv);
  }
  if (split.spoof.empty())
    throw DataError("attack " + attack.str() + " absent from the " +
                    (pool == Pool::train_pool ? std::string("training") : std::string("evaluation")) + " pool");
  if (split.bonafide.empty()) throw DataError("no bona fide utterances in the pool");
  return split;
}

inline std::vector<AttackId> attacks_in(const FeatureTable& features) {
  std::set<AttackId> s;
  for (const auto& [id, fv] : features)
    if (fv.attack) s.insert(*fv.attack);
  return {s.begin(), s.end()};
}

inline ScoreSet slot_scores(const ProtocolSplit& split, std::size_t slot_index) {
  std::vector<double> b, s;
  auto value = [&](const FeatureVector* fv) {
    const auto& v = fv->values[slot_index];
    if (!v) throw DataError("feature slot " + std::to_string(slot_index) + " unavailable for '" + fv->utt_id + "'");
    return *v;
  };
  for (const auto* fv : split.bonafide) b.push_back(value(fv));
  for (const auto* fv : split.spoof) s.push_back(value(fv));
  return ScoreSet(std::move(b), std::move(s));
}

inline ScoreSet model_scores(const LinearModel& model, const ProtocolSplit& split) {
  std::vector<double> b, s;
  for (const auto* fv : split.bonafide) b.push_back(score(model, *fv));
  for (const auto* fv : split.spoof) s.push_back(score(model, *fv));
  return ScoreSet(std::move(b), std::move(s));
}

struct RankedFeature {
  std::size_t index;
  double train_eer;
};

/// Ranks implemented slots by best_of_both EER of the raw value on the
/// training pool (bona fide vs `attack`); ties go to the lower index.
inline std::vector<RankedFeature> rank_features(const FeatureTable& features, const PoolAssignment& pools,
                                                AttackId attack, std::size_t k,
                                                const FeatureRegistry& registry = default_registry()) {
  const auto split = select_split(features, pools, Pool::train_pool, attack);
  std::vector<RankedFeature> ranked;
  for (std::size_t idx : registry.implemented())
    ranked.push_back({idx, compute_eer(slot_scores(split, idx), Polarity::best_of_both).eer_percent});
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedFeature& a, const RankedFeature& b) {
    return a.train_eer < b.train_eer || (a.train_eer == b.train_eer && a.index < b.index);
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

// ---- Experiment A: in-domain ----

struct IdRow {
  AttackId attack;
  std::size_t feature_index;
  double train_eer;  // ranking EER on the training pool
  double test_eer;   // trained model, fixed polarity, evaluation pool
};

struct IdResult {
  std::vector<IdRow> rows;
  std::vector<LinearModel> models;  // parallel to rows
};

/// Fixed-polarity EER of a trained model on bona fide + `attack` from `pool`.
inline double evaluate_model(const LinearModel& model, const FeatureTable& features, const PoolAssignment& pools,
                             AttackId attack, Pool pool = Pool::eval_pool) {
  return compute_eer(model_scores(model, select_split(features, pools, pool, attack))).eer_percent;
}

inline LinearModel train_on_attack(const FeatureTable& features, const PoolAssignment& pools, AttackId attack,
                                   std::span<const std::size_t> slots, const TrainConfig& cfg,
                                   std::vector<std::string>* warnings = nullptr) {
  const auto split = select_split(features, pools, Pool::train_pool, attack);
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  for (const auto* fv : split.bonafide) {
    rows.push_back(select_features(*fv, slots));
    labels.push_back(Label::bonafide);
  }
  for (const auto* fv : split.spoof) {
    rows.push_back(select_features(*fv, slots));
    labels.push_back(Label::spoof);
  }
  auto result = train_model(rows, labels, slots, cfg);
  if (warnings) warnings->insert(warnings->end(), result.warnings.begin(), result.warnings.end());
  result.model.trained_on = attack.str();
  return std::move(result.model);
}

inline IdResult run_id_protocol(const FeatureTable& features, const PoolAssignment& pools,
                                const std::vector<AttackId>& attacks, std::size_t k = 2,
                                const TrainConfig& cfg = {}, const FeatureRegistry& registry = default_registry()) {
  IdResult out;
  for (AttackId a : attacks) {
    for (const auto& rf : rank_features(features, pools, a, k, registry)) {
      const std::size_t slot_index[] = {rf.index};
      auto model = train_on_attack(features, pools, a, slot_index, cfg);
      out.rows.push_back({a, rf.index, rf.train_eer, evaluate_model(model, features, pools, a)});
      out.models.push_back(std::move(model));
    }
  }
  return out;
}

// ---- Experiment B: out-of-domain ----

struct OodRowKey {
  AttackId train_attack;
  std::optional<std::size_t> feature_index;  // nullopt: all-feature model
};

/// Rows: trained (attack, feature) models. Columns: evaluation attacks.
struct OodMatrix {
  std::vector<OodRowKey> rows;
  std::vector<AttackId> cols;
  std::vector<std::vector<double>> cells;
};

inline OodMatrix run_ood_protocol(const FeatureTable& features, const PoolAssignment& pools, const IdResult& id,
                                  const std::vector<AttackId>& eval_attacks) {
  OodMatrix m;
  m.cols = eval_attacks;
  for (std::size_t r = 0; r < id.rows.size(); ++r) {
    m.rows.push_back({id.rows[r].attack, id.rows[r].feature_index});
    std::vector<double> cells;
    for (AttackId eval : eval_attacks) cells.push_back(evaluate_model(id.models[r], features, pools, eval));
    m.cells.push_back(std::move(cells));
  }
  return m;
}

/// Logistic regression on every implemented slot, trained per attack and
/// evaluated against every attack.
inline OodMatrix run_all_feature_protocol(const FeatureTable& features, const PoolAssignment& pools,
                                          const std::vector<AttackId>& attacks, const TrainConfig& cfg = {},
                                          const FeatureRegistry& registry = default_registry(),
                                          std::vector<std::string>* warnings = nullptr) {
  const auto slots = registry.implemented();
  OodMatrix m;
  m.cols = attacks;
  for (AttackId a : attacks) {
    const auto model = train_on_attack(features, pools, a, slots, cfg, warnings);
    m.rows.push_back({a, std::nullopt});
    std::vector<double> cells;
    for (AttackId eval : attacks) cells.push_back(evaluate_model(model, features, pools, eval));
    m.cells.push_back(std::move(cells));
  }
  return m;
}

// ---- aggregation ----

struct AttackAggregate {
  AttackId attack;
  double id_eer;                 // mean of the diagonal cells of this attack's rows
  std::optional<double> ood_eer; // mean of the off-diagonal cells; nullopt with one column
};

struct QuadrantStat {
  std::optional<double> mean;
  std::optional<double> stddev;
  std::size_t cells = 0;
};

struct Aggregates {
  std::vector<AttackAggregate> per_attack;
  QuadrantStat train_train;  // trained on A01-A08, evaluated on A01-A08
  QuadrantStat dev_dev;      // A09-A16 both ways
  QuadrantStat cross;        // one side in each partition
};

inline Aggregates aggregate_id_ood(const OodMatrix& m) {
  Aggregates out;
  std::map<AttackId, std::pair<std::vector<double>, std::vector<double>>> by_attack;
  std::vector<double> tt, dd, cross;
  std::vector<AttackId> order;
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    const AttackId train = m.rows[r].train_attack;
    if (!by_attack.count(train)) order.push_back(train);
    auto& [id_cells, ood_cells] = by_attack[train];
    bool has_diag = false;
    for (std::size_t c = 0; c < m.cols.size(); ++c) {
      const double v = m.cells[r][c];
      if (m.cols[c] == train) {
        id_cells.push_back(v);
        has_diag = true;
        continue;
      }
      ood_cells.push_back(v);
      const bool train_part = attack_metadata(train).partition == Partition::train;
      const bool eval_part = attack_metadata(m.cols[c]).partition == Partition::train;
      (train_part == eval_part ? (train_part ? tt : dd) : cross).push_back(v);
    }
    if (!has_diag) throw DataError("OOD matrix row " + train.str() + " has no in-domain column");
  }
  for (AttackId a : order) {
    const auto& [id_cells, ood_cells] = by_attack[a];
    AttackAggregate agg{a, mean_of(id_cells), std::nullopt};
    if (!ood_cells.empty()) agg.ood_eer = mean_of(ood_cells);
    out.per_attack.push_back(agg);
  }
  auto stat = [](const std::vector<double>& v) {
    QuadrantStat q;
    q.cells = v.size();
    if (!v.empty()) {
      q.mean = mean_of(v);
      q.stddev = pop_stddev(v);
    }
    return q;
  };
  out.train_train = stat(tt);
  out.dev_dev = stat(dd);
  out.cross = stat(cross);
  return out;
}

// ---- Experiment C: external embeddings ----

/// Row-major matrix of per-utterance embedding vectors.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(std::vector<std::string> ids, std::size_t dim, std::vector<double> values)
      : ids_(std::move(ids)), dim_(dim), values_(std::move(values)) {
    if (dim_ == 0) throw DataError("embeddings: zero columns");
    if (values_.size() != ids_.size() * dim_) throw DataError("embeddings: matrix is not rectangular");
    for (double v : values_)
      if (!std::isfinite(v)) throw DataError("embeddings: non-finite value");
    for (std::size_t i = 0; i < ids_.size(); ++i)
      if (!index_.emplace(ids_[i], i).second) throw DataError("embeddings: duplicate utt_id '" + ids_[i] + "'");
  }

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }

  std::optional<std::size_t> row_of(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  double at(std::size_t row, std::size_t col) const { return values_[row * dim_ + col]; }

 private:
  std::vector<std::string> ids_;
  std::size_t dim_;
  std::vector<double> values_;
  std::map<std::string, std::size_t> index_;
};

/// JSON lines: {"utt_id": ..., "values": [D reals]}.
inline EmbeddingMatrix read_embeddings_jsonl(std::istream& in, const std::string& source = "embeddings") {
  std::vector<std::string> ids;
  std::vector<double> values;
  std::size_t dim = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      auto row = j.at("values").get<std::vector<double>>();
      if (ids.empty()) dim = row.size();
      if (row.size() != dim)
        throw DataError("expected " + std::to_string(dim) + " values, got " + std::to_string(row.size()));
      ids.push_back(j.at("utt_id").get<std::string>());
      values.insert(values.end(), row.begin(), row.end());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (ids.empty()) throw DataError(source + ": no embedding rows");
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

/// Headerless CSV of values plus a sidecar file with one utt_id per line.
inline EmbeddingMatrix read_embeddings_csv(std::istream& csv, std::istream& ids_in,
                                           const std::string& source = "embeddings") {
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(ids_in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  std::vector<double> values;
  std::size_t dim = 0, rows = 0, line_no = 0;
  while (std::getline(csv, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError(source + ":" + std::to_string(line_no) + ": not a number '" + cell + "'");
      }
      ++count;
    }
    if (rows == 0) dim = count;
    if (count != dim)
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) + " columns");
    ++rows;
  }
  if (rows != ids.size())
    throw DataError(source + ": " + std::to_string(rows) + " rows but " + std::to_string(ids.size()) + " ids");
  if (rows == 0) throw DataError(source + ": no embedding rows");
  return EmbeddingMatrix(std::move(ids), dim, std::move(values));
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path,
                                       std::optional<std::filesystem::path> ids_path = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file '" + path.string() + "'");
  if (path.extension() == ".csv") {
    const auto sidecar = ids_path.value_or(std::filesystem::path(path.string() + ".ids"));
    std::ifstream ids(sidecar);
    if (!ids) throw IoError("cannot open embedding id file '" + sidecar.string() + "'");
    return read_embeddings_csv(in, ids, path.string());
  }
  return read_embeddings_jsonl(in, path.string());
}

/// Per-column best_of_both EER of raw embedding values on bona fide vs
/// `attack` utterances of `pool`.
inline std::vector<double> score_embedding_columns(const EmbeddingMatrix& e, const Dataset& ds,
                                                   const PoolAssignment& pools, AttackId attack,
                                                   Pool pool = Pool::train_pool) {
  std::vector<std::size_t> bona_rows, spoof_rows;
  for (const auto& r : ds.records()) {
    if (!pools.contains(r.utt_id, pool)) continue;
    if (r.label == Label::spoof && r.attack != attack) continue;
    const auto row = e.row_of(r.utt_id);
    if (!row) throw DataError("embeddings: missing utterance '" + r.utt_id + "'");
    (r.label == Label::spoof ? spoof_rows : bona_rows).push_back(*row);
  }
  if (spoof_rows.empty()) throw DataError("attack " + attack.str() + " absent from the selected pool");
  if (bona_rows.empty()) throw DataError("no bona fide utterances in the selected pool");
  std::vector<double> eers(e.dim());
  std::vector<double> b(bona_rows.size()), s(spoof_rows.size());
  for (std::size_t c = 0; c < e.dim(); ++c) {
    for (std::size_t i = 0; i < bona_rows.size(); ++i) b[i] = e.at(bona_rows[i], c);
    for (std::size_t i = 0; i < spoof_rows.size(); ++i) s[i] = e.at(spoof_rows[i], c);
    eers[c] = compute_eer(ScoreSet(b, s), Polarity::best_of_both).eer_percent;
  }
  return eers;
}

}  // namespace spoofprint

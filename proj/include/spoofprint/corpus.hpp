#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spoofprint/error.hpp"
#include "spoofprint/rng.hpp"

namespace spoofprint {

enum class Label { bonafide, spoof };
enum class Partition { train, dev };
enum class Pool { train_pool, eval_pool };

inline std::string_view to_string(Label l) { return l == Label::bonafide ? "bonafide" : "spoof"; }
inline std::string_view to_string(Partition p) { return p == Partition::train ? "train" : "dev"; }

/// Spoofing attack A01..A16.
class AttackId {
 public:
  static constexpr int kCount = 16;

  static AttackId from_number(int n) {
    if (n < 1 || n > kCount) throw DataError("unknown attack id 'A" + std::to_string(n) + "'");
    return AttackId(n);
  }

  static AttackId parse(std::string_view text) {
    if (text.size() == 3 && text[0] == 'A' && std::isdigit(static_cast<unsigned char>(text[1])) &&
        std::isdigit(static_cast<unsigned char>(text[2]))) {
      const int n = (text[1] - '0') * 10 + (text[2] - '0');
      if (n >= 1 && n <= kCount) return AttackId(n);
    }
    throw DataError("unknown attack id '" + std::string(text) + "'");
  }

  int number() const { return number_; }

  std::string str() const {
    std::string s = "A00";
    s[1] = static_cast<char>('0' + number_ / 10);
    s[2] = static_cast<char>('0' + number_ % 10);
    return s;
  }

  auto operator<=>(const AttackId&) const = default;

 private:
  explicit AttackId(int n) : number_(n) {}
  int number_;
};

struct UtteranceRecord {
  std::string utt_id;
  std::string path;
  Label label = Label::bonafide;
  std::optional<AttackId> attack;  // present iff label == spoof
  Partition partition = Partition::train;

  /// Stratum name used for pooling: "BT"/"BD" for bona fide, the attack id otherwise.
  std::string stratum() const {
    if (attack) return attack->str();
    return partition == Partition::train ? "BT" : "BD";
  }
};

/// A validated, non-empty set of utterances with unique ids.
class Dataset {
 public:
  Dataset(std::vector<UtteranceRecord> records, std::filesystem::path root)
      : records_(std::move(records)), root_(std::move(root)) {
    if (records_.empty()) throw DataError("dataset is empty");
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if ((r.label == Label::spoof) != r.attack.has_value())
        throw DataError("utterance '" + r.utt_id + "': label/attack mismatch");
      if (!index_.emplace(r.utt_id, i).second) throw DataError("duplicate utt_id '" + r.utt_id + "'");
    }
  }

  const std::vector<UtteranceRecord>& records() const { return records_; }
  const std::filesystem::path& root() const { return root_; }

  const UtteranceRecord* find(std::string_view utt_id) const {
    const auto it = index_.find(utt_id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  /// Sorted, distinct attacks present.
  std::vector<AttackId> attacks() const {
    std::set<AttackId> s;
    for (const auto& r : records_)
      if (r.attack) s.insert(*r.attack);
    return {s.begin(), s.end()};
  }

 private:
  std::vector<UtteranceRecord> records_;
  std::filesystem::path root_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

namespace detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

/// Parses a manifest from a stream. `source` is only used in error messages.
inline Dataset parse_manifest(std::istream& in, std::filesystem::path root,
                              const std::string& source = "manifest") {
  static const std::array<std::string_view, 5> kHeader = {"utt_id", "path", "label", "attack",
                                                          "partition"};
  std::vector<UtteranceRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  auto fail = [&](const std::string& what) {
    throw DataError(source + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (!header_seen) {
      if (fields.size() != kHeader.size() || !std::equal(fields.begin(), fields.end(), kHeader.begin()))
        fail("expected header 'utt_id\\tpath\\tlabel\\tattack\\tpartition'");
      header_seen = true;
      continue;
    }
    if (fields.size() != 5)
      fail("expected 5 tab-separated fields, got " + std::to_string(fields.size()));

    UtteranceRecord r;
    r.utt_id = fields[0];
    r.path = fields[1];
    if (r.utt_id.empty()) fail("empty utt_id");
    if (r.path.empty()) fail("empty path");

    if (fields[2] == "bonafide") r.label = Label::bonafide;
    else if (fields[2] == "spoof") r.label = Label::spoof;
    else fail("unknown label '" + fields[2] + "'");

    if (fields[3] != "-") {
      try {
        r.attack = AttackId::parse(fields[3]);
      } catch (const DataError& e) {
        fail(e.what());
      }
    }
    if (r.label == Label::spoof && !r.attack) fail("spoof without attack");
    if (r.label == Label::bonafide && r.attack) fail("bonafide row with attack " + r.attack->str());

    if (fields[4] == "train") r.partition = Partition::train;
    else if (fields[4] == "dev") r.partition = Partition::dev;
    else fail("unknown partition '" + fields[4] + "'");

    if (!ids.insert(r.utt_id).second) fail("duplicate utt_id '" + r.utt_id + "'");
    records.push_back(std::move(r));
  }
  if (!header_seen) throw DataError(source + ": missing header");
  if (records.empty()) throw DataError(source + ": no data rows");
  return Dataset(std::move(records), std::move(root));
}

/// Reads a manifest file; relative utterance paths resolve against its directory.
inline Dataset parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.parent_path(), path.string());
}

inline void write_manifest(std::ostream& out, const std::vector<UtteranceRecord>& records) {
  out << "utt_id\tpath\tlabel\tattack\tpartition\n";
  for (const auto& r : records) {
    out << r.utt_id << '\t' << r.path << '\t' << to_string(r.label) << '\t'
        << (r.attack ? r.attack->str() : std::string("-")) << '\t' << to_string(r.partition) << '\n';
  }
}

/// Half-up rounding of ratio*n. The epsilon absorbs representation error in
/// products such as 0.7*5.
inline std::size_t pool_size(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5 + 1e-9));
}

/// Train/eval pool assignment of every utterance in a dataset.
class PoolAssignment {
 public:
  PoolAssignment() = default;
  PoolAssignment(double ratio, std::uint64_t seed, std::map<std::string, Pool> assignment)
      : ratio_(ratio), seed_(seed), assignment_(std::move(assignment)) {}

  double ratio() const { return ratio_; }
  std::uint64_t seed() const { return seed_; }
  const std::map<std::string, Pool>& assignment() const { return assignment_; }

  std::optional<Pool> pool_of(std::string_view utt_id) const {
    const auto it = assignment_.find(std::string(utt_id));
    if (it == assignment_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view utt_id, Pool p) const {
    const auto pool = pool_of(utt_id);
    return pool && *pool == p;
  }

  std::vector<std::string> ids(Pool p) const {
    std::vector<std::string> out;
    for (const auto& [id, pool] : assignment_)
      if (pool == p) out.push_back(id);
    return out;
  }

  /// {"ratio":..,"seed":..,"train_pool":[..],"eval_pool":[..]}, ids sorted.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["ratio"] = ratio_;
    j["seed"] = seed_;
    j["train_pool"] = ids(Pool::train_pool);
    j["eval_pool"] = ids(Pool::eval_pool);
    return j;
  }

  static PoolAssignment from_json(const nlohmann::json& j) {
    try {
      std::map<std::string, Pool> a;
      for (const auto& id : j.at("train_pool")) a[id.get<std::string>()] = Pool::train_pool;
      for (const auto& id : j.at("eval_pool")) {
        if (!a.emplace(id.get<std::string>(), Pool::eval_pool).second)
          throw DataError("pools: utt_id '" + id.get<std::string>() + "' is in both pools");
      }
      return PoolAssignment(j.at("ratio").get<double>(), j.at("seed").get<std::uint64_t>(), std::move(a));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("pools: ") + e.what());
    }
  }

 private:
  double ratio_ = 0.0;
  std::uint64_t seed_ = 0;
  std::map<std::string, Pool> assignment_;
};

/// Stratified deterministic split. Each stratum (BT, BD, each attack) is sorted
/// lexicographically, Fisher-Yates shuffled with a xorshift64* stream seeded
/// from (seed, stratum name), and its first round(ratio*N) ids go to the
/// training pool.
inline PoolAssignment split_pools(const Dataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw DataError("ratio must be within [0, 1]");
  std::map<std::string, std::vector<std::string>> strata;
  for (const auto& r : ds.records()) strata[r.stratum()].push_back(r.utt_id);

  std::map<std::string, Pool> assignment;
  for (auto& [name, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    Xorshift64Star rng(seed ^ fnv1a64(name));
    for (std::size_t i = ids.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.below(i));
      std::swap(ids[i - 1], ids[j]);
    }
    const std::size_t n_train = pool_size(ratio, ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      assignment[ids[i]] = i < n_train ? Pool::train_pool : Pool::eval_pool;
  }
  return PoolAssignment(ratio, seed, std::move(assignment));
}

struct AttackInfo {
  AttackId attack;
  std::string system_name;
  std::string family;
  Partition partition;  // A01-A08 ship in 'train', A09-A16 in 'dev'
};

/// Generating system per attack.
inline AttackInfo attack_metadata(AttackId a) {
  struct Row {
    const char* system;
    const char* family;
  };
  static constexpr std::array<Row, AttackId::kCount> kTable = {{
      {"GlowTTS", "GlowTTS"},
      {"Variant of A01", "GlowTTS"},
      {"Variant of A01", "GlowTTS"},
      {"GradTTS", "GradTTS"},
      {"Variant of A04", "GradTTS"},
      {"Variant of A04", "GradTTS"},
      {"FastPitch", "FastPitch"},
      {"VITS", "VITS"},
      {"ToucanTTS", "ToucanTTS"},
      {"A09+HifiGANv2", "ToucanTTS"},
      {"Tacotron2", "Tacotron2"},
      {"In-house unit-select", "unit selection"},
      {"StarGANv2-VC", "StarGANv2-VC"},
      {"YourTTS", "YourTTS"},
      {"VAE-GAN", "VAE-GAN"},
      {"In-house ASR-based", "ASR-based"},
  }};
  const auto& row = kTable[static_cast<std::size_t>(a.number() - 1)];
  return {a, row.system, row.family, a.number() <= 8 ? Partition::train : Partition::dev};
}

inline AttackInfo attack_metadata(std::string_view attack) { return attack_metadata(AttackId::parse(attack)); }

}  // namespace spoofprint

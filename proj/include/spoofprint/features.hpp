#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spoofprint/audio.hpp"
#include "spoofprint/corpus.hpp"
#include "spoofprint/error.hpp"
#include "spoofprint/lld.hpp"

namespace spoofprint {

inline constexpr std::size_t kFeatureCount = 88;
inline constexpr std::string_view kRegistryVersion = "egemaps-subset-1";

enum class Functional { amean, stddev_norm, percentile20, percentile50, percentile80, pctl_range_20_80 };
enum class MaskMode { all, voiced_only, unvoiced_only, not_applicable };

/// Values of `track` selected by `mode`. voiced_only/unvoiced_only need a mask.
inline std::vector<double> select_frames(std::span<const double> track, const VoicingMask* mask, MaskMode mode) {
  if (mode == MaskMode::all || mode == MaskMode::not_applicable) return {track.begin(), track.end()};
  if (!mask) throw DataError("masked functional requires a voicing mask");
  if (mask->size() != track.size()) throw DataError("voicing mask length does not match track");
  const bool want = mode == MaskMode::voiced_only;
  std::vector<double> out;
  for (std::size_t i = 0; i < track.size(); ++i)
    if (mask->voiced[i] == want) out.push_back(track[i]);
  return out;
}

/// Linear interpolation between order statistics at position p * (n - 1).
inline double percentile_sorted(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

/// Population standard deviation (divisor N).
inline double pop_stddev(std::span<const double> v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

/// Applies a statistical functional over the selected frames. Returns nullopt
/// when the selection is too small (degenerate): fewer than one value, or two
/// for stddev_norm.
inline std::optional<double> apply_functional(std::span<const double> track, const VoicingMask* mask,
                                              Functional f, MaskMode mode) {
  auto v = select_frames(track, mask, mode);
  if (v.empty()) return std::nullopt;
  switch (f) {
    case Functional::amean:
      return mean_of(v);
    case Functional::stddev_norm: {
      if (v.size() < 2) return std::nullopt;
      const double m = mean_of(v);
      return m == 0.0 ? 0.0 : pop_stddev(v) / std::abs(m);
    }
    default:
      break;
  }
  std::sort(v.begin(), v.end());
  switch (f) {
    case Functional::percentile20: return percentile_sorted(v, 0.2);
    case Functional::percentile50: return percentile_sorted(v, 0.5);
    case Functional::percentile80: return percentile_sorted(v, 0.8);
    case Functional::pctl_range_20_80: return percentile_sorted(v, 0.8) - percentile_sorted(v, 0.2);
    default: return std::nullopt;
  }
}

inline std::optional<double> apply_functional(const LldTrack& track, const VoicingMask* mask, Functional f,
                                              MaskMode mode) {
  return apply_functional(std::span<const double>(track.values), mask, f, mode);
}

struct SlopeStats {
  double mean_rising = 0.0;
  double stddev_rising = 0.0;
  double mean_falling = 0.0;
  double stddev_falling = 0.0;
  bool rising_degenerate = true;
  bool falling_degenerate = true;
};

/// Rising/falling slope statistics (units per second) between alternating
/// local extrema. Plateaus collapse to one point at their midpoint index and
/// both track endpoints count as extrema.
inline SlopeStats slope_stats(std::span<const double> values, double hop_s) {
  struct Point {
    double pos;
    double value;
  };
  std::vector<Point> runs;
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j + 1 < values.size() && values[j + 1] == values[i]) ++j;
    runs.push_back({0.5 * static_cast<double>(i + j), values[i]});
    i = j + 1;
  }
  std::vector<Point> extrema;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (k == 0 || k + 1 == runs.size()) {
      extrema.push_back(runs[k]);
      continue;
    }
    const bool up_before = runs[k].value > runs[k - 1].value;
    const bool up_after = runs[k + 1].value > runs[k].value;
    if (up_before != up_after) extrema.push_back(runs[k]);
  }

  std::vector<double> rising, falling;
  for (std::size_t k = 0; k + 1 < extrema.size(); ++k) {
    const double slope =
        (extrema[k + 1].value - extrema[k].value) / ((extrema[k + 1].pos - extrema[k].pos) * hop_s);
    (slope > 0.0 ? rising : falling).push_back(slope);
  }
  SlopeStats s;
  if (!rising.empty()) {
    s.mean_rising = mean_of(rising);
    s.stddev_rising = pop_stddev(rising);
    s.rising_degenerate = false;
  }
  if (!falling.empty()) {
    s.mean_falling = mean_of(falling);
    s.stddev_falling = pop_stddev(falling);
    s.falling_degenerate = false;
  }
  return s;
}

struct SegmentStats {
  double mean_unvoiced_s = 0.0;
  double stddev_unvoiced_s = 0.0;
  double mean_voiced_s = 0.0;
  double stddev_voiced_s = 0.0;
  double voiced_segments_per_s = 0.0;
  bool unvoiced_degenerate = true;
  bool voiced_degenerate = true;
};

/// Run-length statistics over maximal runs of equal voicing.
inline SegmentStats segment_stats(const VoicingMask& mask, double hop_s) {
  if (mask.size() == 0) throw DataError("segment_stats requires a non-empty mask");
  std::vector<double> voiced, unvoiced;
  for (std::size_t i = 0; i < mask.size();) {
    std::size_t j = i;
    while (j < mask.size() && mask.voiced[j] == mask.voiced[i]) ++j;
    const double len = static_cast<double>(j - i) * hop_s;
    (mask.voiced[i] ? voiced : unvoiced).push_back(len);
    i = j;
  }
  SegmentStats s;
  if (!unvoiced.empty()) {
    s.mean_unvoiced_s = mean_of(unvoiced);
    s.stddev_unvoiced_s = pop_stddev(unvoiced);
    s.unvoiced_degenerate = false;
  }
  if (!voiced.empty()) {
    s.mean_voiced_s = mean_of(voiced);
    s.stddev_voiced_s = pop_stddev(voiced);
    s.voiced_degenerate = false;
  }
  s.voiced_segments_per_s = static_cast<double>(voiced.size()) / (static_cast<double>(mask.size()) * hop_s);
  return s;
}

struct FeatureDescriptor {
  std::size_t index;
  std::string name;
  std::string lld;
  std::string functional;
  MaskMode mask_mode;
  bool implemented;
};

/// The 88 eGeMAPS v2 functional slots in canonical order; only a subset is computed.
class FeatureRegistry {
 public:
  FeatureRegistry() {
    entries_.reserve(kFeatureCount);
    auto add = [&](std::string name, std::string lld, std::string functional, MaskMode mode, bool impl) {
      entries_.push_back({entries_.size(), std::move(name), std::move(lld), std::move(functional), mode, impl});
    };
    const std::array<const char*, 10> kSixPlusSlopes = {
        "amean", "stddevNorm", "percentile20.0", "percentile50.0", "percentile80.0", "pctlrange0-2",
        "meanRisingSlope", "stddevRisingSlope", "meanFallingSlope", "stddevFallingSlope"};
    for (std::size_t i = 0; i < kSixPlusSlopes.size(); ++i)
      add(std::string("F0semitoneFrom27.5Hz_sma3nz_") + kSixPlusSlopes[i], "F0semitone", kSixPlusSlopes[i],
          MaskMode::voiced_only, i < 5);
    for (const char* f : kSixPlusSlopes)
      add(std::string("loudness_sma3_") + f, "loudness", f, MaskMode::all, true);
    add("spectralFlux_sma3_amean", "spectralFlux", "amean", MaskMode::all, true);
    add("spectralFlux_sma3_stddevNorm", "spectralFlux", "stddevNorm", MaskMode::all, false);

    auto pair = [&](const std::string& lld, const std::string& suffix, MaskMode mode, bool impl_mean,
                    bool impl_std) {
      add(lld + suffix + "_amean", lld, "amean", mode, impl_mean);
      add(lld + suffix + "_stddevNorm", lld, "stddevNorm", mode, impl_std);
    };
    for (int k = 1; k <= 4; ++k) pair("mfcc" + std::to_string(k), "_sma3", MaskMode::all, false, false);
    for (const char* lld : {"jitterLocal", "shimmerLocaldB", "HNRdBACF", "logRelF0-H1-H2", "logRelF0-H1-A3"})
      pair(lld, "_sma3nz", MaskMode::voiced_only, false, false);
    for (int k = 1; k <= 3; ++k) {
      const std::string f = "F" + std::to_string(k);
      pair(f + "frequency", "_sma3nz", MaskMode::voiced_only, false, false);
      pair(f + "bandwidth", "_sma3nz", MaskMode::voiced_only, false, false);
      pair(f + "amplitudeLogRelF0", "_sma3nz", MaskMode::voiced_only, false, false);
    }
    for (const char* lld : {"alphaRatioV", "hammarbergIndexV", "slopeV0-500", "slopeV500-1500"})
      pair(lld, "_sma3nz", MaskMode::voiced_only, false, false);
    pair("spectralFluxV", "_sma3nz", MaskMode::voiced_only, true, true);
    for (int k = 1; k <= 4; ++k)
      pair("mfcc" + std::to_string(k) + "V", "_sma3nz", MaskMode::voiced_only, false, false);
    for (const char* lld : {"alphaRatioUV", "hammarbergIndexUV", "slopeUV0-500", "slopeUV500-1500"})
      add(std::string(lld) + "_sma3nz_amean", lld, "amean", MaskMode::unvoiced_only, false);
    add("spectralFluxUV_sma3nz_amean", "spectralFluxUV", "amean", MaskMode::unvoiced_only, true);
    add("loudnessPeaksPerSec", "loudness", "peaksPerSec", MaskMode::not_applicable, false);
    add("VoicedSegmentsPerSec", "voicing", "segmentsPerSec", MaskMode::not_applicable, true);
    add("MeanVoicedSegmentLengthSec", "voicing", "meanVoicedLength", MaskMode::not_applicable, true);
    add("StddevVoicedSegmentLengthSec", "voicing", "stddevVoicedLength", MaskMode::not_applicable, true);
    add("MeanUnvoicedSegmentLength", "voicing", "meanUnvoicedLength", MaskMode::not_applicable, true);
    add("StddevUnvoicedSegmentLength", "voicing", "stddevUnvoicedLength", MaskMode::not_applicable, true);
    add("equivalentSoundLevel_dBp", "loudness", "equivalentSoundLevel", MaskMode::not_applicable, false);
    if (entries_.size() != kFeatureCount) throw std::logic_error("feature registry must have 88 entries");
  }

  std::string_view version() const { return kRegistryVersion; }
  const std::vector<FeatureDescriptor>& entries() const { return entries_; }
  const FeatureDescriptor& operator[](std::size_t i) const { return entries_.at(i); }

  std::vector<std::size_t> implemented() const {
    std::vector<std::size_t> out;
    for (const auto& e : entries_)
      if (e.implemented) out.push_back(e.index);
    return out;
  }

  std::optional<std::size_t> find(std::string_view name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.index;
    return std::nullopt;
  }

 private:
  std::vector<FeatureDescriptor> entries_;
};

inline const FeatureRegistry& default_registry() {
  static const FeatureRegistry registry;
  return registry;
}

/// Slot indices of the features computed by extract_all.
namespace slot {
inline constexpr std::size_t kF0Mean = 0;
inline constexpr std::size_t kF0StddevNorm = 1;
inline constexpr std::size_t kF0P20 = 2;
inline constexpr std::size_t kF0P50 = 3;
inline constexpr std::size_t kF0P80 = 4;
inline constexpr std::size_t kLoudnessMean = 10;
inline constexpr std::size_t kLoudnessStddevNorm = 11;
inline constexpr std::size_t kLoudnessP20 = 12;
inline constexpr std::size_t kLoudnessP50 = 13;
inline constexpr std::size_t kLoudnessP80 = 14;
inline constexpr std::size_t kLoudnessRange = 15;
inline constexpr std::size_t kLoudnessMeanRising = 16;
inline constexpr std::size_t kLoudnessStddevRising = 17;
inline constexpr std::size_t kLoudnessMeanFalling = 18;
inline constexpr std::size_t kLoudnessStddevFalling = 19;
inline constexpr std::size_t kFluxMean = 20;
inline constexpr std::size_t kFluxVoicedMean = 66;
inline constexpr std::size_t kFluxVoicedStddevNorm = 67;
inline constexpr std::size_t kFluxUnvoicedMean = 80;
inline constexpr std::size_t kVoicedSegmentsPerSec = 82;
inline constexpr std::size_t kMeanVoicedLength = 83;
inline constexpr std::size_t kStddevVoicedLength = 84;
inline constexpr std::size_t kMeanUnvoicedLength = 85;
inline constexpr std::size_t kStddevUnvoicedLength = 86;
}  // namespace slot

/// 88 slots; nullopt marks an unimplemented (Unavailable) slot.
struct FeatureVector {
  std::string utt_id;
  std::string registry_version{kRegistryVersion};
  std::array<std::optional<double>, kFeatureCount> values{};
  std::vector<std::size_t> flags;  // slots whose functional was degenerate (value forced to 0)

  // Carried through feature files so evaluation needs no manifest.
  std::optional<Label> label;
  std::optional<AttackId> attack;

  bool operator==(const FeatureVector&) const = default;
};

struct ExtractConfig {
  double hop_s = 0.010;
  double spectral_frame_s = 0.025;
  double f0_frame_s = 0.060;
  std::size_t sma_window = 3;
  double min_duration_s = 0.100;
  LoudnessConfig loudness;
  VoicingConfig voicing;
};

/// Per-frame tracks of one clip, all aligned on the same hop grid.
struct LldBundle {
  LldTrack loudness;
  LldTrack flux;
  LldTrack f0;
  VoicingMask mask;
};

/// Frames are centred on hop intervals (see pad_centered), so every track has
/// floor(N / hop) frames and frame t describes samples [t*hop, (t+1)*hop).
inline LldBundle compute_llds(const AudioClip& clip, const ExtractConfig& cfg = {}) {
  const AudioClip audio = resample(clip, kPipelineSampleRate);
  if (audio.duration_s() + 1e-12 < cfg.min_duration_s)
    throw DataError("clip '" + clip.utt_id() + "' too short: " + std::to_string(audio.duration_s()) + " s");
  const int rate = audio.sample_rate_hz();
  const auto hop = static_cast<std::size_t>(std::llround(cfg.hop_s * rate));
  const auto spec_len = static_cast<std::size_t>(std::llround(cfg.spectral_frame_s * rate));
  const auto f0_len = static_cast<std::size_t>(std::llround(cfg.f0_frame_s * rate));

  const auto spec_padded = pad_centered(audio.samples(), spec_len, hop);
  const auto f0_padded = pad_centered(audio.samples(), f0_len, hop);
  const auto spec_frames = frame(spec_padded, rate, cfg.spectral_frame_s, cfg.hop_s, Window::hann);
  const auto f0_frames = frame(f0_padded, rate, cfg.f0_frame_s, cfg.hop_s, Window::rect);

  auto pitch = f0_voicing_track(f0_frames, rms(audio.samples()), cfg.voicing);
  LldBundle b{loudness_track(spec_frames, cfg.loudness), spectral_flux_track(spec_frames), std::move(pitch.f0),
              std::move(pitch.mask)};
  const std::size_t n = std::min(b.loudness.size(), b.mask.size());
  b.loudness.values.resize(n);
  b.flux.values.resize(n);
  b.f0.values.resize(n);
  b.mask.voiced.resize(n);
  b.mask.f0_hz.resize(n);
  return b;
}

/// Semitones relative to 27.5 Hz on voiced frames, 0 elsewhere.
inline LldTrack f0_semitone_track(const LldTrack& f0, const VoicingMask& mask) {
  LldTrack out{"F0semitoneFrom27.5Hz", std::vector<double>(f0.size(), 0.0), f0.hop_s};
  for (std::size_t i = 0; i < f0.size(); ++i)
    if (mask.voiced[i] && f0.values[i] > 0.0) out.values[i] = 12.0 * std::log2(f0.values[i] / 27.5);
  return out;
}

/// Runs the audio -> LLD -> functional pipeline and fills every implemented slot.
/// Degenerate functionals become 0 and their slot index is recorded in `flags`.
inline FeatureVector extract_all(const AudioClip& clip, const FeatureRegistry& registry = default_registry(),
                                 const ExtractConfig& cfg = {}) {
  const LldBundle b = compute_llds(clip, cfg);
  const double hop = b.loudness.hop_s;

  FeatureVector fv;
  fv.utt_id = clip.utt_id();
  fv.registry_version = std::string(registry.version());
  auto set = [&](std::size_t idx, std::optional<double> v) {
    if (v && std::isfinite(*v)) {
      fv.values[idx] = *v;
    } else {
      fv.values[idx] = 0.0;
      fv.flags.push_back(idx);
    }
  };
  auto set_flagged = [&](std::size_t idx, double v, bool degenerate) {
    set(idx, degenerate ? std::nullopt : std::optional<double>(v));
  };

  const auto semitone = smooth_sma(f0_semitone_track(b.f0, b.mask), cfg.sma_window, b.mask);
  const std::pair<std::size_t, Functional> f0_slots[] = {{slot::kF0Mean, Functional::amean},
                                                         {slot::kF0StddevNorm, Functional::stddev_norm},
                                                         {slot::kF0P20, Functional::percentile20},
                                                         {slot::kF0P50, Functional::percentile50},
                                                         {slot::kF0P80, Functional::percentile80}};
  for (const auto& [idx, f] : f0_slots) set(idx, apply_functional(semitone, &b.mask, f, MaskMode::voiced_only));

  const auto loud = smooth_sma(b.loudness, cfg.sma_window);
  const std::pair<std::size_t, Functional> loud_slots[] = {{slot::kLoudnessMean, Functional::amean},
                                                           {slot::kLoudnessStddevNorm, Functional::stddev_norm},
                                                           {slot::kLoudnessP20, Functional::percentile20},
                                                           {slot::kLoudnessP50, Functional::percentile50},
                                                           {slot::kLoudnessP80, Functional::percentile80},
                                                           {slot::kLoudnessRange, Functional::pctl_range_20_80}};
  for (const auto& [idx, f] : loud_slots) set(idx, apply_functional(loud, nullptr, f, MaskMode::all));
  const auto slopes = slope_stats(loud.values, hop);
  set_flagged(slot::kLoudnessMeanRising, slopes.mean_rising, slopes.rising_degenerate);
  set_flagged(slot::kLoudnessStddevRising, slopes.stddev_rising, slopes.rising_degenerate);
  set_flagged(slot::kLoudnessMeanFalling, slopes.mean_falling, slopes.falling_degenerate);
  set_flagged(slot::kLoudnessStddevFalling, slopes.stddev_falling, slopes.falling_degenerate);

  const auto flux = smooth_sma(b.flux, cfg.sma_window);
  set(slot::kFluxMean, apply_functional(flux, nullptr, Functional::amean, MaskMode::all));
  set(slot::kFluxVoicedMean, apply_functional(flux, &b.mask, Functional::amean, MaskMode::voiced_only));
  set(slot::kFluxVoicedStddevNorm, apply_functional(flux, &b.mask, Functional::stddev_norm, MaskMode::voiced_only));
  set(slot::kFluxUnvoicedMean, apply_functional(flux, &b.mask, Functional::amean, MaskMode::unvoiced_only));

  const auto seg = segment_stats(b.mask, hop);
  set(slot::kVoicedSegmentsPerSec, seg.voiced_segments_per_s);
  set_flagged(slot::kMeanVoicedLength, seg.mean_voiced_s, seg.voiced_degenerate);
  set_flagged(slot::kStddevVoicedLength, seg.stddev_voiced_s, seg.voiced_degenerate);
  set_flagged(slot::kMeanUnvoicedLength, seg.mean_unvoiced_s, seg.unvoiced_degenerate);
  set_flagged(slot::kStddevUnvoicedLength, seg.stddev_unvoiced_s, seg.unvoiced_degenerate);

  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (!registry[i].implemented) fv.values[i].reset();
  std::sort(fv.flags.begin(), fv.flags.end());
  return fv;
}

// ---- feature files (JSON lines) ----

inline nlohmann::ordered_json to_json(const FeatureVector& fv) {
  nlohmann::ordered_json j;
  j["utt_id"] = fv.utt_id;
  if (fv.label) j["label"] = std::string(to_string(*fv.label));
  if (fv.label) j["attack"] = fv.attack ? nlohmann::ordered_json(fv.attack->str()) : nlohmann::ordered_json(nullptr);
  j["registry_version"] = fv.registry_version;
  auto values = nlohmann::ordered_json::array();
  for (const auto& v : fv.values) values.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr));
  j["values"] = std::move(values);
  j["flags"] = fv.flags;
  return j;
}

inline FeatureVector feature_vector_from_json(const nlohmann::json& j) {
  FeatureVector fv;
  fv.utt_id = j.at("utt_id").get<std::string>();
  fv.registry_version = j.at("registry_version").get<std::string>();
  const auto& values = j.at("values");
  if (!values.is_array() || values.size() != kFeatureCount)
    throw DataError("feature row '" + fv.utt_id + "': expected 88 values");
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (!values[i].is_null()) fv.values[i] = values[i].get<double>();
  fv.flags = j.at("flags").get<std::vector<std::size_t>>();
  if (j.contains("label")) {
    const auto label = j.at("label").get<std::string>();
    if (label == "bonafide") fv.label = Label::bonafide;
    else if (label == "spoof") fv.label = Label::spoof;
    else throw DataError("feature row '" + fv.utt_id + "': unknown label '" + label + "'");
  }
  if (j.contains("attack") && !j.at("attack").is_null()) fv.attack = AttackId::parse(j.at("attack").get<std::string>());
  if (fv.label && (*fv.label == Label::spoof) != fv.attack.has_value())
    throw DataError("feature row '" + fv.utt_id + "': label/attack mismatch");
  return fv;
}

/// Feature rows keyed (and therefore ordered) by utt_id.
using FeatureTable = std::map<std::string, FeatureVector>;

inline void write_features_jsonl(std::ostream& out, const FeatureTable& table) {
  for (const auto& [id, fv] : table) out << to_json(fv).dump() << '\n';
}

inline void write_features_jsonl(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write features file '" + path.string() + "'");
  write_features_jsonl(out, table);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline FeatureTable read_features_jsonl(std::istream& in, const std::string& source = "features") {
  FeatureTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto fv = feature_vector_from_json(nlohmann::json::parse(line));
      const auto id = fv.utt_id;
      if (!table.emplace(id, std::move(fv)).second) throw DataError("duplicate utt_id '" + id + "'");
    } catch (const nlohmann::json::exception& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (table.empty()) throw DataError(source + ": no feature rows");
  return table;
}

inline FeatureTable read_features_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open features file '" + path.string() + "'");
  return read_features_jsonl(in, path.string());
}

}  // namespace spoofprint

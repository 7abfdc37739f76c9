#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spoofprint/audio.hpp"
#include "spoofprint/corpus.hpp"
#include "spoofprint/error.hpp"
#include "spoofprint/rng.hpp"

namespace spoofprint {

struct Gaussian {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Recipe for one class of synthetic utterances: `n_cycles` voiced sawtooth
/// segments separated by near-silent unvoiced gaps.
struct SynthSpec {
  std::string attack_name = "bonafide";  // "bonafide" or A01..A16
  std::size_t n_clips = 1;
  Gaussian voiced_dur{0.5, 0.0};
  Gaussian unvoiced_dur{0.2, 0.0};
  Gaussian f0_hz{150.0, 0.0};
  std::size_t n_cycles = 3;
  double noise_dbfs = -60.0;
  std::uint64_t seed = 0;
  int sample_rate_hz = kPipelineSampleRate;
  double min_segment_s = 0.020;  // two 10 ms hops
  double amplitude = 0.5;

  void validate() const {
    if (n_clips == 0) throw DataError("synth spec '" + attack_name + "': n_clips must be >= 1");
    if (n_cycles == 0) throw DataError("synth spec '" + attack_name + "': n_cycles must be >= 1");
    if (!(voiced_dur.mean > 0.0) || !(unvoiced_dur.mean > 0.0) || !(f0_hz.mean > 0.0))
      throw DataError("synth spec '" + attack_name + "': means must be positive");
    if (voiced_dur.stddev < 0.0 || unvoiced_dur.stddev < 0.0 || f0_hz.stddev < 0.0)
      throw DataError("synth spec '" + attack_name + "': stddevs must be non-negative");
    if (!(amplitude > 0.0 && amplitude <= 1.0)) throw DataError("synth spec: amplitude must be in (0, 1]");
    if (attack_name != "bonafide") AttackId::parse(attack_name);
  }
};

struct SynthClip {
  AudioClip clip;
  std::vector<double> voiced_s;    // planned segment durations, in order
  std::vector<double> unvoiced_s;
};

/// Deterministic in (spec.seed, clip_index).
inline SynthClip gen_clip(const SynthSpec& spec, std::size_t clip_index, std::string utt_id = {}) {
  spec.validate();
  Xorshift64Star rng(splitmix64(spec.seed) ^ splitmix64(0xC11Bu + clip_index));
  const double rate = spec.sample_rate_hz;
  const double noise_rms = std::pow(10.0, spec.noise_dbfs / 20.0);
  auto duration = [&](const Gaussian& g) { return std::max(spec.min_segment_s, rng.normal(g.mean, g.stddev)); };

  std::vector<double> samples;
  std::vector<double> voiced, unvoiced;
  for (std::size_t cycle = 0; cycle < spec.n_cycles; ++cycle) {
    if (cycle > 0) {
      const double d = duration(spec.unvoiced_dur);
      unvoiced.push_back(d);
      const auto n = static_cast<std::size_t>(std::llround(d * rate));
      for (std::size_t i = 0; i < n; ++i) samples.push_back(std::clamp(noise_rms * rng.normal(), -1.0, 1.0));
    }
    const double d = duration(spec.voiced_dur);
    voiced.push_back(d);
    const double f0 = std::clamp(rng.normal(spec.f0_hz.mean, spec.f0_hz.stddev), 60.0, 500.0);
    const auto n = static_cast<std::size_t>(std::llround(d * rate));
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      samples.push_back(spec.amplitude * (2.0 * phase - 1.0));
      phase += f0 / rate;
      phase -= std::floor(phase);
    }
  }
  return {AudioClip(std::move(samples), spec.sample_rate_hz, std::move(utt_id)), std::move(voiced),
          std::move(unvoiced)};
}

struct SynthCorpusSpec {
  SynthSpec bonafide;
  std::vector<SynthSpec> attacks;
};

inline SynthSpec synth_spec_from_json(const nlohmann::json& j, const std::string& default_name) {
  SynthSpec s;
  auto gauss = [&](const char* key, Gaussian fallback) {
    if (!j.contains(key)) return fallback;
    const auto& g = j.at(key);
    return Gaussian{g.at("mean").get<double>(), g.value("std", 0.0)};
  };
  s.attack_name = j.value("attack", default_name);
  s.n_clips = j.value("n_clips", s.n_clips);
  s.voiced_dur = gauss("voiced_dur", s.voiced_dur);
  s.unvoiced_dur = gauss("unvoiced_dur", s.unvoiced_dur);
  s.f0_hz = gauss("f0_hz", s.f0_hz);
  s.n_cycles = j.value("n_cycles", s.n_cycles);
  s.noise_dbfs = j.value("noise_dbfs", s.noise_dbfs);
  s.seed = j.value("seed", s.seed);
  s.amplitude = j.value("amplitude", s.amplitude);
  return s;
}

/// {"bonafide": {...}, "attacks": [{"attack": "A01", ...}, ...]}
inline SynthCorpusSpec synth_corpus_from_json(const nlohmann::json& j) {
  try {
    SynthCorpusSpec c;
    c.bonafide = synth_spec_from_json(j.at("bonafide"), "bonafide");
    c.bonafide.attack_name = "bonafide";
    for (const auto& a : j.at("attacks")) {
      if (!a.contains("attack")) throw DataError("synth spec: attack entry without 'attack'");
      c.attacks.push_back(synth_spec_from_json(a, ""));
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
}

/// Writes PCM16 WAVs under out_dir/wav/ and out_dir/manifest.tsv. Attacks keep
/// their standard partition (A01-A08 train, A09-A16 dev); bona fide clips
/// alternate between train and dev.
inline std::filesystem::path gen_corpus(const SynthCorpusSpec& spec, const std::filesystem::path& out_dir) {
  spec.bonafide.validate();
  std::set<std::string> names;
  for (const auto& a : spec.attacks) {
    a.validate();
    if (a.attack_name == "bonafide") throw DataError("synth spec: attack entries need an attack id");
    if (!names.insert(a.attack_name).second) throw DataError("synth spec: duplicate attack " + a.attack_name);
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "wav", ec);
  if (ec) throw IoError("cannot create '" + (out_dir / "wav").string() + "': " + ec.message());

  std::vector<UtteranceRecord> records;
  auto emit = [&](const SynthSpec& s, const std::string& prefix, std::optional<AttackId> attack) {
    for (std::size_t i = 0; i < s.n_clips; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%05zu", prefix.c_str(), i);
      const auto clip = gen_clip(s, i, id);
      const std::string rel = std::string("wav/") + id + ".wav";
      write_wav(out_dir / rel, clip.clip);
      UtteranceRecord r;
      r.utt_id = id;
      r.path = rel;
      r.label = attack ? Label::spoof : Label::bonafide;
      r.attack = attack;
      r.partition = attack ? attack_metadata(*attack).partition : (i % 2 == 0 ? Partition::train : Partition::dev);
      records.push_back(std::move(r));
    }
  };
  emit(spec.bonafide, "bona", std::nullopt);
  for (const auto& a : spec.attacks) {
    const auto id = AttackId::parse(a.attack_name);
    emit(a, "spoof_" + id.str(), id);
  }

  const auto manifest = out_dir / "manifest.tsv";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + manifest.string() + "'");
  write_manifest(out, records);
  if (!out) throw IoError("write failed for '" + manifest.string() + "'");
  return manifest;
}

}  // namespace spoofprint

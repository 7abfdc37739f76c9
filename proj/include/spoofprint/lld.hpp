#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spoofprint/audio.hpp"
#include "spoofprint/error.hpp"
#include "spoofprint/fft.hpp"

namespace spoofprint {

/// One value per frame.
struct LldTrack {
  std::string name;
  std::vector<double> values;
  double hop_s = 0.0;

  std::size_t size() const { return values.size(); }
};

/// Per-frame voicing decision; f0_hz > 0 exactly where voiced.
struct VoicingMask {
  std::vector<bool> voiced;
  std::vector<double> f0_hz;

  std::size_t size() const { return voiced.size(); }

  static VoicingMask from_pattern(std::string_view pattern, double f0 = 100.0) {
    VoicingMask m;
    for (char c : pattern) {
      m.voiced.push_back(c == 'V');
      m.f0_hz.push_back(c == 'V' ? f0 : 0.0);
    }
    return m;
  }
};

struct LoudnessConfig {
  std::size_t n_bands = 26;
  double min_hz = 0.0;
  double max_hz = 8000.0;
  double exponent = 0.3;
};

struct VoicingConfig {
  double min_f0_hz = 55.0;
  double max_f0_hz = 600.0;
  double nac_threshold = 0.45;
  double rms_floor = 1e-4;
  double rms_relative = 0.05;  // fraction of clip RMS
  std::size_t median_width = 3;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular mel filterbank over the bins of an n_fft-point power spectrum.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t n_fft, int sample_rate_hz, const LoudnessConfig& cfg)
      : n_bins_(n_fft / 2 + 1), weights_(cfg.n_bands, std::vector<double>(n_bins_, 0.0)) {
    const double mel_lo = hz_to_mel(cfg.min_hz);
    const double mel_hi = hz_to_mel(std::min(cfg.max_hz, sample_rate_hz / 2.0));
    std::vector<double> edges(cfg.n_bands + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
      edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_bands + 1));
    for (std::size_t b = 0; b < cfg.n_bands; ++b) {
      const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
      for (std::size_t k = 0; k < n_bins_; ++k) {
        const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n_fft);
        if (f > lo && f < hi) weights_[b][k] = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      }
    }
  }

  std::size_t bands() const { return weights_.size(); }

  double band_energy(std::size_t band, std::span<const double> power) const {
    double e = 0.0;
    const auto& w = weights_[band];
    for (std::size_t k = 0; k < n_bins_; ++k) e += w[k] * power[k];
    return e;
  }

 private:
  std::size_t n_bins_;
  std::vector<std::vector<double>> weights_;
};

/// Compressive mel-band loudness proxy: sum over bands of (band energy)^0.3.
inline LldTrack loudness_track(const FrameSeries& fs, const LoudnessConfig& cfg = {}) {
  const std::size_t n_fft = next_pow2(fs.frame_length());
  const FftPlan plan(n_fft);
  const MelFilterbank bank(n_fft, fs.sample_rate_hz(), cfg);
  LldTrack track{"loudness", std::vector<double>(fs.count(), 0.0), fs.hop_s()};
  std::vector<double> power;
  std::vector<std::complex<double>> scratch;
  for (std::size_t t = 0; t < fs.count(); ++t) {
    plan.power_spectrum(fs[t], power, scratch);
    double loud = 0.0;
    for (std::size_t b = 0; b < bank.bands(); ++b) {
      const double e = bank.band_energy(b, power);
      if (e > 0.0) loud += std::pow(e, cfg.exponent);
    }
    track.values[t] = loud;
  }
  return track;
}

/// Squared difference of consecutive l2-normalised magnitude spectra.
/// flux[0] = 0; an all-zero frame normalises to the zero vector.
inline LldTrack spectral_flux_track(const FrameSeries& fs) {
  const std::size_t n_fft = next_pow2(fs.frame_length());
  const FftPlan plan(n_fft);
  LldTrack track{"spectralFlux", std::vector<double>(fs.count(), 0.0), fs.hop_s()};
  std::vector<double> power, prev, cur;
  std::vector<std::complex<double>> scratch;
  for (std::size_t t = 0; t < fs.count(); ++t) {
    plan.power_spectrum(fs[t], power, scratch);
    cur.resize(power.size());
    double norm2 = 0.0;
    for (std::size_t k = 0; k < power.size(); ++k) {
      cur[k] = std::sqrt(power[k]);
      norm2 += power[k];
    }
    const double norm = std::sqrt(norm2);
    for (double& v : cur) v = norm > 0.0 ? v / norm : 0.0;
    if (t > 0) {
      double flux = 0.0;
      for (std::size_t k = 0; k < cur.size(); ++k) {
        const double d = cur[k] - prev[k];
        flux += d * d;
      }
      track.values[t] = flux;
    }
    std::swap(prev, cur);
  }
  return track;
}

namespace detail {

/// Normalised autocorrelation r(tau) / sqrt(E_head(tau) * E_tail(tau)) of one
/// frame for tau in [0, max_lag], via FFT.
inline void normalized_autocorrelation(std::span<const double> x, const FftPlan& plan, std::size_t max_lag,
                                       std::vector<std::complex<double>>& scratch, std::vector<double>& prefix,
                                       std::vector<double>& nac) {
  const std::size_t n = x.size();
  scratch.assign(plan.size(), {0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) scratch[i] = {x[i], 0.0};
  plan.transform(scratch);
  for (auto& c : scratch) c = {std::norm(c), 0.0};
  plan.transform(scratch, true);
  const double scale = 1.0 / static_cast<double>(plan.size());

  prefix.assign(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];

  nac.assign(max_lag + 1, 0.0);
  for (std::size_t tau = 0; tau <= max_lag && tau < n; ++tau) {
    const double head = prefix[n - tau];
    const double tail = prefix[n] - prefix[tau];
    const double denom = std::sqrt(head * tail);
    nac[tau] = denom > 0.0 ? scratch[tau].real() * scale / denom : 0.0;
  }
}

inline std::vector<bool> median_filter(const std::vector<bool>& in, std::size_t width) {
  if (width <= 1 || in.size() < width) return in;
  const std::size_t half = width / 2;
  std::vector<bool> out = in;
  for (std::size_t i = half; i + half < in.size(); ++i) {
    std::size_t ones = 0;
    for (std::size_t j = i - half; j <= i + half; ++j) ones += in[j] ? 1 : 0;
    out[i] = ones * 2 > width;
  }
  return out;
}

}  // namespace detail

struct F0Result {
  LldTrack f0;
  VoicingMask mask;
};

/// Autocorrelation pitch tracker with voiced/unvoiced decision.
///
/// A frame is voiced iff its peak normalised autocorrelation in the lag range
/// for [min_f0, max_f0] reaches nac_threshold and both the whole-frame RMS and
/// the RMS of the frame's central hop reach max(rms_floor, rms_relative *
/// clip_rms). The lag is the smallest local NAC peak within 90% of the global
/// peak, refined by parabolic interpolation. The decision mask is then
/// median-filtered.
inline F0Result f0_voicing_track(const FrameSeries& fs, double clip_rms, const VoicingConfig& cfg = {}) {
  const double rate = fs.sample_rate_hz();
  const std::size_t L = fs.frame_length();
  const auto min_lag = static_cast<std::size_t>(std::max(2.0, std::floor(rate / cfg.max_f0_hz)));
  const auto max_lag = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(rate / cfg.min_f0_hz)), L - 2);
  if (min_lag + 1 >= max_lag) throw DataError("F0 frame too short for the configured pitch range");

  const FftPlan plan(next_pow2(2 * L));
  const double gate = std::max(cfg.rms_floor, cfg.rms_relative * clip_rms);
  const std::size_t hop = std::min(fs.hop_length(), L);
  const std::size_t centre_start = (L - hop) / 2;

  F0Result out{LldTrack{"F0", std::vector<double>(fs.count(), 0.0), fs.hop_s()}, {}};
  std::vector<bool> raw(fs.count(), false);
  std::vector<double> candidate(fs.count(), 0.0);
  std::vector<std::complex<double>> scratch;
  std::vector<double> prefix, nac;

  for (std::size_t t = 0; t < fs.count(); ++t) {
    const auto x = fs[t];
    const double frame_rms = rms(x);
    const double centre_rms = rms(x.subspan(centre_start, hop));
    if (frame_rms <= 0.0) continue;
    detail::normalized_autocorrelation(x, plan, max_lag + 1, scratch, prefix, nac);

    auto is_peak = [&](std::size_t tau) { return nac[tau] >= nac[tau - 1] && nac[tau] >= nac[tau + 1]; };
    double peak = 0.0;
    for (std::size_t tau = min_lag; tau <= max_lag; ++tau)
      if (is_peak(tau)) peak = std::max(peak, nac[tau]);
    if (peak <= 0.0) continue;  // no periodicity inside the lag range
    std::size_t best = 0;
    for (std::size_t tau = min_lag; tau <= max_lag; ++tau) {
      if (is_peak(tau) && nac[tau] >= 0.9 * peak) {
        best = tau;
        break;
      }
    }

    const double a = nac[best - 1], b = nac[best], c = nac[best + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = denom < 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
    candidate[t] = rate / (static_cast<double>(best) + shift);
    raw[t] = b >= cfg.nac_threshold && frame_rms >= gate && centre_rms >= gate;
  }

  auto voiced = detail::median_filter(raw, cfg.median_width);
  out.mask.voiced.assign(fs.count(), false);
  out.mask.f0_hz.assign(fs.count(), 0.0);
  for (std::size_t t = 0; t < fs.count(); ++t) {
    if (voiced[t] && candidate[t] > 0.0) {
      out.mask.voiced[t] = true;
      out.mask.f0_hz[t] = candidate[t];
      out.f0.values[t] = candidate[t];
    }
  }
  return out;
}

/// Centred moving average; edge frames average only the neighbours that exist.
inline LldTrack smooth_sma(const LldTrack& track, std::size_t window = 3) {
  if (window == 0 || window % 2 == 0) throw DataError("smoothing window must be odd and >= 1");
  LldTrack out{track.name + "_sma" + std::to_string(window), track.values, track.hop_s};
  const std::size_t half = window / 2;
  const std::size_t n = track.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) acc += track.values[j];
    out.values[i] = acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// As smooth_sma, but only voiced neighbours contribute and unvoiced frames stay 0.
inline LldTrack smooth_sma(const LldTrack& track, std::size_t window, const VoicingMask& mask) {
  if (window == 0 || window % 2 == 0) throw DataError("smoothing window must be odd and >= 1");
  if (mask.size() != track.size()) throw DataError("voicing mask length does not match track");
  LldTrack out{track.name + "_sma" + std::to_string(window) + "nz", std::vector<double>(track.size(), 0.0),
               track.hop_s};
  const std::size_t half = window / 2;
  const std::size_t n = track.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.voiced[i]) continue;
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t j = lo; j <= hi; ++j) {
      if (mask.voiced[j]) {
        acc += track.values[j];
        ++used;
      }
    }
    out.values[i] = acc / static_cast<double>(used);
  }
  return out;
}

}  // namespace spoofprint

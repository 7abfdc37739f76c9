#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "spoofprint/features.hpp"
#include "spoofprint/lld.hpp"
#include "test_util.hpp"

using namespace spoofprint;
using namespace spoofprint::testing;

namespace {

FrameSeries spectral_frames(const std::vector<double>& x) {
  return frame(std::span<const double>(x), 16000, 0.025, 0.010, Window::hann);
}

// Magnitude spectrum by direct DFT, l2-normalised.
std::vector<double> naive_unit_spectrum(std::span<const double> frame, std::size_t n_fft) {
  std::vector<double> mag(n_fft / 2 + 1);
  double norm2 = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < frame.size(); ++i)
      acc += frame[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / n_fft);
    mag[k] = std::abs(acc);
    norm2 += mag[k] * mag[k];
  }
  for (auto& v : mag) v /= std::sqrt(norm2);
  return mag;
}

}  // namespace

TEST(Loudness, SilenceIsZero) {
  const auto track = loudness_track(spectral_frames(silence(0.3)));
  for (double v : track.values) EXPECT_EQ(v, 0.0);
}

TEST(Loudness, GainScalesByFourToThePointThree) {
  const auto x = noise(0.1, 0.3, 9);
  auto x2 = x;
  for (auto& v : x2) v *= 2.0;
  const auto a = loudness_track(spectral_frames(x));
  const auto b = loudness_track(spectral_frames(x2));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_NEAR(b.values[t] / a.values[t], std::pow(4.0, 0.3), 1e-9);
  EXPECT_NEAR(std::pow(4.0, 0.3), 1.516, 1e-3);
}

TEST(Loudness, StationarySineIsFlat) {
  const auto track = loudness_track(spectral_frames(sine(440, 0.5, 0.5)));
  const double ref = track.values[track.size() / 2];
  EXPECT_GT(ref, 0.0);
  for (std::size_t t = 1; t + 1 < track.size(); ++t) EXPECT_NEAR(track.values[t] / ref, 1.0, 0.01);
}

TEST(Loudness, MelFilterbankCoversRange) {
  const MelFilterbank bank(512, 16000, LoudnessConfig{});
  EXPECT_EQ(bank.bands(), 26u);
  std::vector<double> flat(257, 1.0);
  for (std::size_t b = 0; b < bank.bands(); ++b) EXPECT_GT(bank.band_energy(b, flat), 0.0) << b;
}

TEST(Flux, StationarySineNearZero) {
  const auto track = spectral_flux_track(spectral_frames(sine(440, 0.5)));
  EXPECT_EQ(track.values[0], 0.0);
  for (std::size_t t = 1; t < track.size(); ++t) EXPECT_LT(track.values[t], 1e-3) << t;
}

TEST(Flux, AlternatingTonesGiveTwo) {
  // Non-overlapping frames so each frame holds exactly one tone.
  std::vector<double> x;
  for (int k = 0; k < 8; ++k) append(x, sine(k % 2 == 0 ? 440.0 : 3000.0, 0.025));
  const auto fs = frame(std::span<const double>(x), 16000, 0.025, 0.025, Window::hann);
  ASSERT_EQ(fs.count(), 8u);
  const auto track = spectral_flux_track(fs);
  for (std::size_t t = 1; t < fs.count(); ++t) {
    const auto a = naive_unit_spectrum(fs[t - 1], 512);
    const auto b = naive_unit_spectrum(fs[t], 512);
    double oracle = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) oracle += (a[k] - b[k]) * (a[k] - b[k]);
    EXPECT_NEAR(track.values[t], oracle, 1e-9);
    EXPECT_NEAR(track.values[t], 2.0, 0.02);
  }
}

TEST(Flux, SilenceAllZero) {
  for (double v : spectral_flux_track(spectral_frames(silence(0.2))).values) EXPECT_EQ(v, 0.0);
}

TEST(Flux, GainInvariance) {
  auto x = sawtooth(150, 0.2);
  append(x, noise(0.05, 0.2, 4));
  append(x, sine(700, 0.2, 0.3));
  const auto base = spectral_flux_track(spectral_frames(x));
  for (double c : {0.001, 0.37, 1.9}) {
    auto y = x;
    for (auto& v : y) v = v * c;
    const auto scaled = spectral_flux_track(spectral_frames(y));
    for (std::size_t t = 1; t < base.size(); ++t) EXPECT_LT(std::abs(scaled.values[t] - base.values[t]), 1e-9);
  }
}

TEST(Flux, AlignedWithLoudness) {
  const auto fs = spectral_frames(noise(0.1, 0.37, 2));
  EXPECT_EQ(loudness_track(fs).size(), spectral_flux_track(fs).size());
  EXPECT_EQ(loudness_track(fs).size(), fs.count());
}

TEST(Nac, MatchesBruteForce) {
  const auto x = noise(0.3, 0.06, 12);
  const FftPlan plan(next_pow2(2 * x.size()));
  std::vector<std::complex<double>> scratch;
  std::vector<double> prefix, nac;
  detail::normalized_autocorrelation(x, plan, 300, scratch, prefix, nac);
  for (std::size_t tau = 0; tau <= 300; tau += 7) {
    double r = 0, e1 = 0, e2 = 0;
    for (std::size_t i = 0; i + tau < x.size(); ++i) {
      r += x[i] * x[i + tau];
      e1 += x[i] * x[i];
      e2 += x[i + tau] * x[i + tau];
    }
    EXPECT_NEAR(nac[tau], r / std::sqrt(e1 * e2), 1e-9) << tau;
  }
}

TEST(MedianFilter, Width3) {
  const std::vector<bool> in = {true, false, true, true, false, true, false, false};
  const std::vector<bool> expected = {true, true, true, true, true, false, false, false};
  EXPECT_EQ(detail::median_filter(in, 3), expected);
  EXPECT_EQ(detail::median_filter(in, 1), in);
}

TEST(F0, SineAt200Hz) {
  const auto b = compute_llds(AudioClip(sine(200, 1.0, 1.0), 16000));
  std::size_t voiced = 0, interior = 0;
  for (std::size_t t = 3; t + 3 < b.mask.size(); ++t) {
    ++interior;
    if (b.mask.voiced[t]) {
      ++voiced;
      EXPECT_NEAR(b.mask.f0_hz[t], 200.0, 5.0) << t;
    }
  }
  EXPECT_GE(static_cast<double>(voiced), 0.95 * interior);
}

TEST(F0, SawtoothPitchRange) {
  for (double hz : {70.0, 120.0, 260.0, 480.0}) {
    const auto b = compute_llds(AudioClip(sawtooth(hz, 0.5), 16000));
    const auto mid = b.mask.size() / 2;
    ASSERT_TRUE(b.mask.voiced[mid]) << hz;
    EXPECT_NEAR(b.mask.f0_hz[mid], hz, hz * 0.02) << hz;
  }
}

TEST(F0, SilenceUnvoiced) {
  const auto b = compute_llds(AudioClip(silence(0.5), 16000));
  for (bool v : b.mask.voiced) EXPECT_FALSE(v);
  for (double f : b.f0.values) EXPECT_EQ(f, 0.0);
}

TEST(F0, NoiseMostlyUnvoiced) {
  const auto b = compute_llds(AudioClip(noise(0.1, 2.0, 31), 16000));  // -20 dBFS
  const auto voiced = std::count(b.mask.voiced.begin(), b.mask.voiced.end(), true);
  EXPECT_LE(static_cast<double>(voiced), 0.2 * b.mask.size());
}

TEST(F0, MaskInvariantF0PositiveIffVoiced) {
  auto x = sawtooth(150, 0.3);
  append(x, noise(0.001, 0.2, 3));
  append(x, sawtooth(220, 0.3));
  const auto b = compute_llds(AudioClip(x, 16000));
  ASSERT_EQ(b.mask.f0_hz.size(), b.mask.size());
  for (std::size_t t = 0; t < b.mask.size(); ++t) EXPECT_EQ(b.mask.voiced[t], b.mask.f0_hz[t] > 0.0) << t;
}

// Property: whatever precedes it, an appended silent region is unvoiced from
// the first hop that lies entirely inside it.
TEST(F0, AppendedSilenceUnvoiced) {
  Xorshift64Star rng(8);
  for (int trial = 0; trial < 6; ++trial) {
    auto x = trial % 2 ? sawtooth(80 + 300 * rng.uniform(), 0.2 + 0.3 * rng.uniform())
                       : noise(0.5 * rng.uniform(), 0.3, rng.next());
    const std::size_t speech = x.size();
    append(x, silence(0.4));
    const auto b = compute_llds(AudioClip(x, 16000));
    for (std::size_t t = (speech + 159) / 160; t < b.mask.size(); ++t) EXPECT_FALSE(b.mask.voiced[t]) << t;
  }
}

TEST(Sma, EdgeRule) {
  const LldTrack t{"x", {0.0, 3.0, 0.0}, 0.01};
  const auto s = smooth_sma(t, 3);
  EXPECT_DOUBLE_EQ(s.values[0], 1.5);
  EXPECT_DOUBLE_EQ(s.values[1], 1.0);
  EXPECT_DOUBLE_EQ(s.values[2], 1.5);
}

TEST(Sma, ConstantAndIdentity) {
  const LldTrack c{"c", std::vector<double>(10, 2.5), 0.01};
  for (double v : smooth_sma(c, 3).values) EXPECT_DOUBLE_EQ(v, 2.5);
  const LldTrack x{"x", {1.0, -4.0, 9.0, 0.5}, 0.01};
  EXPECT_EQ(smooth_sma(x, 1).values, x.values);
  EXPECT_THROW(smooth_sma(x, 2), DataError);
  EXPECT_THROW(smooth_sma(x, 0), DataError);
}

TEST(Sma, PropertyPreservesBounds) {
  Xorshift64Star rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    LldTrack t{"r", std::vector<double>(1 + rng.below(60)), 0.01};
    for (auto& v : t.values) v = rng.normal(0.0, 10.0);
    const auto [lo, hi] = std::minmax_element(t.values.begin(), t.values.end());
    const std::size_t window = 1 + 2 * rng.below(4);
    for (double v : smooth_sma(t, window).values) {
      EXPECT_GE(v, *lo - 1e-12);
      EXPECT_LE(v, *hi + 1e-12);
    }
  }
}

TEST(Sma, MaskedVariantIgnoresUnvoiced) {
  const LldTrack t{"f0", {100.0, 0.0, 200.0, 300.0, 0.0}, 0.01};
  const auto m = VoicingMask::from_pattern("VUVVU");
  const auto s = smooth_sma(t, 3, m);
  EXPECT_DOUBLE_EQ(s.values[0], 100.0);
  EXPECT_DOUBLE_EQ(s.values[1], 0.0);
  EXPECT_DOUBLE_EQ(s.values[2], 250.0);
  EXPECT_DOUBLE_EQ(s.values[3], 250.0);
  EXPECT_DOUBLE_EQ(s.values[4], 0.0);
}

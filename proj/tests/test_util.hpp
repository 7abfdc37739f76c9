#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "spoofprint/audio.hpp"
#include "spoofprint/rng.hpp"

namespace spoofprint::testing {

inline std::vector<double> sine(double hz, double seconds, double amp = 1.0, int rate = 16000) {
  std::vector<double> x(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / rate);
  return x;
}

inline std::vector<double> sawtooth(double hz, double seconds, double amp = 0.5, int rate = 16000) {
  std::vector<double> x(static_cast<std::size_t>(std::llround(seconds * rate)));
  double phase = 0.0;
  for (auto& v : x) {
    v = amp * (2.0 * phase - 1.0);
    phase += hz / rate;
    phase -= std::floor(phase);
  }
  return x;
}

inline std::vector<double> noise(double rms_level, double seconds, std::uint64_t seed, int rate = 16000) {
  Xorshift64Star rng(seed);
  std::vector<double> x(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (auto& v : x) v = std::clamp(rms_level * rng.normal(), -1.0, 1.0);
  return x;
}

inline std::vector<double> silence(double seconds, int rate = 16000) {
  return std::vector<double>(static_cast<std::size_t>(std::llround(seconds * rate)), 0.0);
}

inline void append(std::vector<double>& dst, const std::vector<double>& src) {
  dst.reserve(dst.size() + src.size());
  for (double v : src) dst.push_back(v);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("spoofprint_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace spoofprint::testing

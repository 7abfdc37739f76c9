#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spoofprint/error.hpp"

namespace spoofprint {

inline constexpr int kPipelineSampleRate = 16000;

/// Decoded mono waveform. Samples are finite and within [-1, 1].
class AudioClip {
 public:
  AudioClip(std::vector<double> samples, int sample_rate_hz, std::string utt_id = {})
      : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz), utt_id_(std::move(utt_id)) {
    if (samples_.empty()) throw DataError("audio clip is empty");
    if (sample_rate_hz_ <= 0) throw DataError("sample rate must be positive");
    for (double s : samples_)
      if (!std::isfinite(s) || std::abs(s) > 1.0) throw DataError("audio sample out of range [-1, 1]");
  }

  std::span<const double> samples() const { return samples_; }
  int sample_rate_hz() const { return sample_rate_hz_; }
  const std::string& utt_id() const { return utt_id_; }
  std::size_t size() const { return samples_.size(); }
  double duration_s() const { return static_cast<double>(samples_.size()) / sample_rate_hz_; }

 private:
  std::vector<double> samples_;
  int sample_rate_hz_;
  std::string utt_id_;
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
inline void put_u16le(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace detail

/// Decodes an in-memory RIFF/WAVE PCM16 file (mono or stereo).
inline AudioClip decode_wav(std::span<const unsigned char> bytes, std::string utt_id = {}) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file");

  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t chunk_size = detail::read_u32le(hdr + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > bytes.size()) throw DataError("truncated file");
      const std::uint16_t format = detail::read_u16le(bytes.data() + body);
      channels = detail::read_u16le(bytes.data() + body + 2);
      rate = detail::read_u32le(bytes.data() + body + 4);
      const std::uint16_t bits = detail::read_u16le(bytes.data() + body + 14);
      if (format != 1) throw DataError("unsupported codec (format tag " + std::to_string(format) + ")");
      if (bits != 16) throw DataError("unsupported bit depth " + std::to_string(bits));
      if (channels != 1 && channels != 2)
        throw DataError("unsupported channel count " + std::to_string(channels));
      if (rate == 0) throw DataError("invalid sample rate 0");
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw DataError("data chunk before fmt chunk");
      if (body + chunk_size > bytes.size()) throw DataError("truncated file");
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t n = chunk_size / frame_bytes;
      std::vector<double> samples(n);
      const unsigned char* p = bytes.data() + body;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const auto v = static_cast<std::int16_t>(detail::read_u16le(p + i * frame_bytes + 2 * c));
          acc += static_cast<double>(v) / 32768.0;
        }
        samples[i] = acc / channels;
      }
      return AudioClip(std::move(samples), static_cast<int>(rate), std::move(utt_id));
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw DataError(have_fmt ? "truncated file (no data chunk)" : "truncated file (no fmt chunk)");
}

inline AudioClip load_audio(const std::filesystem::path& path, std::string utt_id = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open audio file '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes, std::move(utt_id));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// PCM16 mono encoding; samples are rounded and clamped to the int16 range.
inline std::vector<unsigned char> encode_wav(const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.size());
  const std::uint32_t rate = static_cast<std::uint32_t>(clip.sample_rate_hz());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32le(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32le(out, 16);
  detail::put_u16le(out, 1);
  detail::put_u16le(out, 1);
  detail::put_u32le(out, rate);
  detail::put_u32le(out, rate * 2);
  detail::put_u16le(out, 2);
  detail::put_u16le(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32le(out, 2 * n);
  for (double s : clip.samples()) {
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    detail::put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write audio file '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Linear-interpolation resampling. Output length is round(N * target / source).
inline AudioClip resample(const AudioClip& clip, int target_hz) {
  if (target_hz <= 0) throw DataError("target sample rate must be positive");
  if (target_hz == clip.sample_rate_hz()) return clip;
  const auto in = clip.samples();
  const double step = static_cast<double>(clip.sample_rate_hz()) / target_hz;
  const auto n_out = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(static_cast<double>(in.size()) * target_hz / clip.sample_rate_hz())));
  std::vector<double> out(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double t = static_cast<double>(i) * step;
    const auto j = static_cast<std::size_t>(t);
    if (j + 1 >= in.size()) {
      out[i] = in.back();
    } else {
      const double frac = t - static_cast<double>(j);
      out[i] = in[j] + frac * (in[j + 1] - in[j]);
    }
  }
  return AudioClip(std::move(out), target_hz, clip.utt_id());
}

enum class Window { hann, rect };

/// Periodic Hann (w[0] = 0) or rectangular window of length n.
inline std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::hann)
    for (std::size_t i = 0; i < n; ++i)
      out[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return out;
}

/// Fixed-length windowed frames stored contiguously.
class FrameSeries {
 public:
  FrameSeries(std::vector<double> data, std::size_t frame_length, std::size_t hop_length, Window window,
              int sample_rate_hz)
      : data_(std::move(data)),
        frame_length_(frame_length),
        hop_length_(hop_length),
        window_(window),
        sample_rate_hz_(sample_rate_hz) {}

  std::size_t count() const { return frame_length_ == 0 ? 0 : data_.size() / frame_length_; }
  std::size_t frame_length() const { return frame_length_; }
  std::size_t hop_length() const { return hop_length_; }
  double frame_len_s() const { return static_cast<double>(frame_length_) / sample_rate_hz_; }
  double hop_s() const { return static_cast<double>(hop_length_) / sample_rate_hz_; }
  Window window() const { return window_; }
  int sample_rate_hz() const { return sample_rate_hz_; }

  std::span<const double> operator[](std::size_t i) const {
    return std::span<const double>(data_).subspan(i * frame_length_, frame_length_);
  }

 private:
  std::vector<double> data_;
  std::size_t frame_length_;
  std::size_t hop_length_;
  Window window_;
  int sample_rate_hz_;
};

/// Frame count 1 + floor((N - L) / H).
inline std::size_t frame_count(std::size_t n, std::size_t frame_length, std::size_t hop) {
  if (n < frame_length) return 0;
  return 1 + (n - frame_length) / hop;
}

inline FrameSeries frame(std::span<const double> samples, int sample_rate_hz, double frame_len_s, double hop_s,
                         Window window) {
  if (!(hop_s > 0.0) || frame_len_s < hop_s) throw DataError("frame parameters require frame_len >= hop > 0");
  const auto L = static_cast<std::size_t>(std::llround(frame_len_s * sample_rate_hz));
  const auto H = static_cast<std::size_t>(std::llround(hop_s * sample_rate_hz));
  if (H == 0) throw DataError("hop shorter than one sample");
  if (samples.size() < L) throw DataError("clip shorter than one frame");
  const std::size_t count = frame_count(samples.size(), L, H);
  const auto w = make_window(window, L);
  std::vector<double> data(count * L);
  for (std::size_t f = 0; f < count; ++f)
    for (std::size_t i = 0; i < L; ++i) data[f * L + i] = samples[f * H + i] * w[i];
  return FrameSeries(std::move(data), L, H, window, sample_rate_hz);
}

inline FrameSeries frame(const AudioClip& clip, double frame_len_s, double hop_s, Window window) {
  return frame(clip.samples(), clip.sample_rate_hz(), frame_len_s, hop_s, window);
}

/// Zero-pads (L - H) / 2 samples on each side so that frame t is centred on
/// hop interval [tH, (t+1)H); the padded signal yields floor(N / H) frames.
inline std::vector<double> pad_centered(std::span<const double> samples, std::size_t frame_length,
                                        std::size_t hop) {
  const std::size_t extra = frame_length > hop ? frame_length - hop : 0;
  const std::size_t left = extra / 2;
  const std::size_t right = extra - left;
  std::vector<double> out(left + samples.size() + right, 0.0);
  std::copy(samples.begin(), samples.end(), out.begin() + static_cast<std::ptrdiff_t>(left));
  return out;
}

inline double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace spoofprint

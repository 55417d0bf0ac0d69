#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rhrnet/errors.hpp"

namespace rhrnet {

struct AudioClip {
  std::vector<double> samples;  // nominally in [-1, 1]
  int rate = 16000;             // Hz

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / rate; }
};

// PCM16 mono RIFF/WAVE. Integer sample v maps to v/32768. Multi-channel files
// are rejected unless a channel index is selected.
AudioClip read_wav(const std::filesystem::path& path, int channel = -1);

// Inverse mapping with round-to-nearest, clamped to [-32768, 32767].
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

// Polyphase windowed-sinc (Kaiser) rational resampling.
// Output length = round(len * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

enum class SegmentMode { train, eval };

// Fixed-length windows of a clip: hop 3L/4 in train mode, L in eval mode; a
// final partial window is zero-padded and flagged.
struct SegmentSet {
  std::size_t segment_len = 1024;
  SegmentMode mode = SegmentMode::eval;
  std::size_t original_length = 0;
  std::vector<std::size_t> offsets;   // strictly increasing
  std::vector<std::uint8_t> padded;   // 1 where the window ran past the end
  std::vector<double> data;           // N x L row-major

  std::size_t size() const { return offsets.size(); }
  std::span<const double> segment(std::size_t i) const {
    return {data.data() + i * segment_len, segment_len};
  }
};

SegmentSet segment(const AudioClip& clip, std::size_t L, SegmentMode mode);

// Concatenates an eval-mode SegmentSet back into a clip, trimming the zero
// padding to the original length. Train-mode sets are rejected: overlapped
// reassembly is undefined.
AudioClip reassemble(const SegmentSet& set, int rate = 16000);

// noisy = clean + g * noise with g solving 10 log10(P_clean / P_gnoise) = snr_db
// over the full clip. Short noise is tiled (long noise cropped) from a seeded
// start offset.
AudioClip mix_at_snr(const AudioClip& clean, const AudioClip& noise, double snr_db,
                     std::uint64_t seed = 0);

enum class NoiseKind { white, babble, file };
enum class CleanProfile { harmonic, sine };

struct MixSpec {
  std::vector<double> snr_db{15.0, 10.0, 5.0, 0.0};
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::white;
  std::filesystem::path noise_file;          // used when noise == file
  CleanProfile clean = CleanProfile::harmonic;
};

struct SynthPair {
  AudioClip clean;
  AudioClip noisy;
  double snr_db = 0.0;
  SegmentSet clean_segments;
  SegmentSet noisy_segments;  // same offsets as clean_segments
};

struct SynthDataset {
  std::vector<SynthPair> pairs;
};

// Seeded desk-scale corpus: harmonic speech-like clean clips (or plain sines)
// mixed with the spec's noise at its SNR values, cycled per pair, then
// segmented. Deterministic given spec.seed.
SynthDataset synth_dataset(const MixSpec& spec, std::size_t count, std::size_t L,
                           std::size_t segments_per_clip = 4,
                           SegmentMode mode = SegmentMode::train, int rate = 16000);

// Clean generator used by synth_dataset, exposed for tests and tooling.
AudioClip synth_clean(std::uint64_t seed, std::size_t length, int rate, CleanProfile profile);
// Noise generator: white or babble-like multi-sine.
AudioClip synth_noise(std::uint64_t seed, std::size_t length, int rate, NoiseKind kind);

// Manifest of paired files: one "clean,noisy,snr" row per line.
struct ManifestRow {
  std::filesystem::path clean;
  std::filesystem::path noisy;
  double snr_db = 0.0;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

}  // namespace rhrnet

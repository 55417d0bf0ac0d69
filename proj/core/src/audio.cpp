#include "rhrnet/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rhrnet/init.hpp"

namespace rhrnet {

namespace {

constexpr double kPcmScale = 32768.0;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0] | (p[1] << 8) | (p[2] << 16) |
                                    (static_cast<std::uint32_t>(p[3]) << 24));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put_u16(out, static_cast<std::uint16_t>(v & 0xffff));
  put_u16(out, static_cast<std::uint16_t>(v >> 16));
}

double mean_square(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path, int channel) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ParseError("'" + path.string() + "': malformed header, not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t chunk_len = read_u32(hdr + 4);
    const std::uint8_t* body = hdr + 8;
    if (chunk_len > bytes.size() - pos - 8) {
      if (std::memcmp(hdr, "data", 4) == 0)
        throw ParseError("'" + path.string() + "': truncated data chunk");
      throw ParseError("'" + path.string() + "': truncated chunk");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw ParseError("'" + path.string() + "': malformed fmt chunk");
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data == nullptr)
    throw ParseError("'" + path.string() + "': malformed header, missing fmt or data chunk");
  if (format != 1)
    throw ParseError("'" + path.string() + "': unsupported codec (format tag " +
                     std::to_string(format) + "), only PCM is supported");
  if (bits != 16)
    throw ParseError("'" + path.string() + "': unsupported bit depth " + std::to_string(bits) +
                     ", only 16-bit PCM is supported");
  if (channels == 0 || rate == 0)
    throw ParseError("'" + path.string() + "': malformed fmt chunk");
  if (channels > 1 && channel < 0)
    throw ParseError("'" + path.string() + "': has " + std::to_string(channels) +
                     " channels; select one explicitly");
  if (channels > 1 && channel >= channels)
    throw ParseError("'" + path.string() + "': channel " + std::to_string(channel) +
                     " out of range");

  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = data_len / frame_bytes;
  const std::size_t pick = channels == 1 ? 0 : static_cast<std::size_t>(channel);
  AudioClip clip;
  clip.rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::uint8_t* p = data + f * frame_bytes + 2 * pick;
    const auto v = static_cast<std::int16_t>(read_u16(p));
    clip.samples[f] = static_cast<double>(v) / kPcmScale;
  }
  return clip;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  if (clip.rate <= 0) throw ContractError("write_wav: sample rate must be positive");
  std::vector<std::uint8_t> out;
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(clip.rate));
  put_u32(out, static_cast<std::uint32_t>(clip.rate) * 2);
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits per sample
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_len);
  for (double x : clip.samples) {
    const long long v = std::llround(x * kPcmScale);
    const auto clamped = static_cast<std::int16_t>(std::clamp<long long>(v, -32768, 32767));
    put_u16(out, static_cast<std::uint16_t>(clamped));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write to '" + path.string() + "' failed");
}

SegmentSet segment(const AudioClip& clip, std::size_t L, SegmentMode mode) {
  if (L == 0) throw ContractError("segment: segment length must be positive");
  if (clip.samples.empty()) throw ContractError("segment: empty clip");
  const std::size_t hop = mode == SegmentMode::train ? (3 * L) / 4 : L;
  SegmentSet set;
  set.segment_len = L;
  set.mode = mode;
  set.original_length = clip.samples.size();
  for (std::size_t offset = 0; offset == 0 || offset < clip.samples.size(); offset += hop) {
    const std::size_t avail = clip.samples.size() - std::min(offset, clip.samples.size());
    const std::size_t take = std::min(L, avail);
    set.offsets.push_back(offset);
    set.padded.push_back(take < L ? 1 : 0);
    const std::size_t base = set.data.size();
    set.data.resize(base + L, 0.0);
    std::copy_n(clip.samples.begin() + static_cast<std::ptrdiff_t>(offset), take,
                set.data.begin() + static_cast<std::ptrdiff_t>(base));
  }
  return set;
}

AudioClip reassemble(const SegmentSet& set, int rate) {
  if (set.mode != SegmentMode::eval)
    throw ContractError("reassemble: only eval-mode segment sets can be reassembled");
  AudioClip clip;
  clip.rate = rate;
  clip.samples.resize(set.original_length);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::size_t offset = set.offsets[i];
    const std::size_t take = std::min(set.segment_len, set.original_length - offset);
    const auto seg = set.segment(i);
    std::copy_n(seg.begin(), take, clip.samples.begin() + static_cast<std::ptrdiff_t>(offset));
  }
  return clip;
}

AudioClip mix_at_snr(const AudioClip& clean, const AudioClip& noise, double snr_db,
                     std::uint64_t seed) {
  if (clean.rate != noise.rate)
    throw ContractError("mix_at_snr: clean is " + std::to_string(clean.rate) + " Hz, noise " +
                        std::to_string(noise.rate) + " Hz");
  if (!std::isfinite(snr_db)) throw ContractError("mix_at_snr: snr must be finite");
  if (clean.samples.empty() || noise.samples.empty())
    throw DegenerateSignalError("mix_at_snr: empty signal");

  // Align the noise to the clean length: seeded start offset, tiled cyclically.
  Rng rng(Rng::derive_seed(seed, 0x6d6978));
  const std::size_t start = rng.uniform_index(noise.samples.size());
  std::vector<double> aligned(clean.samples.size());
  for (std::size_t i = 0; i < aligned.size(); ++i)
    aligned[i] = noise.samples[(start + i) % noise.samples.size()];

  const double p_clean = mean_square(clean.samples);
  const double p_noise = mean_square(aligned);
  if (p_clean == 0.0) throw DegenerateSignalError("mix_at_snr: clean signal is silent");
  if (p_noise == 0.0) throw DegenerateSignalError("mix_at_snr: noise signal is silent");

  const double gain = std::sqrt(p_clean / p_noise) * std::pow(10.0, -snr_db / 20.0);
  AudioClip out;
  out.rate = clean.rate;
  out.samples.resize(clean.samples.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = clean.samples[i] + gain * aligned[i];
  return out;
}

AudioClip synth_clean(std::uint64_t seed, std::size_t length, int rate, CleanProfile profile) {
  Rng rng(seed);
  AudioClip clip;
  clip.rate = rate;
  clip.samples.assign(length, 0.0);
  const double dt = 1.0 / rate;

  if (profile == CleanProfile::sine) {
    const double freq = 220.0 + 220.0 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    for (std::size_t i = 0; i < length; ++i)
      clip.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * freq * i * dt + phase);
    return clip;
  }

  // Sum of drifting harmonics under a syllabic envelope, plus a slight
  // breath-noise floor so the signal has energy across the whole band.
  const double f0 = 120.0 + 100.0 * rng.uniform();
  const double drift_rate = 0.5 + 1.5 * rng.uniform();
  const double drift_phase = 2.0 * std::numbers::pi * rng.uniform();
  const double syllable_rate = 2.0 + 3.0 * rng.uniform();
  const double syllable_phase = 2.0 * std::numbers::pi * rng.uniform();
  const double top = std::min(4600.0, 0.45 * rate);
  const int harmonics = std::max(4, static_cast<int>(top / f0));
  std::vector<double> amp(harmonics), phase(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    amp[h] = 1.0 / std::pow(h + 1.0, 0.7);
    phase[h] = 2.0 * std::numbers::pi * rng.uniform();
  }

  double cycle = 0.0;  // integrated fundamental phase, in cycles
  double peak = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    const double t = i * dt;
    const double f = f0 * (1.0 + 0.08 * std::sin(2.0 * std::numbers::pi * drift_rate * t +
                                                 drift_phase));
    cycle += f * dt;
    const double env =
        0.5 * (1.0 + 0.8 * std::sin(2.0 * std::numbers::pi * syllable_rate * t + syllable_phase));
    double v = 0.015 * rng.normal();  // breath
    for (int h = 0; h < harmonics; ++h)
      v += amp[h] * std::sin(2.0 * std::numbers::pi * (h + 1) * cycle + phase[h]);
    clip.samples[i] = env * v;
    peak = std::max(peak, std::abs(clip.samples[i]));
  }
  if (peak > 0.0)
    for (double& v : clip.samples) v *= 0.5 / peak;
  return clip;
}

AudioClip synth_noise(std::uint64_t seed, std::size_t length, int rate, NoiseKind kind) {
  if (kind == NoiseKind::file)
    throw ContractError("synth_noise: file noise is read from disk, not synthesized");
  Rng rng(seed);
  AudioClip clip;
  clip.rate = rate;
  clip.samples.assign(length, 0.0);
  if (kind == NoiseKind::white) {
    for (double& v : clip.samples) v = 0.1 * rng.normal();
    return clip;
  }
  // babble: several drifting voices summed
  const int voices = 8;
  const double dt = 1.0 / rate;
  std::vector<double> freq(voices), phase(voices), wobble(voices), wobble_phase(voices);
  for (int v = 0; v < voices; ++v) {
    freq[v] = 100.0 + 1900.0 * rng.uniform();
    phase[v] = 2.0 * std::numbers::pi * rng.uniform();
    wobble[v] = 0.3 + 2.7 * rng.uniform();
    wobble_phase[v] = 2.0 * std::numbers::pi * rng.uniform();
  }
  for (std::size_t i = 0; i < length; ++i) {
    const double t = i * dt;
    double acc = 0.0;
    for (int v = 0; v < voices; ++v) {
      const double f = freq[v] * (1.0 + 0.05 * std::sin(2.0 * std::numbers::pi * wobble[v] * t +
                                                        wobble_phase[v]));
      acc += std::sin(2.0 * std::numbers::pi * f * t + phase[v]);
    }
    clip.samples[i] = 0.1 * acc / voices;
  }
  return clip;
}

namespace {

// Overlapped (train-mode) segmentation always ends in a zero-padded tail; the
// synthetic corpus keeps only full windows so every emitted segment is real
// signal.
void drop_padded_tail(SegmentSet& set) {
  while (!set.offsets.empty() && set.padded.back()) {
    set.offsets.pop_back();
    set.padded.pop_back();
    set.data.resize(set.data.size() - set.segment_len);
  }
}

}  // namespace

SynthDataset synth_dataset(const MixSpec& spec, std::size_t count, std::size_t L,
                           std::size_t segments_per_clip, SegmentMode mode, int rate) {
  if (count == 0) throw ContractError("synth_dataset: count must be at least 1");
  if (spec.snr_db.empty()) throw ContractError("synth_dataset: no SNR values");
  for (double s : spec.snr_db)
    if (!std::isfinite(s)) throw ContractError("synth_dataset: SNR must be finite");
  if (segments_per_clip == 0)
    throw ContractError("synth_dataset: segments_per_clip must be at least 1");

  // Clip length that segments into exactly segments_per_clip full windows.
  const std::size_t hop = mode == SegmentMode::train ? (3 * L) / 4 : L;
  const std::size_t clip_len = L + (segments_per_clip - 1) * hop;

  AudioClip noise_source;
  if (spec.noise == NoiseKind::file) noise_source = read_wav(spec.noise_file);

  SynthDataset out;
  out.pairs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    SynthPair pair;
    pair.snr_db = spec.snr_db[k % spec.snr_db.size()];
    pair.clean = synth_clean(Rng::derive_seed(spec.seed, 2 * k), clip_len, rate, spec.clean);
    AudioClip noise = spec.noise == NoiseKind::file
                          ? noise_source
                          : synth_noise(Rng::derive_seed(spec.seed, 2 * k + 1), clip_len, rate,
                                        spec.noise);
    if (spec.noise == NoiseKind::file && noise.rate != rate)
      noise = resample(noise, rate);
    pair.noisy = mix_at_snr(pair.clean, noise, pair.snr_db, Rng::derive_seed(spec.seed, k));
    pair.clean_segments = segment(pair.clean, L, mode);
    pair.noisy_segments = segment(pair.noisy, L, mode);
    drop_padded_tail(pair.clean_segments);
    drop_padded_tail(pair.noisy_segments);
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest '" + path.string() + "'");
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string clean, noisy, snr;
    if (!std::getline(ss, clean, ',') || !std::getline(ss, noisy, ','))
      throw ParseError("manifest '" + path.string() + "' line " + std::to_string(lineno) +
                       ": expected 'clean,noisy[,snr]'");
    ManifestRow row;
    row.clean = clean;
    row.noisy = noisy;
    if (std::getline(ss, snr, ',')) {
      try {
        row.snr_db = std::stod(snr);
      } catch (const std::exception&) {
        throw ParseError("manifest '" + path.string() + "' line " + std::to_string(lineno) +
                         ": bad snr value '" + snr + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const ManifestRow& row : rows)
    out << row.clean.string() << "," << row.noisy.string() << "," << row.snr_db << "\n";
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

}  // namespace rhrnet

#pragma once

#include <string>
#include <vector>

#include "rhrnet/audio.hpp"

namespace rhrnet {

// Mean segmental SNR in dB over 30 ms frames with 75% overlap. Per-frame SNR
// is clamped to [-10, 35]; frames with zero clean energy are skipped.
double ssnr(const AudioClip& clean, const AudioClip& enhanced);

// Short-time objective intelligibility: mean correlation of one-third-octave
// temporal envelopes over 30-frame segments, after resampling to 10 kHz and
// removing frames more than 40 dB below the loudest clean frame.
double stoi(const AudioClip& clean, const AudioClip& enhanced);

struct MetricRow {
  std::string id;
  double ssnr = 0.0;
  double stoi = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  double mean_ssnr() const;
  double mean_stoi() const;
  std::string table() const;  // aligned plain text
  std::string csv() const;    // file,ssnr,stoi rows
};

}  // namespace rhrnet

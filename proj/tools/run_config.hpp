#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include "rhrnet/model.hpp"
#include "rhrnet/training.hpp"

namespace rhrnet::cli {

// Key-value run configuration: model shape, training schedule, seed. Every
// field has a default; command-line flags override file values.
struct RunConfig {
  std::optional<std::pair<std::size_t, std::size_t>> scale;  // over the base shape
  std::size_t segment_len = 1024;
  std::array<std::size_t, 7> widths{2, 128, 256, 512, 256, 128, 1};
  TrainSchedule schedule;
  double val_fraction = 0.05;
  std::uint64_t seed = 0;

  // Lines of "key = value"; '#' starts a comment. Unknown keys are errors.
  static RunConfig from_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);

  ModelConfig model_config() const;
};

// "tiny" or "p/q" or "p" -> rational scale over the base config.
std::pair<std::size_t, std::size_t> parse_scale(const std::string& text);

// "15,10,5,0" -> values; throws ConfigError on anything unparsable.
std::vector<double> parse_snr_list(const std::string& text);

}  // namespace rhrnet::cli

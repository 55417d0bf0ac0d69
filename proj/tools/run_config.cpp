#include "run_config.hpp"

#include <fstream>
#include <sstream>

namespace rhrnet::cli {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::size_t to_size(const std::string& key, const std::string& value) {
  try {
    const long long v = std::stoll(value);
    if (v < 0) throw std::out_of_range("negative");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    return std::stod(value);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + value + "'");
  }
}

}  // namespace

std::pair<std::size_t, std::size_t> parse_scale(const std::string& text) {
  if (text == "tiny") return {1, 16};
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      const std::size_t num = std::stoull(text);
      if (num == 0) throw std::invalid_argument("zero");
      return {num, 1};
    }
    const std::size_t num = std::stoull(text.substr(0, slash));
    const std::size_t den = std::stoull(text.substr(slash + 1));
    if (num == 0 || den == 0) throw std::invalid_argument("zero");
    return {num, den};
  } catch (const std::exception&) {
    throw ConfigError("bad scale '" + text + "': expected 'tiny' or a rational like 1/16");
  }
}

std::vector<double> parse_snr_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument("trailing junk");
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad SNR list entry '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty SNR list");
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "segment_len") {
    segment_len = to_size(key, value);
  } else if (key == "widths") {
    std::stringstream ss(value);
    std::string item;
    std::vector<std::size_t> w;
    while (std::getline(ss, item, ',')) w.push_back(to_size(key, trim(item)));
    if (w.size() != 7)
      throw ConfigError("config key 'widths': expected 7 values, got " +
                        std::to_string(w.size()));
    std::copy(w.begin(), w.end(), widths.begin());
  } else if (key == "scale") {
    scale = parse_scale(value);
  } else if (key == "seed") {
    seed = to_size(key, value);
  } else if (key == "lr_init") {
    schedule.lr_init = to_double(key, value);
  } else if (key == "lr_floor") {
    schedule.lr_floor = to_double(key, value);
  } else if (key == "decay_factor") {
    schedule.decay_factor = to_double(key, value);
  } else if (key == "plateau_patience") {
    schedule.plateau_patience = to_size(key, value);
  } else if (key == "stop_patience") {
    schedule.stop_patience = to_size(key, value);
  } else if (key == "batch_size") {
    schedule.batch_size = to_size(key, value);
  } else if (key == "max_epochs") {
    schedule.max_epochs = to_size(key, value);
  } else if (key == "val_fraction") {
    val_fraction = to_double(key, value);
    if (val_fraction < 0.0 || val_fraction >= 1.0)
      throw ConfigError("val_fraction must be in [0, 1)");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  RunConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config '" + path.string() + "' line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

ModelConfig RunConfig::model_config() const {
  if (scale) return ModelConfig::scaled(scale->first, scale->second);
  ModelConfig c;
  c.segment_len = segment_len;
  c.widths = widths;
  c.validate();
  return c;
}

}  // namespace rhrnet::cli

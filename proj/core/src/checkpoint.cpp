#include "rhrnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace rhrnet {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'R', 'H', 'R', 'N'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

json config_json(const ModelConfig& c) {
  return json{{"segment_len", c.segment_len},
              {"widths", c.widths},
              {"scale_num", c.scale_num},
              {"scale_den", c.scale_den}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.segment_len = j.at("segment_len").get<std::size_t>();
  const auto w = j.at("widths").get<std::vector<std::size_t>>();
  if (w.size() != 7)
    throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                          "checkpoint config has " + std::to_string(w.size()) + " widths");
  std::copy(w.begin(), w.end(), c.widths.begin());
  c.scale_num = j.value("scale_num", std::size_t{1});
  c.scale_den = j.value("scale_den", std::size_t{1});
  return c;
}

void append_directory(json& arrays, const ParameterSet<float>& set, const std::string& prefix) {
  for (const auto& [name, tensor] : set)
    arrays.push_back(json{{"name", prefix + name}, {"shape", tensor.shape()}});
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     std::uint64_t seed, const CheckpointExtra* extra) {
  params.config.validate();
  const ParameterSet<float> set = params.to_set();

  json header;
  header["config"] = config_json(params.config);
  header["seed"] = seed;
  json arrays = json::array();
  append_directory(arrays, set, "");
  if (extra) {
    append_directory(arrays, extra->arrays, "extra.");
    header["extra_scalars"] = extra->scalars;
  }
  header["arrays"] = std::move(arrays);

  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  auto write_set = [&](const ParameterSet<float>& s) {
    for (const auto& [name, tensor] : s)
      out.write(reinterpret_cast<const char*>(tensor.data()),
                static_cast<std::streamsize>(tensor.count() * sizeof(float)));
  };
  write_set(set);
  if (extra) write_set(extra->arrays);
  out.flush();
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - pos < n)
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            "checkpoint truncated in " + std::string(what));
  };
  need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError(CheckpointError::Kind::BadMagic, "not a checkpoint file");
  pos += sizeof kMagic;

  need(sizeof(std::uint32_t), "version");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + pos, sizeof version);
  pos += sizeof version;
  if (version != kVersion)
    throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                          "checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kVersion));

  need(sizeof(std::uint64_t), "header length");
  std::uint64_t header_len;
  std::memcpy(&header_len, bytes.data() + pos, sizeof header_len);
  pos += sizeof header_len;
  need(header_len, "header");
  json header;
  try {
    header = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                         bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          std::string("checkpoint header unreadable: ") + e.what());
  }
  pos += header_len;

  LoadedCheckpoint result;
  ModelConfig config;
  try {
    config = config_from_json(header.at("config"));
    result.seed = header.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          std::string("checkpoint header incomplete: ") + e.what());
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointError::Kind::ShapeMismatch, e.what());
  }

  ParameterSet<float> model_set;
  ParameterSet<float> extra_set;
  for (const auto& entry : header.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    std::size_t count = 1;
    for (std::size_t e : shape) count *= e;
    need(count * sizeof(float), ("array " + name).c_str());
    std::vector<float> data(count);
    std::memcpy(data.data(), bytes.data() + pos, count * sizeof(float));
    pos += count * sizeof(float);
    if (name.rfind("extra.", 0) == 0)
      extra_set.add(name.substr(6), Tensor<float>(shape, std::move(data)));
    else
      model_set.add(name, Tensor<float>(shape, std::move(data)));
  }

  try {
    result.params = ModelParams<float>::from_set(config, model_set);
  } catch (const Error& e) {
    throw CheckpointError(CheckpointError::Kind::ShapeMismatch, e.what());
  }
  // Cross-check stored shapes against the shape table the config implies.
  const auto n = config.hidden_per_dir();
  const auto feats = config.input_features();
  std::size_t idx = 0;
  auto expect = [&](const std::string& name, const Shape& shape) {
    if (idx >= model_set.size() || model_set.item(idx).first != name ||
        model_set.item(idx).second.shape() != shape)
      throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                            "stored array " + std::to_string(idx) +
                                " does not match the config's shape table at " + name);
    ++idx;
  };
  auto expect_gru = [&](const std::string& base, std::size_t nn, std::size_t ii) {
    expect(base + ".Wx", {3 * nn, ii});
    expect(base + ".Wh", {3 * nn, nn});
    expect(base + ".b", {3 * nn});
  };
  for (std::size_t k = 0; k < 6; ++k) {
    const std::string base = "l" + std::to_string(k + 1);
    expect_gru(base + ".fwd", n[k], feats[k]);
    expect_gru(base + ".bwd", n[k], feats[k]);
  }
  expect_gru("l7", 1, feats[6]);
  expect("prelu5.alpha", {config.widths[4]});
  expect("prelu6.alpha", {config.widths[5]});
  if (idx != model_set.size())
    throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                          "checkpoint carries extra model arrays");

  if (header.contains("extra_scalars") || !extra_set.empty()) {
    CheckpointExtra extra;
    extra.arrays = std::move(extra_set);
    if (header.contains("extra_scalars"))
      extra.scalars = header.at("extra_scalars").get<std::map<std::string, double>>();
    result.extra = std::move(extra);
  }
  return result;
}

}  // namespace rhrnet

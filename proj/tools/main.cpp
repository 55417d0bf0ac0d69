#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "rhrnet/audio.hpp"
#include "rhrnet/checkpoint.hpp"
#include "rhrnet/init.hpp"
#include "rhrnet/metrics.hpp"
#include "rhrnet/model.hpp"
#include "rhrnet/training.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace rhrnet;
using cli::RunConfig;

namespace {

// Exit codes: 0 success, 1 gradient check failed, 2 usage/config,
// 3 data, 4 numeric failure while training.
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct MixArgs {
  std::size_t synth_count = 0;
  std::string clean_dir;
  std::string noise = "white";
  std::string snr_list = "15,10,5,0";
  std::string profile = "speech";
  std::uint64_t seed = 0;
  std::size_t samples = 16000;
  std::string out_dir;
};

NoiseKind parse_noise_kind(const std::string& text, fs::path& file_out) {
  if (text == "white") return NoiseKind::white;
  if (text == "babble") return NoiseKind::babble;
  file_out = text;
  if (!fs::exists(file_out))
    throw ConfigError("--noise: expected 'white', 'babble' or a WAV path; '" + text +
                      "' does not exist");
  return NoiseKind::file;
}

CleanProfile parse_profile(const std::string& text) {
  if (text == "speech") return CleanProfile::harmonic;
  if (text == "sine") return CleanProfile::sine;
  throw ConfigError("--profile: expected 'speech' or 'sine', got '" + text + "'");
}

std::string numbered_name(const char* stem, std::size_t k) {
  std::ostringstream out;
  out << stem << "_" << std::setw(4) << std::setfill('0') << k << ".wav";
  return out.str();
}

int cmd_mix(const MixArgs& args) {
  const std::vector<double> snrs = cli::parse_snr_list(args.snr_list);
  fs::path noise_file;
  const NoiseKind kind = parse_noise_kind(args.noise, noise_file);
  const CleanProfile profile = parse_profile(args.profile);
  const fs::path out_dir = args.out_dir;
  fs::create_directories(out_dir);

  AudioClip noise_source;
  if (kind == NoiseKind::file) noise_source = read_wav(noise_file);

  std::vector<ManifestRow> manifest;
  auto mix_one = [&](std::size_t k, const AudioClip& clean, const fs::path& clean_path) {
    const double snr = snrs[k % snrs.size()];
    AudioClip noise = kind == NoiseKind::file
                          ? noise_source
                          : synth_noise(Rng::derive_seed(args.seed, 2 * k + 1),
                                        clean.samples.size(), clean.rate, kind);
    if (kind == NoiseKind::file && noise.rate != clean.rate) noise = resample(noise, clean.rate);
    AudioClip noisy = mix_at_snr(clean, noise, snr, Rng::derive_seed(args.seed, k));
    const fs::path noisy_path = out_dir / numbered_name("noisy", k);
    write_wav(noisy, noisy_path);
    manifest.push_back({clean_path, noisy_path, snr});
  };

  if (args.synth_count > 0) {
    for (std::size_t k = 0; k < args.synth_count; ++k) {
      AudioClip clean =
          synth_clean(Rng::derive_seed(args.seed, 2 * k), args.samples, 16000, profile);
      const fs::path clean_path = out_dir / numbered_name("clean", k);
      write_wav(clean, clean_path);
      // Mix from the quantized file so the manifest pair is self-consistent.
      mix_one(k, read_wav(clean_path), clean_path);
    }
  } else {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(args.clean_dir))
      if (entry.path().extension() == ".wav") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("--clean: no .wav files in '" + args.clean_dir + "'");
    for (std::size_t k = 0; k < files.size(); ++k) mix_one(k, read_wav(files[k]), files[k]);
  }

  write_manifest(out_dir / "manifest.csv", manifest);
  std::cout << "wrote " << manifest.size() << " pairs to " << out_dir.string() << "\n";
  return 0;
}

// Full (unpadded) aligned segment pairs of every manifest row.
Dataset load_dataset(const std::vector<ManifestRow>& rows, std::size_t segment_len) {
  Dataset data;
  for (const ManifestRow& row : rows) {
    AudioClip clean = read_wav(row.clean);
    AudioClip noisy = read_wav(row.noisy);
    if (clean.rate != noisy.rate)
      throw ParseError("pair rates differ: " + row.clean.string() + " vs " +
                       row.noisy.string());
    if (clean.samples.size() != noisy.samples.size())
      throw ParseError("pair lengths differ: " + row.clean.string() + " vs " +
                       row.noisy.string());
    SegmentSet cs = segment(clean, segment_len, SegmentMode::train);
    SegmentSet ns = segment(noisy, segment_len, SegmentMode::train);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (cs.padded[i]) continue;
      TrainingPair pair;
      pair.noisy = Tensor<float>({segment_len, 1});
      pair.clean = Tensor<float>({segment_len, 1});
      const auto nseg = ns.segment(i);
      const auto cseg = cs.segment(i);
      for (std::size_t s = 0; s < segment_len; ++s) {
        pair.noisy[s] = static_cast<float>(nseg[s]);
        pair.clean[s] = static_cast<float>(cseg[s]);
      }
      data.push_back(std::move(pair));
    }
  }
  return data;
}

struct TrainArgs {
  std::string manifest;
  std::string config_file;
  std::string out_dir;
  std::string resume;
  // flag overrides; taken when the flag was passed
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> max_epochs;
  std::optional<double> lr_init;
  std::optional<std::string> scale;
  std::optional<double> val_fraction;
};

CheckpointExtra trainer_extra(const TrainState& state) {
  CheckpointExtra extra;
  extra.arrays = state.opt.accum;
  extra.scalars = {{"next_epoch", static_cast<double>(state.next_epoch)},
                   {"lr", state.lr},
                   {"best_val", state.best_val},
                   {"plateau_wait", static_cast<double>(state.plateau_wait)},
                   {"stop_wait", static_cast<double>(state.stop_wait)},
                   {"rho", state.opt.rho},
                   {"epsilon", state.opt.epsilon}};
  return extra;
}

TrainState state_from_extra(const CheckpointExtra& extra) {
  TrainState state;
  state.opt.accum = extra.arrays;
  state.opt.rho = static_cast<float>(extra.scalars.at("rho"));
  state.opt.epsilon = static_cast<float>(extra.scalars.at("epsilon"));
  state.next_epoch = static_cast<std::size_t>(extra.scalars.at("next_epoch"));
  state.lr = extra.scalars.at("lr");
  state.best_val = extra.scalars.at("best_val");
  state.plateau_wait = static_cast<std::size_t>(extra.scalars.at("plateau_wait"));
  state.stop_wait = static_cast<std::size_t>(extra.scalars.at("stop_wait"));
  return state;
}

int cmd_train(const TrainArgs& args) {
  RunConfig run = RunConfig::from_file(args.config_file);
  if (args.seed) run.seed = *args.seed;
  if (args.batch_size) run.schedule.batch_size = *args.batch_size;
  if (args.max_epochs) run.schedule.max_epochs = *args.max_epochs;
  if (args.lr_init) run.schedule.lr_init = *args.lr_init;
  if (args.scale) run.scale = cli::parse_scale(*args.scale);
  if (args.val_fraction) run.val_fraction = *args.val_fraction;
  run.schedule.validate();
  const ModelConfig config = run.model_config();

  const std::vector<ManifestRow> rows = read_manifest(args.manifest);
  if (rows.empty()) throw ParseError("manifest '" + args.manifest + "' has no rows");
  Dataset all = load_dataset(rows, config.segment_len);
  if (all.empty()) throw ParseError("no full segments in the manifest's clips");

  // Seeded holdout; val_fraction 0 validates on the training set itself.
  Dataset train_set, val_set;
  if (run.val_fraction == 0.0) {
    train_set = all;
    val_set = all;
  } else {
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(Rng::derive_seed(run.seed, 0x76616c));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    std::size_t val_n = static_cast<std::size_t>(run.val_fraction * all.size());
    val_n = std::min(std::max<std::size_t>(val_n, 1), all.size() - 1);
    for (std::size_t i = 0; i < order.size(); ++i)
      (i < val_n ? val_set : train_set).push_back(all[order[i]]);
  }

  const fs::path out_dir = args.out_dir;
  fs::create_directories(out_dir);

  ModelParams<float> params;
  TrainState state;
  if (!args.resume.empty()) {
    LoadedCheckpoint loaded = load_checkpoint(args.resume);
    if (!(loaded.params.config == config))
      throw ConfigError("--resume: checkpoint shape does not match the configured model");
    if (!loaded.extra)
      throw ConfigError("--resume: checkpoint carries no trainer state (is it a best.ckpt?)");
    params = std::move(loaded.params);
    state = state_from_extra(*loaded.extra);
    std::cout << "resuming at epoch " << state.next_epoch << "\n";
  } else {
    params = build<float>(config, run.seed);
    state = TrainState::fresh(params.to_set(), run.schedule);
  }

  FitOptions opts;
  opts.seed = run.seed;
  opts.log = &std::cout;
  opts.on_epoch = [&](const EpochRow&, const ParameterSet<float>& set, const TrainState& st,
                      bool improved) {
    ModelParams<float> snapshot = ModelParams<float>::from_set(config, set);
    const CheckpointExtra extra = trainer_extra(st);
    save_checkpoint(out_dir / "last.ckpt", snapshot, run.seed, &extra);
    if (improved) save_checkpoint(out_dir / "best.ckpt", snapshot, run.seed);
  };

  FitResult result = fit(params, state, train_set, val_set, run.schedule, opts);

  std::ofstream log(out_dir / "history.log", std::ios::app);
  for (const EpochRow& row : result.history.rows)
    log << "epoch " << row.epoch << " lr " << row.lr << " train " << row.train_loss << " val "
        << row.val_loss << " seconds " << row.seconds << "\n";

  std::cout << "best epoch " << result.best_epoch << " val " << result.best_val << "\n"
            << "checkpoints in " << out_dir.string() << "\n";
  return 0;
}

int cmd_enhance(const std::string& model_path, const std::string& in_path,
                const std::string& out_path, bool allow_resample, int channel) {
  LoadedCheckpoint loaded = load_checkpoint(model_path);
  const ModelConfig& config = loaded.params.config;

  AudioClip clip = read_wav(in_path, channel);
  if (clip.rate != 16000) {
    if (!allow_resample)
      throw ParseError("'" + in_path + "' is " + std::to_string(clip.rate) +
                       " Hz; the model runs at 16000 Hz (pass --resample to convert)");
    clip = resample(clip, 16000);
  }

  SegmentSet segs = segment(clip, config.segment_len, SegmentMode::eval);
  SegmentSet out = segs;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    Tensor<float> seg({config.segment_len, 1});
    const auto view = segs.segment(i);
    for (std::size_t s = 0; s < view.size(); ++s) seg[s] = static_cast<float>(view[s]);
    Tensor<float> enhanced = forward(loaded.params, seg);
    for (std::size_t s = 0; s < config.segment_len; ++s)
      out.data[i * config.segment_len + s] = static_cast<double>(enhanced[s]);
  }
  write_wav(reassemble(out, clip.rate), out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& report_path) {
  const std::vector<ManifestRow> rows = read_manifest(manifest_path);
  if (rows.empty()) throw ConfigError("manifest '" + manifest_path + "' has no rows");

  MetricReport report;
  for (const ManifestRow& row : rows) {
    AudioClip clean = read_wav(row.clean);
    AudioClip processed = read_wav(row.noisy);
    MetricRow metric;
    metric.id = row.noisy.string();
    metric.ssnr = ssnr(clean, processed);
    metric.stoi = stoi(clean, processed);
    report.rows.push_back(std::move(metric));
  }

  std::cout << report.table();
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + report_path + "' for writing");
    out << report.csv();
  }
  return 0;
}

int cmd_gradcheck(const std::string& scale_text, std::uint64_t seed, bool corrupt) {
  const auto [num, den] = cli::parse_scale(scale_text);
  const ModelConfig config = ModelConfig::scaled(num, den);
  ModelParams<double> params = build<double>(config, seed);
  ParameterSet<double> set = params.to_set();

  Rng rng(Rng::derive_seed(seed, 0x67726164));
  Tensor<double> noisy({config.segment_len, 1});
  Tensor<double> clean({config.segment_len, 1});
  for (std::size_t i = 0; i < noisy.count(); ++i) noisy[i] = 2.0 * rng.uniform() - 1.0;
  for (std::size_t i = 0; i < clean.count(); ++i) clean[i] = 2.0 * rng.uniform() - 1.0;

  auto loss = [&](Tape<double>& t, const std::vector<Var<double>>& leaves) {
    std::size_t idx = 0;
    ModelVars<double> vars;
    for (std::size_t k = 0; k < 6; ++k) {
      vars.layers[k].first = {leaves[idx], leaves[idx + 1], leaves[idx + 2]};
      vars.layers[k].second = {leaves[idx + 3], leaves[idx + 4], leaves[idx + 5]};
      idx += 6;
    }
    vars.output_layer = {leaves[idx], leaves[idx + 1], leaves[idx + 2]};
    vars.alpha5 = leaves[idx + 3];
    vars.alpha6 = leaves[idx + 4];
    Var<double> pred = forward_on_tape(t, vars, config, t.constant(noisy));
    return t.logcosh_mean(pred, t.constant(clean));
  };

  ParameterSet<double> analytic = gradients<double>(loss, set);
  if (corrupt) analytic.item(0).second[0] += 1e-2;  // negative-control hook

  std::function<double(const ParameterSet<double>&)> eval = [&](const ParameterSet<double>& p) {
    return logcosh_loss(forward(ModelParams<double>::from_set(config, p), noisy), clean);
  };
  ParameterSet<double> numeric = finite_diff_gradients<double>(eval, set, 1e-5);

  // Worst relative disagreement per layer prefix (l1..l7, prelu5, prelu6).
  std::map<std::string, GradCompareResult> by_layer;
  GradCompareResult overall;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    ParameterSet<double> a1, n1;
    a1.add(analytic.item(p).first, analytic.item(p).second);
    n1.add(numeric.item(p).first, numeric.item(p).second);
    GradCompareResult one = compare_gradients(a1, n1);
    const std::string layer = analytic.item(p).first.substr(0, analytic.item(p).first.find('.'));
    if (one.max_rel_err >= by_layer[layer].max_rel_err) by_layer[layer] = one;
    if (one.max_rel_err >= overall.max_rel_err) overall = one;
  }

  std::cout << "gradient check: " << shape_str({config.segment_len, 1}) << " segments, "
            << set.total_elements() << " parameters, seed " << seed << "\n";
  for (const auto& [layer, res] : by_layer)
    std::cout << "  " << std::left << std::setw(8) << layer << " worst " << std::scientific
              << std::setprecision(3) << res.max_rel_err << " at " << res.worst_param << "["
              << res.worst_index << "]\n";
  std::cout << "max relative error " << std::scientific << std::setprecision(6)
            << overall.max_rel_err << " (threshold 1e-5) at " << overall.worst_param << "["
            << overall.worst_index << "]\n";
  const bool ok = overall.max_rel_err < 1e-5;
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual hourglass recurrent network for raw-waveform speech enhancement"};
  app.require_subcommand(1);

  MixArgs mix_args;
  CLI::App* mix = app.add_subcommand("mix", "Generate or mix paired clean/noisy WAVs");
  auto* synth_opt = mix->add_option("--synth", mix_args.synth_count, "Generate N synthetic clean clips");
  auto* clean_opt = mix->add_option("--clean", mix_args.clean_dir, "Mix existing clean WAVs from a directory")
      ->check(CLI::ExistingDirectory);
  synth_opt->excludes(clean_opt);
  mix->add_option("--noise", mix_args.noise, "white | babble | path to a noise WAV");
  mix->add_option("--snr", mix_args.snr_list, "Comma-separated SNR values in dB");
  mix->add_option("--profile", mix_args.profile, "Synthetic clean profile: speech | sine");
  mix->add_option("--seed", mix_args.seed, "Random seed");
  mix->add_option("--samples", mix_args.samples, "Synthetic clip length in samples");
  mix->add_option("--out", mix_args.out_dir, "Output directory")->required();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train on a manifest of clean/noisy pairs");
  train->add_option("--data", train_args.manifest, "Manifest CSV")->required();
  train->add_option("--config", train_args.config_file, "Run configuration file")->required();
  train->add_option("--out", train_args.out_dir, "Output directory")->required();
  train->add_option("--resume", train_args.resume, "Continue from a last.ckpt");
  train->add_option("--seed", train_args.seed, "Override config seed");
  train->add_option("--batch-size", train_args.batch_size, "Override batch size");
  train->add_option("--max-epochs", train_args.max_epochs, "Override epoch budget");
  train->add_option("--lr-init", train_args.lr_init, "Override initial learning rate");
  train->add_option("--scale", train_args.scale, "Override model scale (e.g. tiny, 1/16)");
  train->add_option("--val-fraction", train_args.val_fraction, "Override validation holdout");

  std::string enhance_model, enhance_in, enhance_out;
  bool enhance_resample = false;
  int enhance_channel = -1;
  CLI::App* enhance = app.add_subcommand("enhance", "Denoise a WAV with a trained model");
  enhance->add_option("--model", enhance_model, "Checkpoint path")->required();
  enhance->add_option("--in", enhance_in, "Input WAV")->required();
  enhance->add_option("--out", enhance_out, "Output WAV")->required();
  enhance->add_flag("--resample", enhance_resample, "Resample the input to 16 kHz if needed");
  enhance->add_option("--channel", enhance_channel, "Channel to take from multi-channel input");

  std::string eval_manifest, eval_report;
  CLI::App* evaluate = app.add_subcommand("evaluate", "SSNR and STOI over a manifest of pairs");
  evaluate->add_option("--pairs", eval_manifest, "Manifest CSV of clean,processed rows")
      ->required();
  evaluate->add_option("--out", eval_report, "CSV report path");

  std::string gc_scale = "tiny";
  std::uint64_t gc_seed = 0;
  bool gc_corrupt = false;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gradcheck->add_option("--scale", gc_scale, "Model scale (tiny or a rational like 1/16)");
  gradcheck->add_option("--seed", gc_seed, "Random seed");
  gradcheck->add_flag("--corrupt-gradient", gc_corrupt,
                      "Perturb one gradient entry; the check must then fail");

  try {
    app.parse(argc, argv);
    if (mix->parsed()) {
      if (mix_args.synth_count == 0 && mix_args.clean_dir.empty())
        throw ConfigError("mix: pass --synth N or --clean DIR");
      return cmd_mix(mix_args);
    }
    if (train->parsed()) return cmd_train(train_args);
    if (enhance->parsed())
      return cmd_enhance(enhance_model, enhance_in, enhance_out, enhance_resample,
                         enhance_channel);
    if (evaluate->parsed()) return cmd_evaluate(eval_manifest, eval_report);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_scale, gc_seed, gc_corrupt);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const TrainingError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}

#include "simvae/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "simvae/artifacts.hpp"
#include "simvae/config.hpp"
#include "simvae/errors.hpp"
#include "simvae/io.hpp"

namespace simvae::cli {

namespace fs = std::filesystem;

namespace {

struct Args {
  std::string config;
  std::string stage = "all";
  bool ground_truth = false;
  bool defaults = false;
  std::optional<std::size_t> latent;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::string image;
};

// Loaded config plus the things every command derives from it.
struct Context {
  RunConfig cfg;
  fs::path out_dir;
  std::unique_ptr<sim::Simulator> sim;
  std::ostream& out;
  std::ostream& err;

  fs::path path(const std::string& name) const { return out_dir / name; }
};

Context open_context(const Args& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  fs::path dir = cfg.output_dir;
  if (dir.is_relative()) dir = fs::path(a.config).parent_path() / dir;
  fs::create_directories(dir);
  return Context{cfg, dir, sim::make_simulator(cfg.simulator), out, err};
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

Checkpoint require_checkpoint(const Context& ctx, Stage s) {
  const fs::path p = ctx.path(std::string(stage_name(s)) + ".ckpt");
  if (!fs::exists(p))
    throw MissingArtifact("missing " + std::string(stage_name(s)) + " checkpoint " + p.string() +
                          " (run `train <config> --stage " + std::string(stage_name(s)) + "` first)");
  try {
    return load_checkpoint(p);
  } catch (const std::exception& e) {
    throw MissingArtifact("unreadable checkpoint " + p.string() + ": " + e.what());
  }
}

template <class Model>
void restore(Model& model, const Checkpoint& ckpt, Stage s) {
  try {
    load_model(model.parameters(), ckpt);
  } catch (const std::exception& e) {
    throw MissingArtifact(std::string(stage_name(s)) + " checkpoint does not fit the configured model: " + e.what());
  }
}

MlpDecoder load_decoder(const Context& ctx) {
  MlpDecoder dec = make_decoder(*ctx.sim, ctx.cfg.model, ctx.cfg.seed);
  restore(dec, require_checkpoint(ctx, Stage::Decoder), Stage::Decoder);
  return dec;
}

MlpEncoder load_encoder(const Context& ctx) {
  MlpEncoder enc = make_encoder(*ctx.sim, ctx.cfg.model, ctx.cfg.seed);
  restore(enc, require_checkpoint(ctx, Stage::Encoder), Stage::Encoder);
  return enc;
}

void save_stage(const Context& ctx, Stage s, TrainResult& r) {
  r.checkpoint.metadata["config_hash"] = hex(config_hash(ctx.cfg));
  r.checkpoint.metadata["simulator"] = ctx.cfg.simulator.name;
  const std::string name(stage_name(s));
  save_checkpoint(r.checkpoint, ctx.path(name + ".ckpt"));
  write_text_file(ctx.path(name + "_record.csv"), r.record.csv());
  const auto& last = r.record.points.back();
  ctx.out << name << ": done, step " << last.step << ", eval loss " << last.eval_loss << "\n";
}

int cmd_train(const Args& a, std::ostream& out, std::ostream& err) {
  std::vector<Stage> stages;
  if (a.stage == "all")
    stages = {Stage::Decoder, Stage::Encoder};
  else
    stages = {parse_stage(a.stage)};
  Context ctx = open_context(a, out, err);
  if (a.steps) {
    ctx.cfg.decoder.steps = ctx.cfg.encoder.steps = ctx.cfg.baseline.steps = *a.steps;
  }
  TrainOptions opt;
  opt.record_time = ctx.cfg.record_time;
  for (Stage s : stages) {
    const StageConfig sc = ctx.cfg.stage(s);
    const std::string name(stage_name(s));
    opt.on_eval = [&](const EvalPoint& p) {
      out << name << " step " << p.step << "/" << sc.steps << "  train " << p.train_loss << "  eval " << p.eval_loss
          << "\n";
    };
    TrainResult r;
    if (s == Stage::Decoder) {
      MlpDecoder dec = make_decoder(*ctx.sim, ctx.cfg.model, ctx.cfg.seed);
      r = train_decoder(*ctx.sim, dec, sc, opt);
    } else if (s == Stage::Encoder) {
      MlpDecoder dec = load_decoder(ctx);
      MlpEncoder enc = make_encoder(*ctx.sim, ctx.cfg.model, ctx.cfg.seed);
      r = train_encoder(*ctx.sim, dec, enc, sc, opt);
    } else {
      MlpEncoder enc = make_encoder(*ctx.sim, ctx.cfg.model, ctx.cfg.seed);
      r = train_supervised_baseline(*ctx.sim, enc, sc, opt);
    }
    save_stage(ctx, s, r);
  }
  return kOk;
}

int cmd_grid(const Args& a, std::ostream& out, std::ostream& err) {
  Context ctx = open_context(a, out, err);
  MlpDecoder dec = load_decoder(ctx);
  MlpEncoder enc = load_encoder(ctx);
  const std::size_t count = a.count.value_or(8);
  if (count == 0) throw std::invalid_argument("--count must be >= 1");
  const EvalTable t = evaluate(*ctx.sim, dec, enc, count, ctx.cfg.stage(Stage::Encoder).seed);
  const auto& spec = ctx.sim->spec();
  if (spec.is_image()) {
    write_pgm(ctx.path("grid.pgm").string(), grid_mosaic(t, spec.image()));
    fs::create_directories(ctx.path("grid"));
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t row = 0; row < 4; ++row)
        write_pgm((ctx.path("grid") / ("sample_" + std::to_string(i) + "_" + kQuartetRows[row] + ".pgm")).string(),
                  quartet_image(t, i, row, spec.image()));
    out << "wrote " << ctx.path("grid.pgm").string() << " (" << 4 * spec.image().height << "x"
        << count * spec.image().width << ")\n";
  } else {
    write_text_file(ctx.path("grid.csv"), quartet_csv(*ctx.sim, t));
    out << "wrote " << ctx.path("grid.csv").string() << "\n";
  }
  return kOk;
}

int cmd_traverse(const Args& a, std::ostream& out, std::ostream& err) {
  Context ctx = open_context(a, out, err);
  const auto& spec = ctx.sim->spec();
  if (a.latent && *a.latent >= spec.latent_dim())
    throw std::out_of_range("--latent " + std::to_string(*a.latent) + " out of range: " + spec.name + " has " +
                            std::to_string(spec.latent_dim()) + " latents");
  MlpDecoder dec = load_decoder(ctx);
  const std::size_t steps = a.steps.value_or(10);
  std::vector<std::size_t> latents;
  if (a.latent)
    latents = {*a.latent};
  else
    for (std::size_t k = 0; k < spec.latent_dim(); ++k) latents.push_back(k);
  for (std::size_t k : latents) {
    const Tensor outputs = traversal_outputs(dec, k, steps);
    const std::string stem = "traverse_" + spec.latent_names[k];
    fs::path p;
    if (spec.is_image()) {
      p = ctx.path(stem + ".pgm");
      write_pgm(p.string(), traversal_strip(outputs, spec.image()));
    } else {
      p = ctx.path(stem + ".csv");
      write_text_file(p, traversal_csv(outputs, traversal_points(steps)));
    }
    out << "wrote " << p.string() << "\n";
  }
  return kOk;
}

int cmd_infer(const Args& a, std::ostream& out, std::ostream& err) {
  Context ctx = open_context(a, out, err);
  const auto& spec = ctx.sim->spec();
  if (!spec.is_image()) throw std::invalid_argument("infer reads PGM images; " + spec.name + " produces vectors");
  const Canvas img = read_pgm(a.image);
  if (img.height != spec.image().height || img.width != spec.image().width)
    throw std::invalid_argument(a.image + " is " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                                "; expected " + std::to_string(spec.image().height) + "x" +
                                std::to_string(spec.image().width) + " (height x width)");
  MlpEncoder enc = load_encoder(ctx);
  MlpDecoder dec = load_decoder(ctx);
  const Tensor x({1, img.pixels.size()}, img.pixels);
  const Tensor mu_net = enc.infer_mu(x);
  Tensor mu = sim::denormalize_batch(*ctx.sim, mu_net);
  ctx.sim->project_to_domain(mu.row(0));

  const std::string stem = "infer_" + fs::path(a.image).stem().string();
  nlohmann::json report{{"image", a.image}, {"latents", nlohmann::json::object()}, {"mu_net", nlohmann::json::array()}};
  for (std::size_t k = 0; k < spec.latent_dim(); ++k) {
    out << spec.latent_names[k] << " = " << format_double(mu(0, k)) << "\n";
    report["latents"][spec.latent_names[k]] = mu(0, k);
    report["mu_net"].push_back(mu_net(0, k));
  }
  write_text_file(ctx.path(stem + ".json"), report.dump(2) + "\n");
  write_pgm(ctx.path(stem + "_g.pgm").string(), Canvas::from(dec.decode(mu_net).data(), img.height, img.width));
  write_pgm(ctx.path(stem + "_s.pgm").string(), Canvas::from(ctx.sim->simulate(mu.row(0)), img.height, img.width));
  return kOk;
}

void write_mim(const Context& ctx, const std::string& tag, const metrics::MIMatrix& m, nlohmann::json summary,
               const metrics::Warnings& warnings) {
  summary["warnings"] = warnings;
  write_text_file(ctx.path("mim_" + tag + ".csv"), metrics::mim_csv(m));
  write_pgm(ctx.path("mim_" + tag + ".pgm").string(), metrics::mim_heatmap(m));
  write_text_file(ctx.path("mig_" + tag + ".json"), summary.dump(2) + "\n");
  for (const auto& w : warnings) ctx.err << "warning: " << w << "\n";
  ctx.out << "MIG (" << tag << ") = " << summary["mig"].get<double>() << "\n";
}

int cmd_metrics(const Args& a, std::ostream& out, std::ostream& err) {
  Context ctx = open_context(a, out, err);
  metrics::BinningConfig bins = ctx.cfg.metrics;
  if (a.count) bins.samples = *a.count;
  bins.validate();
  metrics::Warnings warnings;
  if (bins.undersampled())
    warnings.push_back(std::to_string(bins.samples) + " samples for " + std::to_string(bins.bins) +
                       " bins; MI estimates are biased upward");
  if (a.ground_truth) {
    const auto gt = metrics::ground_truth_mim_mig(*ctx.sim, bins, stream_seed(ctx.cfg.seed, "metrics.ground_truth"),
                                                  &warnings);
    write_mim(ctx, "ground_truth", gt.matrix, metrics::mig_summary(gt.matrix, gt.gap, bins), warnings);
    return kOk;
  }
  MlpEncoder enc = load_encoder(ctx);
  const Tensor z = heldout_latents(*ctx.sim, ctx.cfg.stage(Stage::Encoder).seed, bins.samples);
  const Tensor mu_net = encode_simulated(*ctx.sim, enc, z);
  const auto m = model_mim(*ctx.sim, z, mu_net, bins, &warnings);
  nlohmann::json summary = metrics::mig_summary(m, metrics::mig(m), bins);
  if (m.values.rows() == m.values.cols()) {
    summary["diagonal_mean"] = m.diagonal_mean();
    summary["off_diagonal_mean"] = m.off_diagonal_mean();
  }
  if (dynamic_cast<const sim::RlcSimulator*>(ctx.sim.get())) {
    Tensor mu = sim::denormalize_batch(*ctx.sim, mu_net);
    for (std::size_t i = 0; i < mu.rows(); ++i) ctx.sim->project_to_domain(mu.row(i));
    const auto corr = metrics::rlc_correlation(z, mu, ctx.cfg.rlc_filter);
    summary["rlc_correlation"] = rlc_correlation_json(corr);
    write_text_file(ctx.path("rlc_correlation.csv"), rlc_correlation_csv(z, mu, ctx.cfg.rlc_filter));
    out << "f0 slope " << corr.f0.slope << " r2 " << corr.f0.r2 << ", Q slope " << corr.q.slope << " r2 "
        << corr.q.r2 << " (" << corr.rows << " rows)\n";
  }
  write_mim(ctx, "model", m, summary, warnings);
  return kOk;
}

int cmd_config(const Args& a, std::ostream& out) {
  if (a.defaults) {
    out << serialize_config(RunConfig{});
    return kOk;
  }
  if (a.config.empty()) throw std::invalid_argument("config: give a config path or --defaults");
  RunConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  out << serialize_config(cfg) << "\n# config_hash = " << hex(config_hash(cfg)) << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator distillation and inversion with a two-stage VAE"};
  app.name("simvae");
  app.require_subcommand(1);
  Args a;

  const auto common = [&](CLI::App* cmd, bool need_config = true) {
    auto* opt = cmd->add_option("config", a.config, "run config file");
    if (need_config) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", a.seed, "root seed (overrides the config)");
  };
  auto* train = app.add_subcommand("train", "train the decoder, the encoder, or the supervised baseline");
  common(train);
  train->add_option("--stage", a.stage, "decoder | encoder | baseline | all (decoder then encoder)")
      ->check(CLI::IsMember({"decoder", "encoder", "baseline", "all"}));
  train->add_option("--steps", a.steps, "override the step budget of every trained stage");

  auto* grid = app.add_subcommand("grid", "reconstruction quartet S(z), G(z), S(mu), G(mu) on held-out samples");
  common(grid);
  grid->add_option("--count", a.count, "number of samples (default 8)");

  auto* traverse = app.add_subcommand("traverse", "sweep one latent over [-1, 1] with the others at 0");
  common(traverse);
  traverse->add_option("--latent", a.latent, "latent index (default: all)");
  traverse->add_option("--steps", a.steps, "frames per sweep (default 10)");

  auto* infer = app.add_subcommand("infer", "encode an image and re-render it");
  common(infer);
  infer->add_option("image", a.image, "PGM image of the configured size")->required();

  auto* met = app.add_subcommand("metrics", "MI matrix and MIG of the encoder, or of the ground truth");
  common(met);
  met->add_flag("--ground-truth", a.ground_truth, "MIM(V, V-bar) under the simulator's invariance; no model needed");
  met->add_option("--count", a.count, "number of samples (overrides [metrics] samples)");

  auto* config = app.add_subcommand("config", "print the canonical config (or the defaults)");
  common(config, false);
  config->add_flag("--defaults", a.defaults, "print the default config");

  std::vector<const char*> argv{"simvae"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed()) return cmd_train(a, out, err);
    if (grid->parsed()) return cmd_grid(a, out, err);
    if (traverse->parsed()) return cmd_traverse(a, out, err);
    if (infer->parsed()) return cmd_infer(a, out, err);
    if (met->parsed()) return cmd_metrics(a, out, err);
    return cmd_config(a, out);
  } catch (const MissingArtifact& e) {
    err << "error: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace simvae::cli

#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "atnf/dataset.hpp"
#include "atnf/error.hpp"
#include "atnf/image_io.hpp"
#include "atnf/metrics.hpp"
#include "atnf/model_io.hpp"
#include "atnf/network.hpp"
#include "atnf/synthetic.hpp"
#include "atnf/training.hpp"

namespace atnf::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kPadMultiple = 8;

int mirror(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

struct FusedPadded {
  Image fused;
  Image saliency;
};

FusedPadded fuse_any_size(const Image& a, const Image& b, const ModelGraph& model) {
  if (!a.same_shape(b)) {
    throw ArgumentError("input images differ in size (" + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                        " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()) + ")");
  }
  const FusionOutput out = fuse(reflect_pad(a, kPadMultiple), reflect_pad(b, kPadMultiple), model);
  return {crop(out.fused, a.height(), a.width()), crop(out.saliency.to_image(), a.height(), a.width())};
}

// "synthetic:N" or a directory.
std::vector<Sample> load_data(const std::string& spec, std::uint64_t seed, std::uint64_t first_index, int size) {
  constexpr std::string_view prefix = "synthetic:";
  if (spec.starts_with(prefix)) {
    const std::string_view n_text = std::string_view(spec).substr(prefix.size());
    int n = 0;
    const auto [p, ec] = std::from_chars(n_text.data(), n_text.data() + n_text.size(), n);
    if (ec != std::errc() || p != n_text.data() + n_text.size() || n < 1) {
      throw ArgumentError("--data synthetic:N needs a positive count, got '" + spec + "'");
    }
    return to_samples(synthetic::gen_synthetic(seed, n, size, first_index), first_index);
  }
  return read_dataset(spec);
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    io::write_file_atomic(path, text);
  }
}

struct GenArgs {
  std::uint64_t seed = 42;
  int count = 64;
  int size = synthetic::kDefaultSize;
  std::uint64_t first = 0;
  std::string out;
};

struct TrainArgs {
  std::string phase;
  std::uint64_t seed = 42;
  int steps = 200;
  double lr = 1e-3;
  int batch = 4;
  std::string data;
  std::string out;
  std::string curve;
  std::string init;
  std::string config;
  std::string optimizer;
  std::string criterion;
  int size = synthetic::kDefaultSize;
};

struct FuseArgs {
  std::string a, b, model, out, saliency;
};

struct EnhanceArgs {
  std::string in, model, out;
};

struct EvalArgs {
  std::string fused, a, b, pair = "pair", method = "fused";
  std::string data, model, out, json;
  std::uint64_t seed = 42;
  std::uint64_t first = 0;
  int size = synthetic::kDefaultSize;
  bool baselines = false;
  int levels = 4;
};

int cmd_gen(const GenArgs& g, std::ostream& out) {
  const auto pairs = synthetic::gen_synthetic(g.seed, g.count, g.size, g.first);
  write_dataset(g.out, to_samples(pairs, g.first), g.seed);
  out << "wrote " << pairs.size() << " pairs to " << g.out << "\n";
  return kOk;
}

int cmd_train(const TrainArgs& t, const CLI::App& sub, std::ostream& out) {
  training::TrainConfig c;
  if (!t.config.empty()) c = training::load_config(t.config, c);
  // Flags given on the command line override the config file.
  if (sub.count("--phase")) c.phase = parse_phase(t.phase);
  if (sub.count("--seed")) c.seed = t.seed;
  if (sub.count("--steps")) c.steps = t.steps;
  if (sub.count("--lr")) c.learning_rate = t.lr;
  if (sub.count("--batch")) c.batch_size = t.batch;
  if (sub.count("--optimizer")) {
    if (t.optimizer == "adam") c.optimizer = training::Optimizer::adam;
    else if (t.optimizer == "sgd") c.optimizer = training::Optimizer::sgd;
    else throw ArgumentError("--optimizer must be adam or sgd");
  }
  if (t.config.empty() && !sub.count("--phase")) throw ArgumentError("train needs --phase (or a config file with phase)");
  c.validate();
  ModelGraph model = t.init.empty() ? ModelGraph::seeded(c.seed) : model_io::load(t.init);
  if (!t.criterion.empty()) {
    if (!t.init.empty()) throw ArgumentError("--criterion only applies to a new model (no --init)");
    model.criterion = attention::parse_criterion(t.criterion);
  }
  const auto data = load_data(t.data, c.seed, 0, t.size);
  const auto result = training::train_phase(std::move(model), data, c);
  model_io::save(result.model, t.out);
  if (!t.curve.empty()) io::write_file_atomic(t.curve, training::curve_csv(result.curve));
  const auto& first = result.curve.front().terms;
  const auto& last = result.curve.back().terms;
  out << "phase " << to_string(c.phase) << ": " << c.steps << " steps, L_f " << first.total << " -> " << last.total
      << "\n";
  return kOk;
}

int cmd_fuse(const FuseArgs& f, std::ostream& out) {
  const Image a = io::load_image(f.a);
  const Image b = io::load_image(f.b);
  if (!a.same_shape(b)) throw ArgumentError("--a and --b differ in size");
  const ModelGraph model = model_io::load(f.model);
  const auto r = fuse_any_size(a, b, model);
  io::save_image(r.fused, f.out);
  if (!f.saliency.empty()) io::save_image(r.saliency, f.saliency);
  out << "wrote " << f.out << "\n";
  return kOk;
}

int cmd_saliency(const FuseArgs& f, std::ostream& out) {
  const Image a = io::load_image(f.a);
  const Image b = io::load_image(f.b);
  if (!a.same_shape(b)) throw ArgumentError("--a and --b differ in size");
  const ModelGraph model = model_io::load(f.model);
  const SaliencyMap s = detect_attention(reflect_pad(a, kPadMultiple), reflect_pad(b, kPadMultiple), model);
  io::save_image(crop(s.to_image(), a.height(), a.width()), f.out);
  out << "wrote " << f.out << "\n";
  return kOk;
}

int cmd_enhance(const EnhanceArgs& e, std::ostream& out) {
  const Image x = io::load_image(e.in);
  const ModelGraph model = model_io::load(e.model);
  const Enhanced r = enhance(reflect_pad(x, kPadMultiple), model);
  io::save_image(crop(r.reconstruction, x.height(), x.width()), e.out);
  out << "wrote " << e.out << "\n";
  return kOk;
}

int cmd_eval(const EvalArgs& e, std::ostream& out) {
  std::vector<metrics::MetricReport> reports;
  if (!e.fused.empty()) {
    if (e.a.empty() || e.b.empty()) throw ArgumentError("eval --fused needs --a and --b");
    if (!e.data.empty() || !e.model.empty()) throw ArgumentError("eval takes either --fused or --data/--model");
    const Image f = io::load_image(e.fused), a = io::load_image(e.a), b = io::load_image(e.b);
    if (!f.same_shape(a) || !a.same_shape(b)) throw ArgumentError("eval images differ in size");
    reports.push_back(metrics::eval_report(f, a, b, e.pair, e.method));
  } else {
    if (e.data.empty()) throw ArgumentError("eval needs --fused/--a/--b or --data");
    if (e.model.empty() && !e.baselines) throw ArgumentError("eval --data needs --model, --baselines or both");
    const auto data = load_data(e.data, e.seed, e.first, e.size);
    std::optional<ModelGraph> model;
    if (!e.model.empty()) model = model_io::load(e.model);
    for (const auto& s : data) {
      if (!s.a.same_shape(s.b)) throw ArgumentError("pair '" + s.name + "' has images of different sizes");
      if (model) reports.push_back(metrics::eval_report(fuse_any_size(s.a, s.b, *model).fused, s.a, s.b, s.name, "model"));
      if (e.baselines) {
        reports.push_back(metrics::eval_report(metrics::baseline_average(s.a, s.b), s.a, s.b, s.name, "average"));
        const int levels = std::min(e.levels, metrics::max_pyramid_levels(s.a.height(), s.a.width(), e.levels));
        reports.push_back(
            metrics::eval_report(metrics::baseline_lp_fuse(s.a, s.b, levels), s.a, s.b, s.name, "laplacian_pyramid"));
      }
    }
  }
  write_text(e.out, metrics::to_csv(reports), out);
  if (!e.json.empty()) io::write_file_atomic(e.json, metrics::to_json(reports));
  return kOk;
}

}  // namespace

Image reflect_pad(const Image& image, int multiple) {
  const int h = (image.height() + multiple - 1) / multiple * multiple;
  const int w = (image.width() + multiple - 1) / multiple * multiple;
  if (h == image.height() && w == image.width()) return image;
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(y, x) = image.at(mirror(y, image.height()), mirror(x, image.width()));
  }
  return out;
}

Image crop(const Image& image, int height, int width) {
  if (height > image.height() || width > image.width()) throw ArgumentError("crop larger than the image");
  if (height == image.height() && width == image.width()) return image;
  Image out(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out.at(y, x) = image.at(y, x);
  }
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-guided cross-modal image fusion", "atnf"};
  app.require_subcommand(1, 1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write synthetic image pairs, masks and a manifest");
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of pairs")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--size", gen.size, "Image side in pixels")->capture_default_str()->check(CLI::Range(16, 4096));
  gen_cmd->add_option("--first-index", gen.first, "Index of the first pair")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Run one training phase");
  train_cmd->add_option("--phase", train.phase, "attention | enhance | main");
  train_cmd->add_option("--seed", train.seed, "Seed for initialisation, batches and synthetic data");
  train_cmd->add_option("--steps", train.steps, "Optimizer steps");
  train_cmd->add_option("--lr", train.lr, "Learning rate");
  train_cmd->add_option("--batch", train.batch, "Batch size");
  train_cmd->add_option("--optimizer", train.optimizer, "adam | sgd");
  train_cmd->add_option("--data", train.data, "Dataset directory or synthetic:N")->required();
  train_cmd->add_option("--size", train.size, "Side of synthetic images")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Model file to write")->required();
  train_cmd->add_option("--curve", train.curve, "Loss curve CSV to write");
  train_cmd->add_option("--init", train.init, "Model file to continue from");
  train_cmd->add_option("--config", train.config, "key = value config file; flags override it");
  train_cmd->add_option("--criterion", train.criterion, "Fusion criterion of a new model: learned | mean | max | first-only");

  FuseArgs fuse_args;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse an image pair");
  fuse_cmd->add_option("--a", fuse_args.a, "First modality image")->required();
  fuse_cmd->add_option("--b", fuse_args.b, "Second modality image")->required();
  fuse_cmd->add_option("--model", fuse_args.model, "Model file")->required();
  fuse_cmd->add_option("--out", fuse_args.out, "Fused image to write")->required();
  fuse_cmd->add_option("--saliency", fuse_args.saliency, "Also write the saliency map here");

  FuseArgs sal_args;
  auto* sal_cmd = app.add_subcommand("saliency", "Write the detected attention map of a pair");
  sal_cmd->add_option("--a", sal_args.a, "First modality image")->required();
  sal_cmd->add_option("--b", sal_args.b, "Second modality image")->required();
  sal_cmd->add_option("--model", sal_args.model, "Model file")->required();
  sal_cmd->add_option("--out", sal_args.out, "Saliency image to write")->required();

  EnhanceArgs enh;
  auto* enh_cmd = app.add_subcommand("enhance", "Run the enhancement autoencoder on one image");
  enh_cmd->add_option("--in", enh.in, "Input image")->required();
  enh_cmd->add_option("--model", enh.model, "Model file")->required();
  enh_cmd->add_option("--out", enh.out, "Reconstruction to write")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Compute SSIM, MI, AG and EN for fused images");
  eval_cmd->add_option("--fused", ev.fused, "Fused image (single-triplet mode)");
  eval_cmd->add_option("--a", ev.a, "First source image");
  eval_cmd->add_option("--b", ev.b, "Second source image");
  eval_cmd->add_option("--pair", ev.pair, "Pair name for the report")->capture_default_str();
  eval_cmd->add_option("--method", ev.method, "Method name for the report")->capture_default_str();
  eval_cmd->add_option("--data", ev.data, "Dataset directory or synthetic:N (dataset mode)");
  eval_cmd->add_option("--seed", ev.seed, "Seed of synthetic data")->capture_default_str();
  eval_cmd->add_option("--first-index", ev.first, "First synthetic pair index")->capture_default_str();
  eval_cmd->add_option("--size", ev.size, "Side of synthetic images")->capture_default_str();
  eval_cmd->add_option("--model", ev.model, "Model file to fuse with");
  eval_cmd->add_flag("--baselines", ev.baselines, "Also report the average and Laplacian-pyramid baselines");
  eval_cmd->add_option("--levels", ev.levels, "Pyramid levels of the LP baseline")->capture_default_str()->check(
      CLI::Range(1, 16));
  eval_cmd->add_option("--out", ev.out, "CSV to write (default stdout)");
  eval_cmd->add_option("--json", ev.json, "Also write a JSON array here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kArgumentError;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (train_cmd->parsed()) return cmd_train(train, *train_cmd, out);
    if (fuse_cmd->parsed()) return cmd_fuse(fuse_args, out);
    if (sal_cmd->parsed()) return cmd_saliency(sal_args, out);
    if (enh_cmd->parsed()) return cmd_enhance(enh, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kArgumentError;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kArgumentError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kArgumentError;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"atnf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace atnf::cli

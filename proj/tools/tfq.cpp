// tfq: train an image-similarity metric from labeled pairs, then search for
// the opacity transfer function whose rendering best matches a target image.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <unistd.h>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that breaks Eigen.
#include "tfq/tfq.hpp"
#include "tfq/studio/server.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Writes via a temporary sibling and renames, so a failed run never leaves a partial file.
void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw tfq::IoError(tmp.string() + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw tfq::IoError(tmp.string() + ": write failed");
    }
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw tfq::IoError(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ServeArgs {
  std::string images, out = "pairs.jsonl", host = "127.0.0.1";
  int port = 8080;
  std::uint64_t seed = 0;
  bool seeded = false;
};

struct TrainArgs {
  std::string images, pairs, out = "model.bin";
  int epochs = 100;
  std::size_t batch = 32;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::string loss_log;
};

struct SearchArgs {
  std::string volume, target, metric = "siamese", model, out = "tf.json", report = "report.json";
  int pop = 600, gens = 20, size = 256;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  bool no_seeding = false;
};

struct RenderArgs {
  std::string volume, tf, out;
  int width = 256, height = 256;
};

struct EvalArgs {
  std::string model, a, b;
};

struct SeedPopArgs {
  int pop = 600;
  std::string out = "pop.json";
  std::uint64_t seed = 0;
};

struct VolumeArgs {
  std::string out;
  int size = 64;
  std::uint64_t seed = 0;
};

int serve_pairs(const ServeArgs& a) {
  const std::uint64_t seed = a.seeded ? a.seed : std::random_device{}();
  tfq::studio::PairStudio studio(tfq::studio::Corpus::scan(a.images), a.out, seed);
  httplib::Server server;
  tfq::studio::configure_routes(server, studio);
  std::cerr << "serving " << studio.corpus().size() << " images on http://" << a.host << ":" << a.port
            << ", pairs -> " << a.out << "\n";
  if (!server.listen(a.host, a.port)) throw tfq::IoError("cannot listen on " + a.host + ":" + std::to_string(a.port));
  return kExitOk;
}

int train(const TrainArgs& a) {
  const auto pairs = tfq::nn::load_pairs(a.pairs);
  tfq::nn::TrainOptions opt;
  opt.epochs = a.epochs;
  opt.batch_size = a.batch;
  opt.learning_rate = a.lr;
  opt.seed = a.seed;
  opt.on_epoch = [&](int epoch, double loss) {
    std::cerr << "epoch " << epoch + 1 << "/" << a.epochs << " loss " << loss << "\n";
  };
  std::cerr << "training on " << pairs.size() << " pairs\n";
  const auto result = tfq::nn::train_metric(a.images, pairs, opt);
  write_atomically(a.out, tfq::nn::serialize_model(result.model));
  if (!a.loss_log.empty()) write_atomically(a.loss_log, nlohmann::json(result.epoch_loss).dump() + "\n");
  return kExitOk;
}

int search(const SearchArgs& a) {
  std::unique_ptr<tfq::Metric> metric;
  if (a.metric == "mse") {
    metric = std::make_unique<tfq::MseMetric>();
  } else {
    metric = std::make_unique<tfq::SiameseMetric>(
        std::make_shared<const tfq::nn::SiameseModel>(tfq::nn::load_model(a.model)));
  }
  const auto binned = tfq::bin_volume(tfq::load_volume(a.volume));
  const auto target = tfq::load_image(a.target);
  tfq::evo::SearchConfig cfg;
  cfg.pop_size = a.pop;
  cfg.generations = a.gens;
  cfg.workers = a.workers;
  cfg.seed = a.seed;
  cfg.seeding = !a.no_seeding;
  cfg.render.out_width = cfg.render.out_height = a.size;
  const auto result = tfq::evo::run_search(binned, target, *metric, cfg, [&](int g, double gen_min, double best) {
    std::cerr << "generation " << g << ": min " << gen_min << ", best " << best << "\n";
  });
  write_atomically(a.out, tfq::tf_to_json(result.best_tf) + "\n");
  write_atomically(a.report, tfq::evo::report_to_json(result.report) + "\n");
  std::cerr << "best cost " << result.report.best.cost << " (generation " << result.report.best.generation << ")\n";
  return kExitOk;
}

int render(const RenderArgs& a) {
  tfq::RenderSettings s;
  s.out_width = a.width;
  s.out_height = a.height;
  const auto tf = tfq::tf_from_json(read_text(a.tf));
  const auto img = tfq::render(tfq::bin_volume(tfq::load_volume(a.volume)), tf, s);
  const fs::path tmp = a.out + ".tmp." + std::to_string(::getpid()) + ".png";
  tfq::save_image(img, tmp);
  fs::rename(tmp, a.out);
  return kExitOk;
}

int eval(const EvalArgs& a) {
  const auto model = tfq::nn::load_model(a.model);
  const int side = static_cast<int>(model.arch.input_size);
  const auto ia = tfq::resample(tfq::load_image(a.a), side, side);
  const auto ib = tfq::resample(tfq::load_image(a.b), side, side);
  std::printf("%.17g\n", tfq::nn::distance(model, ia, ib));
  return kExitOk;
}

int gradcheck(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : tfq::nn::run_gradcheck_suite(seed)) {
    std::printf("%-36s rel_error %.3e  %s\n", r.name.c_str(), r.rel_error, r.passed ? "PASS" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitRuntime;
}

int seed_pop(const SeedPopArgs& a) {
  tfq::SeedConfig cfg;
  cfg.pop_size = a.pop;
  tfq::Rng rng(a.seed);
  nlohmann::json pop = nlohmann::json::array();
  for (const auto& c : tfq::seed_population(cfg, rng)) pop.push_back(tfq::to_json(c));
  write_atomically(a.out, nlohmann::json{{"version", 1}, {"population", pop}}.dump() + "\n");
  return kExitOk;
}

int make_volume(const VolumeArgs& a) {
  const auto v = tfq::blob_volume(a.size, a.size, a.size, a.seed);
  write_atomically(a.out, tfq::serialize_volume(v));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer-function search driven by a learned image-similarity metric", "tfq"};
  app.require_subcommand(1);

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve-pairs", "Run the pair-labeling web service");
  serve_cmd->add_option("--images", serve_args.images, "Image corpus directory")->required()->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--out", serve_args.out, "Pair file to append to")->capture_default_str();
  serve_cmd->add_option("--port", serve_args.port, "TCP port")->capture_default_str()->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--host", serve_args.host, "Bind address")->capture_default_str();
  auto* serve_seed = serve_cmd->add_option("--seed", serve_args.seed, "Session RNG seed");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the Siamese metric on labeled pairs");
  train_cmd->add_option("--images", train_args.images, "Directory the pair paths are relative to")
      ->required()
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--pairs", train_args.pairs, "JSON-lines pair file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", train_args.epochs, "Training epochs")->capture_default_str()->check(CLI::Range(1, 100000));
  train_cmd->add_option("--out", train_args.out, "Model file to write")->capture_default_str();
  train_cmd->add_option("--seed", train_args.seed, "RNG seed")->capture_default_str();
  train_cmd->add_option("--batch", train_args.batch, "Mini-batch size")->capture_default_str()->check(CLI::Range(1, 100000));
  train_cmd->add_option("--lr", train_args.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--loss-log", train_args.loss_log, "Write per-epoch mean loss as JSON");

  SearchArgs search_args;
  auto* search_cmd = app.add_subcommand("search", "Search for the transfer function matching a target image");
  search_cmd->add_option("--volume", search_args.volume, ".vol file")->required()->check(CLI::ExistingFile);
  search_cmd->add_option("--target", search_args.target, "Target PNG")->required()->check(CLI::ExistingFile);
  search_cmd->add_option("--metric", search_args.metric, "siamese or mse")
      ->capture_default_str()
      ->check(CLI::IsMember({"siamese", "mse"}));
  search_cmd->add_option("--model", search_args.model, "Model file (siamese metric)")->check(CLI::ExistingFile);
  search_cmd->add_option("--pop", search_args.pop, "Population size")->capture_default_str()->check(CLI::Range(3, 1000000));
  search_cmd->add_option("--gens", search_args.gens, "Generations")->capture_default_str()->check(CLI::Range(1, 100000));
  search_cmd->add_option("--workers", search_args.workers, "Evaluation threads")->capture_default_str()->check(CLI::Range(1, 1024));
  search_cmd->add_option("--seed", search_args.seed, "RNG seed")->capture_default_str();
  search_cmd->add_option("--out", search_args.out, "Best transfer function (JSON)")->capture_default_str();
  search_cmd->add_option("--report", search_args.report, "Run report (JSON)")->capture_default_str();
  search_cmd->add_option("--size", search_args.size, "Render size in pixels")->capture_default_str()->check(CLI::Range(1, 8192));
  search_cmd->add_flag("--no-seeding", search_args.no_seeding, "Random initial population instead of sliding windows");

  RenderArgs render_args;
  auto* render_cmd = app.add_subcommand("render", "Render a volume with a transfer function");
  render_cmd->add_option("--volume", render_args.volume, ".vol file")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--tf", render_args.tf, "Transfer function JSON")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", render_args.out, "Output PNG")->required();
  render_cmd->add_option("--width", render_args.width, "Image width")->capture_default_str()->check(CLI::Range(1, 8192));
  render_cmd->add_option("--height", render_args.height, "Image height")->capture_default_str()->check(CLI::Range(1, 8192));

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Print the learned distance between two images");
  eval_cmd->add_option("--model", eval_args.model, "Model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--a", eval_args.a, "First PNG")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--b", eval_args.b, "Second PNG")->required()->check(CLI::ExistingFile);

  std::uint64_t gradcheck_seed = 7;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "RNG seed")->capture_default_str();

  SeedPopArgs seed_args;
  auto* seed_cmd = app.add_subcommand("seed-pop", "Write a seeded initial population");
  seed_cmd->add_option("--pop", seed_args.pop, "Population size")->capture_default_str()->check(CLI::Range(1, 1000000));
  seed_cmd->add_option("--out", seed_args.out, "Output JSON")->capture_default_str();
  seed_cmd->add_option("--seed", seed_args.seed, "RNG seed")->capture_default_str();

  VolumeArgs volume_args;
  auto* volume_cmd = app.add_subcommand("make-volume", "Write a synthetic blob volume");
  volume_cmd->add_option("--out", volume_args.out, "Output .vol file")->required();
  volume_cmd->add_option("--size", volume_args.size, "Edge length in voxels")->capture_default_str()->check(CLI::Range(1, 1024));
  volume_cmd->add_option("--seed", volume_args.seed, "RNG seed")->capture_default_str();

  try {
    app.parse(argc, argv);
    if (search_cmd->parsed() && search_args.metric == "siamese" && search_args.model.empty()) {
      throw CLI::RequiredError("--model is required with --metric siamese");
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (serve_cmd->parsed()) {
      serve_args.seeded = serve_seed->count() > 0;
      return serve_pairs(serve_args);
    }
    if (train_cmd->parsed()) return train(train_args);
    if (search_cmd->parsed()) return search(search_args);
    if (render_cmd->parsed()) return render(render_args);
    if (eval_cmd->parsed()) return eval(eval_args);
    if (gradcheck_cmd->parsed()) return gradcheck(gradcheck_seed);
    if (seed_cmd->parsed()) return seed_pop(seed_args);
    if (volume_cmd->parsed()) return make_volume(volume_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

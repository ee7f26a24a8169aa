// Command-line front end: generate, train, eval, ablate, sensitivity,
// gradcheck, plot.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or format
// error, 3 numerical failure (non-finite loss or failed gradient check).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "nmf/checkpoint.hpp"
#include "nmf/config.hpp"
#include "nmf/errors.hpp"
#include "nmf/gradcheck.hpp"
#include "nmf/harness.hpp"
#include "nmf/plot.hpp"
#include "nmf/synthdata.hpp"

namespace fs = std::filesystem;
using namespace nmf;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumerical = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", common.seed, "Seed for data generation, initialization and training");
  cmd->add_option("--out", common.out, "Output directory");
}

RunConfig load_config(const Common& common) {
  RunConfig config = common.config_path.empty() ? default_run_config() : load_run_config(common.config_path);
  if (common.seed) {
    config.train.seed = *common.seed;
    config.experiment.train.seed = *common.seed;
  }
  return config;
}

// Fills the data-dependent model dimensions from the corpus, or checks them.
void bind_dims(RunConfig& config, const Corpus& corpus) {
  auto bind = [](std::size_t& field, std::size_t value, const char* name) {
    if (field == 0) field = value;
    if (field != value) {
      throw ConfigError(std::string("model.") + name + " is " + std::to_string(field) + " but the corpus has " +
                        std::to_string(value));
    }
  };
  bind(config.model.num_classes, corpus.num_classes, "num_classes");
  bind(config.model.feature_dim, corpus.feature_dim, "feature_dim");
  config.experiment.model = config.model;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_report(const fs::path& dir, const EvalReport& report) {
  write_text(dir / "report.csv", report.csv());
  write_text(dir / "summary.json", report.summary().dump(2) + "\n");
}

GrammarMenu resolve_grammar(const std::string& name, std::uint64_t seed) {
  if (name == "composed") return composed_grammar();
  if (name == "cycle") return GrammarMenu{{cycle_grammar(3, 4)}, {1.0}};
  if (name == "random") {
    Rng rng(seed);
    return GrammarMenu{{random_grammar(8, 3, 12, rng)}, {1.0}};
  }
  return read_grammar(name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual external-memory action sequence forecaster"};
  app.require_subcommand(1);
  Common common;

  auto* generate = app.add_subcommand("generate", "Sample a synthetic corpus from a grammar");
  add_common(generate, common);
  std::string grammar_name = "composed";
  CorpusSpec corpus_spec;
  generate->add_option("--grammar", grammar_name, "Grammar file, or one of: composed, cycle, random");
  generate->add_option("--length", corpus_spec.sequence_length, "Frames per sequence");
  generate->add_option("--train", corpus_spec.num_train, "Training sequences");
  generate->add_option("--test", corpus_spec.num_test, "Test sequences");
  generate->add_option("--feature-dim", corpus_spec.feature_dim, "Feature dimension");
  generate->add_option("--noise", corpus_spec.noise_std, "Feature noise standard deviation");

  std::string data_dir;
  std::string variant_name = "full";
  std::string checkpoint_path;

  auto* train_cmd = app.add_subcommand("train", "Train one model variant");
  add_common(train_cmd, common);
  train_cmd->add_option("--data", data_dir, "Corpus directory")->required();
  train_cmd->add_option("--variant", variant_name, "a, b, c, d, e or full");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint over the protocol grid");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--data", data_dir, "Corpus directory")->required();
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
  eval_cmd->add_option("--variant", variant_name, "Variant the checkpoint was trained as");

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every variant and seed");
  add_common(ablate, common);
  ablate->add_option("--data", data_dir, "Corpus directory")->required();

  auto* sensitivity = app.add_subcommand("sensitivity", "Evaluate under observed-label corruption");
  add_common(sensitivity, common);
  sensitivity->add_option("--data", data_dir, "Corpus directory")->required();
  sensitivity->add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
  sensitivity->add_option("--variant", variant_name, "Variant the checkpoint was trained as");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of a tiny full model");
  add_common(gradcheck, common);
  double step = 1e-5;
  double tolerance = 1e-4;
  gradcheck->add_option("--step", step, "Central difference step h");
  gradcheck->add_option("--tolerance", tolerance, "Maximum relative error");

  auto* plot = app.add_subcommand("plot", "Render accuracy against predicted fraction as SVG");
  add_common(plot, common);
  std::string report_path;
  plot->add_option("--report", report_path, "Report CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    const fs::path out = common.out;
    RunConfig config = load_config(common);
    const std::uint64_t seed = common.seed.value_or(0);

    if (*generate) {
      const Corpus corpus = generate_corpus(resolve_grammar(grammar_name, seed), corpus_spec, seed);
      write_corpus(out, corpus);
      std::cout << "wrote " << corpus.train.size() << " train and " << corpus.test.size() << " test sequences to "
                << out.string() << "\n";
    } else if (*train_cmd) {
      const Corpus corpus = read_corpus(data_dir);
      bind_dims(config, corpus);
      const Variant variant = parse_variant(variant_name);
      ForecasterParams model = build_ablation(variant, config.model, config.train.seed);
      const TrainResult result = train(model, corpus.train, config.train);
      fs::create_directories(out);
      save_checkpoint(out / "model.json", model);
      std::string losses = "epoch,loss\n";
      for (std::size_t i = 0; i < result.epoch_losses.size(); ++i) {
        losses += std::to_string(i + 1) + "," + format_double(result.epoch_losses[i]) + "\n";
      }
      write_text(out / "losses.csv", losses);
      std::cout << "final loss " << format_double(result.epoch_losses.back()) << "\n";
    } else if (*eval_cmd) {
      const Corpus corpus = read_corpus(data_dir);
      bind_dims(config, corpus);
      const Variant variant = parse_variant(variant_name);
      const ForecasterParams model = load_checkpoint(checkpoint_path, variant, config.model);
      const EvalReport report =
          evaluate(model, corpus.test, config.protocol, EvalOptions{to_string(variant), config.train.seed});
      write_report(out, report);
      std::cout << report.csv();
    } else if (*ablate) {
      const Corpus corpus = read_corpus(data_dir);
      bind_dims(config, corpus);
      const AblationResult result = run_ablations(corpus.train, corpus.test, config.experiment);
      write_report(out, result.report);
      fs::create_directories(out / "models");
      for (const auto& trained : result.models) {
        save_checkpoint(out / "models" / (to_string(trained.variant) + "_seed" + std::to_string(trained.seed) + ".json"),
                        trained.params);
      }
      std::cout << result.report.csv();
    } else if (*sensitivity) {
      const Corpus corpus = read_corpus(data_dir);
      bind_dims(config, corpus);
      const ForecasterParams model = load_checkpoint(checkpoint_path, parse_variant(variant_name), config.model);
      const EvalReport report = run_sensitivity(model, corpus.test, config.train.seed, config.experiment);
      write_report(out, report);
      std::cout << report.csv();
    } else if (*gradcheck) {
      const GradCheckReport report = tiny_model_gradcheck(seed, step, tolerance);
      std::size_t failing = 0;
      for (const auto& p : report.params) {
        std::size_t bad = 0;
        for (double e : p.relative_errors) bad += e >= tolerance;
        failing += bad;
        std::cout << p.name << " max_relative_error " << p.max_relative_error << (bad ? " FAIL" : "") << "\n";
      }
      std::cout << "max_relative_error " << report.max_relative_error << " tolerance " << tolerance << " failing "
                << failing << "\n";
      if (!report.pass) return kNumerical;
    } else if (*plot) {
      const EvalReport report = read_report_csv(report_path);
      write_text(out / "accuracy.svg", render_accuracy_svg(report));
    }
    return 0;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kData;
  } catch (const ProtocolError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}

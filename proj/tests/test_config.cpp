#include <doctest.h>

#include <fstream>

#include "nmf/config.hpp"
#include "nmf/errors.hpp"
#include "nmf/plot.hpp"
#include "temp_dir.hpp"

using namespace nmf;
using nlohmann::json;

TEST_CASE("defaults") {
  const RunConfig c = default_run_config();
  CHECK(c.model.hidden_visual == 300);
  CHECK(c.model.hidden_label == 30);
  CHECK(c.model.mem_visual.slots == 24);
  CHECK(c.model.mem_label.slots == 20);
  CHECK(c.model.decoder_hidden == 300);
  CHECK_FALSE(c.model.persist_memory);
  CHECK(c.train.learning_rate == 1e-3);
  CHECK(c.train.clip_norm == 5.0);
  CHECK(c.protocol.observed_fractions == std::vector<double>{0.2, 0.3});
  CHECK(c.protocol.predicted_fractions == std::vector<double>{0.1, 0.2, 0.3, 0.5});
  CHECK(c.experiment.variants.size() == 6);
  CHECK(c.experiment.corruption_levels == std::vector<double>{0.0, 0.1, 0.3});
}

TEST_CASE("parsing sections") {
  const json doc = json::parse(R"({
    "model": {"num_classes": 8, "feature_dim": 16, "hidden_visual": 12, "mem_visual": {"slots": 6, "slot_dim": 12},
              "future_visual_input": "learned_token", "persist_memory": true},
    "train": {"epochs": 7, "learning_rate": 0.003, "observed_fractions": [0.3]},
    "protocol": {"predicted_fractions": [0.5]},
    "experiment": {"variants": ["a", "full"], "seeds": [4], "jobs": 2}
  })");
  const RunConfig c = parse_run_config(doc);
  CHECK(c.model.num_classes == 8);
  CHECK(c.model.hidden_visual == 12);
  CHECK(c.model.mem_visual.slots == 6);
  CHECK(c.model.mem_label.slots == 20);
  CHECK(c.model.future_visual_input == FutureVisualInput::learned_token);
  CHECK(c.model.persist_memory);
  CHECK(c.train.epochs == 7);
  CHECK(c.train.learning_rate == 0.003);
  CHECK(c.protocol.predicted_fractions == std::vector<double>{0.5});
  CHECK(c.experiment.variants == std::vector<Variant>{Variant::a, Variant::full});
  CHECK(c.experiment.model.hidden_visual == 12);
  CHECK(c.experiment.train.epochs == 7);

  const RunConfig again = parse_run_config(run_config_to_json(c));
  CHECK(run_config_to_json(again) == run_config_to_json(c));
}

TEST_CASE("unknown keys and bad values are rejected") {
  for (const char* text : {R"({"modle": {}})", R"({"model": {"hidden": 3}})", R"({"model": {"mem_visual": {"l": 3}}})",
                           R"({"train": {"epochs": "many"}})", R"({"train": {"epochs": 0}})",
                           R"({"protocol": {"observed_fractions": [0.9]}})", R"({"experiment": {"variants": ["z"]}})",
                           R"({"model": {"future_visual_input": "noise"}})", R"([1, 2])"}) {
    INFO(text);
    CHECK_THROWS_AS(parse_run_config(json::parse(text)), ConfigError);
  }
  TempDir dir("config");
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("report csv round trip and plot") {
  EvalReport report;
  for (double pred : {0.1, 0.2, 0.3, 0.5}) {
    report.rows.push_back({"full", 0, 0.3, pred, 0.9 - pred / 2, 0.8, 50});
    report.rows.push_back({"full", 1, 0.3, pred, 0.8 - pred / 2, 0.7, 50});
    report.rows.push_back({"b", 0, 0.3, pred, 0.7 - pred, 0.6, 50});
  }
  report.sort_rows();
  TempDir dir("plot");
  std::ofstream(dir / "r.csv") << report.csv();
  const EvalReport back = read_report_csv(dir / "r.csv");
  CHECK(back.csv() == report.csv());

  const std::string svg = render_accuracy_svg(back);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  std::size_t lines = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
  CHECK(lines == 2);

  std::ofstream(dir / "bad.csv") << "variant,seed,accuracy\nfull,0,0.5\n";
  CHECK_THROWS_AS(read_report_csv(dir / "bad.csv"), FormatError);
  std::ofstream(dir / "bad2.csv") << report.csv() << "full,0,0.3,x,0.5,50\n";
  CHECK_THROWS_AS(read_report_csv(dir / "bad2.csv"), FormatError);
}

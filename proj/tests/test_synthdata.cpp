#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "nmf/errors.hpp"
#include "nmf/synthdata.hpp"
#include "temp_dir.hpp"

using namespace nmf;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

std::string format_error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("sample_labels examples") {
  Rng rng(1);
  SUBCASE("deterministic cycle") {
    const std::vector<int> labels = sample_labels(cycle_grammar(3, 4), 12, rng);
    CHECK(labels == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2});
    CHECK(sample_labels(cycle_grammar(3, 4), 5, rng) == std::vector<int>{0, 0, 0, 0, 1});
  }
  SUBCASE("durations stay within bounds and labels within range") {
    const ActionGrammar g = random_grammar(6, 3, 9, rng);
    for (int trial = 0; trial < 50; ++trial) {
      const auto labels = sample_labels(g, 400, rng);
      for (int l : labels) REQUIRE((l >= 0 && l < 6));
      const auto lengths = segment_lengths(labels);
      // The final segment may be cut short by the sequence end.
      for (std::size_t i = 0; i + 1 < lengths.size(); ++i) REQUIRE((lengths[i] >= 3 && lengths[i] <= 9));
      for (std::size_t t = 1; t < labels.size(); ++t) {
        if (labels[t] != labels[t - 1]) REQUIRE(g.transition[labels[t - 1]][labels[t]] > 0.0);
      }
    }
  }
  SUBCASE("invalid input") {
    CHECK_THROWS_AS(sample_labels(cycle_grammar(3, 4), 0, rng), ContractError);
    ActionGrammar g = cycle_grammar(3, 4);
    g.transition[0][1] = 0.5;
    CHECK_THROWS_AS(sample_labels(g, 10, rng), ConfigError);
    g = cycle_grammar(3, 4);
    g.duration_min[2] = 5;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = cycle_grammar(3, 4);
    g.start_dist = {0.5, 0.25, 0.2};
    CHECK_THROWS_AS(g.validate(), ConfigError);
  }
}

TEST_CASE("transition frequencies over 10,000 segments match the matrix") {
  Rng rng(2);
  const ActionGrammar g = random_grammar(4, 1, 1, rng);
  // Unit durations make every frame a segment.
  const auto labels = sample_labels(g, 10001, rng);
  std::vector<std::vector<double>> counts(4, std::vector<double>(4, 0.0));
  std::vector<double> totals(4, 0.0);
  for (std::size_t t = 1; t < labels.size(); ++t) {
    counts[labels[t - 1]][labels[t]] += 1.0;
    totals[labels[t - 1]] += 1.0;
  }
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(g.transition[r][r] == 0.0);
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(counts[r][c] / totals[r] - g.transition[r][c]) <= 0.02);
  }
}

TEST_CASE("drop_self_transitions renormalises rows") {
  ActionGrammar g = cycle_grammar(3, 2);
  g.transition = {{0.5, 0.25, 0.25}, {0.1, 0.1, 0.8}, {0.0, 1.0, 0.0}};
  g.drop_self_transitions();
  CHECK(g.transition[0] == std::vector<double>{0.0, 0.5, 0.5});
  CHECK(g.transition[1][0] == doctest::Approx(0.1 / 0.9));
  CHECK(g.transition[2] == std::vector<double>{0.0, 1.0, 0.0});
  g.transition[1] = {0.0, 1.0, 0.0};
  CHECK_THROWS_AS(g.drop_self_transitions(), ConfigError);
}

TEST_CASE("composed grammar") {
  const GrammarMenu menu = composed_grammar();
  CHECK(menu.num_classes() == 8);
  CHECK(menu.grammars.size() == 3);
  CHECK_NOTHROW(menu.validate());
  // The successor of the shared run depends on the recipe.
  std::vector<int> after_two;
  for (const auto& g : menu.grammars) {
    for (std::size_t c = 0; c < 8; ++c) {
      if (g.transition[2][c] == 1.0) after_two.push_back(static_cast<int>(c));
    }
  }
  CHECK(after_two.size() == 3);
  CHECK(after_two[0] != after_two[1]);

  Rng rng(3);
  std::vector<int> seen(8, 0);
  for (int trial = 0; trial < 300; ++trial) {
    for (int l : sample_labels(menu, 60, rng)) seen[static_cast<std::size_t>(l)] = 1;
  }
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("synth_features") {
  Rng rng(4);
  SUBCASE("zero noise reproduces prototypes") {
    const FeaturePrototypes p = FeaturePrototypes::random(3, 5, 0.0, rng);
    const std::vector<int> labels{2, 0, 1, 1};
    const Tensor f = synth_features(labels, p, rng);
    CHECK(f.shape() == Shape{4, 5});
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(f.at(t, j) == static_cast<double>(static_cast<float>(p.prototypes.at(labels[t], j))));
      }
  }
  SUBCASE("same seed, same features") {
    const FeaturePrototypes p = FeaturePrototypes::random(3, 5, 0.7, rng);
    const std::vector<int> labels{0, 1, 2, 2, 1};
    Rng a(9), b(9);
    CHECK(bitwise_equal(synth_features(labels, p, a), synth_features(labels, p, b)));
  }
  SUBCASE("noise standard deviation") {
    const double sigma = 0.5;
    const FeaturePrototypes p = FeaturePrototypes::random(2, 4, sigma, rng);
    const std::vector<int> labels(10000, 1);
    const Tensor f = synth_features(labels, p, rng);
    for (std::size_t j = 0; j < 4; ++j) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t t = 0; t < 10000; ++t) mean += f.at(t, j);
      mean /= 10000.0;
      for (std::size_t t = 0; t < 10000; ++t) sq += (f.at(t, j) - mean) * (f.at(t, j) - mean);
      const double sd = std::sqrt(sq / 9999.0);
      CHECK(std::abs(sd - sigma) / sigma <= 0.05);
    }
  }
  SUBCASE("labels out of range") {
    const FeaturePrototypes p = FeaturePrototypes::random(3, 2, 0.1, rng);
    CHECK_THROWS_AS(synth_features(std::vector<int>{0, 3}, p, rng), ContractError);
  }
}

TEST_CASE("one_hot") {
  const Tensor single = one_hot(2, 4);
  CHECK(std::vector<double>(single.data().begin(), single.data().end()) == std::vector<double>{0, 0, 1, 0});
  CHECK_THROWS_AS(one_hot(4, 4), ContractError);
  try {
    one_hot(std::vector<int>{0, 1, 7}, 4);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
  Rng rng(5);
  const auto labels = sample_labels(random_grammar(5, 1, 4, rng), 200, rng);
  const Tensor m = one_hot(labels, 5);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 5; ++c)
      if (m.at(t, c) > m.at(t, best)) best = c;
    CHECK(static_cast<int>(best) == labels[t]);
  }
}

TEST_CASE("corrupt_labels") {
  Rng rng(6);
  const ActionGrammar g = random_grammar(5, 2, 6, rng);
  const auto labels = sample_labels(g, 300, rng);

  CHECK(corrupt_labels(labels, 5, 0.0, rng) == labels);

  const auto all = corrupt_labels(labels, 5, 1.0, rng);
  std::size_t begin = 0;
  for (std::size_t len : segment_lengths(labels)) {
    CHECK(all[begin] != labels[begin]);
    begin += len;
  }

  // Boundaries never move: every original segment stays constant.
  for (double p : {0.1, 0.5, 0.9}) {
    const auto noisy = corrupt_labels(labels, 5, p, rng);
    begin = 0;
    for (std::size_t len : segment_lengths(labels)) {
      for (std::size_t t = begin; t < begin + len; ++t) REQUIRE(noisy[t] == noisy[begin]);
      for (int l : noisy) REQUIRE((l >= 0 && l < 5));
      begin += len;
    }
  }

  CHECK_THROWS_AS(corrupt_labels(labels, 5, -0.1, rng), ContractError);
  CHECK_THROWS_AS(corrupt_labels(labels, 5, 1.5, rng), ContractError);
}

TEST_CASE("corruption rate over 10,000 segments") {
  Rng rng(7);
  for (double p : {0.1, 0.3, 0.7}) {
    // Alternating single-frame segments.
    std::vector<int> labels(10000);
    for (std::size_t t = 0; t < labels.size(); ++t) labels[t] = static_cast<int>(t % 2);
    const auto noisy = corrupt_labels(labels, 6, p, rng);
    std::size_t changed = 0;
    for (std::size_t t = 0; t < labels.size(); ++t) changed += noisy[t] != labels[t];
    CHECK(std::abs(static_cast<double>(changed) / 10000.0 - p) <= 0.02);
  }
}

TEST_CASE("feature files") {
  TempDir dir("features");
  Rng rng(8);
  const FeaturePrototypes p = FeaturePrototypes::random(4, 7, 0.3, rng);
  const auto labels = sample_labels(random_grammar(4, 1, 5, rng), 33, rng);
  const Tensor f = synth_features(labels, p, rng);
  const auto path = dir / "a.feat";
  write_features(path, f);
  CHECK(bitwise_equal(read_features(path), f));

  const std::string bytes = slurp(path);
  CHECK(bytes.size() == 16 + 4 * 33 * 7);
  CHECK(bytes.substr(0, 4) == "NMNF");

  SUBCASE("arbitrary float32 values survive") {
    Tensor odd = Tensor::matrix(1, 4, {0.0, -0.0, static_cast<double>(1e-40f),
                                      static_cast<double>(std::numeric_limits<float>::max())});
    write_features(dir / "odd.feat", odd);
    const Tensor back = read_features(dir / "odd.feat");
    CHECK(bitwise_equal(back, odd));
  }
  SUBCASE("bad magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    spit(dir / "bad.feat", bad);
    CHECK(format_error_message([&] { read_features(dir / "bad.feat"); }).find("offset 0") != std::string::npos);
  }
  SUBCASE("bad version") {
    std::string bad = bytes;
    bad[4] = 2;
    spit(dir / "bad.feat", bad);
    CHECK(format_error_message([&] { read_features(dir / "bad.feat"); }).find("offset 4") != std::string::npos);
  }
  SUBCASE("truncated payload") {
    spit(dir / "bad.feat", bytes.substr(0, bytes.size() - 3));
    CHECK(format_error_message([&] { read_features(dir / "bad.feat"); }).find("offset") != std::string::npos);
  }
  SUBCASE("header disagreeing with payload") {
    std::string bad = bytes;
    bad[8] = 34;  // T
    spit(dir / "bad.feat", bad);
    CHECK_THROWS_AS(read_features(dir / "bad.feat"), FormatError);
    spit(dir / "bad.feat", bytes + "junk");
    CHECK_THROWS_AS(read_features(dir / "bad.feat"), FormatError);
  }
  SUBCASE("truncated header and missing file") {
    spit(dir / "bad.feat", bytes.substr(0, 10));
    CHECK_THROWS_AS(read_features(dir / "bad.feat"), FormatError);
    CHECK_THROWS_AS(read_features(dir / "missing.feat"), FormatError);
  }
}

TEST_CASE("label files") {
  TempDir dir("labels");
  const std::vector<int> labels{3, 0, 12, 7, 7};
  write_labels(dir / "a.labels", labels);
  CHECK(slurp(dir / "a.labels") == "3\n0\n12\n7\n7\n");
  CHECK(read_labels(dir / "a.labels") == labels);

  for (const std::string bad : {"", "1\n2", "1\n\n2\n", "1\nx\n", "1\n-2\n", "1\r\n2\n", "1 \n"}) {
    spit(dir / "bad.labels", bad);
    CHECK_THROWS_AS(read_labels(dir / "bad.labels"), FormatError);
  }
}

TEST_CASE("grammar files") {
  TempDir dir("grammar");
  const GrammarMenu single{{cycle_grammar(3, 4)}, {1.0}};
  write_grammar(dir / "g.json", single);
  const GrammarMenu back = read_grammar(dir / "g.json");
  CHECK(back.grammars.size() == 1);
  CHECK(back.grammars[0].transition == single.grammars[0].transition);
  CHECK(back.grammars[0].duration_max == single.grammars[0].duration_max);

  const GrammarMenu menu = composed_grammar();
  write_grammar(dir / "menu.json", menu);
  const GrammarMenu menu_back = read_grammar(dir / "menu.json");
  CHECK(menu_back.weights == menu.weights);
  CHECK(menu_back.grammars[2].start_dist == menu.grammars[2].start_dist);

  spit(dir / "bad.json", R"({"classes": ["a", "b"], "transition": [[0, 1], [1, 0]], "start_dist": [1, 0],
                             "duration_min": [1, 1], "duration_max": [2, 2], "colour": "red"})");
  CHECK_THROWS_AS(read_grammar(dir / "bad.json"), FormatError);
  spit(dir / "bad.json", R"({"classes": ["a", "b"], "transition": [[0, 0.5], [1, 0]], "start_dist": [1, 0],
                             "duration_min": [1, 1], "duration_max": [2, 2]})");
  CHECK_THROWS_AS(read_grammar(dir / "bad.json"), FormatError);
  spit(dir / "bad.json", "{\"classes\": ");
  CHECK_THROWS_AS(read_grammar(dir / "bad.json"), FormatError);
}

TEST_CASE("corpus generation and files") {
  CorpusSpec spec;
  spec.sequence_length = 30;
  spec.num_train = 4;
  spec.num_test = 3;
  spec.feature_dim = 5;
  const Corpus a = generate_corpus(composed_grammar(), spec, 21);
  const Corpus b = generate_corpus(composed_grammar(), spec, 21);
  const Corpus c = generate_corpus(composed_grammar(), spec, 22);
  REQUIRE(a.train.size() == 4);
  REQUIRE(a.test.size() == 3);
  bool any_different = false;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.train[i].labels == b.train[i].labels);
    CHECK(bitwise_equal(a.train[i].features, b.train[i].features));
    any_different |= !bitwise_equal(a.train[i].features, c.train[i].features);
  }
  CHECK(any_different);

  TempDir dir("corpus");
  write_corpus(dir.path(), a);
  const Corpus loaded = read_corpus(dir.path());
  CHECK(loaded.num_classes == 8);
  CHECK(loaded.feature_dim == 5);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded.test[i].labels == a.test[i].labels);
    CHECK(bitwise_equal(loaded.test[i].features, a.test[i].features));
  }

  // A label file one line short of its feature file.
  const auto labels_path = dir / "train/seq_0001.labels";
  std::string text = slurp(labels_path);
  text.erase(text.size() - 2);
  spit(labels_path, text);
  CHECK_THROWS_AS(read_corpus(dir.path()), FormatError);
}

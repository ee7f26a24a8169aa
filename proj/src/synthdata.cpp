#include "nmf/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "nmf/errors.hpp"

namespace nmf {

namespace {

using json = nlohmann::json;

constexpr char kFeatureMagic[4] = {'N', 'M', 'N', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::size_t kFeatureHeaderBytes = 16;

void check_distribution(const std::vector<double>& p, std::size_t n, const std::string& what) {
  if (p.size() != n) {
    throw ConfigError(what + " has " + std::to_string(p.size()) + " entries, expected " + std::to_string(n));
  }
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(what + " has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(what + " sums to " + std::to_string(total) + ", expected 1");
}

std::size_t draw(const std::vector<double>& p, Rng& rng) {
  std::discrete_distribution<std::size_t> dist(p.begin(), p.end());
  return dist(rng);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw FormatError("short write to " + path.string());
}

json grammar_to_json(const ActionGrammar& g) {
  return json{{"classes", g.classes},
              {"transition", g.transition},
              {"start_dist", g.start_dist},
              {"duration_min", g.duration_min},
              {"duration_max", g.duration_max}};
}

ActionGrammar grammar_from_json(const json& j, const std::string& where) {
  static const std::vector<std::string> keys{"classes", "transition", "start_dist", "duration_min", "duration_max"};
  if (!j.is_object()) throw FormatError(where + ": grammar must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw FormatError(where + ": unknown grammar key '" + key + "'");
    }
  }
  ActionGrammar g;
  try {
    g.classes = j.at("classes").get<std::vector<std::string>>();
    g.transition = j.at("transition").get<std::vector<std::vector<double>>>();
    g.start_dist = j.at("start_dist").get<std::vector<double>>();
    g.duration_min = j.at("duration_min").get<std::vector<int>>();
    g.duration_max = j.at("duration_max").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
  g.validate();
  return g;
}

std::string sequence_name(std::size_t index) {
  std::ostringstream name;
  name << "seq_" << std::setw(4) << std::setfill('0') << index;
  return name.str();
}

}  // namespace

void ActionGrammar::validate() const {
  const std::size_t n = classes.size();
  if (n == 0) throw ConfigError("grammar has no classes");
  if (transition.size() != n) throw ConfigError("transition matrix must have one row per class");
  for (std::size_t r = 0; r < n; ++r) {
    check_distribution(transition[r], n, "transition row " + std::to_string(r));
  }
  check_distribution(start_dist, n, "start_dist");
  if (duration_min.size() != n || duration_max.size() != n) {
    throw ConfigError("duration bounds must have one entry per class");
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (duration_min[c] < 1 || duration_min[c] > duration_max[c]) {
      throw ConfigError("class " + std::to_string(c) + " needs 1 <= duration_min <= duration_max");
    }
  }
}

void ActionGrammar::drop_self_transitions() {
  for (std::size_t r = 0; r < transition.size(); ++r) {
    auto& row = transition[r];
    if (r < row.size()) row[r] = 0.0;
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    if (!(total > 0.0)) throw ConfigError("class " + std::to_string(r) + " has no outgoing transition");
    for (double& v : row) v /= total;
  }
}

std::size_t GrammarMenu::num_classes() const { return grammars.empty() ? 0 : grammars.front().num_classes(); }

void GrammarMenu::validate() const {
  if (grammars.empty()) throw ConfigError("grammar menu is empty");
  for (const auto& g : grammars) {
    g.validate();
    if (g.num_classes() != num_classes()) throw ConfigError("menu grammars disagree on the number of classes");
  }
  check_distribution(weights, grammars.size(), "menu weights");
}

FeaturePrototypes FeaturePrototypes::random(std::size_t num_classes, std::size_t feature_dim, double noise_std,
                                            Rng& rng) {
  if (noise_std < 0.0) throw ConfigError("noise_std must be non-negative");
  FeaturePrototypes p;
  p.prototypes = Tensor::zeros({num_classes, feature_dim});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : p.prototypes.mutable_data()) v = normal(rng);
  p.noise_std = noise_std;
  return p;
}

std::vector<int> sample_labels(const ActionGrammar& grammar, std::size_t length, Rng& rng) {
  if (length < 1) throw ContractError("sample_labels: length must be at least 1");
  grammar.validate();
  std::vector<int> labels;
  labels.reserve(length);
  std::size_t cls = draw(grammar.start_dist, rng);
  while (labels.size() < length) {
    std::uniform_int_distribution<int> duration(grammar.duration_min[cls], grammar.duration_max[cls]);
    const int d = duration(rng);
    for (int i = 0; i < d && labels.size() < length; ++i) labels.push_back(static_cast<int>(cls));
    cls = draw(grammar.transition[cls], rng);
  }
  return labels;
}

std::vector<int> sample_labels(const GrammarMenu& menu, std::size_t length, Rng& rng) {
  menu.validate();
  const std::size_t choice = draw(menu.weights, rng);
  return sample_labels(menu.grammars[choice], length, rng);
}

Tensor synth_features(std::span<const int> labels, const FeaturePrototypes& prototypes, Rng& rng) {
  const std::size_t num_classes = prototypes.prototypes.rows();
  const std::size_t dim = prototypes.prototypes.cols();
  if (labels.empty()) throw ContractError("synth_features: empty label sequence");
  Tensor features = Tensor::zeros({labels.size(), dim});
  auto out = features.mutable_data();
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= num_classes) {
      throw ContractError("synth_features: label " + std::to_string(labels[t]) + " at position " +
                          std::to_string(t) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    for (std::size_t j = 0; j < dim; ++j) {
      const double value = prototypes.prototypes.at(static_cast<std::size_t>(labels[t]), j) +
                           (prototypes.noise_std > 0.0 ? prototypes.noise_std * noise(rng) : 0.0);
      // Features are stored as float32 on disk; keep the in-memory copy identical.
      out[t * dim + j] = static_cast<double>(static_cast<float>(value));
    }
  }
  return features;
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
  if (labels.empty()) throw ContractError("one_hot: empty label sequence");
  Tensor out = Tensor::zeros({labels.size(), num_classes});
  auto data = out.mutable_data();
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= num_classes) {
      throw ContractError("one_hot: label " + std::to_string(labels[t]) + " at index " + std::to_string(t) +
                          " outside [0, " + std::to_string(num_classes) + ")");
    }
    data[t * num_classes + static_cast<std::size_t>(labels[t])] = 1.0;
  }
  return out;
}

Tensor one_hot(int label, std::size_t num_classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
    throw ContractError("one_hot: label " + std::to_string(label) + " outside [0, " + std::to_string(num_classes) +
                        ")");
  }
  Tensor out = Tensor::zeros({num_classes});
  out.mutable_data()[static_cast<std::size_t>(label)] = 1.0;
  return out;
}

std::vector<std::size_t> segment_lengths(std::span<const int> labels) {
  std::vector<std::size_t> lengths;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (t == 0 || labels[t] != labels[t - 1]) {
      lengths.push_back(1);
    } else {
      ++lengths.back();
    }
  }
  return lengths;
}

std::vector<int> corrupt_labels(std::span<const int> labels, std::size_t num_classes, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ContractError("corrupt_labels: p must lie in [0, 1]");
  if (num_classes < 2 && p > 0.0) throw ContractError("corrupt_labels: need at least two classes");
  std::vector<int> out(labels.begin(), labels.end());
  std::bernoulli_distribution flip(p);
  std::uniform_int_distribution<int> other(0, static_cast<int>(num_classes) - 2);
  std::size_t begin = 0;
  for (std::size_t len : segment_lengths(labels)) {
    if (flip(rng)) {
      // Draw from the C-1 classes other than the original.
      int replacement = other(rng);
      if (replacement >= labels[begin]) ++replacement;
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(begin),
                out.begin() + static_cast<std::ptrdiff_t>(begin + len), replacement);
    }
    begin += len;
  }
  return out;
}

ActionGrammar cycle_grammar(std::size_t num_classes, int duration) {
  if (num_classes < 2) throw ConfigError("cycle grammar needs at least two classes");
  ActionGrammar g;
  for (std::size_t c = 0; c < num_classes; ++c) {
    g.classes.push_back("action_" + std::to_string(c));
    std::vector<double> row(num_classes, 0.0);
    row[(c + 1) % num_classes] = 1.0;
    g.transition.push_back(std::move(row));
  }
  g.start_dist.assign(num_classes, 0.0);
  g.start_dist[0] = 1.0;
  g.duration_min.assign(num_classes, duration);
  g.duration_max.assign(num_classes, duration);
  g.validate();
  return g;
}

ActionGrammar random_grammar(std::size_t num_classes, int duration_min, int duration_max, Rng& rng) {
  if (num_classes < 2) throw ConfigError("random grammar needs at least two classes");
  ActionGrammar g;
  std::uniform_real_distribution<double> weight(0.0, 1.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    g.classes.push_back("action_" + std::to_string(c));
    std::vector<double> row(num_classes);
    for (double& v : row) v = weight(rng);
    g.transition.push_back(std::move(row));
  }
  g.drop_self_transitions();
  g.start_dist.assign(num_classes, 1.0 / static_cast<double>(num_classes));
  g.duration_min.assign(num_classes, duration_min);
  g.duration_max.assign(num_classes, duration_max);
  g.validate();
  return g;
}

GrammarMenu composed_grammar() {
  constexpr std::size_t kClasses = 8;
  // Recipes share the run "1 -> 2"; what follows it depends on which recipe
  // the sequence is in, recoverable only from segments seen earlier.
  const std::vector<std::vector<int>> recipes{
      {0, 1, 2, 3, 4},
      {0, 1, 2, 5, 6},
      {7, 1, 2, 3, 6},
  };
  const std::vector<int> durations{6, 9, 12, 8, 14, 7, 10, 11};

  GrammarMenu menu;
  for (const auto& recipe : recipes) {
    ActionGrammar g;
    for (std::size_t c = 0; c < kClasses; ++c) g.classes.push_back("action_" + std::to_string(c));
    // Classes outside the recipe are unreachable; give them a valid row anyway.
    g.transition.assign(kClasses, std::vector<double>(kClasses, 1.0));
    for (std::size_t i = 0; i < recipe.size(); ++i) {
      auto& row = g.transition[static_cast<std::size_t>(recipe[i])];
      std::fill(row.begin(), row.end(), 0.0);
      row[static_cast<std::size_t>(recipe[(i + 1) % recipe.size()])] = 1.0;
    }
    g.drop_self_transitions();
    g.start_dist.assign(kClasses, 0.0);
    for (int c : recipe) g.start_dist[static_cast<std::size_t>(c)] = 1.0 / static_cast<double>(recipe.size());
    g.duration_min = durations;
    g.duration_max = durations;
    g.validate();
    menu.grammars.push_back(std::move(g));
  }
  menu.weights.assign(recipes.size(), 1.0 / static_cast<double>(recipes.size()));
  menu.validate();
  return menu;
}

Corpus generate_corpus(const GrammarMenu& grammar, const CorpusSpec& spec, std::uint64_t seed) {
  grammar.validate();
  if (spec.sequence_length < 1 || spec.feature_dim < 1) throw ConfigError("corpus needs T >= 1 and feature_dim >= 1");
  Rng rng(seed);
  Corpus corpus;
  corpus.grammar = grammar;
  corpus.num_classes = grammar.num_classes();
  corpus.feature_dim = spec.feature_dim;
  const FeaturePrototypes prototypes =
      FeaturePrototypes::random(corpus.num_classes, spec.feature_dim, spec.noise_std, rng);
  auto make = [&](std::size_t count, std::vector<Sample>& out) {
    for (std::size_t i = 0; i < count; ++i) {
      Sample s;
      s.labels = sample_labels(grammar, spec.sequence_length, rng);
      s.features = synth_features(s.labels, prototypes, rng);
      out.push_back(std::move(s));
    }
  };
  make(spec.num_train, corpus.train);
  make(spec.num_test, corpus.test);
  return corpus;
}

void write_features(const std::filesystem::path& path, const Tensor& features) {
  if (!features.defined() || features.rank() != 2) {
    throw ContractError("write_features: expected a [T x D] matrix");
  }
  std::string bytes(kFeatureMagic, 4);
  put_u32(bytes, kFeatureVersion);
  put_u32(bytes, static_cast<std::uint32_t>(features.rows()));
  put_u32(bytes, static_cast<std::uint32_t>(features.cols()));
  for (double v : features.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_u32(bytes, bits);
  }
  write_file(path, bytes);
}

Tensor read_features(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string where = path.string();
  if (bytes.size() < kFeatureHeaderBytes) {
    throw FormatError(where + ": truncated header at offset " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), kFeatureMagic, 4) != 0) throw FormatError(where + ": bad magic at offset 0");
  if (get_u32(bytes, 4) != kFeatureVersion) {
    throw FormatError(where + ": unsupported version " + std::to_string(get_u32(bytes, 4)) + " at offset 4");
  }
  const std::uint64_t rows = get_u32(bytes, 8);
  const std::uint64_t cols = get_u32(bytes, 12);
  if (rows == 0) throw FormatError(where + ": zero row count at offset 8");
  if (cols == 0) throw FormatError(where + ": zero column count at offset 12");
  const std::uint64_t expected = kFeatureHeaderBytes + 4 * rows * cols;
  if (bytes.size() < expected) {
    throw FormatError(where + ": payload truncated at offset " + std::to_string(bytes.size()) + ", header promises " +
                      std::to_string(expected) + " bytes");
  }
  if (bytes.size() > expected) {
    throw FormatError(where + ": trailing bytes at offset " + std::to_string(expected));
  }
  std::vector<double> values(rows * cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = get_u32(bytes, kFeatureHeaderBytes + 4 * i);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    values[i] = static_cast<double>(f);
  }
  return Tensor::matrix(rows, cols, std::move(values));
}

void write_labels(const std::filesystem::path& path, std::span<const int> labels) {
  std::string text;
  for (int label : labels) {
    if (label < 0) throw ContractError("write_labels: negative label " + std::to_string(label));
    text += std::to_string(label);
    text.push_back('\n');
  }
  write_file(path, text);
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const std::string where = path.string();
  if (text.empty()) throw FormatError(where + ": empty label file at offset 0");
  if (text.back() != '\n') throw FormatError(where + ": missing final newline at offset " + std::to_string(text.size()));
  std::vector<int> labels;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    const std::size_t line_end = text.find('\n', line_start);
    const std::string_view line(text.data() + line_start, line_end - line_start);
    if (line.empty() || line.size() > 9 ||
        !std::all_of(line.begin(), line.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      throw FormatError(where + ": invalid class id at offset " + std::to_string(line_start));
    }
    labels.push_back(std::stoi(std::string(line)));
    line_start = line_end + 1;
  }
  return labels;
}

void write_grammar(const std::filesystem::path& path, const GrammarMenu& grammar) {
  grammar.validate();
  json doc;
  if (grammar.grammars.size() == 1) {
    doc = grammar_to_json(grammar.grammars.front());
  } else {
    doc["menu"] = json::array();
    for (const auto& g : grammar.grammars) doc["menu"].push_back(grammar_to_json(g));
    doc["weights"] = grammar.weights;
  }
  write_file(path, doc.dump(2) + "\n");
}

GrammarMenu read_grammar(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  // A file that violates the grammar invariants is malformed data.
  try {
    GrammarMenu menu;
    if (doc.is_object() && doc.contains("menu")) {
      for (const auto& [key, value] : doc.items()) {
        if (key != "menu" && key != "weights") throw FormatError(path.string() + ": unknown grammar key '" + key + "'");
      }
      if (!doc["menu"].is_array()) throw FormatError(path.string() + ": 'menu' must be a list");
      for (const auto& entry : doc["menu"]) menu.grammars.push_back(grammar_from_json(entry, path.string()));
      try {
        menu.weights = doc.at("weights").get<std::vector<double>>();
      } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
      }
    } else {
      menu.grammars.push_back(grammar_from_json(doc, path.string()));
      menu.weights = {1.0};
    }
    menu.validate();
    return menu;
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir / "train");
  std::filesystem::create_directories(dir / "test");
  write_grammar(dir / "grammar.json", corpus.grammar);
  auto dump = [&](const std::vector<Sample>& samples, const std::filesystem::path& sub) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      write_features(sub / (sequence_name(i) + ".feat"), samples[i].features);
      write_labels(sub / (sequence_name(i) + ".labels"), samples[i].labels);
    }
  };
  dump(corpus.train, dir / "train");
  dump(corpus.test, dir / "test");
  json manifest{{"num_classes", corpus.num_classes},
                {"feature_dim", corpus.feature_dim},
                {"num_train", corpus.train.size()},
                {"num_test", corpus.test.size()}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Corpus read_corpus(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  Corpus corpus;
  std::size_t num_train = 0, num_test = 0;
  try {
    corpus.num_classes = manifest.at("num_classes").get<std::size_t>();
    corpus.feature_dim = manifest.at("feature_dim").get<std::size_t>();
    num_train = manifest.at("num_train").get<std::size_t>();
    num_test = manifest.at("num_test").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  corpus.grammar = read_grammar(dir / "grammar.json");
  auto load = [&](std::size_t count, const std::filesystem::path& sub, std::vector<Sample>& out) {
    for (std::size_t i = 0; i < count; ++i) {
      Sample s;
      const auto feat_path = sub / (sequence_name(i) + ".feat");
      const auto label_path = sub / (sequence_name(i) + ".labels");
      s.features = read_features(feat_path);
      s.labels = read_labels(label_path);
      if (s.labels.size() != s.features.rows()) {
        throw FormatError(label_path.string() + ": " + std::to_string(s.labels.size()) + " labels for " +
                          std::to_string(s.features.rows()) + " feature rows");
      }
      if (s.features.cols() != corpus.feature_dim) {
        throw FormatError(feat_path.string() + ": feature dimension " + std::to_string(s.features.cols()) +
                          " does not match manifest " + std::to_string(corpus.feature_dim));
      }
      for (std::size_t t = 0; t < s.labels.size(); ++t) {
        if (static_cast<std::size_t>(s.labels[t]) >= corpus.num_classes) {
          throw FormatError(label_path.string() + ": class id " + std::to_string(s.labels[t]) + " on line " +
                            std::to_string(t + 1) + " outside the manifest's classes");
        }
      }
      out.push_back(std::move(s));
    }
  };
  load(num_train, dir / "train", corpus.train);
  load(num_test, dir / "test", corpus.test);
  return corpus;
}

}  // namespace nmf

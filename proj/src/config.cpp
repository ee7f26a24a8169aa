#include "nmf/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "nmf/errors.hpp"

namespace nmf {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& section, const std::string& name, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError("config: section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (!allowed.contains(key)) throw ConfigError("config: unknown key '" + name + "." + key + "'");
  }
}

template <typename T>
void read(const json& section, const std::string& section_name, const char* key, T& target) {
  if (!section.contains(key)) return;
  try {
    target = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + section_name + "." + key + "': " + e.what());
  }
}

MemoryConfig read_memory(const json& section, const std::string& name, MemoryConfig base) {
  reject_unknown(section, name, {"slots", "slot_dim"});
  read(section, name, "slots", base.slots);
  read(section, name, "slot_dim", base.slot_dim);
  return base;
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.experiment.model = c.model;
  c.experiment.train = c.train;
  return c;
}

RunConfig parse_run_config(const json& doc) {
  RunConfig c = default_run_config();
  reject_unknown(doc, "<root>", {"model", "train", "protocol", "experiment"});

  if (doc.contains("model")) {
    const json& m = doc["model"];
    reject_unknown(m, "model",
                   {"num_classes", "feature_dim", "hidden_visual", "hidden_label", "mem_visual", "mem_label",
                    "decoder_hidden", "persist_memory", "future_visual_input"});
    read(m, "model", "num_classes", c.model.num_classes);
    read(m, "model", "feature_dim", c.model.feature_dim);
    read(m, "model", "hidden_visual", c.model.hidden_visual);
    read(m, "model", "hidden_label", c.model.hidden_label);
    read(m, "model", "decoder_hidden", c.model.decoder_hidden);
    read(m, "model", "persist_memory", c.model.persist_memory);
    if (m.contains("mem_visual")) c.model.mem_visual = read_memory(m["mem_visual"], "model.mem_visual", c.model.mem_visual);
    if (m.contains("mem_label")) c.model.mem_label = read_memory(m["mem_label"], "model.mem_label", c.model.mem_label);
    if (m.contains("future_visual_input")) {
      std::string mode;
      read(m, "model", "future_visual_input", mode);
      c.model.future_visual_input = parse_future_visual_input(mode);
    }
  }

  if (doc.contains("train")) {
    const json& t = doc["train"];
    reject_unknown(t, "train",
                   {"epochs", "batch_size", "learning_rate", "clip_norm", "seed", "teacher_forcing", "beta1", "beta2",
                    "epsilon", "observed_fractions", "predicted_fraction"});
    read(t, "train", "epochs", c.train.epochs);
    read(t, "train", "batch_size", c.train.batch_size);
    read(t, "train", "learning_rate", c.train.learning_rate);
    read(t, "train", "clip_norm", c.train.clip_norm);
    read(t, "train", "seed", c.train.seed);
    read(t, "train", "teacher_forcing", c.train.teacher_forcing);
    read(t, "train", "beta1", c.train.beta1);
    read(t, "train", "beta2", c.train.beta2);
    read(t, "train", "epsilon", c.train.epsilon);
    read(t, "train", "observed_fractions", c.train.observed_fractions);
    read(t, "train", "predicted_fraction", c.train.predicted_fraction);
    c.train.validate();
  }

  if (doc.contains("protocol")) {
    const json& p = doc["protocol"];
    reject_unknown(p, "protocol", {"observed_fractions", "predicted_fractions"});
    read(p, "protocol", "observed_fractions", c.protocol.observed_fractions);
    read(p, "protocol", "predicted_fractions", c.protocol.predicted_fractions);
    c.protocol.validate();
  }

  if (doc.contains("experiment")) {
    const json& e = doc["experiment"];
    reject_unknown(e, "experiment",
                   {"variants", "seeds", "observed_fraction", "predicted_fraction", "corruption_levels", "jobs"});
    if (e.contains("variants")) {
      std::vector<std::string> names;
      read(e, "experiment", "variants", names);
      c.experiment.variants.clear();
      for (const auto& n : names) c.experiment.variants.push_back(parse_variant(n));
    }
    read(e, "experiment", "seeds", c.experiment.seeds);
    read(e, "experiment", "observed_fraction", c.experiment.observed_fraction);
    read(e, "experiment", "predicted_fraction", c.experiment.predicted_fraction);
    read(e, "experiment", "corruption_levels", c.experiment.corruption_levels);
    read(e, "experiment", "jobs", c.experiment.jobs);
    EvalProtocol{{c.experiment.observed_fraction}, {c.experiment.predicted_fraction}}.validate();
  }
  c.experiment.model = c.model;
  c.experiment.train = c.train;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

json run_config_to_json(const RunConfig& c) {
  std::vector<std::string> variants;
  for (Variant v : c.experiment.variants) variants.push_back(to_string(v));
  return json{
      {"model",
       {{"num_classes", c.model.num_classes},
        {"feature_dim", c.model.feature_dim},
        {"hidden_visual", c.model.hidden_visual},
        {"hidden_label", c.model.hidden_label},
        {"mem_visual", {{"slots", c.model.mem_visual.slots}, {"slot_dim", c.model.mem_visual.slot_dim}}},
        {"mem_label", {{"slots", c.model.mem_label.slots}, {"slot_dim", c.model.mem_label.slot_dim}}},
        {"decoder_hidden", c.model.decoder_hidden},
        {"persist_memory", c.model.persist_memory},
        {"future_visual_input", to_string(c.model.future_visual_input)}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"clip_norm", c.train.clip_norm},
        {"seed", c.train.seed},
        {"teacher_forcing", c.train.teacher_forcing},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"epsilon", c.train.epsilon},
        {"observed_fractions", c.train.observed_fractions},
        {"predicted_fraction", c.train.predicted_fraction}}},
      {"protocol",
       {{"observed_fractions", c.protocol.observed_fractions},
        {"predicted_fractions", c.protocol.predicted_fractions}}},
      {"experiment",
       {{"variants", variants},
        {"seeds", c.experiment.seeds},
        {"observed_fraction", c.experiment.observed_fraction},
        {"predicted_fraction", c.experiment.predicted_fraction},
        {"corruption_levels", c.experiment.corruption_levels},
        {"jobs", c.experiment.jobs}}}};
}

}  // namespace nmf

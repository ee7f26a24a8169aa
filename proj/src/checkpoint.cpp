#include "nmf/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nmf/errors.hpp"

namespace nmf {

using json = nlohmann::json;

std::string checkpoint_to_string(const ForecasterParams& params) {
  json doc = json::object();
  for (const auto& [name, tensor] : params.named_parameters()) {
    doc[name] = json{{"shape", tensor.shape()},
                     {"data", std::vector<double>(tensor.data().begin(), tensor.data().end())}};
  }
  return doc.dump() + "\n";
}

void save_checkpoint(const std::filesystem::path& path, const ForecasterParams& params) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(params);
  if (!out) throw FormatError("short write to checkpoint " + path.string());
}

ForecasterParams checkpoint_from_string(const std::string& text, Variant variant, const ForecasterConfig& config) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("checkpoint: top level must be an object");

  ForecasterParams params = build_ablation(variant, config, 0);
  std::set<std::string> expected;
  for (auto& [name, tensor] : params.named_parameters()) {
    expected.insert(name);
    if (!doc.contains(name)) throw FormatError("checkpoint: missing parameter '" + name + "'");
    const json& entry = doc[name];
    Shape shape;
    std::vector<double> data;
    try {
      shape = entry.at("shape").get<Shape>();
      data = entry.at("data").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw FormatError("checkpoint: parameter '" + name + "': " + e.what());
    }
    if (shape != tensor.shape()) {
      throw FormatError("checkpoint: parameter '" + name + "' has shape " + shape_string(shape) + ", config expects " +
                        shape_string(tensor.shape()));
    }
    if (data.size() != tensor.size()) {
      throw FormatError("checkpoint: parameter '" + name + "' carries " + std::to_string(data.size()) +
                        " values, expected " + std::to_string(tensor.size()));
    }
    Tensor target = tensor;
    std::copy(data.begin(), data.end(), target.mutable_data().begin());
  }
  for (const auto& [name, value] : doc.items()) {
    if (!expected.contains(name)) throw FormatError("checkpoint: unexpected parameter '" + name + "'");
  }
  return params;
}

ForecasterParams load_checkpoint(const std::filesystem::path& path, Variant variant, const ForecasterConfig& config) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return checkpoint_from_string(buffer.str(), variant, config);
}

}  // namespace nmf

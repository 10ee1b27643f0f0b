#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "softdice/autodiff.hpp"

namespace softdice {

/// Writes parameters as {layer-name: {shape, row-major values}}.
inline void save_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, Var>>& params) {
  nlohmann::json j;
  for (const auto& [name, var] : params) {
    const Tensor& t = var.value();
    j[name] = {{"shape", {t.rows(), t.cols()}}, {"values", t.data()}};
  }
  std::ofstream out(path);
  if (!out) throw contract_error("save_checkpoint: cannot open '" + path + "'");
  out << j.dump(1) << "\n";
}

inline nlohmann::json read_checkpoint_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("load_checkpoint: cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return j;
}

/// Loads values into existing parameter leaves, validating names and shapes.
inline void load_checkpoint(const std::string& path,
                            const std::vector<std::pair<std::string, Var>>& params) {
  nlohmann::json j = read_checkpoint_json(path);
  for (const auto& [name, var] : params) {
    if (!j.contains(name))
      throw contract_error("load_checkpoint: missing parameter '" + name + "' in " + path);
    const auto& entry = j.at(name);
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    Tensor& t = var.get()->value;
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols())
      throw contract_error("load_checkpoint: shape mismatch for '" + name + "': file has [" +
                           std::to_string(shape.size() > 0 ? shape[0] : 0) + "x" +
                           std::to_string(shape.size() > 1 ? shape[1] : 0) + "], expected [" +
                           std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]");
    auto values = entry.at("values").get<std::vector<double>>();
    if (values.size() != t.size())
      throw contract_error("load_checkpoint: value count mismatch for '" + name + "'");
    t.data() = std::move(values);
  }
}

}  // namespace softdice

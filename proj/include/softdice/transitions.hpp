#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "softdice/errors.hpp"

namespace softdice {

/// One expert tuple; the unit of all sampling. e=1 marks episode end
/// (goal reached or horizon cutoff alike).
struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> s_next;
  int e = 0;
};

struct Trajectory {
  int id = 0;
  std::vector<Transition> steps;
  bool horizon_cutoff = false;  // expert did not terminate before the horizon
};

/// JSON Lines, one record per transition, append-ordered by (traj, t).
inline void save_demos(const std::string& path, const std::vector<Trajectory>& trajectories) {
  std::ofstream out(path);
  if (!out) throw contract_error("save_demos: cannot open '" + path + "'");
  for (const Trajectory& traj : trajectories) {
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
      const Transition& tr = traj.steps[t];
      nlohmann::json j = {{"traj", traj.id}, {"t", t},          {"s", tr.s},
                          {"a", tr.a},       {"s_next", tr.s_next}, {"e", tr.e}};
      out << j.dump() << "\n";
    }
  }
}

inline std::vector<Trajectory> load_demos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("load_demos: cannot open '" + path + "'");
  std::vector<Trajectory> out;
  std::string line;
  int current_id = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    int id = j.at("traj").get<int>();
    if (out.empty() || id != current_id) {
      out.push_back(Trajectory{id, {}, false});
      current_id = id;
    }
    Transition tr;
    tr.s = j.at("s").get<std::vector<double>>();
    tr.a = j.at("a").get<std::vector<double>>();
    tr.s_next = j.at("s_next").get<std::vector<double>>();
    tr.e = j.at("e").get<int>();
    out.back().steps.push_back(std::move(tr));
  }
  return out;
}

/// Chained-state invariant: within a trajectory s_{i+1} == s'_i, and the
/// final transition alone carries e=1.
inline void validate_trajectory(const Trajectory& traj) {
  if (traj.steps.empty()) throw contract_error("trajectory has no transitions");
  for (std::size_t i = 0; i + 1 < traj.steps.size(); ++i) {
    if (traj.steps[i].e != 0)
      throw contract_error("trajectory " + std::to_string(traj.id) +
                           ": non-final transition marked terminal");
    if (traj.steps[i].s_next != traj.steps[i + 1].s)
      throw contract_error("trajectory " + std::to_string(traj.id) +
                           ": chained-state invariant violated at step " + std::to_string(i));
  }
  if (traj.steps.back().e != 1)
    throw contract_error("trajectory " + std::to_string(traj.id) +
                         ": final transition not marked terminal");
}

}  // namespace softdice

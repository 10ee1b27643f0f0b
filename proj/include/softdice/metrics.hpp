#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "softdice/errors.hpp"

namespace softdice {

struct StepMetrics {
  std::size_t step = 0;
  double j_e = 0.0;
  double j_pi = 0.0;
  double j_gp = 0.0;
  double policy_entropy = 0.0;
  bool has_eval = false;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  // diagnostics, not part of the CSV contract
  double policy_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
};

/// Shortest round-trip decimal formatting, stable across runs.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Step metrics as CSV. Evaluation columns stay empty between eval intervals.
class MetricsWriter {
 public:
  static constexpr const char* kHeader =
      "step,j_e,j_pi,j_gp,policy_entropy,eval_return_mean,eval_return_std";

  MetricsWriter() = default;

  explicit MetricsWriter(const std::string& path) : out_(path) {
    if (!out_) throw contract_error("MetricsWriter: cannot open '" + path + "'");
    out_ << kHeader << "\n";
  }

  void append(const StepMetrics& m) {
    if (!out_.is_open()) return;
    out_ << m.step << ',' << format_double(m.j_e) << ',' << format_double(m.j_pi) << ','
         << format_double(m.j_gp) << ',' << format_double(m.policy_entropy) << ',';
    if (m.has_eval)
      out_ << format_double(m.eval_return_mean) << ',' << format_double(m.eval_return_std);
    else
      out_ << ',';
    out_ << "\n";
  }

  void flush() {
    if (out_.is_open()) out_.flush();
  }

 private:
  std::ofstream out_;
};

/// summary.json: per-seed final returns plus their mean and standard deviation.
inline void write_summary(const std::string& path,
                          const std::vector<std::pair<std::uint64_t, double>>& final_returns,
                          const nlohmann::json& extra = {}) {
  nlohmann::json seeds = nlohmann::json::object();
  double mean = 0.0;
  for (const auto& [seed, ret] : final_returns) {
    seeds[std::to_string(seed)] = ret;
    mean += ret;
  }
  const double n = static_cast<double>(final_returns.size());
  mean = final_returns.empty() ? 0.0 : mean / n;
  double var = 0.0;
  for (const auto& [seed, ret] : final_returns) var += (ret - mean) * (ret - mean);
  const double stddev = final_returns.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;

  nlohmann::json j = {{"final_returns", seeds}, {"mean", mean}, {"std", stddev}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  std::ofstream out(path);
  if (!out) throw contract_error("write_summary: cannot open '" + path + "'");
  out << j.dump(1) << "\n";
}

}  // namespace softdice

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gflow/experiments/config.hpp"
#include "gflow/version.hpp"

namespace gflow::experiments {

/// Process exit codes of a run.
enum ExitCode : int { exit_pass = 0, exit_config = 2, exit_numerical = 3, exit_audit = 4 };

struct AuditRecord {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  ///< how value is compared with threshold, e.g. "<="
};

struct ErrorRecord {
  std::string kind;
  std::string message;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
};

/// Everything a run reports about itself besides its CSV and SVG files.
struct RunManifest {
  std::string version = version_string;
  std::string experiment;
  std::map<std::string, EchoEntry> config;
  nlohmann::ordered_json derived = nlohmann::ordered_json::object();
  std::vector<AuditRecord> audits;
  std::vector<ErrorRecord> errors;
  std::vector<std::string> artifacts;
  double wall_clock_seconds = 0.0;
  int exit_code = exit_pass;

  bool all_audits_pass() const {
    for (const auto& a : audits)
      if (!a.passed) return false;
    return true;
  }

  /// Records value `rel` threshold and returns whether it holds. NaN never passes.
  bool audit(const std::string& name, double value, const std::string& rel, double threshold) {
    bool ok = false;
    if (rel == "<=") ok = value <= threshold;
    else if (rel == "<") ok = value < threshold;
    else if (rel == ">=") ok = value >= threshold;
    else if (rel == ">") ok = value > threshold;
    else throw std::invalid_argument("unknown audit relation '" + rel + "'");
    audits.push_back({name, ok, value, threshold, rel});
    return ok;
  }

  nlohmann::ordered_json to_json() const {
    using nlohmann::ordered_json;
    const auto num = [](double x) -> ordered_json {
      if (std::isfinite(x)) return x;
      return format_real(x);  // JSON has no literal for nan/inf
    };
    ordered_json j;
    j["version"] = version;
    j["experiment"] = experiment;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, e] : config) cfg[k] = {{"value", e.value}, {"source", e.source}};
    j["config"] = cfg;
    j["derived"] = derived;
    ordered_json au = ordered_json::array();
    for (const auto& a : audits)
      au.push_back({{"name", a.name}, {"passed", a.passed}, {"value", num(a.value)}, {"relation", a.relation},
                    {"threshold", num(a.threshold)}});
    j["audits"] = au;
    ordered_json er = ordered_json::array();
    for (const auto& e : errors) er.push_back({{"kind", e.kind}, {"message", e.message}, {"details", e.details}});
    j["errors"] = er;
    j["artifacts"] = artifacts;
    j["exit_code"] = exit_code;
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j;
  }
};

/// Writes to a sibling temporary file and renames it over the target, so readers never observe a
/// half-written file.
inline void write_atomically(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os << text;
    os.flush();
    if (!os) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void save_manifest(const std::filesystem::path& path, const RunManifest& m) {
  write_atomically(path, m.to_json().dump(2) + "\n");
}

} // namespace gflow::experiments

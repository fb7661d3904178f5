// Copyright 2026 The grounder Authors
// SPDX-License-Identifier: Apache-2.0

#include "grounder/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "grounder/error.hpp"
#include "grounder/version.hpp"

namespace grounder {

std::string serialize_manifest(const RunManifest& m) {
  std::ostringstream os;
  os << "# run manifest\n";
  os << "tool_version = " << kVersion << "\n";
  os << "command = " << m.command << "\n";
  for (const auto& d : m.deviations) os << "deviation = " << d << "\n";
  os << m.config.serialize();
  for (const auto& [k, v] : m.extras) os << k << " = " << v << "\n";
  return os.str();
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) {
      throw Error(ErrorCategory::Io, "cannot open manifest for writing: " + tmp.string());
    }
    os << serialize_manifest(m);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    os << "created_utc = " << static_cast<long long>(now) << "\n";
    if (!os) {
      throw Error(ErrorCategory::Io, "failed while writing manifest: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

bool manifests_equal_modulo_timestamp(const std::filesystem::path& a,
                                      const std::filesystem::path& b) {
  auto load = [](const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw Error(ErrorCategory::Io, "cannot open manifest: " + p.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
      if (line.rfind("created_utc", 0) == 0) continue;
      lines.push_back(line);
    }
    return lines;
  };
  return load(a) == load(b);
}

void append_metrics(RunManifest& m, const std::string& prefix, const MetricsReport& r) {
  char buf[64];
  for (const auto& [tau, v] : r.pr_at) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    char key[32];
    std::snprintf(key, sizeof key, "%s_pr@%.1f", prefix.c_str(), tau);
    m.extras.emplace_back(key, buf);
  }
  std::snprintf(buf, sizeof buf, "%.17g", r.mean_iou);
  m.extras.emplace_back(prefix + "_mean_iou", buf);
  std::snprintf(buf, sizeof buf, "%.17g", r.cmu_iou);
  m.extras.emplace_back(prefix + "_cmu_iou", buf);
  m.extras.emplace_back(prefix + "_n_samples", std::to_string(r.n_samples));
}

}  // namespace grounder

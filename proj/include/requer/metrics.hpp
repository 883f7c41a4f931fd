#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

namespace requer::metrics {

// Append-only line-delimited event log. The first line of a fresh file is a
// schema version header. Timestamps are logical (epoch, step) counters so
// deterministic gateways produce byte-identical logs; wall-clock time never
// enters the record.
class MetricsLog {
 public:
  static constexpr const char* kSchema = "requer-metrics/1";

  MetricsLog(const std::string& path, bool append);
  void event(int epoch, int step, const std::string& kind,
             const nlohmann::json& payload);
  void flush() { out_.flush(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace requer::metrics

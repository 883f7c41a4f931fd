#include "requer/metrics.hpp"

#include <filesystem>
#include <stdexcept>

namespace requer::metrics {

MetricsLog::MetricsLog(const std::string& path, bool append) : path_(path) {
  const bool fresh = !append || !std::filesystem::exists(path);
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw std::runtime_error("cannot open metrics log: " + path);
  if (fresh) {
    out_ << nlohmann::json{{"schema", kSchema}}.dump() << '\n';
    out_.flush();
  }
}

void MetricsLog::event(int epoch, int step, const std::string& kind,
                       const nlohmann::json& payload) {
  nlohmann::json line = {
      {"ts", step}, {"epoch", epoch}, {"kind", kind}, {"payload", payload}};
  out_ << line.dump() << '\n';
  out_.flush();
}

}  // namespace requer::metrics

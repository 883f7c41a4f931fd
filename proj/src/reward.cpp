#include "requer/reward.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace requer::reward {

int accuracy_reward(const std::string& predicted_normalized,
                    const std::string& gold_normalized) {
  return predicted_normalized == gold_normalized ? 1 : 0;
}

PerplexityScore conditional_perplexity(
    const std::vector<double>& token_logprobs) {
  if (token_logprobs.empty())
    throw std::invalid_argument("conditional_perplexity: empty logprob list");
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (!std::isfinite(lp))
      throw std::invalid_argument(
          "conditional_perplexity: non-finite logprob");
    sum += lp;
  }
  PerplexityScore score;
  score.token_logprobs = token_logprobs;
  score.token_count = static_cast<int>(token_logprobs.size());
  score.ppl = std::exp(-sum / static_cast<double>(score.token_count));
  return score;
}

double leak_ratio(double ppl_raw, double ppl_refined, double epsilon) {
  if (ppl_raw <= 0.0 || ppl_refined <= 0.0)
    throw std::invalid_argument("leak_ratio: perplexities must be positive");
  if (epsilon <= 0.0)
    throw std::invalid_argument("leak_ratio: epsilon must be positive");
  return ppl_raw / (ppl_refined + epsilon);
}

int leak_penalty(double ratio, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("leak_penalty: tau must be > 0");
  return ratio > tau ? 1 : 0;
}

double composite_reward(int r_acc, int r_leak, double lambda) {
  if (lambda < 0.0)
    throw std::invalid_argument("composite_reward: lambda must be >= 0");
  return static_cast<double>(r_acc) - lambda * static_cast<double>(r_leak);
}

RewardBreakdown make_breakdown(int r_acc, double ppl_raw, double ppl_refined,
                               double epsilon, double tau, double lambda) {
  RewardBreakdown b;
  b.r_acc = r_acc;
  b.ppl_raw = ppl_raw;
  b.ppl_refined = ppl_refined;
  b.ratio = leak_ratio(ppl_raw, ppl_refined, epsilon);
  b.r_leak = leak_penalty(b.ratio, tau);
  b.lambda = lambda;
  b.composite = composite_reward(b.r_acc, b.r_leak, lambda);
  return b;
}

LeakCalibrationReport leak_calibration_sweep(
    const std::vector<LabeledRatio>& labeled, const std::vector<double>& taus) {
  if (labeled.empty())
    throw std::invalid_argument("leak_calibration_sweep: empty corpus");
  if (taus.empty())
    throw std::invalid_argument("leak_calibration_sweep: empty threshold list");
  LeakCalibrationReport report;
  for (double tau : taus) {
    LeakCalibrationRow row;
    row.tau = tau;
    long tp = 0, fp = 0, fn = 0;
    for (const auto& item : labeled) {
      const bool predicted = item.ratio > tau;
      if (predicted && item.is_leak) ++tp;
      if (predicted && !item.is_leak) ++fp;
      if (!predicted && item.is_leak) ++fn;
    }
    row.true_pos = tp;
    row.false_pos = fp;
    row.false_neg = fn;
    // Zero denominators yield metric 0.
    row.precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 0.0;
    row.recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
    row.f1 = (row.precision + row.recall) > 0.0
                 ? 2.0 * row.precision * row.recall /
                       (row.precision + row.recall)
                 : 0.0;
    report.rows.push_back(row);
  }
  return report;
}

std::string format_calibration_table(const LeakCalibrationReport& report) {
  std::ostringstream out;
  out << std::setw(8) << "tau" << std::setw(12) << "precision" << std::setw(10)
      << "recall" << std::setw(10) << "f1" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& row : report.rows) {
    out << std::setw(8) << row.tau << std::setw(12) << row.precision
        << std::setw(10) << row.recall << std::setw(10) << row.f1 << '\n';
  }
  return out.str();
}

}  // namespace requer::reward

#pragma once

#include <string>
#include <vector>

namespace requer::reward {

// Conditional perplexity of a gold answer under some conditioning context,
// reconstructed from the per-token natural-log probabilities the judge
// endpoint reports. This module never tokenizes anything itself.
struct PerplexityScore {
  std::vector<double> token_logprobs;
  int token_count = 0;
  double ppl = 0.0;
};

struct RewardBreakdown {
  int r_acc = 0;        // {0,1}
  double ppl_raw = 0.0;      // PPL(y*|x)
  double ppl_refined = 0.0;  // PPL(y*|x')
  double ratio = 0.0;        // perplexity drop ratio
  int r_leak = 0;       // {0,1}
  double lambda = 0.0;
  double composite = 0.0;  // r_acc - lambda * r_leak
};

struct LeakCalibrationRow {
  double tau = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long true_pos = 0;
  long false_pos = 0;
  long false_neg = 0;
};

struct LeakCalibrationReport {
  std::vector<LeakCalibrationRow> rows;
};

struct LabeledRatio {
  double ratio = 0.0;
  bool is_leak = false;
};

// R_acc = 1 iff the normalized strings match. Callers pass answers already
// normalized; a missing prediction is the empty optional at the call site
// and scores 0 by convention.
int accuracy_reward(const std::string& predicted_normalized,
                    const std::string& gold_normalized);

PerplexityScore conditional_perplexity(const std::vector<double>& token_logprobs);

double leak_ratio(double ppl_raw, double ppl_refined, double epsilon);

// Strict inequality: boundary ties are non-leaks.
int leak_penalty(double ratio, double tau);

double composite_reward(int r_acc, int r_leak, double lambda);

RewardBreakdown make_breakdown(int r_acc, double ppl_raw, double ppl_refined,
                               double epsilon, double tau, double lambda);

LeakCalibrationReport leak_calibration_sweep(
    const std::vector<LabeledRatio>& labeled, const std::vector<double>& taus);

std::string format_calibration_table(const LeakCalibrationReport& report);

}  // namespace requer::reward

#pragma once

#include <string>
#include <vector>

#include "vamark/core/tensor.hpp"
#include "vamark/media/bits.hpp"

namespace vamark {

// Peak signal-to-noise ratio in dB over a [0,1] domain.
double psnr(const Tensor& a, const Tensor& b);

// Structural similarity, 8x8 uniform window per channel, standard constants.
double ssim(const Tensor& a, const Tensor& b);

// Signal-to-noise ratio in dB: 10 log10(sum(ref^2) / sum((ref-x)^2)).
double snr(const std::vector<float>& reference, const std::vector<float>& signal);

struct MaskScores {
  double f1 = 0.0;
  double auc = 0.0;
  double iou = 0.0;
};

// Binary localization scores. `predicted` is thresholded at 0.5; `scores`
// are the real-valued pre-threshold statistics used for the ROC.
// Throws when the ground truth is single-class (AUC undefined).
MaskScores mask_scores(const Tensor& predicted, const Tensor& scores, const Tensor& ground_truth);

// Rank-based (Mann-Whitney) AUC with tie handling.
double auc_score(const std::vector<float>& scores, const std::vector<int>& labels);

// Percentage of matching bits (0..100).
double bit_accuracy(const BitString& decoded, const BitString& expected);

// One evaluated condition of the metric report.
struct MetricRow {
  std::string condition;
  std::string metric;
  double value = 0.0;
};

std::string metrics_to_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> metrics_from_csv(const std::string& csv_text);

}  // namespace vamark

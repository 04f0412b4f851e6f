#include "vamark/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vamark {

double psnr(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "psnr");
  double mse = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

// SSIM over one channel with an 8x8 sliding uniform window, stride 4.
double ssim_channel(const float* a, const float* b, int H, int W) {
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  constexpr int win = 8, stride = 4;
  if (H < win || W < win) throw std::invalid_argument("ssim: image smaller than window");
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + win <= H; y += stride)
    for (int x = 0; x + win <= W; x += stride) {
      double ma = 0, mb = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          ma += a[(y + i) * W + x + j];
          mb += b[(y + i) * W + x + j];
        }
      ma /= win * win;
      mb /= win * win;
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double da = a[(y + i) * W + x + j] - ma;
          const double db = b[(y + i) * W + x + j] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= win * win - 1;
      vb /= win * win - 1;
      cov /= win * win - 1;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "ssim");
  if (a.ndim() < 2) throw std::invalid_argument("ssim: needs at least [H,W]");
  const int W = a.dim(a.ndim() - 1);
  const int H = a.dim(a.ndim() - 2);
  const std::int64_t planes = a.numel() / (static_cast<std::int64_t>(H) * W);
  double total = 0.0;
  for (std::int64_t p = 0; p < planes; ++p)
    total += ssim_channel(a.data() + p * H * W, b.data() + p * H * W, H, W);
  return total / static_cast<double>(planes);
}

double snr(const std::vector<float>& reference, const std::vector<float>& signal) {
  if (reference.size() != signal.size() || reference.empty()) throw std::invalid_argument("snr: length mismatch");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    num += static_cast<double>(reference[i]) * reference[i];
    const double d = static_cast<double>(reference[i]) - signal[i];
    den += d * d;
  }
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  if (num == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num / den);
}

double auc_score(const std::vector<float>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) throw std::invalid_argument("auc: length mismatch");
  std::int64_t pos = 0, neg = 0;
  for (int l : labels) (l ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("auc undefined: ground truth contains a single class");
  // average ranks with tie correction
  std::vector<std::int64_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t i, std::int64_t j) { return scores[static_cast<size_t>(i)] < scores[static_cast<size_t>(j)]; });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() &&
           scores[static_cast<size_t>(order[j + 1])] == scores[static_cast<size_t>(order[i])])
      ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t t = i; t <= j; ++t)
      if (labels[static_cast<size_t>(order[t])]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  return (rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

MaskScores mask_scores(const Tensor& predicted, const Tensor& scores, const Tensor& ground_truth) {
  check_same_shape(predicted, ground_truth, "mask_scores");
  check_same_shape(scores, ground_truth, "mask_scores");
  std::int64_t tp = 0, fp = 0, fn = 0;
  std::vector<float> s(static_cast<size_t>(scores.numel()));
  std::vector<int> l(static_cast<size_t>(scores.numel()));
  for (std::int64_t i = 0; i < ground_truth.numel(); ++i) {
    const bool p = predicted[i] >= 0.5f;
    const bool g = ground_truth[i] >= 0.5f;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
    s[static_cast<size_t>(i)] = scores[i];
    l[static_cast<size_t>(i)] = g ? 1 : 0;
  }
  MaskScores out;
  out.f1 = (2.0 * tp + fp + fn) > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 1.0;
  out.iou = (tp + fp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp + fn) : 1.0;
  out.auc = auc_score(s, l);
  return out;
}

double bit_accuracy(const BitString& decoded, const BitString& expected) {
  return 100.0 * BitString::matched_fraction(decoded, expected);
}

std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  os << "condition,metric,value\n";
  for (const auto& r : rows) os << r.condition << "," << r.metric << "," << r.value << "\n";
  return os.str();
}

std::vector<MetricRow> metrics_from_csv(const std::string& csv_text) {
  std::istringstream is(csv_text);
  std::string line;
  std::vector<MetricRow> rows;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw std::runtime_error("malformed metrics CSV row: " + line);
    rows.push_back({line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), std::stod(line.substr(c2 + 1))});
  }
  return rows;
}

}  // namespace vamark

#include "genesis/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "genesis/errors.hpp"
#include "genesis/rng.hpp"

namespace genesis::metrics {

double iou(const Mask& a, const Mask& b) {
  if (a.bits.size() != b.bits.size()) throw Error("IOU of masks with different shapes");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t p = 0; p < a.bits.size(); ++p) {
    const bool x = a.bits[p] != 0;
    const bool y = b.bits[p] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

double best_iou(const Mask& r, const MaskSet& predicted) {
  double best = 0.0;
  for (const auto& p : predicted) best = std::max(best, iou(r, p));
  return best;
}

}  // namespace

double segmentation_covering(const MaskSet& ground_truth, const MaskSet& predicted) {
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& r : ground_truth) {
    const auto area = r.area();
    if (area == 0) continue;
    weighted += static_cast<double>(area) * best_iou(r, predicted);
    total += area;
  }
  if (total == 0) throw Error("segmentation covering needs at least one non-empty ground-truth mask");
  return weighted / static_cast<double>(total);
}

double mean_segmentation_covering(const MaskSet& ground_truth, const MaskSet& predicted) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : ground_truth) {
    if (r.empty()) continue;
    sum += best_iou(r, predicted);
    ++count;
  }
  if (count == 0) throw Error("segmentation covering needs at least one non-empty ground-truth mask");
  return sum / static_cast<double>(count);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error("ARI of labelings with different lengths");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double m) { return 0.5 * m * (m - 1.0); };
  double index = 0.0;
  for (const auto& [_, m] : cells) index += pairs(m);
  double sum_rows = 0.0;
  for (const auto& [_, m] : rows) sum_rows += pairs(m);
  double sum_cols = 0.0;
  for (const auto& [_, m] : cols) sum_cols += pairs(m);
  const double expected = sum_rows * sum_cols / pairs(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

double foreground_ari(const MaskSet& gt_instances, const LabelMap& predicted) {
  std::vector<int> truth;
  std::vector<int> pred;
  for (std::size_t p = 0; p < predicted.labels.size(); ++p) {
    for (std::size_t k = 0; k < gt_instances.size(); ++k) {
      if (gt_instances[k].bits.size() != predicted.labels.size()) throw Error("ARI: mask and label map shapes differ");
      if (gt_instances[k].bits[p]) {
        truth.push_back(static_cast<int>(k));
        pred.push_back(predicted.labels[p]);
        break;
      }
    }
  }
  if (truth.empty()) throw Error("foreground ARI: the image has no ground-truth foreground pixels");
  return adjusted_rand_index(truth, pred);
}

LabelMap argmax_labels(const torch::Tensor& pi) {
  const auto arg = pi.argmax(0).to(torch::kInt64).contiguous();
  LabelMap map(static_cast<int>(pi.size(1)), static_cast<int>(pi.size(2)));
  const auto* data = arg.data_ptr<std::int64_t>();
  for (std::size_t p = 0; p < map.labels.size(); ++p) map.labels[p] = static_cast<int>(data[p]);
  return map;
}

MaskSet predicted_masks(const torch::Tensor& pi, PredictedMasks mode) {
  const auto k = static_cast<int>(pi.size(0));
  MaskSet masks;
  if (mode == PredictedMasks::argmax) {
    const LabelMap labels = argmax_labels(pi);
    for (int slot = 0; slot < k; ++slot) masks.push_back(labels.mask_of(slot));
    return masks;
  }
  const auto above = (pi > 0.5).to(torch::kUInt8).contiguous();
  const int h = static_cast<int>(pi.size(1));
  const int w = static_cast<int>(pi.size(2));
  for (int slot = 0; slot < k; ++slot) {
    Mask m(h, w);
    const auto* data = above[slot].data_ptr<std::uint8_t>();
    std::copy(data, data + m.bits.size(), m.bits.begin());
    masks.push_back(std::move(m));
  }
  return masks;
}

SegScores score_image(const MaskSet& gt_instances, const LabelMap& predicted_labels, const MaskSet& predicted) {
  return {foreground_ari(gt_instances, predicted_labels), segmentation_covering(gt_instances, predicted),
          mean_segmentation_covering(gt_instances, predicted)};
}

Summary summarize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

nlohmann::json EvalReport::to_json() const {
  auto summary = [](const Summary& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.std}}; };
  nlohmann::json images = nlohmann::json::array();
  for (const auto& s : per_image) {
    images.push_back({{"model", s.model}, {"index", s.index}, {"ari", s.scores.ari}, {"sc", s.scores.sc},
                      {"msc", s.scores.msc}});
  }
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : per_model) {
    models.push_back({{"model", m.model}, {"ari", summary(m.ari)}, {"sc", summary(m.sc)}, {"msc", summary(m.msc)}});
  }
  return {{"per_image", images},
          {"per_model", models},
          {"aggregate", {{"ari", summary(ari)}, {"sc", summary(sc)}, {"msc", summary(msc)}}}};
}

EvalReport evaluate_segmentation(const std::vector<NamedModel>& models, const data::SplitData& split,
                                 std::int64_t n_images, std::uint64_t seed, PredictedMasks mode,
                                 std::int64_t batch_size) {
  const auto available = static_cast<std::int64_t>(split.size());
  if (n_images < 1 || n_images > available) throw Error("n_images must lie in [1, split size]");
  std::vector<std::int64_t> order(static_cast<std::size_t>(available));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::int64_t i = available - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  order.resize(static_cast<std::size_t>(n_images));

  EvalReport report;
  std::vector<double> model_ari, model_sc, model_msc;
  for (const auto& named : models) {
    auto& m = *named.model;
    m.eval();
    torch::NoGradGuard no_grad;
    std::vector<double> ari, sc, msc;
    for (std::int64_t start = 0; start < n_images; start += batch_size) {
      const auto end = std::min(n_images, start + batch_size);
      const std::vector<std::int64_t> idx(order.begin() + start, order.begin() + end);
      const auto x = split.image_batch(idx).to(m.options().dtype());
      const auto pi = m.decompose(x).mix.pi();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto gt = split.instance_masks(idx[i]);
        const auto slot_pi = pi[static_cast<std::int64_t>(i)];
        const SegScores s = score_image(gt, argmax_labels(slot_pi), predicted_masks(slot_pi, mode));
        report.per_image.push_back({named.name, idx[i], s});
        ari.push_back(s.ari);
        sc.push_back(s.sc);
        msc.push_back(s.msc);
      }
    }
    ModelScore ms{named.name, summarize(ari), summarize(sc), summarize(msc)};
    model_ari.push_back(ms.ari.mean);
    model_sc.push_back(ms.sc.mean);
    model_msc.push_back(ms.msc.mean);
    report.per_model.push_back(ms);
  }
  report.ari = summarize(model_ari);
  report.sc = summarize(model_sc);
  report.msc = summarize(model_msc);
  return report;
}

}  // namespace genesis::metrics

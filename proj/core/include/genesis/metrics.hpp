#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genesis/dataset.hpp"
#include "genesis/mask.hpp"
#include "genesis/model.hpp"

namespace genesis::metrics {

/// A set of binary masks. Ground-truth sets are pairwise disjoint; predicted
/// sets may overlap. Empty masks are allowed and ignored where noted.
using MaskSet = std::vector<Mask>;

/// |a∩b| / |a∪b|, and 0 when both masks are empty.
double iou(const Mask& a, const Mask& b);

/// Σ_R |R|·max_{R'} IOU(R,R') / Σ_R |R| over non-empty ground-truth masks R.
/// Throws Error when every ground-truth mask is empty.
double segmentation_covering(const MaskSet& ground_truth, const MaskSet& predicted);

/// Unweighted mean over non-empty ground-truth masks of max_{R'} IOU(R,R').
double mean_segmentation_covering(const MaskSet& ground_truth, const MaskSet& predicted);

/// Adjusted Rand index of two labelings of the same points, from their
/// contingency table. Returns 1 when the chance-corrected denominator
/// vanishes (both sides a single cluster, or both all singletons).
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

/// ARI restricted to pixels covered by some ground-truth foreground instance.
/// Throws Error when no such pixel exists.
double foreground_ari(const MaskSet& gt_instances, const LabelMap& predicted);

enum class PredictedMasks { argmax, threshold };

/// Per-slot predicted masks: argmax_k π_k == slot, or π_k > 0.5.
MaskSet predicted_masks(const torch::Tensor& pi, PredictedMasks mode);
/// argmax_k π_k as a label map; `pi` is [K, H, W].
LabelMap argmax_labels(const torch::Tensor& pi);

struct SegScores {
  double ari = 0.0;
  double sc = 0.0;
  double msc = 0.0;
};

SegScores score_image(const MaskSet& gt_instances, const LabelMap& predicted_labels, const MaskSet& predicted);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

Summary summarize(const std::vector<double>& values);

struct ImageScore {
  std::string model;
  std::int64_t index = 0;
  SegScores scores;
};

struct ModelScore {
  std::string model;
  Summary ari;
  Summary sc;
  Summary msc;
};

struct EvalReport {
  std::vector<ImageScore> per_image;
  std::vector<ModelScore> per_model;
  Summary ari;  // mean ± std of the per-model means (across seeds)
  Summary sc;
  Summary msc;

  nlohmann::json to_json() const;
};

struct NamedModel {
  std::string name;
  std::shared_ptr<model::GenerativeModel> model;
};

/// Decomposes `n_images` records drawn without replacement (seeded) and
/// scores each model's argmax-π segmentation against the instance masks.
EvalReport evaluate_segmentation(const std::vector<NamedModel>& models, const data::SplitData& split,
                                 std::int64_t n_images, std::uint64_t seed,
                                 PredictedMasks mode = PredictedMasks::argmax, std::int64_t batch_size = 32);

}  // namespace genesis::metrics

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "srnam/image_tensor.hpp"

namespace srnam::metrics {

/// (N, H, W) non-negative landmark heatmaps, float64.
class HeatmapSet {
 public:
  explicit HeatmapSet(torch::Tensor maps);
  const torch::Tensor& maps() const noexcept { return maps_; }
  int64_t landmarks() const noexcept { return maps_.size(0); }

 private:
  torch::Tensor maps_;
};

/// (1/N) sum_n sum_ij (gen - ref)^2.
double heatmap_metric(const HeatmapSet& gen, const HeatmapSet& ref);

struct Landmark {
  double x = 0;  // column
  double y = 0;  // row
};

/// One unnormalized Gaussian per landmark, value 1 at the landmark pixel.
HeatmapSet synth_heatmaps(const std::vector<Landmark>& landmarks, double sigma, int64_t size);

class LandmarkBackend {
 public:
  virtual ~LandmarkBackend() = default;
  virtual HeatmapSet heatmaps(const ImageTensor& image) const = 0;
  virtual std::string id() const = 0;
};

/// Stand-in for a learned localizer: landmarks are darkness-weighted
/// centroids of fixed face regions (two eyes, nose, mouth) of the synthetic
/// face layout, rendered as Gaussian heatmaps.
class SyntheticLandmarkBackend final : public LandmarkBackend {
 public:
  explicit SyntheticLandmarkBackend(double sigma = 1.5) : sigma_(sigma) {}
  HeatmapSet heatmaps(const ImageTensor& image) const override;
  std::vector<Landmark> locate(const ImageTensor& image) const;
  std::string id() const override { return "synthetic"; }

 private:
  double sigma_;
};

std::unique_ptr<LandmarkBackend> make_landmark_backend(const std::string& id, double sigma);

/// Mean L1 distance over all unordered pairs; needs at least two images.
double solution_diversity(const std::vector<ImageTensor>& solutions);

struct EvalRow {
  std::string image_id;
  int64_t solution = 0;
  double heatmap_metric = 0;
  std::optional<double> objective;
  std::optional<double> diversity;  // empty for single-solution sets
};

void write_eval_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path);

}  // namespace srnam::metrics

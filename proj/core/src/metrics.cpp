#include "srnam/metrics.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "srnam/checkpoint.hpp"
#include "srnam/errors.hpp"

namespace srnam::metrics {

HeatmapSet::HeatmapSet(torch::Tensor maps) : maps_(maps.detach().to(torch::kDouble).contiguous()) {
  if (maps_.dim() != 3 || maps_.size(0) < 1) {
    throw ShapeError("heatmaps must have shape (N >= 1, H, W), got " + c10::str(maps_.sizes()));
  }
  if (!torch::isfinite(maps_).all().item<bool>() || (maps_ < 0).any().item<bool>()) {
    throw ValueError("heatmaps must be finite and non-negative");
  }
}

double heatmap_metric(const HeatmapSet& gen, const HeatmapSet& ref) {
  if (gen.maps().sizes() != ref.maps().sizes()) {
    throw ShapeError("heatmap sets differ in shape: " + c10::str(gen.maps().sizes()) + " vs " +
                     c10::str(ref.maps().sizes()));
  }
  return (gen.maps() - ref.maps()).pow(2).sum().item<double>() / static_cast<double>(gen.landmarks());
}

HeatmapSet synth_heatmaps(const std::vector<Landmark>& landmarks, double sigma, int64_t size) {
  if (landmarks.empty()) throw ValueError("synth_heatmaps needs at least one landmark");
  if (!(sigma > 0.0)) throw ValueError("heatmap sigma must be positive");
  if (size < 1) throw ValueError("heatmap size must be positive");
  const auto limit = static_cast<double>(size - 1);
  auto rows = torch::arange(size, torch::kDouble).view({size, 1});
  auto cols = torch::arange(size, torch::kDouble).view({1, size});
  std::vector<torch::Tensor> maps;
  maps.reserve(landmarks.size());
  for (const auto& lm : landmarks) {
    if (!(lm.x >= 0.0 && lm.x <= limit && lm.y >= 0.0 && lm.y <= limit)) {
      throw ValueError("landmark (" + std::to_string(lm.x) + ", " + std::to_string(lm.y) +
                       ") lies outside the " + std::to_string(size) + "px image");
    }
    const auto d2 = (rows - lm.y).pow(2) + (cols - lm.x).pow(2);
    maps.push_back(torch::exp(-d2 / (2.0 * sigma * sigma)));
  }
  return HeatmapSet(torch::stack(maps));
}

namespace {

struct Region {
  double x0, x1, y0, y1;  // fractions of the image side
};

// Eye, eye, nose, mouth windows of the synthetic face layout.
constexpr std::array<Region, 4> kRegions = {{
    {0.25, 0.50, 0.30, 0.55},
    {0.50, 0.75, 0.30, 0.55},
    {0.40, 0.60, 0.50, 0.62},
    {0.30, 0.70, 0.60, 0.80},
}};

}  // namespace

std::vector<Landmark> SyntheticLandmarkBackend::locate(const ImageTensor& image) const {
  const int64_t n = image.side();
  const auto lum = (image.tensor().mean(0) + 1.0) * 0.5;
  const auto darkness = (1.0 - lum).clamp(0.0, 1.0).pow(4).contiguous();
  const auto* w = darkness.data_ptr<double>();
  std::vector<Landmark> out;
  for (const auto& r : kRegions) {
    const auto x0 = static_cast<int64_t>(std::floor(r.x0 * n));
    const auto x1 = std::max(x0 + 1, static_cast<int64_t>(std::floor(r.x1 * n)));
    const auto y0 = static_cast<int64_t>(std::floor(r.y0 * n));
    const auto y1 = std::max(y0 + 1, static_cast<int64_t>(std::floor(r.y1 * n)));
    double sw = 0, sx = 0, sy = 0;
    for (int64_t y = y0; y < y1; ++y) {
      for (int64_t x = x0; x < x1; ++x) {
        const double v = w[y * n + x];
        sw += v;
        sx += v * static_cast<double>(x);
        sy += v * static_cast<double>(y);
      }
    }
    if (sw > 1e-12) {
      out.push_back({sx / sw, sy / sw});
    } else {
      out.push_back({0.5 * static_cast<double>(x0 + x1 - 1), 0.5 * static_cast<double>(y0 + y1 - 1)});
    }
  }
  return out;
}

HeatmapSet SyntheticLandmarkBackend::heatmaps(const ImageTensor& image) const {
  return synth_heatmaps(locate(image), sigma_, image.side());
}

std::unique_ptr<LandmarkBackend> make_landmark_backend(const std::string& id, double sigma) {
  if (id == "synthetic") return std::make_unique<SyntheticLandmarkBackend>(sigma);
  throw ValueError("unknown landmark backend '" + id + "'");
}

double solution_diversity(const std::vector<ImageTensor>& solutions) {
  if (solutions.size() < 2) {
    throw ValueError("solution_diversity needs at least two solutions");
  }
  double total = 0;
  size_t pairs = 0;
  for (size_t i = 0; i < solutions.size(); ++i) {
    for (size_t j = i + 1; j < solutions.size(); ++j) {
      if (solutions[i].side() != solutions[j].side()) {
        throw ShapeError("solutions differ in resolution");
      }
      total += (solutions[i].tensor() - solutions[j].tensor()).abs().mean().item<double>();
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

void write_eval_csv(const std::vector<EvalRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "image_id,solution,heatmap_metric,objective,diversity\n";
  for (const auto& r : rows) {
    out << r.image_id << ',' << r.solution << ',' << checkpoint::format_real(r.heatmap_metric) << ','
        << (r.objective ? checkpoint::format_real(*r.objective) : "") << ','
        << (r.diversity ? checkpoint::format_real(*r.diversity) : "") << '\n';
  }
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace srnam::metrics

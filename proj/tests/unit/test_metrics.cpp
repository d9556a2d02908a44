#include <algorithm>

#include <gtest/gtest.h>

#include "srnam/errors.hpp"
#include "srnam/imagedata.hpp"
#include "srnam/metrics.hpp"
#include "testing.hpp"

using namespace srnam;
using namespace srnam::metrics;
using srnam::testing::random_image;
using srnam::testing::uniform;

namespace {

HeatmapSet random_set(int64_t n, int64_t side, uint64_t seed) { return HeatmapSet(uniform({n, side, side}, seed, 0, 1)); }

double double_loop_metric(const torch::Tensor& a, const torch::Tensor& b) {
  const auto ac = a.contiguous();
  const auto bc = b.contiguous();
  const double* pa = ac.data_ptr<double>();
  const double* pb = bc.data_ptr<double>();
  const int64_t n = a.size(0), h = a.size(1), w = a.size(2);
  double total = 0;
  for (int64_t k = 0; k < n; ++k) {
    for (int64_t i = 0; i < h; ++i) {
      for (int64_t j = 0; j < w; ++j) {
        const int64_t idx = (k * h + i) * w + j;
        total += (pa[idx] - pb[idx]) * (pa[idx] - pb[idx]);
      }
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST(HeatmapMetric, IdenticalIsZero) {
  const auto a = random_set(5, 16, 1);
  EXPECT_EQ(heatmap_metric(a, a), 0.0);
}

TEST(HeatmapMetric, ConstantOffsetHandCase) {
  const HeatmapSet ref(torch::zeros({1, 2, 2}, torch::kDouble));
  const HeatmapSet gen(torch::ones({1, 2, 2}, torch::kDouble));
  EXPECT_NEAR(heatmap_metric(gen, ref), 4.0, 1e-9);
}

TEST(HeatmapMetric, MatchesDoubleLoop) {
  for (uint64_t s = 0; s < 5; ++s) {
    const auto a = random_set(3 + static_cast<int64_t>(s), 12, 10 + s);
    const auto b = random_set(3 + static_cast<int64_t>(s), 12, 20 + s);
    EXPECT_NEAR(heatmap_metric(a, b), double_loop_metric(a.maps(), b.maps()), 1e-12);
  }
}

TEST(HeatmapMetric, SymmetricAndQuadraticInScale) {
  const auto a = random_set(4, 8, 2);
  const auto b = random_set(4, 8, 3);
  EXPECT_DOUBLE_EQ(heatmap_metric(a, b), heatmap_metric(b, a));
  for (double c : {0.5, 2.0, 3.0}) {
    const HeatmapSet ca(c * a.maps());
    const HeatmapSet cb(c * b.maps());
    EXPECT_NEAR(heatmap_metric(ca, cb), c * c * heatmap_metric(a, b), 1e-10);
  }
}

TEST(HeatmapMetric, DimensionMismatch) {
  EXPECT_THROW(heatmap_metric(random_set(4, 8, 1), random_set(3, 8, 1)), ShapeError);
  EXPECT_THROW(heatmap_metric(random_set(4, 8, 1), random_set(4, 16, 1)), ShapeError);
}

TEST(HeatmapSetType, Invariants) {
  EXPECT_THROW(HeatmapSet(torch::zeros({8, 8}, torch::kDouble)), ShapeError);
  EXPECT_THROW(HeatmapSet(torch::zeros({0, 8, 8}, torch::kDouble)), ShapeError);
  EXPECT_THROW(HeatmapSet(torch::full({1, 2, 2}, -0.1, torch::kDouble)), ValueError);
  EXPECT_THROW(HeatmapSet(torch::full({1, 2, 2}, NAN, torch::kDouble)), ValueError);
}

TEST(SynthHeatmaps, PeakAtLandmark) {
  for (double sigma : {0.5, 1.5, 4.0}) {
    const auto set = synth_heatmaps({{8, 8}}, sigma, 16);
    const auto flat = set.maps()[0].flatten();
    const int64_t arg = flat.argmax().item<int64_t>();
    EXPECT_EQ(arg / 16, 8);
    EXPECT_EQ(arg % 16, 8);
    EXPECT_DOUBLE_EQ(flat.max().item<double>(), 1.0);
  }
}

TEST(SynthHeatmaps, XIsColumnYIsRow) {
  const auto set = synth_heatmaps({{3, 10}}, 1.0, 16);
  EXPECT_DOUBLE_EQ(set.maps()[0][10][3].item<double>(), 1.0);
  // One pixel away along a row: exp(-1 / 2).
  EXPECT_NEAR(set.maps()[0][10][4].item<double>(), std::exp(-0.5), 1e-15);
}

TEST(SynthHeatmaps, OneMapPerLandmark) {
  const std::vector<Landmark> lms = {{1, 2}, {5, 5}, {10, 3}, {15, 15}};
  const auto set = synth_heatmaps(lms, 1.5, 16);
  EXPECT_EQ(set.landmarks(), 4);
  EXPECT_EQ(heatmap_metric(set, synth_heatmaps(lms, 1.5, 16)), 0.0);
}

TEST(SynthHeatmaps, RejectsBadInput) {
  EXPECT_THROW(synth_heatmaps({{16, 4}}, 1.0, 16), ValueError);
  EXPECT_THROW(synth_heatmaps({{4, -1}}, 1.0, 16), ValueError);
  EXPECT_THROW(synth_heatmaps({{4, 4}}, 0.0, 16), ValueError);
  EXPECT_THROW(synth_heatmaps({}, 1.0, 16), ValueError);
}

TEST(SyntheticBackend, DeterministicAndZeroOnSameImage) {
  const auto backend = make_landmark_backend("synthetic", 1.5);
  EXPECT_EQ(backend->id(), "synthetic");
  const auto faces = imagedata::synth_dataset(4, 64, 9);
  for (size_t i = 0; i < faces.size(); ++i) {
    const auto a = backend->heatmaps(faces.image(i));
    EXPECT_EQ(a.landmarks(), 4);
    EXPECT_EQ(a.maps().size(-1), 64);
    EXPECT_EQ(heatmap_metric(a, backend->heatmaps(faces.image(i))), 0.0);
  }
  EXPECT_GT(heatmap_metric(backend->heatmaps(faces.image(0)), backend->heatmaps(faces.image(1))), 0.0);
  EXPECT_THROW(make_landmark_backend("fan", 1.5), ValueError);
}

TEST(SyntheticBackend, LandmarksLieInsideTheirRegions) {
  SyntheticLandmarkBackend backend;
  const auto faces = imagedata::synth_dataset(8, 64, 3);
  for (size_t i = 0; i < faces.size(); ++i) {
    const auto lms = backend.locate(faces.image(i));
    ASSERT_EQ(lms.size(), 4u);
    EXPECT_LT(lms[0].x, lms[1].x);  // left eye, right eye
    EXPECT_LT(lms[0].y, lms[3].y);  // eyes above the mouth
  }
}

TEST(SolutionDiversity, IdenticalIsZero) {
  const auto a = random_image(16, 1);
  EXPECT_EQ(solution_diversity({a, a, a, a}), 0.0);
}

TEST(SolutionDiversity, ConstantOffset) {
  const ImageTensor a(torch::full({3, 16, 16}, -0.25, torch::kDouble));
  const ImageTensor b(torch::full({3, 16, 16}, 0.25, torch::kDouble));
  EXPECT_NEAR(solution_diversity({a, b}), 0.5, 1e-15);
}

TEST(SolutionDiversity, PermutationInvariantAndPairwiseMean) {
  std::vector<ImageTensor> sols;
  for (uint64_t s = 0; s < 4; ++s) sols.push_back(random_image(16, 30 + s));
  double expected = 0;
  for (size_t i = 0; i < sols.size(); ++i) {
    for (size_t j = i + 1; j < sols.size(); ++j) {
      expected += (sols[i].tensor() - sols[j].tensor()).abs().mean().item<double>();
    }
  }
  expected /= 6.0;
  const double base = solution_diversity(sols);
  EXPECT_NEAR(base, expected, 1e-12);
  std::vector<size_t> order = {0, 1, 2, 3};
  while (std::next_permutation(order.begin(), order.end())) {
    std::vector<ImageTensor> permuted;
    for (auto i : order) permuted.push_back(sols[i]);
    EXPECT_NEAR(solution_diversity(permuted), base, 1e-12);
  }
}

TEST(SolutionDiversity, NeedsTwoEqualShapes) {
  EXPECT_THROW(solution_diversity({random_image(16, 1)}), ValueError);
  EXPECT_THROW(solution_diversity({}), ValueError);
  EXPECT_THROW(solution_diversity({random_image(16, 1), random_image(64, 1)}), ShapeError);
}

TEST(EvalCsv, WritesEmptyCellsForMissingValues) {
  srnam::testing::TempDir dir;
  std::vector<EvalRow> rows = {{"face0", 0, 0.25, 0.5, 0.125}, {"face1", 0, 1.0, std::nullopt, std::nullopt}};
  write_eval_csv(rows, dir / "eval.csv");
  EXPECT_EQ(srnam::testing::read_file(dir / "eval.csv"),
            "image_id,solution,heatmap_metric,objective,diversity\n"
            "face0,0,0.25,0.5,0.125\n"
            "face1,0,1,,\n");
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "srnam/image_tensor.hpp"

namespace srnam::imagedata {

enum class Role { HR, LR };

const char* to_string(Role role) noexcept;
Role role_from_string(const std::string& text);

/// Side length a dataset of the given role must have (64 for HR, 16 for LR).
int64_t role_resolution(Role role) noexcept;

/// Parameters of one procedurally generated face.
struct SyntheticFace {
  uint64_t seed = 0;
  uint64_t index = 0;
};

struct ImageRecord {
  std::string id;
  std::variant<std::filesystem::path, SyntheticFace> source;
  int64_t resolution = 0;
};

/// Ordered, immutable collection of same-resolution images.
class Dataset {
 public:
  /// Validates unique ids and that every record matches the role resolution.
  Dataset(Role role, std::vector<ImageRecord> items);

  Role role() const noexcept { return role_; }
  int64_t resolution() const noexcept { return role_resolution(role_); }
  size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const std::vector<ImageRecord>& items() const noexcept { return items_; }

  /// Decodes (or renders) item `index`.
  ImageTensor image(size_t index) const;

  /// Stacks the given items into a (B, 3, S, S) float64 tensor.
  torch::Tensor stack(const std::vector<size_t>& indices) const;

 private:
  Role role_;
  std::vector<ImageRecord> items_;
};

/// Parses a JSON-lines manifest. Relative image paths are resolved against
/// the manifest's directory.
Dataset load_manifest(const std::filesystem::path& path);

/// Writes every image of `dataset` as `<id>.png` under `dir` along with a
/// `manifest.jsonl` that load_manifest reads back. Returns the manifest path.
std::filesystem::path export_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Procedural face-like images: an ellipse head, two eye blobs and a mouth
/// bar with randomized pose, colours and illumination. Resolution 64 yields
/// clean HR faces; resolution 16 yields degraded LR faces (blur, decimation,
/// colour cast and sensor noise). Pure function of its arguments.
Dataset synth_dataset(size_t count, int64_t resolution, uint64_t seed);

/// Renders a single synthetic face. Exposed for tests and tools.
ImageTensor render_synthetic_face(const SyntheticFace& face, int64_t resolution);

struct Batch {
  std::vector<size_t> indices;
  std::vector<std::string> ids;
  torch::Tensor images;  // (B, 3, S, S) float64
};

/// Seeded epoch iterator. Each epoch is a fresh permutation of the dataset
/// split into `batch_size` chunks; the short final chunk is kept.
///
/// Single consumer. The sequence of batches is a pure function of
/// (dataset, batch_size, seed).
class BatchStream {
 public:
  BatchStream(Dataset source, size_t batch_size, uint64_t seed);

  /// Next batch of the current epoch, or nullopt once the epoch is exhausted.
  /// The following call starts the next epoch.
  std::optional<Batch> next();

  /// Like next() but rolls over into the next epoch transparently.
  Batch next_wrapping();

  /// Index lists of one epoch without decoding any image.
  std::vector<std::vector<size_t>> epoch_plan(uint64_t epoch) const;

  uint64_t epoch() const noexcept { return epoch_; }
  size_t batch_size() const noexcept { return batch_size_; }
  size_t batches_per_epoch() const noexcept;

 private:
  Dataset source_;
  size_t batch_size_;
  uint64_t seed_;
  uint64_t epoch_ = 0;
  std::vector<std::vector<size_t>> plan_;
  size_t cursor_ = 0;
};

BatchStream batch_iter(const Dataset& dataset, size_t batch_size, uint64_t seed);

}  // namespace srnam::imagedata

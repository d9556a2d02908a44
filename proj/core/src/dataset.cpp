#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "srnam/errors.hpp"
#include "srnam/imagedata.hpp"
#include "srnam/png_io.hpp"
#include "srnam/rng.hpp"

namespace srnam::imagedata {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(Role role) noexcept { return role == Role::HR ? "HR" : "LR"; }

Role role_from_string(const std::string& text) {
  if (text == "HR") return Role::HR;
  if (text == "LR") return Role::LR;
  throw DatasetError("unknown dataset role '" + text + "'");
}

int64_t role_resolution(Role role) noexcept { return role == Role::HR ? kHrSide : kLrSide; }

Dataset::Dataset(Role role, std::vector<ImageRecord> items) : role_(role), items_(std::move(items)) {
  std::unordered_set<std::string> seen;
  for (const auto& item : items_) {
    if (!seen.insert(item.id).second) {
      throw DatasetError("duplicate image id '" + item.id + "'");
    }
    if (item.resolution != resolution()) {
      throw DatasetError("resolution mismatch: image '" + item.id + "' is " +
                         std::to_string(item.resolution) + "px but role " + to_string(role_) +
                         " requires " + std::to_string(resolution()) + "px");
    }
  }
}

ImageTensor Dataset::image(size_t index) const {
  const auto& item = items_.at(index);
  if (const auto* face = std::get_if<SyntheticFace>(&item.source)) {
    return render_synthetic_face(*face, item.resolution);
  }
  const auto& path = std::get<fs::path>(item.source);
  auto img = normalize(read_png(path));
  if (img.side() != item.resolution) {
    throw DatasetError("resolution mismatch: " + path.string() + " is " + std::to_string(img.side()) + "px");
  }
  return img;
}

torch::Tensor Dataset::stack(const std::vector<size_t>& indices) const {
  std::vector<torch::Tensor> images;
  images.reserve(indices.size());
  for (size_t i : indices) images.push_back(image(i).tensor());
  return torch::stack(images);
}

Dataset load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DatasetError("cannot open manifest " + path.string());
  }
  std::string line;
  size_t line_no = 0;
  auto parse = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw DatasetError(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
  };
  std::optional<Role> role;
  std::vector<ImageRecord> items;
  const fs::path base = path.parent_path();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json record = parse(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!role) {
      if (!record.is_object() || !record.contains("role") || !record.contains("resolution") ||
          !record["role"].is_string() || !record["resolution"].is_number_integer()) {
        throw DatasetError(where + ": header must be {\"role\": ..., \"resolution\": ...}");
      }
      role = role_from_string(record["role"].get<std::string>());
      const auto declared = record["resolution"].get<int64_t>();
      if (declared != role_resolution(*role)) {
        throw DatasetError(where + ": resolution mismatch: role " + to_string(*role) + " requires " +
                           std::to_string(role_resolution(*role)) + "px, header declares " +
                           std::to_string(declared));
      }
      continue;
    }
    if (!record.is_object() || !record.contains("id") || !record.contains("path") ||
        !record["id"].is_string() || !record["path"].is_string()) {
      throw DatasetError(where + ": malformed record, expected {\"id\": str, \"path\": str}");
    }
    fs::path image_path = record["path"].get<std::string>();
    if (image_path.is_relative()) image_path = base / image_path;
    const auto [h, w] = png_size(image_path);
    if (h != w) {
      throw DatasetError(where + ": image " + image_path.string() + " is not square");
    }
    items.push_back({record["id"].get<std::string>(), image_path, h});
  }
  if (!role) {
    throw DatasetError(path.string() + ": missing header line");
  }
  return Dataset(*role, std::move(items));
}

fs::path export_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest);
  out << json{{"role", to_string(dataset.role())}, {"resolution", dataset.resolution()}}.dump() << '\n';
  for (size_t i = 0; i < dataset.size(); ++i) {
    const auto& id = dataset.items()[i].id;
    const std::string file = id + ".png";
    write_png(dir / file, denormalize(dataset.image(i)));
    out << json{{"id", id}, {"path", file}}.dump() << '\n';
  }
  if (!out) {
    throw DatasetError("cannot write " + manifest.string());
  }
  return manifest;
}

Dataset synth_dataset(size_t count, int64_t resolution, uint64_t seed) {
  if (resolution != kHrSide && resolution != kLrSide) {
    throw ValueError("synthetic datasets support resolution 16 or 64, got " + std::to_string(resolution));
  }
  const Role role = resolution == kHrSide ? Role::HR : Role::LR;
  std::vector<ImageRecord> items;
  items.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s%05zu", role == Role::HR ? "hr" : "lr", i);
    items.push_back({id, SyntheticFace{seed, i}, resolution});
  }
  return Dataset(role, std::move(items));
}

BatchStream::BatchStream(Dataset source, size_t batch_size, uint64_t seed)
    : source_(std::move(source)), batch_size_(batch_size), seed_(seed) {
  if (batch_size_ == 0) {
    throw ValueError("batch size must be positive");
  }
  if (source_.empty()) {
    throw DatasetError("cannot iterate over an empty dataset");
  }
  plan_ = epoch_plan(0);
}

size_t BatchStream::batches_per_epoch() const noexcept {
  return (source_.size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<size_t>> BatchStream::epoch_plan(uint64_t epoch) const {
  std::vector<size_t> order(source_.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(mix_seed(seed_, epoch));
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
  std::vector<std::vector<size_t>> plan;
  for (size_t start = 0; start < order.size(); start += batch_size_) {
    const size_t end = std::min(order.size(), start + batch_size_);
    plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                      order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return plan;
}

std::optional<Batch> BatchStream::next() {
  if (cursor_ == plan_.size()) {
    ++epoch_;
    plan_ = epoch_plan(epoch_);
    cursor_ = 0;
    return std::nullopt;
  }
  Batch batch;
  batch.indices = plan_[cursor_++];
  for (size_t i : batch.indices) batch.ids.push_back(source_.items()[i].id);
  batch.images = source_.stack(batch.indices);
  return batch;
}

Batch BatchStream::next_wrapping() {
  if (auto batch = next()) return std::move(*batch);
  return std::move(*next());
}

BatchStream batch_iter(const Dataset& dataset, size_t batch_size, uint64_t seed) {
  return BatchStream(dataset, batch_size, seed);
}

}  // namespace srnam::imagedata

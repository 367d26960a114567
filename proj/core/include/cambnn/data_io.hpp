#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cambnn/bnn.hpp"
#include "cambnn/cam.hpp"
#include "cambnn/errors.hpp"

namespace cambnn {

// Labeled images with pixels scaled to [0, 1], row-major, one row per image.
struct Dataset {
  std::size_t width = 0;  // pixels per image
  std::vector<float> pixels;
  std::vector<int> labels;
  int classes = 0;
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::span<const float> image(std::size_t i) const {
    return {pixels.data() + i * width, width};
  }
};

// The same, binarized to {-1, +1}.
struct BinaryDataset {
  std::size_t width = 0;
  std::vector<std::int8_t> values;
  std::vector<int> labels;
  int classes = 0;
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::span<const std::int8_t> image(std::size_t i) const {
    return {values.data() + i * width, width};
  }
  BinaryVector image_vector(std::size_t i) const {
    auto s = image(i);
    return BinaryVector(s.begin(), s.end());
  }
};

// IDX pair (big-endian dimensions, unsigned byte payload, magic 0x00000803
// for images and 0x00000801 for labels). Pixels are scaled by 1/255.
// Throws FormatError on bad magic, truncation, count mismatch between the
// two files, or a label outside [0, classes).
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, int classes = 10);

// Skipped-file accounting for the folder loader.
struct FolderLoadReport {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

// Directory-per-class image tree (class index = sorted subdirectory order).
// Accepts PGM/PPM (P2/P3/P5/P6); grayscale via Rec.601 luminance, center
// crop to square, nearest-neighbor resize to side x side, scaled to [0, 1].
// Unreadable files are skipped with a warning; an empty class or an empty
// tree is a FormatError.
Dataset load_image_folder(const std::filesystem::path& dir, std::size_t side,
                          FolderLoadReport* report = nullptr);

// Value >= threshold becomes +1, else -1.
BinaryDataset binarize_dataset(const Dataset& dataset, double threshold = 0.5);

// Seeded in-place shuffle + split into train/test by fraction.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset,
                                          double train_fraction,
                                          std::uint64_t seed);

// Model container. Layout, all little-endian:
//   magic "PICB", version u16, layer_count u16, then per layer:
//   in_dim u32, out_dim u32, constants s16 x out_dim, weight rows bit-packed
//   (+1 -> 1) into u64 words, each row padded to a word boundary.
// Loads strictly: bad magic, bad version, truncation and trailing bytes are
// FormatErrors. Same model in, byte-identical file out.
void save_model(const std::filesystem::path& path, const BnnModel& model);
BnnModel load_model(const std::filesystem::path& path);

// Bank snapshot for audits, same word packing as model weight rows:
//   magic "CAMB", version u16, rows u32, columns u32, validity bitmap
//   (u64 words), then each valid row's words in row order.
void save_bank(const std::filesystem::path& path, const CamBank& bank);
CamBank load_bank(const std::filesystem::path& path);

}  // namespace cambnn

#include "cambnn/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "cambnn/rng.hpp"

namespace cambnn {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr char kModelMagic[4] = {'P', 'I', 'C', 'B'};
constexpr char kBankMagic[4] = {'C', 'A', 'M', 'B'};
constexpr std::uint16_t kModelVersion = 1;
constexpr std::uint16_t kBankVersion = 1;
constexpr std::uint64_t kMaxLayerWeights = std::uint64_t{1} << 31;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open " + path.string());
  }
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()),
                           static_cast<std::streamsize>(size))) {
    throw FormatError("cannot read " + path.string());
  }
  return bytes;
}

// Cursor over a byte buffer with strict bounds.
class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  const std::uint8_t* take(std::size_t n) {
    if (remaining() < n) {
      throw FormatError(origin_ + " is truncated");
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint32_t u32_be() {
    const std::uint8_t* p = take(4);
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
           (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
  }

  std::uint16_t u16_le() {
    const std::uint8_t* p = take(2);
    return static_cast<std::uint16_t>(std::uint16_t{p[0]} |
                                      (std::uint16_t{p[1]} << 8));
  }

  std::uint32_t u32_le() {
    const std::uint8_t* p = take(4);
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
           (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
  }

  std::uint64_t u64_le() {
    const std::uint8_t* p = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }

  std::int16_t s16_le() { return static_cast<std::int16_t>(u16_le()); }

  void expect_done() const {
    if (pos_ != bytes_.size()) {
      throw FormatError(origin_ + " has trailing bytes");
    }
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u16_le(std::uint16_t v) {
    bytes_.push_back(static_cast<std::uint8_t>(v));
    bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32_le(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64_le(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void s16_le(std::int16_t v) { u16_le(static_cast<std::uint16_t>(v)); }

  void write_to(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !out.write(reinterpret_cast<const char*>(bytes_.data()),
                           static_cast<std::streamsize>(bytes_.size()))) {
      throw FormatError("cannot write " + path.string());
    }
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

// --- netpbm (PGM/PPM) ---------------------------------------------------

struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> gray;  // [0, 1], row-major
};

// Reads the next header token, skipping whitespace and '#' comments. The
// end of the buffer terminates a pending token like whitespace would.
std::string pbm_token(ByteReader& r) {
  std::string tok;
  for (;;) {
    if (r.remaining() == 0 && !tok.empty()) return tok;
    const char c = static_cast<char>(*r.take(1));
    if (c == '#') {
      while (static_cast<char>(*r.take(1)) != '\n') {
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(c);
  }
}

std::size_t pbm_number(ByteReader& r, const std::string& origin) {
  const std::string tok = pbm_token(r);
  std::size_t value = 0;
  for (char c : tok) {
    if (c < '0' || c > '9') {
      throw FormatError(origin + ": expected a number, got '" + tok + "'");
    }
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  if (tok.empty()) {
    throw FormatError(origin + ": expected a number");
  }
  return value;
}

RawImage load_netpbm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path.string());
  const std::string magic = pbm_token(r);
  const bool ascii = magic == "P2" || magic == "P3";
  const bool color = magic == "P3" || magic == "P6";
  if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6") {
    throw FormatError(path.string() + ": unsupported image magic '" + magic + "'");
  }
  RawImage img;
  img.width = pbm_number(r, path.string());
  img.height = pbm_number(r, path.string());
  const std::size_t maxval = pbm_number(r, path.string());
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) {
    throw FormatError(path.string() + ": bad image header");
  }
  const std::size_t samples = img.width * img.height * (color ? 3 : 1);
  std::vector<float> raw(samples);
  if (ascii) {
    for (std::size_t i = 0; i < samples; ++i) {
      raw[i] = static_cast<float>(pbm_number(r, path.string()));
    }
  } else {
    // Binary payload starts right after the single whitespace byte that
    // pbm_token already consumed past the maxval token.
    const bool two_byte = maxval > 255;
    const std::size_t need = samples * (two_byte ? 2 : 1);
    const std::uint8_t* p = r.take(need);
    for (std::size_t i = 0; i < samples; ++i) {
      raw[i] = two_byte
                   ? static_cast<float>((std::size_t{p[2 * i]} << 8) | p[2 * i + 1])
                   : static_cast<float>(p[i]);
    }
  }
  const float scale = 1.0f / static_cast<float>(maxval);
  img.gray.resize(img.width * img.height);
  for (std::size_t i = 0; i < img.gray.size(); ++i) {
    if (color) {
      img.gray[i] = scale * (0.299f * raw[3 * i] + 0.587f * raw[3 * i + 1] +
                             0.114f * raw[3 * i + 2]);
    } else {
      img.gray[i] = scale * raw[i];
    }
  }
  return img;
}

// Center crop to square, then nearest-neighbor resample at pixel centers.
std::vector<float> crop_resize(const RawImage& img, std::size_t side) {
  const std::size_t square = std::min(img.width, img.height);
  const std::size_t x0 = (img.width - square) / 2;
  const std::size_t y0 = (img.height - square) / 2;
  std::vector<float> out(side * side);
  for (std::size_t y = 0; y < side; ++y) {
    const std::size_t sy = std::min(square - 1, (2 * y + 1) * square / (2 * side));
    for (std::size_t x = 0; x < side; ++x) {
      const std::size_t sx = std::min(square - 1, (2 * x + 1) * square / (2 * side));
      out[y * side + x] = img.gray[(y0 + sy) * img.width + (x0 + sx)];
    }
  }
  return out;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path, int classes) {
  if (classes <= 0) {
    throw InputError("class count must be positive");
  }
  const auto image_bytes = read_file(images_path);
  ByteReader images(image_bytes, images_path.string());
  if (images.u32_be() != kIdxImagesMagic) {
    throw FormatError(images_path.string() + " is not an idx image file");
  }
  const std::uint32_t count = images.u32_be();
  const std::uint32_t rows = images.u32_be();
  const std::uint32_t cols = images.u32_be();
  if (rows == 0 || cols == 0) {
    throw FormatError(images_path.string() + " has empty image dimensions");
  }
  const std::size_t width = std::size_t{rows} * cols;
  const std::uint8_t* pixels = images.take(std::size_t{count} * width);
  images.expect_done();

  const auto label_bytes = read_file(labels_path);
  ByteReader labels(label_bytes, labels_path.string());
  if (labels.u32_be() != kIdxLabelsMagic) {
    throw FormatError(labels_path.string() + " is not an idx label file");
  }
  const std::uint32_t label_count = labels.u32_be();
  if (label_count != count) {
    throw FormatError("image count " + std::to_string(count) +
                      " does not match label count " + std::to_string(label_count));
  }
  const std::uint8_t* label_data = labels.take(label_count);
  labels.expect_done();

  Dataset d;
  d.width = width;
  d.classes = classes;
  d.name = images_path.filename().string();
  d.pixels.resize(std::size_t{count} * width);
  for (std::size_t i = 0; i < d.pixels.size(); ++i) {
    d.pixels[i] = static_cast<float>(pixels[i]) / 255.0f;
  }
  d.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (label_data[i] >= classes) {
      throw FormatError("label " + std::to_string(label_data[i]) + " at index " +
                        std::to_string(i) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
    d.labels[i] = label_data[i];
  }
  return d;
}

Dataset load_image_folder(const std::filesystem::path& dir, std::size_t side,
                          FolderLoadReport* report) {
  if (side == 0) {
    throw InputError("image side must be positive");
  }
  if (!std::filesystem::is_directory(dir)) {
    throw FormatError(dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> class_dirs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) {
    throw FormatError(dir.string() + " has no class subdirectories");
  }

  FolderLoadReport local;
  FolderLoadReport& rep = report != nullptr ? *report : local;
  Dataset d;
  d.width = side * side;
  d.classes = static_cast<int>(class_dirs.size());
  d.name = dir.filename().string();
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(class_dirs[c])) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::size_t loaded_here = 0;
    for (const auto& file : files) {
      try {
        const RawImage img = load_netpbm(file);
        const auto pixels = crop_resize(img, side);
        d.pixels.insert(d.pixels.end(), pixels.begin(), pixels.end());
        d.labels.push_back(static_cast<int>(c));
        ++loaded_here;
        ++rep.loaded;
      } catch (const FormatError& e) {
        ++rep.skipped;
        rep.warnings.push_back(e.what());
      }
    }
    if (loaded_here == 0) {
      throw FormatError("class directory " + class_dirs[c].string() +
                        " has no loadable images");
    }
  }
  return d;
}

BinaryDataset binarize_dataset(const Dataset& dataset, double threshold) {
  BinaryDataset b;
  b.width = dataset.width;
  b.labels = dataset.labels;
  b.classes = dataset.classes;
  b.name = dataset.name;
  b.values.resize(dataset.pixels.size());
  for (std::size_t i = 0; i < dataset.pixels.size(); ++i) {
    const float v = dataset.pixels[i];
    if (std::isnan(v)) {
      throw NumericError("NaN pixel at flat index " + std::to_string(i));
    }
    b.values[i] = v >= threshold ? std::int8_t{1} : std::int8_t{-1};
  }
  return b;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset,
                                          double train_fraction,
                                          std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw InputError("train fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  shuffle_pinned(order, rng);
  const auto train_count = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(dataset.size())));

  auto take = [&](std::size_t begin, std::size_t end, const char* suffix) {
    Dataset part;
    part.width = dataset.width;
    part.classes = dataset.classes;
    part.name = dataset.name + suffix;
    part.pixels.reserve((end - begin) * dataset.width);
    part.labels.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
      const auto img = dataset.image(order[k]);
      part.pixels.insert(part.pixels.end(), img.begin(), img.end());
      part.labels.push_back(dataset.labels[order[k]]);
    }
    return part;
  };
  return {take(0, train_count, ".train"), take(train_count, dataset.size(), ".test")};
}

void save_model(const std::filesystem::path& path, const BnnModel& model) {
  validate_model(model);
  if (model.size() > 0xFFFF) {
    throw FormatError("model has too many layers for the file format");
  }
  ByteWriter w;
  w.raw(kModelMagic, 4);
  w.u16_le(kModelVersion);
  w.u16_le(static_cast<std::uint16_t>(model.size()));
  for (const auto& layer : model) {
    w.u32_le(static_cast<std::uint32_t>(layer.in_dim));
    w.u32_le(static_cast<std::uint32_t>(layer.out_dim));
    for (auto c : layer.bn_constants) w.s16_le(c);
    for (std::size_t j = 0; j < layer.out_dim; ++j) {
      RowPattern row(layer.in_dim);
      for (std::size_t i = 0; i < layer.in_dim; ++i) {
        if (layer.weight(j, i) == 1) row.set_bit(i, true);
      }
      for (auto word : row.words()) w.u64_le(word);
    }
  }
  w.write_to(path);
}

BnnModel load_model(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path.string());
  char magic[4];
  std::memcpy(magic, r.take(4), 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) {
    throw FormatError(path.string() + " is not a model file");
  }
  const auto version = r.u16_le();
  if (version != kModelVersion) {
    throw FormatError(path.string() + " has unsupported version " +
                      std::to_string(version));
  }
  const auto layer_count = r.u16_le();
  if (layer_count == 0) {
    throw FormatError(path.string() + " has no layers");
  }
  BnnModel model;
  model.reserve(layer_count);
  for (std::uint16_t l = 0; l < layer_count; ++l) {
    BinaryLayer layer;
    layer.in_dim = r.u32_le();
    layer.out_dim = r.u32_le();
    if (layer.in_dim == 0 || layer.out_dim == 0 ||
        std::uint64_t{layer.in_dim} * layer.out_dim > kMaxLayerWeights) {
      throw FormatError(path.string() + " layer " + std::to_string(l) +
                        " has implausible dimensions");
    }
    layer.bn_constants.resize(layer.out_dim);
    for (auto& c : layer.bn_constants) c = r.s16_le();
    layer.weights.resize(layer.in_dim * layer.out_dim);
    const std::size_t words_per_row = (layer.in_dim + 63) / 64;
    for (std::size_t j = 0; j < layer.out_dim; ++j) {
      for (std::size_t word = 0; word < words_per_row; ++word) {
        const std::uint64_t bits = r.u64_le();
        const std::size_t base = word * 64;
        const std::size_t top = std::min<std::size_t>(64, layer.in_dim - base);
        if (top < 64 && (bits >> top) != 0) {
          throw FormatError(path.string() + " layer " + std::to_string(l) +
                            " row " + std::to_string(j) + " has padding bits set");
        }
        for (std::size_t k = 0; k < top; ++k) {
          layer.weights[j * layer.in_dim + base + k] =
              ((bits >> k) & 1u) ? std::int8_t{1} : std::int8_t{-1};
        }
      }
    }
    model.push_back(std::move(layer));
  }
  r.expect_done();
  validate_model(model);
  return model;
}

void save_bank(const std::filesystem::path& path, const CamBank& bank) {
  ByteWriter w;
  w.raw(kBankMagic, 4);
  w.u16_le(kBankVersion);
  w.u32_le(static_cast<std::uint32_t>(bank.rows()));
  w.u32_le(static_cast<std::uint32_t>(bank.columns()));
  RowPattern validity(bank.rows());
  for (std::size_t r = 0; r < bank.rows(); ++r) {
    validity.set_bit(r, bank.row_valid(r));
  }
  for (auto word : validity.words()) w.u64_le(word);
  for (std::size_t r = 0; r < bank.rows(); ++r) {
    if (!bank.row_valid(r)) continue;
    for (auto word : bank.read_row(r).words()) w.u64_le(word);
  }
  w.write_to(path);
}

CamBank load_bank(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path.string());
  char magic[4];
  std::memcpy(magic, r.take(4), 4);
  if (std::memcmp(magic, kBankMagic, 4) != 0) {
    throw FormatError(path.string() + " is not a bank snapshot");
  }
  if (r.u16_le() != kBankVersion) {
    throw FormatError(path.string() + " has an unsupported snapshot version");
  }
  CamGeometry g;
  g.rows = r.u32_le();
  g.columns = r.u32_le();
  g.banks = 1;
  if (g.rows == 0 || g.columns == 0 || g.total_bits() > (std::uint64_t{1} << 33)) {
    throw FormatError(path.string() + " has implausible geometry");
  }
  RowPattern validity(g.rows);
  {
    std::vector<std::uint64_t> words((g.rows + 63) / 64);
    for (auto& word : words) word = r.u64_le();
    for (std::size_t i = 0; i < g.rows; ++i) {
      validity.set_bit(i, (words[i / 64] >> (i % 64)) & 1u);
    }
  }
  CamBank bank(g);
  for (std::size_t row = 0; row < g.rows; ++row) {
    if (!validity.bit(row)) continue;
    RowPattern pattern(g.columns);
    const std::size_t words_per_row = (g.columns + 63) / 64;
    for (std::size_t word = 0; word < words_per_row; ++word) {
      const std::uint64_t bits = r.u64_le();
      const std::size_t base = word * 64;
      const std::size_t top = std::min<std::size_t>(64, g.columns - base);
      for (std::size_t k = 0; k < top; ++k) {
        if ((bits >> k) & 1u) pattern.set_bit(base + k, true);
      }
      if (top < 64 && (bits >> top) != 0) {
        throw FormatError(path.string() + " row " + std::to_string(row) +
                          " has padding bits set");
      }
    }
    bank.write_row(row, pattern);
  }
  r.expect_done();
  return bank;
}

}  // namespace cambnn

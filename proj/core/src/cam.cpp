#include "cambnn/cam.hpp"

#include <bit>
#include <charconv>

namespace cambnn {

namespace {

constexpr std::size_t kWordBits = 64;

std::size_t words_for(std::size_t width) {
  return (width + kWordBits - 1) / kWordBits;
}

}  // namespace

CamGeometry CamGeometry::parse(const std::string& text, std::size_t banks) {
  auto sep = text.find('x');
  if (sep == std::string::npos) sep = text.find('X');
  if (sep == std::string::npos || sep == 0 || sep + 1 >= text.size()) {
    throw InputError("geometry must look like ROWSxCOLUMNS, got '" + text + "'");
  }
  CamGeometry g;
  g.banks = banks;
  const char* begin = text.data();
  auto r1 = std::from_chars(begin, begin + sep, g.rows);
  auto r2 = std::from_chars(begin + sep + 1, begin + text.size(), g.columns);
  if (r1.ec != std::errc{} || r1.ptr != begin + sep || r2.ec != std::errc{} ||
      r2.ptr != begin + text.size()) {
    throw InputError("geometry must look like ROWSxCOLUMNS, got '" + text + "'");
  }
  if (g.rows == 0 || g.columns == 0 || g.banks == 0) {
    throw InputError("geometry dimensions must be positive");
  }
  return g;
}

RowPattern::RowPattern(std::size_t width)
    : width_(width), words_(words_for(width), 0) {}

void RowPattern::check_index(std::size_t i) const {
  if (i >= width_) {
    throw IndexError("bit index " + std::to_string(i) + " out of range for width " +
                     std::to_string(width_));
  }
}

bool RowPattern::bit(std::size_t i) const {
  check_index(i);
  return (words_[i / kWordBits] >> (i % kWordBits)) & 1u;
}

void RowPattern::set_bit(std::size_t i, bool value) {
  check_index(i);
  const std::uint64_t mask = std::uint64_t{1} << (i % kWordBits);
  if (value) {
    words_[i / kWordBits] |= mask;
  } else {
    words_[i / kWordBits] &= ~mask;
  }
}

void RowPattern::fill(bool value) {
  if (!value) {
    std::fill(words_.begin(), words_.end(), 0);
    return;
  }
  std::fill(words_.begin(), words_.end(), ~std::uint64_t{0});
  const std::size_t tail = width_ % kWordBits;
  if (tail != 0 && !words_.empty()) {
    words_.back() &= (std::uint64_t{1} << tail) - 1;
  }
}

std::size_t RowPattern::popcount() const {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += std::popcount(w);
  return n;
}

std::size_t RowPattern::hamming(const RowPattern& a, const RowPattern& b) {
  if (a.width_ != b.width_) {
    throw ShapeError("hamming distance over mismatched widths " +
                     std::to_string(a.width_) + " vs " + std::to_string(b.width_));
  }
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.words_.size(); ++i) {
    n += std::popcount(a.words_[i] ^ b.words_[i]);
  }
  return n;
}

CamBank::CamBank(const CamGeometry& geometry)
    : geometry_(geometry),
      rows_(geometry.rows, RowPattern(geometry.columns)),
      valid_(geometry.rows, 0) {}

void CamBank::write_row(std::size_t row, const RowPattern& pattern) {
  if (row >= geometry_.rows) {
    throw IndexError("row " + std::to_string(row) + " out of range for " +
                     std::to_string(geometry_.rows) + " rows");
  }
  if (pattern.width() != geometry_.columns) {
    throw ShapeError("row pattern width " + std::to_string(pattern.width()) +
                     " does not fit " + std::to_string(geometry_.columns) +
                     " columns");
  }
  rows_[row] = pattern;
  valid_[row] = 1;
}

const RowPattern& CamBank::read_row(std::size_t row) const {
  if (row >= geometry_.rows) {
    throw IndexError("row " + std::to_string(row) + " out of range for " +
                     std::to_string(geometry_.rows) + " rows");
  }
  if (!valid_[row]) {
    throw UninitializedRowError("row " + std::to_string(row) + " was never written");
  }
  return rows_[row];
}

bool CamBank::row_valid(std::size_t row) const {
  if (row >= geometry_.rows) {
    throw IndexError("row " + std::to_string(row) + " out of range for " +
                     std::to_string(geometry_.rows) + " rows");
  }
  return valid_[row] != 0;
}

std::size_t CamBank::valid_rows() const {
  std::size_t n = 0;
  for (auto v : valid_) n += v;
  return n;
}

SearchResult CamBank::search(const RowPattern& query,
                             std::uint32_t hd_threshold) const {
  if (query.width() != geometry_.columns) {
    throw ShapeError("query width " + std::to_string(query.width()) +
                     " does not fit " + std::to_string(geometry_.columns) +
                     " columns");
  }
  SearchResult result;
  result.states.resize(geometry_.rows, RowState::Invalid);
  result.mismatch_counts.resize(geometry_.rows, SearchResult::kInvalidCount);
  for (std::size_t r = 0; r < geometry_.rows; ++r) {
    if (!valid_[r]) continue;
    const auto distance =
        static_cast<std::uint32_t>(RowPattern::hamming(rows_[r], query));
    result.mismatch_counts[r] = distance;
    result.states[r] =
        distance <= hd_threshold ? RowState::Match : RowState::Mismatch;
  }
  return result;
}

SearchResult CamBank::search_analog(const RowPattern& query,
                                    const AnalogKnobs& knobs,
                                    const DischargeParams& params,
                                    const HdProfile* profile,
                                    std::mt19937_64* rng) const {
  std::uint32_t threshold;
  if (params.mode == AnalogMode::Physical && params.noise_sigma > 0.0 &&
      rng != nullptr) {
    std::normal_distribution<double> noise(0.0, params.noise_sigma);
    const double g_scale = std::max(0.0, 1.0 + noise(*rng));
    threshold = hd_threshold_physical(knobs, params, g_scale);
  } else {
    threshold = hd_threshold_of(knobs, params, profile);
  }
  return search(query, threshold);
}

CamDevice::CamDevice(const CamGeometry& geometry) : geometry_(geometry) {
  banks_.reserve(geometry.banks);
  for (std::size_t b = 0; b < geometry.banks; ++b) {
    banks_.emplace_back(geometry);
  }
}

CamBank& CamDevice::bank(std::size_t i) {
  if (i >= banks_.size()) {
    throw IndexError("bank " + std::to_string(i) + " out of range");
  }
  return banks_[i];
}

const CamBank& CamDevice::bank(std::size_t i) const {
  if (i >= banks_.size()) {
    throw IndexError("bank " + std::to_string(i) + " out of range");
  }
  return banks_[i];
}

std::vector<SearchResult> CamDevice::search_all(const RowPattern& query,
                                                std::uint32_t hd_threshold) const {
  std::vector<SearchResult> results;
  results.reserve(banks_.size());
  for (const auto& b : banks_) {
    results.push_back(b.search(query, hd_threshold));
  }
  return results;
}

std::vector<SearchResult> CamDevice::search_all_analog(
    const RowPattern& query, const AnalogKnobs& knobs,
    const DischargeParams& params, const HdProfile* profile,
    std::mt19937_64* rng) const {
  std::vector<SearchResult> results;
  results.reserve(banks_.size());
  for (const auto& b : banks_) {
    results.push_back(b.search_analog(query, knobs, params, profile, rng));
  }
  return results;
}

}  // namespace cambnn

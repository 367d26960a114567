#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cambnn/analog.hpp"
#include "cambnn/errors.hpp"

namespace cambnn {

// Logical shape of the memory: `banks` banks of `rows` x `columns` cells.
// Total capacity is the product; the stock device is 131072 bits, e.g.
// 64x2048x1 or 32x1024x4.
struct CamGeometry {
  std::size_t rows = 64;
  std::size_t columns = 2048;
  std::size_t banks = 1;

  std::size_t total_bits() const { return rows * columns * banks; }
  std::size_t total_rows() const { return rows * banks; }

  // Parses "ROWSxCOLUMNS", e.g. "64x2048". Throws InputError.
  static CamGeometry parse(const std::string& text, std::size_t banks = 1);

  bool operator==(const CamGeometry&) const = default;
};

// A row's worth of bits, packed into little-endian 64-bit words
// (bit i lives in word i/64 at position i%64). Bits past `width`
// are kept zero so whole-word popcounts are exact.
class RowPattern {
 public:
  RowPattern() = default;
  explicit RowPattern(std::size_t width);

  std::size_t width() const { return width_; }
  std::size_t word_count() const { return words_.size(); }
  std::span<const std::uint64_t> words() const { return words_; }

  bool bit(std::size_t i) const;
  void set_bit(std::size_t i, bool value);
  void fill(bool value);

  // Number of set bits.
  std::size_t popcount() const;

  bool operator==(const RowPattern&) const = default;

  // Number of positions where a and b differ. Throws ShapeError on
  // width mismatch.
  static std::size_t hamming(const RowPattern& a, const RowPattern& b);

 private:
  void check_index(std::size_t i) const;

  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

// Outcome of one search cycle for one row.
enum class RowState : std::uint8_t {
  Invalid,   // row was never written; never a match candidate
  Mismatch,  // written, Hamming distance above the tolerance
  Match,     // written, Hamming distance within the tolerance
};

// Per-row outcome of one search cycle. mismatch_counts is the exact
// per-row Hamming distance (diagnostic; kInvalidCount for invalid rows).
struct SearchResult {
  static constexpr std::uint32_t kInvalidCount =
      std::numeric_limits<std::uint32_t>::max();

  std::vector<RowState> states;
  std::vector<std::uint32_t> mismatch_counts;

  bool matched(std::size_t row) const { return states[row] == RowState::Match; }
};

// One bank: a rows x columns cell matrix searched in a single cycle
// (precharge, broadcast the query, evaluate every matchline in parallel).
class CamBank {
 public:
  explicit CamBank(const CamGeometry& geometry);

  const CamGeometry& geometry() const { return geometry_; }
  std::size_t rows() const { return geometry_.rows; }
  std::size_t columns() const { return geometry_.columns; }

  // Throws IndexError on a bad row, ShapeError on a bad pattern width.
  void write_row(std::size_t row, const RowPattern& pattern);

  // Throws UninitializedRowError when the row was never written.
  const RowPattern& read_row(std::size_t row) const;

  bool row_valid(std::size_t row) const;
  std::size_t valid_rows() const;

  // One search cycle: a row matches iff it is valid and its Hamming
  // distance to the query is <= hd_threshold.
  SearchResult search(const RowPattern& query, std::uint32_t hd_threshold) const;

  // Same cycle with the tolerance derived from voltages. With a profile
  // and Lookup mode the tolerance is looked up; Physical mode evaluates
  // the discharge model. When params.noise_sigma > 0 and rng is non-null
  // the effective conductance is perturbed once for this search.
  SearchResult search_analog(const RowPattern& query, const AnalogKnobs& knobs,
                             const DischargeParams& params,
                             const HdProfile* profile = nullptr,
                             std::mt19937_64* rng = nullptr) const;

 private:
  CamGeometry geometry_;
  std::vector<RowPattern> rows_;
  std::vector<std::uint8_t> valid_;
};

// A device: `banks` banks sharing one broadcast query per cycle.
class CamDevice {
 public:
  explicit CamDevice(const CamGeometry& geometry);

  const CamGeometry& geometry() const { return geometry_; }
  std::size_t bank_count() const { return banks_.size(); }
  CamBank& bank(std::size_t i);
  const CamBank& bank(std::size_t i) const;

  // One cycle over all banks with a shared query.
  std::vector<SearchResult> search_all(const RowPattern& query,
                                       std::uint32_t hd_threshold) const;
  std::vector<SearchResult> search_all_analog(const RowPattern& query,
                                              const AnalogKnobs& knobs,
                                              const DischargeParams& params,
                                              const HdProfile* profile = nullptr,
                                              std::mt19937_64* rng = nullptr) const;

 private:
  CamGeometry geometry_;
  std::vector<CamBank> banks_;
};

}  // namespace cambnn

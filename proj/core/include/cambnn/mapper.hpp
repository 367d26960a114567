#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "cambnn/analog.hpp"
#include "cambnn/bnn.hpp"
#include "cambnn/cam.hpp"

namespace cambnn {

// Constant cells for one neuron. Every search drives the query all-ones
// over the constant field, so a stored one always matches (adds +1 to the
// XNOR sum) and a stored zero always mismatches (adds -1): c > 0 becomes
// c always-match cells, c < 0 becomes |c| always-mismatch cells, c = 0
// stores nothing. Padding past a row's active width is always-match and
// therefore contributes no mismatches.
struct BnCellEncoding {
  RowPattern stored_bits;
  RowPattern query_extension;  // all-ones, same length as stored_bits

  std::size_t length() const { return stored_bits.width(); }
};

// Throws CapacityError when |c| > bn_cap.
BnCellEncoding encode_bn(int c, int bn_cap = 64);

// Whether a layer is searched once at each row's majority point or with a
// caller-swept global tolerance.
enum class KnobsPolicy : std::uint8_t {
  FixedMajority,
  Swept,
};

struct MapOptions {
  // Reprogramming rows between cycles lets a model larger than the raw
  // capacity run in multiple passes.
  bool allow_row_reuse = true;
  int bn_cap = 64;
};

// One physical row assignment.
struct RowPlacement {
  std::size_t neuron = 0;
  std::size_t segment = 0;      // chunk index within the neuron's logical row
  std::size_t cycle = 0;        // layer-local search cycle
  std::size_t bank = 0;
  std::size_t row = 0;          // row within the bank
  std::size_t col_begin = 0;    // first used column (always 0 here)
  std::size_t col_end = 0;      // one past the last used column
  std::size_t weight_begin = 0; // first input bit stored in this segment
  std::size_t weight_count = 0; // input bits stored in this segment
  std::size_t bn_begin = 0;     // first constant cell stored in this row
  std::size_t bn_count = 0;     // constant cells stored in this row
};

// One layer compiled onto the device. Rows are grouped into search cycles;
// all rows of a cycle see the same broadcast query, so a cycle only holds
// segments of one chunk phase. Constant cells ride in the tail of a
// neuron's last weight chunk when they fit, otherwise in rows of the
// all-ones constant phase, splitting across rows when wider than the
// array.
struct MappedLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  KnobsPolicy knobs_policy = KnobsPolicy::FixedMajority;

  std::vector<std::int16_t> bn_constants;        // per neuron
  std::vector<BnCellEncoding> bn_encoding;       // per neuron
  std::vector<std::uint32_t> row_width_total;    // per neuron: in_dim + |C_j|
  std::vector<std::uint32_t> majority_threshold; // floor((row_width_total-1)/2)
  std::vector<std::uint32_t> segments;           // per neuron: rows it occupies
  bool tiled = false;  // any neuron spans more than one segment

  struct Cycle {
    std::size_t query_begin = 0;  // first input bit this cycle's query carries
    std::size_t query_width = 0;  // 0 for the constant phase (all-ones query)
    std::size_t active_bits = 0;  // programmed cells searched in this cycle
    CamDevice device;
    std::vector<RowPlacement> slots;
  };
  std::vector<Cycle> cycles;

  // Query for one cycle: input bits first, all remaining columns ones.
  RowPattern build_query(std::size_t cycle, const BinaryVector& x) const;
};

struct MappedModel {
  CamGeometry geometry;
  MapOptions options;
  std::vector<MappedLayer> layers;
  std::size_t programmed_bits = 0;  // weight + constant cells across layers

  std::size_t total_cycles() const;
};

// Greedy row-major compilation. Hidden layers get FixedMajority policy,
// the last layer Swept. Throws CapacityError (with a bit budget report)
// when the model exceeds capacity and row reuse is off, or when a
// constant exceeds bn_cap.
MappedModel map_model(const BnnModel& model, const CamGeometry& geometry,
                      const MapOptions& options = {});

// How execute_layer turns a wanted tolerance into a search.
//   Digital        : integer threshold straight into cam-core search
//   AnalogPhysical : calibrate_knobs, then search_analog (discharge model)
//   AnalogLookup   : knobs from profile entries, then search_analog;
//                    FixedMajority rows keep digital thresholds (profiles
//                    only tabulate the swept points)
enum class KnobSource : std::uint8_t {
  Digital,
  AnalogPhysical,
  AnalogLookup,
};

struct LayerDrive {
  KnobSource source = KnobSource::Digital;
  // Swept policy only: the global tolerance for this pass.
  std::optional<std::uint32_t> swept_threshold;
  DischargeParams params;        // analog sources
  const HdProfile* profile = nullptr;  // AnalogLookup; null = silicon default
  std::mt19937_64* noise_rng = nullptr;  // variation hook, off when null
};

// One pass over a mapped layer: builds each cycle's query, searches, sums
// per-segment mismatch counts, and compares against the layer's per-neuron
// majority points (FixedMajority) or drive.swept_threshold (Swept).
// Output is +1 on Match, -1 otherwise. Throws UninitializedRowError on
// tampered storage and InputError when Swept is driven without a threshold.
BinaryVector execute_layer(const MappedLayer& layer, const BinaryVector& x,
                           const LayerDrive& drive);

// Per-neuron mismatch counts (segment sums) for one pass; the thresholding
// in execute_layer is a pure function of these and is independent of the
// drive (tolerances move the decision point, not the distances).
std::vector<std::uint32_t> layer_mismatch_counts(const MappedLayer& layer,
                                                 const BinaryVector& x);

// Full forward pass with every layer at its majority point (Swept layers
// included). Equals model_forward of the source model bit-for-bit.
BinaryVector execute_model(const MappedModel& mapped, const BinaryVector& x,
                           const LayerDrive& drive = {});

// Verifies placement totality (every weight bit placed exactly once, no
// row collisions, stored bits equal to the source weights, constant cells
// as encoded). Throws on any violation.
void audit_mapping(const MappedModel& mapped, const BnnModel& model);

}  // namespace cambnn

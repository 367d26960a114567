#include "cambnn/mapper.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace cambnn {

BnCellEncoding encode_bn(int c, int bn_cap) {
  if (bn_cap < 0) {
    throw InputError("bn_cap must be non-negative");
  }
  if (std::abs(c) > bn_cap) {
    throw CapacityError("constant " + std::to_string(c) +
                        " exceeds the cell budget of " + std::to_string(bn_cap));
  }
  const auto n = static_cast<std::size_t>(std::abs(c));
  BnCellEncoding enc;
  enc.stored_bits = RowPattern(n);
  enc.query_extension = RowPattern(n);
  enc.query_extension.fill(true);
  if (c > 0) enc.stored_bits.fill(true);
  return enc;
}

RowPattern MappedLayer::build_query(std::size_t cycle, const BinaryVector& x) const {
  if (x.size() != in_dim) {
    throw ShapeError("input length " + std::to_string(x.size()) +
                     " does not match layer fan-in " + std::to_string(in_dim));
  }
  const auto& c = cycles.at(cycle);
  const std::size_t columns = c.device.geometry().columns;
  RowPattern query(columns);
  query.fill(true);
  for (std::size_t i = 0; i < c.query_width; ++i) {
    if (x[c.query_begin + i] != 1) query.set_bit(i, false);
  }
  return query;
}

std::size_t MappedModel::total_cycles() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.cycles.size();
  return n;
}

MappedModel map_model(const BnnModel& model, const CamGeometry& geometry,
                      const MapOptions& options) {
  validate_model(model);
  if (geometry.rows == 0 || geometry.columns == 0 || geometry.banks == 0) {
    throw InputError("device geometry must have positive dimensions");
  }
  const std::size_t columns = geometry.columns;
  const std::size_t rows_per_cycle = geometry.total_rows();

  MappedModel mapped;
  mapped.geometry = geometry;
  mapped.options = options;
  mapped.layers.reserve(model.size());

  for (std::size_t l = 0; l < model.size(); ++l) {
    const BinaryLayer& src = model[l];
    MappedLayer ml;
    ml.in_dim = src.in_dim;
    ml.out_dim = src.out_dim;
    ml.knobs_policy =
        l + 1 == model.size() ? KnobsPolicy::Swept : KnobsPolicy::FixedMajority;
    ml.bn_constants = src.bn_constants;
    ml.bn_encoding.reserve(src.out_dim);
    ml.row_width_total.resize(src.out_dim);
    ml.majority_threshold.resize(src.out_dim);
    ml.segments.assign(src.out_dim, 0);

    const std::size_t weight_chunks = (src.in_dim + columns - 1) / columns;
    const std::size_t last_chunk_width = src.in_dim - (weight_chunks - 1) * columns;
    const std::size_t tail_space = columns - last_chunk_width;

    std::vector<bool> bn_in_tail(src.out_dim);
    for (std::size_t j = 0; j < src.out_dim; ++j) {
      const int c = src.bn_constants[j];
      ml.bn_encoding.push_back(encode_bn(c, options.bn_cap));
      const auto bn_len = ml.bn_encoding.back().length();
      ml.row_width_total[j] = static_cast<std::uint32_t>(src.in_dim + bn_len);
      ml.majority_threshold[j] = (ml.row_width_total[j] - 1) / 2;
      bn_in_tail[j] = bn_len <= tail_space;
      const std::size_t bn_rows =
          bn_in_tail[j] ? 0 : (bn_len + columns - 1) / columns;
      ml.segments[j] = static_cast<std::uint32_t>(weight_chunks + bn_rows);
      mapped.programmed_bits += ml.row_width_total[j];
    }
    ml.tiled = std::any_of(ml.segments.begin(), ml.segments.end(),
                           [](std::uint32_t s) { return s > 1; });

    // Rows of one search cycle share a broadcast query, so a cycle holds
    // only rows of one chunk phase. Weight phases first, then the
    // constant phase for neurons whose cells did not fit a tail.
    struct PendingRow {
      RowPlacement placement;
      RowPattern pattern;
    };
    auto flush_phase = [&](std::size_t query_begin, std::size_t query_width,
                           std::vector<PendingRow>& rows) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i % rows_per_cycle == 0) {
          MappedLayer::Cycle cycle{query_begin, query_width, 0,
                                   CamDevice(geometry), {}};
          ml.cycles.push_back(std::move(cycle));
        }
        auto& cycle = ml.cycles.back();
        auto& pending = rows[i];
        const std::size_t in_cycle = i % rows_per_cycle;
        pending.placement.cycle = ml.cycles.size() - 1;
        pending.placement.bank = in_cycle / geometry.rows;
        pending.placement.row = in_cycle % geometry.rows;
        cycle.device.bank(pending.placement.bank)
            .write_row(pending.placement.row, pending.pattern);
        cycle.active_bits +=
            pending.placement.weight_count + pending.placement.bn_count;
        cycle.slots.push_back(pending.placement);
      }
      rows.clear();
    };

    std::vector<PendingRow> pending;
    pending.reserve(src.out_dim);
    for (std::size_t phase = 0; phase < weight_chunks; ++phase) {
      const std::size_t begin = phase * columns;
      const std::size_t width =
          phase + 1 == weight_chunks ? last_chunk_width : columns;
      for (std::size_t j = 0; j < src.out_dim; ++j) {
        PendingRow pr;
        pr.placement.neuron = j;
        pr.placement.segment = phase;
        pr.placement.weight_begin = begin;
        pr.placement.weight_count = width;
        pr.pattern = RowPattern(columns);
        pr.pattern.fill(true);  // padding cells always match the ones query
        for (std::size_t i = 0; i < width; ++i) {
          if (src.weight(j, begin + i) != 1) pr.pattern.set_bit(i, false);
        }
        std::size_t col_end = width;
        if (phase + 1 == weight_chunks && bn_in_tail[j]) {
          const auto& enc = ml.bn_encoding[j];
          for (std::size_t i = 0; i < enc.length(); ++i) {
            pr.pattern.set_bit(width + i, enc.stored_bits.bit(i));
          }
          col_end += enc.length();
          pr.placement.bn_count = enc.length();
        }
        pr.placement.col_begin = 0;
        pr.placement.col_end = col_end;
        pending.push_back(std::move(pr));
      }
      flush_phase(begin, width, pending);
    }
    for (std::size_t j = 0; j < src.out_dim; ++j) {
      if (bn_in_tail[j]) continue;
      const auto& enc = ml.bn_encoding[j];
      for (std::size_t begin = 0; begin < enc.length(); begin += columns) {
        const std::size_t width = std::min(columns, enc.length() - begin);
        PendingRow pr;
        pr.placement.neuron = j;
        pr.placement.segment = weight_chunks + begin / columns;
        pr.placement.weight_begin = 0;
        pr.placement.weight_count = 0;
        pr.placement.bn_begin = begin;
        pr.placement.bn_count = width;
        pr.placement.col_begin = 0;
        pr.placement.col_end = width;
        pr.pattern = RowPattern(columns);
        pr.pattern.fill(true);
        for (std::size_t i = 0; i < width; ++i) {
          pr.pattern.set_bit(i, enc.stored_bits.bit(begin + i));
        }
        pending.push_back(std::move(pr));
      }
    }
    flush_phase(0, 0, pending);

    mapped.layers.push_back(std::move(ml));
  }

  if (mapped.programmed_bits > geometry.total_bits() && !options.allow_row_reuse) {
    std::ostringstream os;
    os << "model needs " << mapped.programmed_bits << " cells but the device has "
       << geometry.total_bits() << " (";
    for (std::size_t l = 0; l < mapped.layers.size(); ++l) {
      std::size_t bits = 0;
      for (auto w : mapped.layers[l].row_width_total) bits += w;
      os << (l > 0 ? ", " : "") << "layer " << l << ": " << bits;
    }
    os << "); enable row reuse to run in multiple passes";
    throw CapacityError(os.str());
  }
  return mapped;
}

namespace {

// Threshold-independent per-neuron mismatch sums plus each single-segment
// neuron's slot, gathered with one search per cycle.
struct PassCounts {
  std::vector<std::uint32_t> counts;
};

PassCounts gather_counts(const MappedLayer& layer, const BinaryVector& x) {
  PassCounts pass;
  pass.counts.assign(layer.out_dim, 0);
  for (std::size_t c = 0; c < layer.cycles.size(); ++c) {
    const auto& cycle = layer.cycles[c];
    const RowPattern query = layer.build_query(c, x);
    const auto results = cycle.device.search_all(query, 0);
    for (const auto& slot : cycle.slots) {
      const auto& res = results[slot.bank];
      if (res.states[slot.row] == RowState::Invalid) {
        throw UninitializedRowError("cycle " + std::to_string(c) + " bank " +
                                    std::to_string(slot.bank) + " row " +
                                    std::to_string(slot.row) +
                                    " was never programmed");
      }
      pass.counts[slot.neuron] += res.mismatch_counts[slot.row];
    }
  }
  return pass;
}

// Per-neuron decision thresholds for a FixedMajority pass under the given
// drive. AnalogPhysical realizes each distinct row width through the knob
// calibration round-trip; Digital and AnalogLookup use the integer
// majority points directly (profiles only tabulate the swept tolerances).
std::vector<std::uint32_t> majority_decision_points(const MappedLayer& layer,
                                                    const LayerDrive& drive) {
  std::vector<std::uint32_t> points(layer.out_dim);
  if (drive.source == KnobSource::AnalogPhysical) {
    std::map<std::uint32_t, std::uint32_t> derived;
    for (std::size_t j = 0; j < layer.out_dim; ++j) {
      const std::uint32_t width = layer.row_width_total[j];
      auto it = derived.find(width);
      if (it == derived.end()) {
        const AnalogKnobs knobs = majority_knobs(width, drive.params);
        it = derived.emplace(width, hd_threshold_of(knobs, drive.params)).first;
      }
      points[j] = it->second;
    }
  } else {
    for (std::size_t j = 0; j < layer.out_dim; ++j) {
      points[j] = layer.majority_threshold[j];
    }
  }
  return points;
}

BinaryVector fixed_majority_pass(const MappedLayer& layer, const BinaryVector& x,
                                 const LayerDrive& drive) {
  const PassCounts pass = gather_counts(layer, x);
  const auto points = majority_decision_points(layer, drive);
  BinaryVector out(layer.out_dim);
  for (std::size_t j = 0; j < layer.out_dim; ++j) {
    out[j] = pass.counts[j] <= points[j] ? std::int8_t{1} : std::int8_t{-1};
  }
  return out;
}

BinaryVector swept_pass(const MappedLayer& layer, const BinaryVector& x,
                        const LayerDrive& drive) {
  if (!drive.swept_threshold.has_value()) {
    throw InputError("a swept layer needs a tolerance from the caller");
  }
  const std::uint32_t threshold = *drive.swept_threshold;

  // Resolve how each cycle's search realizes the tolerance.
  AnalogKnobs knobs;
  DischargeParams params = drive.params;
  const HdProfile* profile = nullptr;
  if (drive.source == KnobSource::AnalogPhysical) {
    knobs = calibrate_knobs(threshold, params);
  } else if (drive.source == KnobSource::AnalogLookup) {
    static const HdProfile fallback = HdProfile::silicon_default();
    profile = drive.profile != nullptr ? drive.profile : &fallback;
    const auto entry = profile->knobs_for(threshold);
    if (!entry.has_value()) {
      throw ProfileError("profile has no entry for tolerance " +
                         std::to_string(threshold));
    }
    knobs = *entry;
    params.mode = AnalogMode::Lookup;
  }

  BinaryVector out(layer.out_dim, std::int8_t{-1});
  std::vector<std::uint32_t> counts(layer.out_dim, 0);
  std::vector<RowState> single_state(layer.out_dim, RowState::Invalid);
  for (std::size_t c = 0; c < layer.cycles.size(); ++c) {
    const auto& cycle = layer.cycles[c];
    const RowPattern query = layer.build_query(c, x);
    const auto results =
        drive.source == KnobSource::Digital
            ? cycle.device.search_all(query, threshold)
            : cycle.device.search_all_analog(query, knobs, params, profile,
                                             drive.noise_rng);
    for (const auto& slot : cycle.slots) {
      const auto& res = results[slot.bank];
      if (res.states[slot.row] == RowState::Invalid) {
        throw UninitializedRowError("cycle " + std::to_string(c) + " bank " +
                                    std::to_string(slot.bank) + " row " +
                                    std::to_string(slot.row) +
                                    " was never programmed");
      }
      counts[slot.neuron] += res.mismatch_counts[slot.row];
      single_state[slot.neuron] = res.states[slot.row];
    }
  }
  for (std::size_t j = 0; j < layer.out_dim; ++j) {
    if (layer.segments[j] == 1) {
      // The matchline answer itself.
      out[j] = single_state[j] == RowState::Match ? std::int8_t{1} : std::int8_t{-1};
    } else {
      // Tiled neuron: digital accumulation fixup over its segments.
      out[j] = counts[j] <= threshold ? std::int8_t{1} : std::int8_t{-1};
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint32_t> layer_mismatch_counts(const MappedLayer& layer,
                                                 const BinaryVector& x) {
  return gather_counts(layer, x).counts;
}

BinaryVector execute_layer(const MappedLayer& layer, const BinaryVector& x,
                           const LayerDrive& drive) {
  if (layer.knobs_policy == KnobsPolicy::Swept) {
    return swept_pass(layer, x, drive);
  }
  return fixed_majority_pass(layer, x, drive);
}

BinaryVector execute_model(const MappedModel& mapped, const BinaryVector& x,
                           const LayerDrive& drive) {
  if (mapped.layers.empty()) {
    throw ShapeError("mapped model has no layers");
  }
  BinaryVector h = x;
  for (const auto& layer : mapped.layers) {
    h = fixed_majority_pass(layer, h, drive);
  }
  return h;
}

void audit_mapping(const MappedModel& mapped, const BnnModel& model) {
  if (mapped.layers.size() != model.size()) {
    throw Error("audit: layer count mismatch");
  }
  std::size_t programmed = 0;
  for (std::size_t l = 0; l < model.size(); ++l) {
    const auto& ml = mapped.layers[l];
    const auto& src = model[l];
    if (ml.in_dim != src.in_dim || ml.out_dim != src.out_dim) {
      throw Error("audit: layer " + std::to_string(l) + " dimension mismatch");
    }
    if (ml.bn_constants != src.bn_constants) {
      throw Error("audit: layer " + std::to_string(l) + " constant mismatch");
    }
    std::vector<std::uint8_t> covered(src.in_dim * src.out_dim, 0);
    std::vector<std::vector<std::uint8_t>> bn_covered(src.out_dim);
    for (std::size_t j = 0; j < src.out_dim; ++j) {
      bn_covered[j].assign(ml.bn_encoding[j].length(), 0);
    }
    for (const auto& cycle : ml.cycles) {
      std::set<std::pair<std::size_t, std::size_t>> used;
      for (const auto& slot : cycle.slots) {
        if (!used.emplace(slot.bank, slot.row).second) {
          throw Error("audit: row collision in layer " + std::to_string(l));
        }
        const RowPattern& stored =
            cycle.device.bank(slot.bank).read_row(slot.row);
        for (std::size_t i = 0; i < slot.weight_count; ++i) {
          const std::size_t bit = slot.weight_begin + i;
          if (covered[slot.neuron * src.in_dim + bit]++) {
            throw Error("audit: weight bit placed twice in layer " +
                        std::to_string(l));
          }
          const bool expect = src.weight(slot.neuron, bit) == 1;
          if (stored.bit(i) != expect) {
            throw Error("audit: stored weight bit differs from the model");
          }
        }
        const auto& enc = ml.bn_encoding[slot.neuron];
        for (std::size_t i = 0; i < slot.bn_count; ++i) {
          const std::size_t cell = slot.bn_begin + i;
          if (cell >= enc.length() || bn_covered[slot.neuron][cell]++) {
            throw Error("audit: constant cell placed twice or out of range");
          }
          if (stored.bit(slot.weight_count + i) != enc.stored_bits.bit(cell)) {
            throw Error("audit: stored constant cells differ from encoding");
          }
        }
        const std::size_t tail_begin = slot.weight_count + slot.bn_count;
        for (std::size_t i = tail_begin; i < stored.width(); ++i) {
          if (!stored.bit(i)) {
            throw Error("audit: padding cell stored as mismatch");
          }
        }
        if (slot.col_end != tail_begin) {
          throw Error("audit: recorded column range disagrees with contents");
        }
      }
    }
    for (std::size_t j = 0; j < src.out_dim; ++j) {
      for (auto seen : bn_covered[j]) {
        if (!seen) {
          throw Error("audit: constant cells missing for neuron " +
                      std::to_string(j));
        }
      }
      programmed += ml.row_width_total[j];
    }
    if (std::count(covered.begin(), covered.end(), std::uint8_t{1}) !=
        static_cast<std::ptrdiff_t>(covered.size())) {
      throw Error("audit: weight coverage incomplete in layer " +
                  std::to_string(l));
    }
  }
  if (programmed != mapped.programmed_bits) {
    throw Error("audit: programmed bit accounting mismatch");
  }
}

}  // namespace cambnn

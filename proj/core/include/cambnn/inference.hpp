#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cambnn/data_io.hpp"
#include "cambnn/mapper.hpp"

namespace cambnn {

// How the per-class vote becomes a prediction.
//   ArgmaxCount    : class with the most 1-outputs wins, ties to the
//                    lowest index with the tie flag set.
//   SimpleMajority : a class qualifies only when its 1-outputs exceed
//                    half the passes. A unique qualifier wins outright;
//                    otherwise (zero or several qualifiers) the argmax
//                    rule decides and the tie flag records the ambiguity.
// Either way the prediction maximizes ones_count.
enum class VoteRule : std::uint8_t {
  ArgmaxCount,
  SimpleMajority,
};

std::vector<std::uint32_t> default_sweep();  // {0, 2, 4, ..., 64}

struct SweepConfig {
  std::vector<std::uint32_t> thresholds = default_sweep();
  VoteRule vote_rule = VoteRule::ArgmaxCount;
  KnobSource knob_source = KnobSource::Digital;
  DischargeParams analog;              // analog knob sources
  const HdProfile* profile = nullptr;  // AnalogLookup; null = silicon default
  std::optional<std::uint64_t> noise_seed;  // variation hook, off by default
};

struct InferenceTrace {
  std::size_t passes = 0;
  std::size_t classes = 0;
  // Pass-major bit matrix: outputs[p * classes + c] = 1 iff class c
  // matched in pass p.
  std::vector<std::uint8_t> per_pass_outputs;
  std::vector<std::uint32_t> ones_count;  // per class
  int predicted = -1;
  bool tie = false;

  std::uint8_t output(std::size_t pass, std::size_t c) const {
    return per_pass_outputs[pass * classes + c];
  }
};

// Runs the hidden layers once at their majority points, then one output
// pass per threshold in cfg.thresholds, and votes. Throws InputError on
// an empty threshold list; propagates mapper and analog errors.
InferenceTrace infer(const MappedModel& mapped, const BinaryVector& image,
                     const SweepConfig& cfg);

struct AccuracyReport {
  std::size_t images = 0;
  std::size_t passes = 0;
  double top1 = 0.0;
  double top2 = 0.0;
  double tie_rate = 0.0;
  // Accuracy using only the first k thresholds, k = 1..passes.
  std::vector<double> prefix_top1;
  std::vector<double> prefix_top2;
  std::vector<double> prefix_tie_rate;
  std::vector<std::uint32_t> thresholds;
  // Images where some class flipped 1 -> 0 as the tolerance grew
  // (always 0 for an ascending sweep; recorded as a checked invariant).
  std::size_t monotonicity_violations = 0;
};

// Whole-dataset evaluation with a sequential, order-fixed reduction.
// Throws InputError on an empty dataset.
AccuracyReport evaluate(const MappedModel& mapped, const BinaryDataset& dataset,
                        const SweepConfig& cfg);

// True when every class's outputs are monotone across the (ascending)
// sweep: once a class outputs 1 it keeps outputting 1 at larger
// tolerances. Requires cfg thresholds sorted ascending to be meaningful.
bool trace_monotone(const InferenceTrace& trace);

// One CSV row per prefix length: k, threshold_max, top1, top2, tie_rate.
std::string report_csv(const AccuracyReport& report);

// Single-line JSON summary of the full-sweep figures.
std::string report_summary(const AccuracyReport& report);

}  // namespace cambnn

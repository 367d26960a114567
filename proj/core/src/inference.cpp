#include "cambnn/inference.hpp"

#include <algorithm>
#include <cstdio>

namespace cambnn {

std::vector<std::uint32_t> default_sweep() {
  std::vector<std::uint32_t> sweep;
  sweep.reserve(33);
  for (std::uint32_t t = 0; t <= 64; t += 2) sweep.push_back(t);
  return sweep;
}

namespace {

struct Vote {
  int predicted = 0;
  bool tie = false;
};

// Prediction over the first `passes` passes' counts.
Vote vote(const std::vector<std::uint32_t>& ones, std::size_t passes,
          VoteRule rule) {
  Vote v;
  std::uint32_t best = ones[0];
  std::size_t best_ties = 1;
  for (std::size_t c = 1; c < ones.size(); ++c) {
    if (ones[c] > best) {
      best = ones[c];
      v.predicted = static_cast<int>(c);
      best_ties = 1;
    } else if (ones[c] == best) {
      ++best_ties;
    }
  }
  v.tie = best_ties > 1;
  if (rule == VoteRule::SimpleMajority) {
    int qualifier = -1;
    std::size_t qualifiers = 0;
    for (std::size_t c = 0; c < ones.size(); ++c) {
      if (2 * static_cast<std::size_t>(ones[c]) > passes) {
        qualifier = static_cast<int>(c);
        ++qualifiers;
      }
    }
    if (qualifiers == 1) {
      v.predicted = qualifier;
      v.tie = false;
    } else {
      v.tie = true;
    }
  }
  return v;
}

InferenceTrace infer_seeded(const MappedModel& mapped, const BinaryVector& image,
                            const SweepConfig& cfg, std::mt19937_64* rng) {
  if (mapped.layers.empty()) {
    throw ShapeError("mapped model has no layers");
  }
  if (cfg.thresholds.empty()) {
    throw InputError("the threshold sweep is empty");
  }
  LayerDrive drive;
  drive.source = cfg.knob_source;
  drive.params = cfg.analog;
  drive.profile = cfg.profile;
  drive.noise_rng = rng;

  BinaryVector h = image;
  for (std::size_t l = 0; l + 1 < mapped.layers.size(); ++l) {
    h = execute_layer(mapped.layers[l], h, drive);
  }

  const auto& output = mapped.layers.back();
  InferenceTrace trace;
  trace.passes = cfg.thresholds.size();
  trace.classes = output.out_dim;
  trace.per_pass_outputs.assign(trace.passes * trace.classes, 0);
  trace.ones_count.assign(trace.classes, 0);
  for (std::size_t p = 0; p < trace.passes; ++p) {
    drive.swept_threshold = cfg.thresholds[p];
    const BinaryVector o = execute_layer(output, h, drive);
    for (std::size_t c = 0; c < trace.classes; ++c) {
      if (o[c] == 1) {
        trace.per_pass_outputs[p * trace.classes + c] = 1;
        ++trace.ones_count[c];
      }
    }
  }
  const Vote v = vote(trace.ones_count, trace.passes, cfg.vote_rule);
  trace.predicted = v.predicted;
  trace.tie = v.tie;
  return trace;
}

}  // namespace

InferenceTrace infer(const MappedModel& mapped, const BinaryVector& image,
                     const SweepConfig& cfg) {
  if (cfg.noise_seed.has_value()) {
    std::mt19937_64 rng(*cfg.noise_seed);
    return infer_seeded(mapped, image, cfg, &rng);
  }
  return infer_seeded(mapped, image, cfg, nullptr);
}

bool trace_monotone(const InferenceTrace& trace) {
  for (std::size_t c = 0; c < trace.classes; ++c) {
    bool seen_one = false;
    for (std::size_t p = 0; p < trace.passes; ++p) {
      const bool one = trace.output(p, c) != 0;
      if (seen_one && !one) return false;
      seen_one = seen_one || one;
    }
  }
  return true;
}

AccuracyReport evaluate(const MappedModel& mapped, const BinaryDataset& dataset,
                        const SweepConfig& cfg) {
  if (dataset.size() == 0) {
    throw InputError("evaluation dataset is empty");
  }
  const std::size_t passes = cfg.thresholds.size();
  AccuracyReport report;
  report.images = dataset.size();
  report.passes = passes;
  report.thresholds = cfg.thresholds;
  std::vector<std::size_t> hits1(passes, 0), hits2(passes, 0), ties(passes, 0);

  std::vector<std::uint32_t> prefix_ones;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    std::optional<std::mt19937_64> rng;
    if (cfg.noise_seed.has_value()) {
      // One independent, reproducible stream per image.
      rng.emplace(*cfg.noise_seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
    }
    const InferenceTrace trace = infer_seeded(
        mapped, dataset.image_vector(i), cfg, rng ? &*rng : nullptr);
    if (!trace_monotone(trace)) ++report.monotonicity_violations;

    const int label = dataset.labels[i];
    prefix_ones.assign(trace.classes, 0);
    for (std::size_t k = 0; k < passes; ++k) {
      for (std::size_t c = 0; c < trace.classes; ++c) {
        prefix_ones[c] += trace.output(k, c);
      }
      const Vote v = vote(prefix_ones, k + 1, cfg.vote_rule);
      if (v.predicted == label) ++hits1[k];
      std::size_t strictly_above = 0;
      for (std::size_t c = 0; c < trace.classes; ++c) {
        if (static_cast<int>(c) != label &&
            prefix_ones[c] > prefix_ones[label]) {
          ++strictly_above;
        }
      }
      if (strictly_above <= 1) ++hits2[k];
      if (v.tie) ++ties[k];
    }
  }

  const auto n = static_cast<double>(report.images);
  report.prefix_top1.resize(passes);
  report.prefix_top2.resize(passes);
  report.prefix_tie_rate.resize(passes);
  for (std::size_t k = 0; k < passes; ++k) {
    report.prefix_top1[k] = static_cast<double>(hits1[k]) / n;
    report.prefix_top2[k] = static_cast<double>(hits2[k]) / n;
    report.prefix_tie_rate[k] = static_cast<double>(ties[k]) / n;
  }
  report.top1 = report.prefix_top1.back();
  report.top2 = report.prefix_top2.back();
  report.tie_rate = report.prefix_tie_rate.back();
  return report;
}

std::string report_csv(const AccuracyReport& report) {
  std::string csv = "k,threshold_max,top1,top2,tie_rate\n";
  char line[128];
  for (std::size_t k = 0; k < report.passes; ++k) {
    std::snprintf(line, sizeof(line), "%zu,%u,%.6f,%.6f,%.6f\n", k + 1,
                  report.thresholds[k], report.prefix_top1[k],
                  report.prefix_top2[k], report.prefix_tie_rate[k]);
    csv += line;
  }
  return csv;
}

std::string report_summary(const AccuracyReport& report) {
  char line[256];
  std::snprintf(line, sizeof(line),
                "{\"images\": %zu, \"passes\": %zu, \"threshold_max\": %u, "
                "\"top1\": %.6f, \"top2\": %.6f, \"tie_rate\": %.6f, "
                "\"monotonicity_violations\": %zu}",
                report.images, report.passes,
                report.thresholds.empty() ? 0 : report.thresholds.back(),
                report.top1, report.top2, report.tie_rate,
                report.monotonicity_violations);
  return line;
}

}  // namespace cambnn

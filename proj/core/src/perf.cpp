#include "cambnn/perf.hpp"

#include <cmath>

namespace cambnn {

namespace {

void check_timing(const TimingConfig& t) {
  if (!(t.clock_hz > 0.0)) {
    throw InputError("clock frequency must be positive");
  }
  if (!(t.batch_size >= 1.0)) {
    throw InputError("batch size must be at least 1");
  }
  if (t.overhead_cycles_per_image < 0.0 || t.tuning_cycles_per_retune < 0.0) {
    throw InputError("cycle overheads must be non-negative");
  }
  if (t.passes == 0) {
    throw InputError("pass count must be positive");
  }
}

void check_mapped(const MappedModel& mapped) {
  if (mapped.layers.empty()) {
    throw ShapeError("mapped model has no layers");
  }
}

double search_cycles(const MappedModel& mapped, const TimingConfig& t) {
  double cycles = 0.0;
  for (std::size_t l = 0; l + 1 < mapped.layers.size(); ++l) {
    cycles += static_cast<double>(mapped.layers[l].cycles.size());
  }
  cycles += static_cast<double>(t.passes) *
            static_cast<double>(mapped.layers.back().cycles.size());
  return cycles;
}

}  // namespace

double cycles_per_inference(const MappedModel& mapped, const TimingConfig& t) {
  check_mapped(mapped);
  check_timing(t);
  const double tuning =
      static_cast<double>(t.passes) * t.tuning_cycles_per_retune / t.batch_size;
  return search_cycles(mapped, t) + t.overhead_cycles_per_image + tuning;
}

double throughput(const MappedModel& mapped, const TimingConfig& t) {
  return t.clock_hz / cycles_per_inference(mapped, t);
}

Efficiency efficiency(const MappedModel& mapped, const TimingConfig& t,
                      const PowerConfig& p) {
  check_mapped(mapped);
  check_timing(t);
  if (!(p.power_watts > 0.0)) {
    throw InputError("power must be positive");
  }
  double cell_searches = 0.0;
  for (std::size_t l = 0; l < mapped.layers.size(); ++l) {
    const bool swept = l + 1 == mapped.layers.size();
    const double repeats = swept ? static_cast<double>(t.passes) : 1.0;
    for (const auto& cycle : mapped.layers[l].cycles) {
      cell_searches += repeats * static_cast<double>(cycle.active_bits);
    }
  }
  const double ops_per_image =
      cell_searches * static_cast<double>(p.ops_per_cell_search);
  Efficiency e;
  const double rate = throughput(mapped, t);
  e.inferences_per_joule = rate / p.power_watts;
  e.ops_per_second = ops_per_image * rate;
  e.ops_per_joule = e.ops_per_second / p.power_watts;
  return e;
}

double peak_ops_per_second(const CamGeometry& geometry, const TimingConfig& t,
                           const PowerConfig& p) {
  check_timing(t);
  return static_cast<double>(geometry.total_bits()) *
         static_cast<double>(p.ops_per_cell_search) * t.clock_hz;
}

TimingConfig calibrate_overhead(double target_inferences_per_second,
                                const MappedModel& mapped, TimingConfig t) {
  check_mapped(mapped);
  check_timing(t);
  if (!(target_inferences_per_second > 0.0)) {
    throw InputError("target throughput must be positive");
  }
  TimingConfig zero = t;
  zero.overhead_cycles_per_image = 0.0;
  const double floor_cycles = cycles_per_inference(mapped, zero);
  const double ceiling = t.clock_hz / floor_cycles;
  if (target_inferences_per_second > ceiling * (1.0 + 1e-12)) {
    throw CalibrationError(
        "target " + std::to_string(target_inferences_per_second) +
        " inf/s exceeds the zero-overhead ceiling of " + std::to_string(ceiling));
  }
  t.overhead_cycles_per_image =
      std::max(0.0, t.clock_hz / target_inferences_per_second - floor_cycles);
  return t;
}

}  // namespace cambnn

#pragma once

#include <cstdint>

#include "cambnn/mapper.hpp"

namespace cambnn {

struct TimingConfig {
  double clock_hz = 25e6;
  // Fixed per-image cost outside the search cycles. Real-valued: the
  // calibration fit is an average over images, not a cycle count.
  double overhead_cycles_per_image = 0.0;
  // Cost of moving the three knob voltages, paid once per `batch_size`
  // images and once per pass (the sweep retunes between passes).
  double tuning_cycles_per_retune = 0.0;
  double batch_size = 1.0;  // images per retune, >= 1 (may be infinite)
  std::uint32_t passes = 33;
};

struct PowerConfig {
  double power_watts = 0.8e-3;
  // One XNOR plus one accumulate-equivalent per programmed cell per
  // search. Stated in every report; TOPS figures are convention-bound.
  std::uint32_t ops_per_cell_search = 2;
};

// Hidden-layer cycles once, output-layer cycles once per pass, plus the
// per-image overhead and the amortized tuning term
// passes * tuning_cycles_per_retune / batch_size.
double cycles_per_inference(const MappedModel& mapped, const TimingConfig& t);

// clock_hz / cycles_per_inference.
double throughput(const MappedModel& mapped, const TimingConfig& t);

struct Efficiency {
  double inferences_per_joule = 0.0;
  double ops_per_second = 0.0;
  double ops_per_joule = 0.0;
};

// ops_per_second counts programmed weight + constant cells actually
// searched: sum over executed cycles of that cycle's active cells, times
// ops_per_cell_search, times throughput. Overhead cycles contribute no
// operations.
Efficiency efficiency(const MappedModel& mapped, const TimingConfig& t,
                      const PowerConfig& p);

// Upper bound with every cell of the device searched every cycle.
double peak_ops_per_second(const CamGeometry& geometry, const TimingConfig& t,
                           const PowerConfig& p);

// Solves overhead_cycles_per_image so throughput hits the target, leaving
// the tuning term as configured. Throws CalibrationError when the target
// exceeds the zero-overhead ceiling.
TimingConfig calibrate_overhead(double target_inferences_per_second,
                                const MappedModel& mapped, TimingConfig t);

// Fixed silicon facts echoed by reports.
struct SiliconMetadata {
  const char* technology = "65 nm CMOS";
  double supply_mv = 1200.0;
  std::size_t capacity_bits = 131072;  // four 32-kbit banks
  double macro_area_mm2 = 0.87;
  double bank_area_mm2 = 0.21;
};

}  // namespace cambnn

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cambnn/errors.hpp"

namespace cambnn {

// One search-voltage operating point, in millivolts.
//   v_ref  : matchline sense reference
//   v_eval : gate drive of the evaluation transistors
//   v_st   : sampling-clock control (higher v_st samples earlier)
struct AnalogKnobs {
  double v_ref_mv = 0.0;
  double v_eval_mv = 0.0;
  double v_st_mv = 0.0;

  bool operator==(const AnalogKnobs&) const = default;
};

// How a knob triple is turned into an integer tolerance.
//   Lookup   : nearest entry in a measured profile table
//   Physical : closed-form matchline discharge model
enum class AnalogMode : std::uint8_t {
  Lookup,
  Physical,
};

// Parameters of the matchline discharge model. Voltages are in mV; c_ml,
// g0 and t0 are in arbitrary consistent units (only their combinations
// reach the threshold computation, so the absolute scale is free).
struct DischargeParams {
  double v_dd_mv = 1200.0;  // supply / precharge level
  double v_th_mv = 300.0;   // evaluation transistor threshold
  double c_ml = 1.0;        // matchline capacitance
  double g0 = 1.0;          // per-cell conductance at v_eval = v_dd
  double t0 = 1.0;          // sampling time at v_st = v_dd
  double noise_sigma = 0.0; // relative sigma of per-search conductance noise
  std::uint32_t threshold_cap = 2048;  // largest tolerance the model reports
  AnalogMode mode = AnalogMode::Physical;

  // Sampling time shrinks as v_st grows: t_st = t0 * v_dd / v_st.
  double t_st_of(double v_st_mv_value) const;
};

// Per-cell pulldown conductance as a function of the evaluation voltage.
// Zero at or below v_th, quadratic above it, g0 at v_dd.
double conductance(double v_eval_mv, const DischargeParams& params);

// Matchline voltage after discharging for time t with `mismatches` active
// pulldown cells: v_dd * exp(-mismatches * g * t / c_ml).
double ml_voltage_mv(std::uint32_t mismatches, double t,
                     const AnalogKnobs& knobs, const DischargeParams& params);

// A measured (knobs -> tolerance) table, one row per operating point.
struct HdProfileEntry {
  AnalogKnobs knobs;
  std::uint32_t threshold = 0;
};

class HdProfile {
 public:
  HdProfile() = default;
  explicit HdProfile(std::vector<HdProfileEntry> entries);

  // Factory-measured defaults covering tolerances 0..36 in steps of 4.
  static HdProfile silicon_default();

  // Text file, one entry per line: "v_ref_mv v_eval_mv v_st_mv threshold".
  // Blank lines and '#' comments are ignored. Throws FormatError.
  static HdProfile load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<HdProfileEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  // Tolerance of the entry nearest to `knobs` (exact match preferred,
  // otherwise smallest Euclidean distance in mV, ties to the first entry).
  // Throws ProfileError when the profile is empty.
  std::uint32_t lookup(const AnalogKnobs& knobs) const;

  // Knobs of the first entry with exactly this tolerance, if any.
  std::optional<AnalogKnobs> knobs_for(std::uint32_t threshold) const;

 private:
  std::vector<HdProfileEntry> entries_;
};

// Integer Hamming-distance tolerance realized by a knob triple: the largest
// mismatch count whose matchline still reads above v_ref at sampling time.
// Physical mode evaluates the discharge model; Lookup mode consults
// `profile` (or the silicon default when null). Monotone: non-increasing
// in v_ref and v_eval, non-decreasing in v_st.
std::uint32_t hd_threshold_of(const AnalogKnobs& knobs,
                              const DischargeParams& params,
                              const HdProfile* profile = nullptr);

// As hd_threshold_of in Physical mode, with per-search conductance scaled
// by `g_scale` (variation hook; g_scale 1.0 is nominal).
std::uint32_t hd_threshold_physical(const AnalogKnobs& knobs,
                                    const DischargeParams& params,
                                    double g_scale = 1.0);

// Knob triple whose realized tolerance equals `target` exactly, found by
// fixing v_eval and v_st on a deterministic grid and solving for v_ref in
// closed form. Throws CalibrationError when target > params.threshold_cap.
AnalogKnobs calibrate_knobs(std::uint32_t target, const DischargeParams& params);

// Knobs for the majority decision point of a row of the given width:
// tolerance floor((row_width - 1) / 2).
AnalogKnobs majority_knobs(std::size_t row_width, const DischargeParams& params);

}  // namespace cambnn

#include "cambnn/analog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cambnn {

namespace {

constexpr double kMinVoltageMv = 1e-3;

void check_voltage(const char* name, double value, double v_dd_mv) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(name) + " is not finite");
  }
  if (value <= 0.0 || value > v_dd_mv) {
    std::ostringstream os;
    os << name << " = " << value << " mV outside legal range (0, " << v_dd_mv
       << "]";
    throw InputError(os.str());
  }
}

void check_knobs(const AnalogKnobs& knobs, const DischargeParams& params) {
  check_voltage("v_ref", knobs.v_ref_mv, params.v_dd_mv);
  check_voltage("v_eval", knobs.v_eval_mv, params.v_dd_mv);
  check_voltage("v_st", knobs.v_st_mv, params.v_dd_mv);
}

double ml_voltage_for_conductance(double mismatches, double g, double t,
                                  const DischargeParams& params) {
  return params.v_dd_mv * std::exp(-mismatches * g * t / params.c_ml);
}

}  // namespace

double DischargeParams::t_st_of(double v_st_mv_value) const {
  if (!std::isfinite(v_st_mv_value) || v_st_mv_value <= 0.0) {
    throw InputError("v_st must be a positive voltage");
  }
  return t0 * v_dd_mv / v_st_mv_value;
}

double conductance(double v_eval_mv, const DischargeParams& params) {
  if (!std::isfinite(v_eval_mv)) {
    throw NumericError("v_eval is not finite");
  }
  if (v_eval_mv <= params.v_th_mv) return 0.0;
  const double overdrive =
      (v_eval_mv - params.v_th_mv) / (params.v_dd_mv - params.v_th_mv);
  return params.g0 * overdrive * overdrive;
}

double ml_voltage_mv(std::uint32_t mismatches, double t,
                     const AnalogKnobs& knobs, const DischargeParams& params) {
  check_knobs(knobs, params);
  if (!std::isfinite(t) || t < 0.0) {
    throw InputError("discharge time must be non-negative");
  }
  const double g = conductance(knobs.v_eval_mv, params);
  return ml_voltage_for_conductance(static_cast<double>(mismatches), g, t, params);
}

HdProfile::HdProfile(std::vector<HdProfileEntry> entries)
    : entries_(std::move(entries)) {}

HdProfile HdProfile::silicon_default() {
  return HdProfile({
      {{1200.0, 1200.0, 1200.0}, 0},
      {{750.0, 950.0, 1200.0}, 4},
      {{775.0, 600.0, 1200.0}, 8},
      {{1175.0, 350.0, 1150.0}, 12},
      {{950.0, 525.0, 1100.0}, 16},
      {{1025.0, 475.0, 1000.0}, 20},
      {{950.0, 500.0, 1025.0}, 24},
      {{775.0, 600.0, 1100.0}, 28},
      {{1175.0, 400.0, 1150.0}, 32},
      {{1000.0, 475.0, 725.0}, 36},
  });
}

HdProfile HdProfile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open profile file " + path.string());
  }
  std::vector<HdProfileEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    HdProfileEntry entry;
    if (!(fields >> entry.knobs.v_ref_mv)) continue;  // blank line
    long long threshold = -1;
    if (!(fields >> entry.knobs.v_eval_mv >> entry.knobs.v_st_mv >> threshold) ||
        threshold < 0) {
      throw FormatError("profile " + path.string() + " line " +
                        std::to_string(lineno) +
                        ": expected 'v_ref v_eval v_st threshold'");
    }
    std::string extra;
    if (fields >> extra) {
      throw FormatError("profile " + path.string() + " line " +
                        std::to_string(lineno) + ": trailing tokens");
    }
    entry.threshold = static_cast<std::uint32_t>(threshold);
    entries.push_back(entry);
  }
  if (entries.empty()) {
    throw FormatError("profile " + path.string() + " has no entries");
  }
  return HdProfile(std::move(entries));
}

void HdProfile::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw FormatError("cannot write profile file " + path.string());
  }
  out << "# v_ref_mv v_eval_mv v_st_mv threshold\n";
  for (const auto& e : entries_) {
    out << e.knobs.v_ref_mv << ' ' << e.knobs.v_eval_mv << ' '
        << e.knobs.v_st_mv << ' ' << e.threshold << '\n';
  }
}

std::uint32_t HdProfile::lookup(const AnalogKnobs& knobs) const {
  if (entries_.empty()) {
    throw ProfileError("lookup against an empty knob profile");
  }
  const HdProfileEntry* best = nullptr;
  double best_d2 = 0.0;
  for (const auto& e : entries_) {
    if (e.knobs == knobs) return e.threshold;
    const double dr = e.knobs.v_ref_mv - knobs.v_ref_mv;
    const double de = e.knobs.v_eval_mv - knobs.v_eval_mv;
    const double ds = e.knobs.v_st_mv - knobs.v_st_mv;
    const double d2 = dr * dr + de * de + ds * ds;
    if (best == nullptr || d2 < best_d2) {
      best = &e;
      best_d2 = d2;
    }
  }
  return best->threshold;
}

std::optional<AnalogKnobs> HdProfile::knobs_for(std::uint32_t threshold) const {
  for (const auto& e : entries_) {
    if (e.threshold == threshold) return e.knobs;
  }
  return std::nullopt;
}

std::uint32_t hd_threshold_physical(const AnalogKnobs& knobs,
                                    const DischargeParams& params,
                                    double g_scale) {
  check_knobs(knobs, params);
  const std::uint32_t cap = params.threshold_cap;
  if (knobs.v_ref_mv >= params.v_dd_mv) return 0;
  const double g = conductance(knobs.v_eval_mv, params) * g_scale;
  const double t = params.t_st_of(knobs.v_st_mv);
  if (g <= 0.0 || t <= 0.0) return cap;

  // Largest m with v_dd * exp(-m g t / c_ml) > v_ref, i.e. m < L.
  const double L =
      std::log(params.v_dd_mv / knobs.v_ref_mv) * params.c_ml / (g * t);
  if (L >= static_cast<double>(cap) + 1.0) return cap;
  long long m = static_cast<long long>(std::ceil(L)) - 1;
  m = std::max(m, 0LL);

  // Settle floating point at the boundary with the model itself.
  auto above_ref = [&](long long mismatches) {
    return ml_voltage_for_conductance(static_cast<double>(mismatches), g, t,
                                      params) > knobs.v_ref_mv;
  };
  while (m + 1 <= static_cast<long long>(cap) && above_ref(m + 1)) ++m;
  while (m > 0 && !above_ref(m)) --m;
  return static_cast<std::uint32_t>(std::min<long long>(m, cap));
}

std::uint32_t hd_threshold_of(const AnalogKnobs& knobs,
                              const DischargeParams& params,
                              const HdProfile* profile) {
  if (params.mode == AnalogMode::Lookup) {
    if (profile != nullptr) return profile->lookup(knobs);
    static const HdProfile fallback = HdProfile::silicon_default();
    return fallback.lookup(knobs);
  }
  return hd_threshold_physical(knobs, params);
}

AnalogKnobs calibrate_knobs(std::uint32_t target, const DischargeParams& params) {
  if (target > params.threshold_cap) {
    throw CalibrationError("tolerance " + std::to_string(target) +
                           " outside achievable range [0, " +
                           std::to_string(params.threshold_cap) + "]");
  }
  // Fix v_st mid-range and walk v_eval down a deterministic overdrive grid;
  // for each conductance the reference that puts the decision boundary at
  // target + 0.5 mismatches follows in closed form.
  const double v_st = 0.5 * params.v_dd_mv;
  const double t = params.t_st_of(v_st);
  static constexpr double kOverdriveGrid[] = {0.5,  0.4,  0.3,   0.2,
                                              0.12, 0.07, 0.04,  0.02,
                                              0.01, 5e-3, 2e-3,  1e-3,
                                              5e-4, 2e-4, 1e-4};
  for (double f : kOverdriveGrid) {
    const double v_eval = params.v_th_mv + f * (params.v_dd_mv - params.v_th_mv);
    const double g = conductance(v_eval, params);
    if (g <= 0.0) continue;
    const double exponent =
        (static_cast<double>(target) + 0.5) * g * t / params.c_ml;
    const double v_ref = params.v_dd_mv * std::exp(-exponent);
    if (v_ref < kMinVoltageMv) continue;
    const AnalogKnobs knobs{v_ref, v_eval, v_st};
    if (hd_threshold_physical(knobs, params) == target) return knobs;
  }
  throw CalibrationError("no knob setting realizes tolerance " +
                         std::to_string(target) + " within range [0, " +
                         std::to_string(params.threshold_cap) + "]");
}

AnalogKnobs majority_knobs(std::size_t row_width, const DischargeParams& params) {
  if (row_width == 0) {
    throw InputError("majority point of an empty row is undefined");
  }
  const auto target = static_cast<std::uint32_t>((row_width - 1) / 2);
  return calibrate_knobs(target, params);
}

}  // namespace cambnn

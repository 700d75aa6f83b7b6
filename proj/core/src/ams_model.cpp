#include "metablue/ams_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metablue/common.hpp"
#include "metablue/errors.hpp"

namespace metablue {

void MaterialPair::validate() const {
  if (c_solid <= 0.0 || c_water <= 0.0 || atten_prefactor <= 0.0 ||
      atten_exponent <= 0.0) {
    throw std::invalid_argument("MaterialPair: all fields must be positive");
  }
  if (c_solid == c_water) {
    throw std::invalid_argument("MaterialPair: sound speeds must differ");
  }
}

void UnitCellSpec::validate() const {
  if (total_len <= 0.0 || solid_len < 0.0 || solid_len > total_len) {
    throw std::invalid_argument(
        "UnitCellSpec: need 0 <= solid_len <= total_len, total_len > 0");
  }
}

void MetasurfaceConfig::validate() const {
  if (cells.size() < 2) {
    throw std::invalid_argument("MetasurfaceConfig: need at least 2 cells");
  }
  if (cell_angles.size() != cells.size()) {
    throw std::invalid_argument(
        "MetasurfaceConfig: cell_angles length must match cells");
  }
  if (outer_radius <= 0.0) {
    throw std::invalid_argument("MetasurfaceConfig: outer_radius must be > 0");
  }
  materials.validate();
  for (const auto& c : cells) c.validate();
  const double pitch = kTwoPi / static_cast<double>(cells.size());
  for (std::size_t i = 0; i < cell_angles.size(); ++i) {
    if (i > 0 && cell_angles[i] <= cell_angles[i - 1]) {
      throw std::invalid_argument(
          "MetasurfaceConfig: cell_angles must be strictly increasing");
    }
    const double expected = cell_angles.front() + pitch * static_cast<double>(i);
    if (std::abs(cell_angles[i] - expected) > 1e-9) {
      throw std::invalid_argument(
          "MetasurfaceConfig: cell_angles must be uniform over [0, 2pi)");
    }
  }
  if (cell_angles.front() < 0.0 || cell_angles.back() >= kTwoPi) {
    throw std::invalid_argument(
        "MetasurfaceConfig: cell_angles must lie in [0, 2pi)");
  }
}

MetasurfaceConfig MetasurfaceConfig::uniform(std::size_t n, double cell_len,
                                             double outer_radius,
                                             const MaterialPair& materials) {
  MetasurfaceConfig cfg;
  cfg.outer_radius = outer_radius;
  cfg.materials = materials;
  cfg.cells.assign(n, UnitCellSpec{0.0, cell_len});
  cfg.cell_angles.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cfg.cell_angles[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
  }
  return cfg;
}

std::size_t DirectionalGainTable::nearest_angle(double theta) const {
  std::size_t best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double d = std::abs(wrap_angle(theta - angles[i]));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::complex<double> DirectionalGainTable::gain(double theta, double f) const {
  return gain_at_row(nearest_angle(theta), f);
}

std::complex<double> DirectionalGainTable::gain_at_row(std::size_t row,
                                                       double f) const {
  if (f <= freqs.front() || f >= freqs.back()) {
    if (f == freqs.front()) return at(row, 0);
    if (f == freqs.back()) return at(row, freqs.size() - 1);
    return {1.0, 0.0};  // unit gain outside the calibrated band
  }
  const auto it = std::upper_bound(freqs.begin(), freqs.end(), f);
  const std::size_t hi = static_cast<std::size_t>(it - freqs.begin());
  const std::size_t lo = hi - 1;
  const double t = (f - freqs[lo]) / (freqs[hi] - freqs[lo]);
  return at(row, lo) * (1.0 - t) + at(row, hi) * t;
}

void DirectionalGainTable::validate() const {
  if (angles.empty() || freqs.empty() ||
      gains.size() != angles.size() * freqs.size()) {
    throw std::invalid_argument("DirectionalGainTable: inconsistent sizes");
  }
  for (std::size_t i = 1; i < angles.size(); ++i) {
    if (angles[i] <= angles[i - 1]) {
      throw std::invalid_argument("DirectionalGainTable: angles not increasing");
    }
  }
  for (std::size_t i = 1; i < freqs.size(); ++i) {
    if (freqs[i] <= freqs[i - 1]) {
      throw std::invalid_argument("DirectionalGainTable: freqs not increasing");
    }
  }
  for (const auto& g : gains) {
    if (!std::isfinite(g.real()) || !std::isfinite(g.imag())) {
      throw std::invalid_argument("DirectionalGainTable: non-finite gain");
    }
  }
}

DirectionalGainTable DirectionalGainTable::isotropic(std::vector<double> angles,
                                                     std::vector<double> freqs) {
  DirectionalGainTable t;
  t.angles = std::move(angles);
  t.freqs = std::move(freqs);
  t.gains.assign(t.angles.size() * t.freqs.size(), {1.0, 0.0});
  return t;
}

double unit_cell_phase(const UnitCellSpec& cell, double f,
                       const MaterialPair& mats) {
  if (f <= 0.0) throw std::invalid_argument("unit_cell_phase: f must be > 0");
  cell.validate();
  const double lambda_solid = mats.c_solid / f;
  const double lambda_water = mats.c_water / f;
  const double cycles = cell.solid_len / lambda_solid +
                        (cell.total_len - cell.solid_len) / lambda_water;
  double frac = cycles - std::floor(cycles);
  if (frac >= 1.0) frac = 0.0;
  return frac * kTwoPi;
}

double attenuation_db_per_cm(const MaterialPair& mats, double f) {
  if (f <= 0.0) {
    throw std::invalid_argument("attenuation_db_per_cm: f must be > 0");
  }
  return mats.atten_prefactor * std::pow(f, mats.atten_exponent);
}

double amplitude_transmission(const UnitCellSpec& cell, double f,
                              const MaterialPair& mats) {
  if (f <= 0.0) {
    throw std::invalid_argument("amplitude_transmission: f must be > 0");
  }
  const double d_cm = cell.solid_len * 100.0;
  const double loss_db = d_cm * attenuation_db_per_cm(mats, f);
  return std::pow(10.0, -loss_db / 20.0);
}

double min_full_coverage_thickness(const MaterialPair& mats, double f) {
  if (f <= 0.0) {
    throw std::invalid_argument("min_full_coverage_thickness: f must be > 0");
  }
  const double dc = std::abs(mats.c_solid - mats.c_water);
  if (dc == 0.0) {
    throw std::invalid_argument(
        "min_full_coverage_thickness: degenerate materials, equal sound speeds");
  }
  return mats.c_solid * mats.c_water / (dc * f);
}

std::complex<double> far_field_pressure(const MetasurfaceConfig& cfg,
                                        double theta, double f,
                                        std::complex<double> p0) {
  if (f <= 0.0) throw std::invalid_argument("far_field_pressure: f must be > 0");
  const double lambda = cfg.materials.c_water / f;
  const double rim = kTwoPi * cfg.outer_radius / lambda;
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    const double delta = wrap_angle(theta - cfg.cell_angles[i]);
    if (std::abs(delta) >= kPi / 2.0) continue;  // back half of the array
    const double a = amplitude_transmission(cfg.cells[i], f, cfg.materials);
    const double phi = unit_cell_phase(cfg.cells[i], f, cfg.materials);
    const double cosd = std::cos(delta);
    acc += std::polar(a * cosd, phi + rim * cosd);
  }
  return p0 * acc;
}

DirectionalGainTable build_gain_table(const MetasurfaceConfig& cfg,
                                      std::span<const double> angles,
                                      std::span<const double> freqs) {
  if (angles.empty() || freqs.empty()) {
    throw std::invalid_argument("build_gain_table: empty grid");
  }
  DirectionalGainTable t;
  t.angles.assign(angles.begin(), angles.end());
  t.freqs.assign(freqs.begin(), freqs.end());
  t.gains.resize(angles.size() * freqs.size());
  parallel_for(angles.size(), [&](std::size_t m) {
    for (std::size_t l = 0; l < freqs.size(); ++l) {
      t.gains[m * freqs.size() + l] =
          far_field_pressure(cfg, angles[m], freqs[l], {1.0, 0.0});
    }
  });
  return t;
}

std::complex<double> far_field_pressure_vertical(const MetasurfaceConfig& cfg,
                                                 double bearing,
                                                 double elevation, double f,
                                                 std::complex<double> p0) {
  if (f <= 0.0) {
    throw std::invalid_argument("far_field_pressure_vertical: f must be > 0");
  }
  const double cap = deg2rad(80.0);
  const double eps = std::clamp(elevation, -cap, cap);
  const double stretch = (1.0 + kVerticalAsymmetry * std::sin(eps)) /
                         std::cos(eps);
  const double lambda = cfg.materials.c_water / f;
  const double rim = kTwoPi * cfg.outer_radius / lambda * std::cos(eps);
  const double pitch = kTwoPi / static_cast<double>(cfg.cells.size());
  const auto m = static_cast<double>(kSectorSubdivisions);
  std::complex<double> acc(0.0, 0.0);
  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    const UnitCellSpec oblique{cfg.cells[i].solid_len * stretch,
                               cfg.cells[i].total_len * stretch};
    const double a = amplitude_transmission(oblique, f, cfg.materials);
    const double phi = unit_cell_phase(oblique, f, cfg.materials);
    std::complex<double> sector(0.0, 0.0);
    for (std::size_t s = 0; s < kSectorSubdivisions; ++s) {
      const double psi =
          cfg.cell_angles[i] +
          pitch * ((static_cast<double>(s) + 0.5) / m - 0.5);
      const double delta = wrap_angle(bearing - psi);
      if (std::abs(delta) >= kPi / 2.0) continue;
      const double cosd = std::cos(delta);
      sector += std::polar(cosd / m, rim * cosd);
    }
    acc += std::polar(a, phi) * sector;
  }
  return p0 * acc * std::cos(eps);
}

std::vector<std::complex<double>> vertical_gain_row(
    const MetasurfaceConfig& cfg, double bearing, double elevation,
    std::span<const double> freqs) {
  std::vector<std::complex<double>> row(freqs.size());
  for (std::size_t l = 0; l < freqs.size(); ++l) {
    row[l] = far_field_pressure_vertical(cfg, bearing, elevation, freqs[l],
                                         {1.0, 0.0});
  }
  return row;
}

std::vector<double> default_angle_grid() {
  std::vector<double> v(360);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = deg2rad(static_cast<double>(i));
  return v;
}

std::vector<double> default_elevation_grid() {
  std::vector<double> v(181);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = deg2rad(static_cast<double>(i) - 90.0);
  }
  return v;
}

}  // namespace metablue

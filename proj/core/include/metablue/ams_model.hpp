#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace metablue {

/// Acoustic constants for the solid/water stack a unit cell is made of.
struct MaterialPair {
  double c_solid = 1939.4;          ///< speed of sound in the solid, m/s
  double c_water = 1500.0;          ///< speed of sound in water, m/s
  double atten_prefactor = 3.72e-8; ///< dB * cm^-1 * Hz^-n
  double atten_exponent = 1.39;     ///< power-law exponent, dimensionless

  void validate() const;
};

/// One annular sector: a solid segment plus a water gap of fixed total length.
struct UnitCellSpec {
  double solid_len = 0.0;  ///< m
  double total_len = 0.0;  ///< m

  void validate() const;
};

/// The full circular metasurface: N cells at uniformly spaced center angles.
struct MetasurfaceConfig {
  std::vector<UnitCellSpec> cells;
  double outer_radius = 0.048;  ///< m
  MaterialPair materials;
  std::vector<double> cell_angles;  ///< radians, strictly increasing in [0, 2pi)

  std::size_t cell_count() const { return cells.size(); }
  void validate() const;

  /// N cells of total length cell_len with all solid lengths zero, angles
  /// uniform over [0, 2pi).
  static MetasurfaceConfig uniform(std::size_t n, double cell_len,
                                   double outer_radius,
                                   const MaterialPair& materials);
};

/// Complex directional gain over an (angle x frequency) grid; row-major by
/// angle. This is the central lookup object for waveform shaping and
/// template matching.
struct DirectionalGainTable {
  std::vector<double> angles;               ///< radians, strictly increasing
  std::vector<double> freqs;                ///< Hz, strictly increasing
  std::vector<std::complex<double>> gains;  ///< angles.size() * freqs.size()

  std::size_t angle_count() const { return angles.size(); }
  std::size_t freq_count() const { return freqs.size(); }

  std::complex<double> at(std::size_t m, std::size_t l) const {
    return gains[m * freqs.size() + l];
  }

  /// Index of the grid angle nearest to theta (wrapped distance).
  std::size_t nearest_angle(double theta) const;

  /// Gain at the nearest angle row, linearly interpolated across the
  /// frequency grid; unit gain outside the grid.
  std::complex<double> gain(double theta, double f) const;

  /// Same frequency interpolation for a fixed angle row.
  std::complex<double> gain_at_row(std::size_t row, double f) const;

  void validate() const;

  /// Table of all-ones gains, used to model a bare transmitter.
  static DirectionalGainTable isotropic(std::vector<double> angles,
                                        std::vector<double> freqs);
};

/// Transmission phase of one unit cell at frequency f, radians in [0, 2pi).
double unit_cell_phase(const UnitCellSpec& cell, double f,
                       const MaterialPair& mats);

/// Absorption coefficient of the solid at frequency f, dB/cm.
double attenuation_db_per_cm(const MaterialPair& mats, double f);

/// Amplitude transmission factor of one unit cell at frequency f, in (0, 1].
double amplitude_transmission(const UnitCellSpec& cell, double f,
                              const MaterialPair& mats);

/// Smallest cell length that guarantees the phase of unit_cell_phase spans a
/// full 2*pi as the solid length sweeps [0, D].
double min_full_coverage_thickness(const MaterialPair& mats, double f);

/// Far-field pressure at observation angle theta: coherent sum over the half
/// of the array facing the observer, each cell weighted by its transmission,
/// cell phase, rim phase offset, and projected aperture cos(theta - theta_i).
std::complex<double> far_field_pressure(const MetasurfaceConfig& cfg,
                                        double theta, double f,
                                        std::complex<double> p0);

/// Evaluates far_field_pressure over the grid with unit drive pressure.
DirectionalGainTable build_gain_table(const MetasurfaceConfig& cfg,
                                      std::span<const double> angles,
                                      std::span<const double> freqs);

/// Up/down transit asymmetry of the vertical-plane response. Oblique rays
/// traverse the radial structure over a longer, elevation-signed path
/// (the cavity sits below the cell mid-height), scaling the effective cell
/// transit by (1 + kVerticalAsymmetry * sin(elevation)) / cos(elevation).
inline constexpr double kVerticalAsymmetry = 1.0;

/// Sub-angles used to integrate a cell's contribution across its annular
/// sector in the radiated-field model. The point-cell sum of
/// far_field_pressure is the design formula; radiated captures average the
/// rim phase over each sector's angular extent, which smooths the pattern
/// the way an extended aperture does.
inline constexpr std::size_t kSectorSubdivisions = 5;

/// Radiated far-field response, in and out of the horizontal plane: the
/// active half and aperture weights follow the horizontal bearing, each
/// sector integrates over its angular extent, the rim phase contracts by
/// cos(elevation) (projected aperture), and the cell transit stretches along
/// the oblique path. Elevation is clamped to +-80 degrees.
std::complex<double> far_field_pressure_vertical(const MetasurfaceConfig& cfg,
                                                 double bearing,
                                                 double elevation, double f,
                                                 std::complex<double> p0);

/// One vertical-plane gain row over a frequency grid.
std::vector<std::complex<double>> vertical_gain_row(
    const MetasurfaceConfig& cfg, double bearing, double elevation,
    std::span<const double> freqs);

/// 360 angles at 1 degree starting at 0, radians.
std::vector<double> default_angle_grid();

/// Elevation grid spanning [-90, 90] degrees at 1 degree, radians.
std::vector<double> default_elevation_grid();

}  // namespace metablue

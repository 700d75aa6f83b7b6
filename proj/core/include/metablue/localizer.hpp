#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "metablue/common.hpp"
#include "metablue/estimators.hpp"

namespace metablue {

struct PositionEstimate {
  Vec3 p;
  double residual_norm = 0.0;
  int iterations = 0;
  std::vector<double> per_anchor_residuals;  ///< norm per anchor at the fix
};

/// Global residual weights of the weighted nonlinear least squares; the
/// per-anchor confidences come from each AnchorMeasurement.
struct SolverWeights {
  double w_ang = 1.0;
  double w_rng = 1.0;
  double w_dep = 4.0;  ///< depth residuals are small in meters

  void validate() const;
};

/// Closed-form single-anchor position: anchor plus the bearing ray scaled by
/// the horizontal range, at the measured depth.
PositionEstimate single_anchor_fix(const AnchorMeasurement& m,
                                   const Vec3& anchor);

struct ResidualTriple {
  double ang = 0.0;  ///< signed perpendicular offset from the bearing line, m
  double rng = 0.0;  ///< horizontal-distance mismatch, m
  double dep = 0.0;  ///< depth mismatch, m
};

ResidualTriple residuals(const Vec3& p, const AnchorMeasurement& m,
                         const Vec3& anchor);

/// Levenberg-Marquardt minimization of the weighted squared residuals over
/// all anchors. Init defaults to the mean of the single-anchor fixes, or the
/// anchors' centroid at the mean measured depth if a fix is infeasible.
PositionEstimate solve_wnls(std::span<const AnchorMeasurement> measurements,
                            std::span<const Vec3> anchors,
                            const SolverWeights& weights = {},
                            std::optional<Vec3> init = {});

struct TdmaSlot {
  int anchor_id = 0;
  double start = 0.0;   ///< s
  double length = 0.0;  ///< s
};

/// Consecutive slots in ascending id order. Default slot length is one
/// 2.2 ms anchor frame.
std::vector<TdmaSlot> tdma_schedule(std::span<const int> anchor_ids,
                                    double slot_length = 2.2e-3);

}  // namespace metablue

#include "metablue/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>

#include "metablue/errors.hpp"

namespace metablue {

void SolverWeights::validate() const {
  if (w_ang < 0.0 || w_rng < 0.0 || w_dep < 0.0) {
    throw ConfigError("SolverWeights: weights must be non-negative");
  }
  if (w_ang == 0.0 && w_rng == 0.0 && w_dep == 0.0) {
    throw ConfigError("SolverWeights: at least one weight must be positive");
  }
}

PositionEstimate single_anchor_fix(const AnchorMeasurement& m,
                                   const Vec3& anchor) {
  const double dz = m.depth - anchor.z;
  if (m.range < std::abs(dz)) {
    throw std::invalid_argument(
        "single_anchor_fix: infeasible measurement, range below depth offset");
  }
  const double h = std::sqrt(m.range * m.range - dz * dz);
  PositionEstimate est;
  est.p = anchor + Vec3{h * std::cos(m.bearing), h * std::sin(m.bearing), dz};
  est.per_anchor_residuals = {0.0};
  return est;
}

ResidualTriple residuals(const Vec3& p, const AnchorMeasurement& m,
                         const Vec3& anchor) {
  const Vec3 d = p - anchor;
  ResidualTriple r;
  r.ang = -std::sin(m.bearing) * d.x + std::cos(m.bearing) * d.y;
  r.rng = d.horizontal_norm() - m.horizontal_range;
  r.dep = p.z - m.depth;
  return r;
}

namespace {

// Stacked weighted residual vector: 3 rows per anchor.
Eigen::VectorXd stacked_residuals(const Vec3& p,
                                  std::span<const AnchorMeasurement> ms,
                                  std::span<const Vec3> anchors,
                                  const SolverWeights& w) {
  Eigen::VectorXd r(3 * ms.size());
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const ResidualTriple t = residuals(p, ms[i], anchors[i]);
    r(3 * i + 0) = std::sqrt(w.w_ang * ms[i].w_ang) * t.ang;
    r(3 * i + 1) = std::sqrt(w.w_rng * ms[i].w_rng) * t.rng;
    r(3 * i + 2) = std::sqrt(w.w_dep * ms[i].w_dep) * t.dep;
  }
  return r;
}

}  // namespace

PositionEstimate solve_wnls(std::span<const AnchorMeasurement> measurements,
                            std::span<const Vec3> anchors,
                            const SolverWeights& weights,
                            std::optional<Vec3> init) {
  if (measurements.empty() || measurements.size() != anchors.size()) {
    throw std::invalid_argument("solve_wnls: need one anchor per measurement");
  }
  weights.validate();

  Vec3 p;
  if (init) {
    p = *init;
  } else {
    // Mean of the closed-form fixes; centroid at mean measured depth as the
    // fallback when a fix is infeasible.
    Vec3 acc;
    std::size_t n = 0;
    for (std::size_t i = 0; i < measurements.size(); ++i) {
      try {
        acc = acc + single_anchor_fix(measurements[i], anchors[i]).p;
        ++n;
      } catch (const std::invalid_argument&) {
      }
    }
    if (n > 0) {
      p = acc * (1.0 / static_cast<double>(n));
    } else {
      Vec3 c;
      double zsum = 0.0;
      for (std::size_t i = 0; i < anchors.size(); ++i) {
        c = c + anchors[i];
        zsum += measurements[i].depth;
      }
      p = c * (1.0 / static_cast<double>(anchors.size()));
      p.z = zsum / static_cast<double>(measurements.size());
    }
  }

  const double jac_step = 1e-6;  // m, central differences
  const double step_tol = 1e-6;  // m
  const int max_iters = 100;
  double lambda = 1e-3;

  Eigen::VectorXd r = stacked_residuals(p, measurements, anchors, weights);
  double cost = r.squaredNorm();
  int iter = 0;
  for (; iter < max_iters; ++iter) {
    Eigen::MatrixXd jac(r.size(), 3);
    for (int c = 0; c < 3; ++c) {
      Vec3 hi = p, lo = p;
      (c == 0 ? hi.x : c == 1 ? hi.y : hi.z) += jac_step;
      (c == 0 ? lo.x : c == 1 ? lo.y : lo.z) -= jac_step;
      jac.col(c) = (stacked_residuals(hi, measurements, anchors, weights) -
                    stacked_residuals(lo, measurements, anchors, weights)) /
                   (2.0 * jac_step);
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d jtr = jac.transpose() * r;

    bool stepped = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::Matrix3d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector3d delta = damped.ldlt().solve(-jtr);
      if (!delta.allFinite()) {
        throw SolverError("solve_wnls: singular normal equations");
      }
      const Vec3 cand{p.x + delta(0), p.y + delta(1), p.z + delta(2)};
      const Eigen::VectorXd rc =
          stacked_residuals(cand, measurements, anchors, weights);
      const double cand_cost = rc.squaredNorm();
      if (cand_cost <= cost) {
        p = cand;
        r = rc;
        cost = cand_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = delta.norm() >= step_tol;
        break;
      }
      lambda *= 10.0;
      if (tries == 11) {
        stepped = false;
      }
    }
    if (!stepped) break;
  }
  if (!std::isfinite(cost)) {
    throw SolverError("solve_wnls: diverged to non-finite cost");
  }

  PositionEstimate est;
  est.p = p;
  est.residual_norm = std::sqrt(cost);
  est.iterations = iter;
  est.per_anchor_residuals.resize(measurements.size());
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    est.per_anchor_residuals[i] =
        std::sqrt(r(3 * i) * r(3 * i) + r(3 * i + 1) * r(3 * i + 1) +
                  r(3 * i + 2) * r(3 * i + 2));
  }
  return est;
}

std::vector<TdmaSlot> tdma_schedule(std::span<const int> anchor_ids,
                                    double slot_length) {
  if (anchor_ids.size() > 128) {
    throw std::invalid_argument("tdma_schedule: at most 128 anchors");
  }
  if (slot_length <= 0.0) {
    throw std::invalid_argument("tdma_schedule: slot_length must be > 0");
  }
  std::set<int> seen;
  for (int id : anchor_ids) {
    if (id < 0 || id > 127) {
      throw std::invalid_argument("tdma_schedule: id outside [0, 127]");
    }
    if (!seen.insert(id).second) {
      throw std::invalid_argument("tdma_schedule: duplicate anchor id");
    }
  }
  std::vector<TdmaSlot> slots;
  slots.reserve(seen.size());
  std::size_t i = 0;
  for (int id : seen) {
    slots.push_back({id, slot_length * static_cast<double>(i), slot_length});
    ++i;
  }
  return slots;
}

}  // namespace metablue

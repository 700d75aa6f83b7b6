#include "metablue/tracking.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "metablue/errors.hpp"

namespace metablue {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

Mat6 to_eigen(const std::array<double, 36>& a) {
  Mat6 m;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) m(r, c) = a[r * 6 + c];
  return m;
}

void from_eigen(const Mat6& m, std::array<double, 36>& a) {
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) a[r * 6 + c] = m(r, c);
}

struct Filter {
  Vec6 x = Vec6::Zero();
  Mat6 p = Mat6::Identity();

  void predict(double dt, const Vec3& accel, double q) {
    Mat6 f = Mat6::Identity();
    f(0, 3) = f(1, 4) = f(2, 5) = dt;
    Vec6 u;
    u << 0.5 * dt * dt * accel.x, 0.5 * dt * dt * accel.y,
        0.5 * dt * dt * accel.z, dt * accel.x, dt * accel.y, dt * accel.z;
    x = f * x + u;

    const double q2 = q * q;
    const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt;
    Mat6 qm = Mat6::Zero();
    for (int i = 0; i < 3; ++i) {
      qm(i, i) = q2 * dt4 / 4.0;
      qm(i, i + 3) = qm(i + 3, i) = q2 * dt3 / 2.0;
      qm(i + 3, i + 3) = q2 * dt2;
    }
    p = f * p * f.transpose() + qm;
  }

  void update(const Vec3& z, double r) {
    Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
    h(0, 0) = h(1, 1) = h(2, 2) = 1.0;
    const Eigen::Matrix3d s =
        h * p * h.transpose() + r * r * Eigen::Matrix3d::Identity();
    // With exact measurements and exact dynamics the covariance collapses
    // and S goes singular; the gain step is skipped and the position is
    // pinned directly below.
    if (s.diagonal().minCoeff() > 1e-300) {
      const Eigen::Matrix<double, 6, 3> k =
          p * h.transpose() * s.ldlt().solve(Eigen::Matrix3d::Identity());
      Eigen::Vector3d innov(z.x - x(0), z.y - x(1), z.z - x(2));
      x += k * innov;
      // Joseph form keeps the covariance symmetric positive definite.
      const Mat6 ikh = Mat6::Identity() - k * h;
      p = ikh * p * ikh.transpose() +
          k * (r * r * Eigen::Matrix3d::Identity()) * k.transpose();
      p = 0.5 * (p + p.transpose());
    }
    if (r == 0.0) {
      // Exact measurement: the position components are observed directly.
      x(0) = z.x;
      x(1) = z.y;
      x(2) = z.z;
    }
  }
};

}  // namespace

bool covariance_is_spd(const TrackState& s) {
  const Mat6 p = to_eigen(s.covariance);
  if (!p.isApprox(p.transpose(), 1e-9)) return false;
  Eigen::LLT<Mat6> llt(p);
  return llt.info() == Eigen::Success;
}

std::vector<TrackState> fuse_track(std::span<const TimedFix> fixes,
                                   std::span<const ImuSample> imu,
                                   const FusionParams& params) {
  if (fixes.empty()) return {};
  for (std::size_t i = 1; i < fixes.size(); ++i) {
    if (fixes[i].t <= fixes[i - 1].t) {
      throw std::invalid_argument("fuse_track: fix timestamps not monotone");
    }
  }
  for (std::size_t i = 1; i < imu.size(); ++i) {
    if (imu[i].t <= imu[i - 1].t) {
      throw std::invalid_argument("fuse_track: imu timestamps not monotone");
    }
  }

  Filter kf;
  kf.x << fixes[0].p.x, fixes[0].p.y, fixes[0].p.z, 0.0, 0.0, 0.0;
  kf.p = Mat6::Identity();

  std::vector<TrackState> out;
  out.reserve(fixes.size());
  double now = fixes[0].t;
  std::size_t ii = 0;
  while (ii < imu.size() && imu[ii].t <= now) ++ii;

  auto emit = [&](double t) {
    TrackState s;
    s.timestamp = t;
    for (int i = 0; i < 6; ++i) s.state[static_cast<std::size_t>(i)] = kf.x(i);
    from_eigen(kf.p, s.covariance);
    out.push_back(s);
  };

  kf.update(fixes[0].p, params.fix_noise);
  emit(now);

  for (std::size_t fi = 1; fi < fixes.size(); ++fi) {
    const double target = fixes[fi].t;
    // Integrate IMU segments up to the fix time, zero-order hold on accel.
    while (now < target) {
      Vec3 accel{};
      double seg_end = target;
      if (ii < imu.size() && imu[ii].t <= target) {
        seg_end = imu[ii].t;
        accel = imu[ii].accel;
        ++ii;
      } else if (ii > 0) {
        accel = imu[ii - 1].accel;
      }
      const double dt = seg_end - now;
      if (dt > 0.0) kf.predict(dt, accel, params.process_accel_noise);
      now = seg_end;
    }
    kf.update(fixes[fi].p, params.fix_noise);
    emit(now);
  }
  return out;
}

std::vector<ImuSample> synth_imu(std::span<const TrajectoryPoint> path,
                                 const ImuNoiseParams& noise,
                                 std::uint64_t seed) {
  if (path.size() < 3) {
    throw std::invalid_argument("synth_imu: need at least 3 trajectory points");
  }
  Rng rng(seed);
  std::vector<ImuSample> out(path.size());
  Vec3 bias{};
  for (std::size_t i = 0; i < path.size(); ++i) {
    const std::size_t c = std::min(std::max<std::size_t>(i, 1), path.size() - 2);
    const double dt_prev = path[c].t - path[c - 1].t;
    const double dt_next = path[c + 1].t - path[c].t;
    if (dt_prev <= 0.0 || dt_next <= 0.0) {
      throw std::invalid_argument("synth_imu: trajectory timestamps not monotone");
    }
    const double dt = 0.5 * (dt_prev + dt_next);
    const Vec3 second_diff =
        (path[c + 1].position - path[c].position) * (1.0 / dt_next) -
        (path[c].position - path[c - 1].position) * (1.0 / dt_prev);
    const Vec3 accel = second_diff * (1.0 / dt);

    const double rate = 1.0 / dt;
    const double sigma = noise.accel_noise_density * std::sqrt(rate);
    bias = bias + Vec3{rng.gaussian(), rng.gaussian(), rng.gaussian()} *
                      (noise.bias_walk * std::sqrt(dt));
    out[i].t = path[i].t;
    out[i].accel =
        accel + bias +
        Vec3{rng.gaussian(), rng.gaussian(), rng.gaussian()} * sigma;
  }
  return out;
}

}  // namespace metablue

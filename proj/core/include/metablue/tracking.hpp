#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "metablue/common.hpp"

namespace metablue {

/// Position + velocity filter state with a row-major 6x6 covariance.
struct TrackState {
  double timestamp = 0.0;
  std::array<double, 6> state{};       ///< px py pz vx vy vz
  std::array<double, 36> covariance{};

  Vec3 position() const { return {state[0], state[1], state[2]}; }
  Vec3 velocity() const { return {state[3], state[4], state[5]}; }
};

bool covariance_is_spd(const TrackState& s);

struct TimedFix {
  double t = 0.0;
  Vec3 p;
};

struct ImuSample {
  double t = 0.0;
  Vec3 accel;  ///< m/s^2
};

struct FusionParams {
  double process_accel_noise = 0.05;  ///< m/s^2, drives Q
  double fix_noise = 0.3;             ///< m, position measurement std
};

/// Constant-velocity Kalman filter: IMU acceleration enters the prediction
/// as a control input, position fixes correct the state. Returns one state
/// per fix. Timestamps of both streams must be monotone.
std::vector<TrackState> fuse_track(std::span<const TimedFix> fixes,
                                   std::span<const ImuSample> imu,
                                   const FusionParams& params);

struct TrajectoryPoint {
  double t = 0.0;
  Vec3 position;
};

struct ImuNoiseParams {
  double accel_noise_density = 0.02;  ///< m/s^2 per sqrt(Hz)
  double bias_walk = 1e-4;            ///< m/s^3 random-walk rate
};

/// Synthesizes accelerometer samples along a trajectory: second differences
/// of position plus white noise and a slowly walking bias.
std::vector<ImuSample> synth_imu(std::span<const TrajectoryPoint> path,
                                 const ImuNoiseParams& noise,
                                 std::uint64_t seed);

}  // namespace metablue

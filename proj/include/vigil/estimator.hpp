#pragma once

#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "vigil/physmodel.hpp"
#include "vigil/recovery.hpp"

namespace vigil {

// FIFO capacity to hold entries for hold_time seconds at rate_hz.
int buffer_size(double hold_time, double rate_hz);

// Fixed-capacity FIFO of timestamped values. Pushing to a full buffer pops
// and returns the oldest entry, which is how the delay line advances.
template <typename T>
class FifoBuffer {
 public:
  struct Entry {
    double t;
    T value;
  };

  FifoBuffer() = default;
  explicit FifoBuffer(int capacity) : capacity_(capacity) {}

  void set_capacity(int capacity) { capacity_ = capacity; }
  int capacity() const { return capacity_; }
  size_t size() const { return entries_.size(); }
  bool full() const { return static_cast<int>(entries_.size()) >= capacity_; }

  std::optional<Entry> push(double t, const T& value) {
    entries_.push_back(Entry{t, value});
    if (static_cast<int>(entries_.size()) > capacity_) {
      Entry oldest = entries_.front();
      entries_.pop_front();
      return oldest;
    }
    return std::nullopt;
  }

  void clear() { entries_.clear(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  int capacity_ = 1;
  std::deque<Entry> entries_;
};

// Defense-side estimate of the full vehicle state, emitted every tick.
struct ReferenceState {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat attitude = Quat::Identity();
  Vec3 angular_velocity = Vec3::Zero();     // buffered-corrected estimate
  Vec3 angular_velocity_cs = Vec3::Zero();  // newest-corrected estimate
  Vec3 specific_force = Vec3::Zero();       // body frame model prediction
  Vec3 wind = Vec3::Zero();
  double air_density = 1.225;
};

struct EstimatorOptions {
  double buffer_hold_time = 0.5;   // s; 0 disables the delay line
  double imu_rate_hz = 250.0;
  double fusion_gain = 0.5;        // front-end residual gain per axis
  double gps_pos_gain = 0.25;      // back-end correction gains
  double gps_vel_gain = 0.25;
  double baro_gain = 0.10;
  double mag_gain = 0.10;
  double wind_tau = 2.0;           // s, wind estimator low-pass
};

struct ImuSample {
  int instance_id = -1;
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();
};

// Record of one fused measurement, kept so tests can assert that flagged
// data never reaches the estimate.
struct FusionRecord {
  int instance_id;
  double sample_time;
  double fused_time;
};

// Angular velocity estimator with the measurement/estimate delay lines.
class FrontEnd {
 public:
  void configure(const EstimatorOptions& opts,
                 const std::vector<int>& gyro_instances);

  // Model prediction for this tick; call before correct().
  void predict(const Vec3& torque, const ThrustState& thrust, double dt,
               const PhysicalParams& params);

  // Accepts the tick's validated gyro samples, purges flagged buffers and
  // fuses the delayed measurement when one is available.
  void correct(const std::vector<ImuSample>& validated,
               const std::vector<int>& flagged, double t);

  const Vec3& estimate() const { return omega_; }            // buffered path
  const Vec3& estimate_newest() const { return omega_cs_; }  // newest path
  const std::vector<FusionRecord>& fusion_log() const { return fusion_log_; }

 private:
  EstimatorOptions opts_;
  Vec3 omega_ = Vec3::Zero();
  Vec3 omega_cs_ = Vec3::Zero();
  FifoBuffer<Vec3> estimate_buffer_;
  std::map<int, FifoBuffer<Vec3>> measurement_buffers_;
  std::vector<FusionRecord> fusion_log_;
};

// Estimates the NED wind vector by inverting the drag model on validated
// accelerometer data, low-passed over wind_tau.
class WindEstimator {
 public:
  void configure(double tau) { tau_ = tau; }
  void update(const Vec3& specific_force_meas, const Vec3& ctrl_accel_body,
              const Quat& attitude, const Vec3& velocity, double density,
              const PhysicalParams& params, double dt);
  const Vec3& wind() const { return wind_; }
  void reset(const Vec3& wind) { wind_ = wind; }

 private:
  double tau_ = 2.0;
  Vec3 wind_ = Vec3::Zero();
};

// Position/velocity/attitude filter propagating the physical model and
// applying weighted residual corrections from the selected sources.
struct BackEndCorrections {
  std::optional<Vec3> gps_position;   // m NED
  std::optional<Vec3> gps_velocity;   // m/s NED
  std::optional<double> baro_altitude;  // m above origin (positive up)
  std::optional<double> mag_heading;    // rad
  std::optional<Vec3> accel_specific_force;  // body frame, for wind estimate
};

class ReferenceEstimator {
 public:
  void configure(const EstimatorOptions& opts, const PhysicalParams& params,
                 const std::vector<int>& gyro_instances);
  void reset(const RigidState& initial, const BatteryState& battery,
             double density, double t);

  // Model prediction over one control tick driven by the last actuator
  // setpoints. The returned state is what detectors compare against.
  const ReferenceState& predict(const ControlInput& input,
                                const BatteryState& battery, double dt);

  // Fuses this tick's validated measurements.
  void correct(const std::vector<ImuSample>& validated_gyro,
               const std::vector<int>& flagged_gyro,
               const BackEndCorrections& corrections, double t);

  const ReferenceState& state() const { return state_; }
  const ThrustState& thrust() const { return thrust_; }
  const std::vector<FusionRecord>& imu_fusion_log() const {
    return front_end_.fusion_log();
  }

 private:
  EstimatorOptions opts_;
  PhysicalParams params_;
  FrontEnd front_end_;
  WindEstimator wind_estimator_;
  ReferenceState state_;
  ThrustState thrust_;
  Vec3 last_ctrl_accel_ = Vec3::Zero();
  double time_ = 0.0;
};

}  // namespace vigil

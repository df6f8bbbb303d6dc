#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "polybeam/common.hpp"
#include "polybeam/fft.hpp"
#include "polybeam/geometry.hpp"

namespace polybeam {

// Per-microphone complex sensor responses g_n(omega, dir).
//
// Phase convention (engine-wide): time factor e^{+j omega t}, so an arrival
// delay of tau seconds multiplies the response by e^{-j omega tau}.
class SteeringModel {
 public:
  virtual ~SteeringModel() = default;
  virtual int num_mics() const = 0;
  // omega in rad/s, >= 0.
  virtual Eigen::VectorXcd response(double omega, const Direction& dir) const = 0;
  virtual std::string kind() const = 0;
};

// Plane wave in free field: g_n = exp(-j (omega/c) <u, p_n>) with u the unit
// vector from the array toward the source DoA and the phase referenced to the
// coordinate origin.
class FreeFieldModel : public SteeringModel {
 public:
  FreeFieldModel(ArrayGeometry geometry, double sound_speed = kDefaultSoundSpeed)
      : geometry_(std::move(geometry)), c_(sound_speed) {
    geometry_.validate();
    if (!(c_ > 0.0)) throw InvalidArgument("FreeFieldModel: sound speed <= 0");
  }

  int num_mics() const override { return geometry_.num_mics(); }
  std::string kind() const override { return "free_field"; }
  const ArrayGeometry& geometry() const { return geometry_; }
  double sound_speed() const { return c_; }

  Eigen::VectorXcd response(double omega, const Direction& dir) const override {
    if (omega < 0.0) throw InvalidArgument("steering: omega must be >= 0");
    const Eigen::Vector3d u = dir.unit_vector();
    Eigen::VectorXcd g(num_mics());
    for (int n = 0; n < num_mics(); ++n) {
      const double tau = u.dot(geometry_.mic_positions[n]) / c_;
      g[n] = std::polar(1.0, -omega * tau);
    }
    return g;
  }

 private:
  ArrayGeometry geometry_;
  double c_;
};

namespace detail {

// Surface pressure on a rigid sphere for an incident plane wave, as a
// function of ka and the angle theta between the mic's radial direction and
// the DoA. Series over spherical harmonics:
//   p = (j/(ka)^2) * sum_n (-j)^n (2n+1) P_n(cos theta) / h_n'(ka)
// with h_n the spherical Hankel function of the first kind. Consistent with
// the free-field phase convention above (incident term at the mic equals
// e^{-j ka cos theta}).
//
// Truncation: stop once |term| / |partial sum| < rel_tol; hard cap at
// max_order, exceeded -> NumericError.
inline cdouble rigid_sphere_pressure(double ka, double cos_theta, double rel_tol,
                                     int max_order) {
  if (ka == 0.0) return cdouble(1.0, 0.0);

  // Spherical Bessel derivative: f_n'(x) = f_{n-1}(x) - (n+1)/x * f_n(x),
  // and f_0'(x) = -f_1(x).
  const auto hankel_deriv = [ka](int n) -> cdouble {
    double jd, yd;
    if (n == 0) {
      jd = -std::sph_bessel(1, ka);
      yd = -std::sph_neumann(1, ka);
    } else {
      jd = std::sph_bessel(n - 1, ka) - (n + 1) / ka * std::sph_bessel(n, ka);
      yd = std::sph_neumann(n - 1, ka) - (n + 1) / ka * std::sph_neumann(n, ka);
    }
    return {jd, yd};
  };

  // Legendre recurrence in cos(theta) of the angle between mic direction and
  // DoA; the (-1)^n from the plane-wave expansion is folded into (-j)^n.
  const double x = cos_theta;
  double p_prev = 1.0, p_curr = x;
  cdouble jpow(1.0, 0.0);                  // (-j)^n
  const cdouble minus_j(0.0, -1.0);
  const cdouble front = cdouble(0.0, 1.0) / (ka * ka);

  cdouble sum(0.0, 0.0);
  for (int n = 0; n <= max_order; ++n) {
    const double pn = n == 0 ? 1.0 : (n == 1 ? x : p_curr);
    const cdouble hd = hankel_deriv(n);
    cdouble term(0.0, 0.0);
    if (std::isfinite(std::abs(hd)) && std::abs(hd) > 0.0)
      term = front * jpow * ((2.0 * n + 1.0) * pn) / hd;
    sum += term;

    if (n >= 1) {
      const double s = std::abs(sum);
      if (s > 0.0 && std::abs(term) / s < rel_tol) return sum;
    }

    jpow *= minus_j;
    if (n >= 1) {
      const double p_next = ((2.0 * n + 1.0) * x * p_curr - n * p_prev) / (n + 1.0);
      p_prev = p_curr;
      p_curr = p_next;
    }
  }
  throw NumericError("rigid_sphere_pressure: series not converged within order " +
                     std::to_string(max_order) + " at ka=" + std::to_string(ka));
}

inline int sphere_order_cap(double ka) {
  return static_cast<int>(std::ceil(std::exp(1.0) * ka)) + 20;
}

}  // namespace detail

// Analytic rigid-sphere scattering model: microphones on the surface of a
// rigid sphere, given by their radial directions.
class RigidSphereModel : public SteeringModel {
 public:
  RigidSphereModel(double radius_m, std::vector<Direction> mic_directions,
                   double sound_speed = kDefaultSoundSpeed)
      : radius_(radius_m), mic_dirs_(std::move(mic_directions)), c_(sound_speed) {
    if (!(radius_ > 0.0)) throw InvalidArgument("RigidSphereModel: radius <= 0");
    if (mic_dirs_.empty()) throw InvalidArgument("RigidSphereModel: no microphones");
    if (!(c_ > 0.0)) throw InvalidArgument("RigidSphereModel: sound speed <= 0");
    mic_units_.reserve(mic_dirs_.size());
    for (const auto& d : mic_dirs_) mic_units_.push_back(d.unit_vector());
  }

  int num_mics() const override { return static_cast<int>(mic_dirs_.size()); }
  std::string kind() const override { return "rigid_sphere"; }
  double radius() const { return radius_; }
  double sound_speed() const { return c_; }
  const std::vector<Direction>& mic_directions() const { return mic_dirs_; }

  // Positions on the sphere surface (for reference/plots).
  ArrayGeometry surface_positions() const {
    ArrayGeometry g;
    for (const auto& u : mic_units_) g.mic_positions.push_back(radius_ * u);
    return g;
  }

  Eigen::VectorXcd response(double omega, const Direction& dir) const override {
    if (omega < 0.0) throw InvalidArgument("steering: omega must be >= 0");
    const double ka = omega / c_ * radius_;
    const Eigen::Vector3d u = dir.unit_vector();
    const int cap = detail::sphere_order_cap(ka);
    Eigen::VectorXcd g(num_mics());
    for (int n = 0; n < num_mics(); ++n) {
      const double ct = std::clamp(mic_units_[n].dot(u), -1.0, 1.0);
      g[n] = detail::rigid_sphere_pressure(ka, ct, 1e-8, cap);
    }
    return g;
  }

 private:
  double radius_;
  std::vector<Direction> mic_dirs_;
  std::vector<Eigen::Vector3d> mic_units_;
  double c_;
};

// A set of measured per-direction impulse responses.
struct IRSet {
  double fs = 0.0;
  int num_mics = 0;
  int ir_length = 0;
  std::vector<Direction> directions;
  // responses[d](sample, channel)
  std::vector<Eigen::MatrixXd> responses;

  void validate() const {
    if (!(fs > 0.0)) throw InvalidArgument("IRSet: fs must be positive");
    if (num_mics < 1 || ir_length < 1)
      throw InvalidArgument("IRSet: bad channel count or length");
    if (directions.size() != responses.size())
      throw InvalidArgument("IRSet: direction/response count mismatch");
    for (const auto& r : responses)
      if (r.rows() != ir_length || r.cols() != num_mics)
        throw InvalidArgument("IRSet: response size mismatch");
    for (std::size_t i = 0; i < directions.size(); ++i)
      for (std::size_t j = i + 1; j < directions.size(); ++j)
        if (directions[i] == directions[j])
          throw InvalidArgument("IRSet: duplicate direction (az=" +
                                std::to_string(directions[i].az) +
                                ", el=" + std::to_string(directions[i].el) + ")");
  }
};

// On-disk layout: a directory with `manifest` (JSON: fs, num_mics, ir_length
// and a list of {az, el, data_file}) plus one raw data file per direction of
// 32-bit little-endian floats, channel-interleaved frame by frame.
inline void save_ir_set(const IRSet& set, const std::filesystem::path& dir) {
  set.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["fs"] = set.fs;
  manifest["num_mics"] = set.num_mics;
  manifest["ir_length"] = set.ir_length;
  manifest["entries"] = nlohmann::json::array();
  for (std::size_t i = 0; i < set.directions.size(); ++i) {
    const std::string name = "ir_" + std::to_string(i) + ".f32";
    manifest["entries"].push_back({{"az", set.directions[i].az},
                                   {"el", set.directions[i].el},
                                   {"data_file", name}});
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw IoError("save_ir_set: cannot write " + (dir / name).string());
    for (int t = 0; t < set.ir_length; ++t)
      for (int ch = 0; ch < set.num_mics; ++ch) {
        const float v = static_cast<float>(set.responses[i](t, ch));
        f.write(reinterpret_cast<const char*>(&v), sizeof(float));
      }
  }
  std::ofstream mf(dir / "manifest");
  if (!mf) throw IoError("save_ir_set: cannot write manifest");
  mf << manifest.dump(2) << "\n";
}

inline IRSet load_ir_set(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest";
  std::ifstream mf(manifest_path);
  if (!mf) throw IoError("load_ir_set: missing manifest at " + manifest_path.string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_ir_set: malformed manifest: " + std::string(e.what()));
  }

  IRSet set;
  try {
    set.fs = manifest.at("fs").get<double>();
    set.num_mics = manifest.at("num_mics").get<int>();
    set.ir_length = manifest.at("ir_length").get<int>();
    for (const auto& e : manifest.at("entries")) {
      set.directions.emplace_back(e.at("az").get<double>(), e.at("el").get<double>());
      const std::string name = e.at("data_file").get<std::string>();
      std::ifstream f(dir / name, std::ios::binary);
      if (!f)
        throw IoError("load_ir_set: missing response " + (dir / name).string());
      std::vector<float> raw(static_cast<std::size_t>(set.ir_length) * set.num_mics);
      f.read(reinterpret_cast<char*>(raw.data()),
             static_cast<std::streamsize>(raw.size() * sizeof(float)));
      if (f.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(float)))
        throw IoError("load_ir_set: short read in " + name);
      Eigen::MatrixXd r(set.ir_length, set.num_mics);
      for (int t = 0; t < set.ir_length; ++t)
        for (int ch = 0; ch < set.num_mics; ++ch)
          r(t, ch) = raw[static_cast<std::size_t>(t) * set.num_mics + ch];
      set.responses.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_ir_set: malformed manifest: " + std::string(e.what()));
  }
  set.validate();
  return set;
}

// DTFT of the impulse responses for one direction, evaluated at omega.
// Exact mode requires the direction to match a set entry to within a
// hair's width; nearest mode picks the closest entry.
inline Eigen::VectorXcd measured_steering(const IRSet& set, double omega,
                                          const Direction& dir,
                                          bool nearest = false) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.directions.size(); ++i) {
    const double d = angular_distance(set.directions[i], dir);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw InvalidArgument("measured_steering: empty IR set");
  if (!nearest && best_dist > 1e-9)
    throw InvalidArgument("measured_steering: no response for direction (az=" +
                          std::to_string(dir.az) + ", el=" + std::to_string(dir.el) +
                          ") in exact mode");
  const Eigen::MatrixXd& ir = set.responses[best];
  const double w_dig = omega / set.fs;  // rad/sample
  Eigen::VectorXcd g = Eigen::VectorXcd::Zero(set.num_mics);
  for (int t = 0; t < set.ir_length; ++t) {
    const cdouble ph = std::polar(1.0, -w_dig * t);
    for (int ch = 0; ch < set.num_mics; ++ch) g[ch] += ir(t, ch) * ph;
  }
  return g;
}

// Measured IR set as a steering model.
class MeasuredModel : public SteeringModel {
 public:
  explicit MeasuredModel(IRSet set, bool nearest = false)
      : set_(std::move(set)), nearest_(nearest) {
    set_.validate();
  }

  int num_mics() const override { return set_.num_mics; }
  std::string kind() const override { return "measured"; }
  const IRSet& ir_set() const { return set_; }

  Eigen::VectorXcd response(double omega, const Direction& dir) const override {
    return measured_steering(set_, omega, dir, nearest_);
  }

 private:
  IRSet set_;
  bool nearest_;
};

struct ImpulseResponses {
  Eigen::MatrixXd irs;  // (length, N)
  int bulk_delay = 0;   // samples, = length/2
};

// Causal time-domain propagation IRs for one direction: frequency sampling of
// the steering model with a bulk delay of length/2 samples. The length-point
// DFT of the result reproduces the model exactly at the bin frequencies
// (Nyquist bin forced real); fractional delays come out as band-limited
// interpolation kernels.
inline ImpulseResponses impulse_responses(const SteeringModel& model,
                                          const Direction& dir, int length,
                                          double fs) {
  if (length < 2 || length % 2 != 0)
    throw InvalidArgument("impulse_responses: length must be even and >= 2");
  if (!(fs > 0.0)) throw InvalidArgument("impulse_responses: fs must be positive");
  const int n_bins = length / 2 + 1;
  const int delay = length / 2;
  const int N = model.num_mics();

  Eigen::MatrixXcd spec(n_bins, N);
  for (int k = 0; k < n_bins; ++k) {
    const double f = k * fs / length;
    const double omega = 2.0 * kPi * f;
    Eigen::VectorXcd g = model.response(omega, dir);
    const cdouble bulk = std::polar(1.0, -2.0 * kPi * f * delay / fs);
    spec.row(k) = (g * bulk).transpose();
  }
  for (int ch = 0; ch < N; ++ch) {
    spec(0, ch) = cdouble(spec(0, ch).real(), 0.0);
    spec(n_bins - 1, ch) = cdouble(spec(n_bins - 1, ch).real(), 0.0);
  }

  ImpulseResponses out;
  out.bulk_delay = delay;
  out.irs.resize(length, N);
  for (int ch = 0; ch < N; ++ch) {
    std::vector<cdouble> half(n_bins);
    for (int k = 0; k < n_bins; ++k) half[k] = spec(k, ch);
    const std::vector<double> h = fft::inverse_hermitian(half, length);
    for (int t = 0; t < length; ++t) out.irs(t, ch) = h[t];
  }
  return out;
}

}  // namespace polybeam

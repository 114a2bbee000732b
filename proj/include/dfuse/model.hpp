#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "dfuse/errors.hpp"
#include "dfuse/math.hpp"

namespace dfuse {

// ============================================================================
// Geometry
// ============================================================================

/// Point in the surveillance area, dimensionless units (d = 2 in practice).
struct Position {
  std::vector<double> coords;

  std::size_t dim() const { return coords.size(); }
};

inline double squared_distance(const Position& a, const Position& b) {
  if (a.dim() != b.dim()) {
    throw config_error("position dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    const double d = a.coords[i] - b.coords[i];
    s += d * d;
  }
  return s;
}

inline double distance(const Position& a, const Position& b) {
  return std::sqrt(squared_distance(a, b));
}

/// Axis-aligned box; degenerate (point) boxes are allowed.
struct Box {
  Position lo;
  Position hi;

  std::size_t dim() const { return lo.dim(); }

  bool contains(const Position& p) const {
    if (p.dim() != dim()) return false;
    for (std::size_t i = 0; i < dim(); ++i) {
      if (p.coords[i] < lo.coords[i] || p.coords[i] > hi.coords[i]) {
        return false;
      }
    }
    return true;
  }

  Position center() const {
    Position c;
    c.coords.reserve(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      c.coords.push_back(0.5 * (lo.coords[i] + hi.coords[i]));
    }
    return c;
  }

  void validate() const {
    if (dim() == 0 || hi.dim() != dim()) {
      throw config_error("box: lo/hi must be nonempty and of equal dimension");
    }
    for (std::size_t i = 0; i < dim(); ++i) {
      if (!(lo.coords[i] <= hi.coords[i]) || !std::isfinite(lo.coords[i]) ||
          !std::isfinite(hi.coords[i])) {
        throw config_error("box: requires finite lo <= hi per axis");
      }
    }
  }
};

// ============================================================================
// Amplitude attenuation functions
// ============================================================================

/// g = (1 + (r/eta)^alpha)^(-1/2)
struct PowerLawAaf {
  double eta;
  double alpha;
};

/// g = exp(-r^2 / (2 eta^2))
struct ExponentialAaf {
  double eta;
};

using Aaf = std::variant<PowerLawAaf, ExponentialAaf>;

inline void validate(const Aaf& aaf) {
  if (const auto* p = std::get_if<PowerLawAaf>(&aaf)) {
    if (!(p->eta > 0.0) || !(p->alpha > 0.0)) {
      throw config_error("power-law aaf requires eta > 0 and alpha > 0");
    }
  } else {
    if (!(std::get<ExponentialAaf>(aaf).eta > 0.0)) {
      throw config_error("exponential aaf requires eta > 0");
    }
  }
}

/// Amplitude gain in (0,1]; 1 exactly at zero distance, strictly decreasing
/// with distance for both variants.
inline double aaf_gain(const Aaf& aaf, const Position& target_pos,
                       const Position& sensor_pos) {
  const double r2 = squared_distance(target_pos, sensor_pos);
  if (const auto* p = std::get_if<PowerLawAaf>(&aaf)) {
    return 1.0 / std::sqrt(1.0 + std::pow(std::sqrt(r2) / p->eta, p->alpha));
  }
  const double eta = std::get<ExponentialAaf>(aaf).eta;
  return std::exp(-0.5 * r2 / (eta * eta));
}

// ============================================================================
// Sensors and target
// ============================================================================

/// A sensor running the local energy test y^2 > threshold on its measurement.
/// `threshold` is always derived from `local_pfa` (see make_sensor_node), and
/// `bep` is the bit-error probability of its reporting link.
struct SensorNode {
  Position position;
  double noise_var = 1.0;   // measurement noise variance
  double local_pfa = 0.05;  // per-sensor false-alarm rate
  double threshold = 0.0;   // energy-test threshold
  double bep = 0.0;         // reporting-link bit-error probability
};

/// Target descriptor: position and average emitted power (linear scale).
/// power == 0 is the target-absent null.
struct TargetParams {
  Position position;
  double power = 0.0;
};

/// Energy-test threshold achieving a given local false-alarm rate:
/// gamma = noise_var * [Qinv(local_pfa / 2)]^2.
inline double threshold_from_local_pfa(double noise_var, double local_pfa) {
  if (!(noise_var > 0.0)) {
    throw config_error("threshold_from_local_pfa: noise_var must be > 0");
  }
  if (!(local_pfa > 0.0 && local_pfa < 1.0)) {
    throw config_error("threshold_from_local_pfa: local_pfa must be in (0,1)");
  }
  const double q = gaussian_ccdf_inv(0.5 * local_pfa);
  return noise_var * q * q;
}

inline SensorNode make_sensor_node(Position position, double noise_var,
                                   double local_pfa, double bep) {
  if (!(bep >= 0.0 && bep <= 0.5)) {
    throw config_error("sensor bep must lie in [0, 0.5]");
  }
  SensorNode node;
  node.position = std::move(position);
  node.noise_var = noise_var;
  node.local_pfa = local_pfa;
  node.threshold = threshold_from_local_pfa(noise_var, local_pfa);
  node.bep = bep;
  return node;
}

/// Local detection probability of the energy test:
///   P_d = 2 Q( sqrt( gamma / (noise_var + power * g^2) ) ).
/// Collapses to the sensor's exact local_pfa when power * g^2 == 0, so the
/// null case carries no threshold-inversion round-off.
inline double local_pd(const SensorNode& node, const Aaf& aaf,
                       const TargetParams& target) {
  const double g = aaf_gain(aaf, target.position, node.position);
  const double signal_var = target.power * g * g;
  if (signal_var == 0.0) return node.local_pfa;
  return 2.0 * gaussian_ccdf(
                   std::sqrt(node.threshold / (node.noise_var + signal_var)));
}

/// Local log likelihood-ratio of a raw measurement y; an increasing function
/// of y^2 whenever power * g^2 > 0, which is what justifies the energy test.
inline double local_llr(double y, const SensorNode& node, const Aaf& aaf,
                        const TargetParams& target) {
  const double g = aaf_gain(aaf, target.position, node.position);
  const double s = target.power * g * g;
  const double w = node.noise_var;
  return 0.5 * std::log(w / (w + s)) + s / (w * (w + s)) * y * y;
}

// ============================================================================
// Network
// ============================================================================

struct Network {
  std::vector<SensorNode> nodes;
  Box region;

  std::size_t size() const { return nodes.size(); }
};

inline void validate(const Network& network) {
  network.region.validate();
  if (network.nodes.empty()) {
    throw config_error("network requires at least one sensor");
  }
  for (const SensorNode& node : network.nodes) {
    if (!(node.noise_var > 0.0)) {
      throw config_error("sensor noise_var must be > 0");
    }
    if (!(node.local_pfa > 0.0 && node.local_pfa < 1.0)) {
      throw config_error("sensor local_pfa must lie in (0,1)");
    }
    if (!(node.bep >= 0.0 && node.bep <= 0.5)) {
      throw config_error("sensor bep must lie in [0, 0.5]");
    }
    if (!network.region.contains(node.position)) {
      throw config_error("sensor position outside surveillance region");
    }
    const double back =
        2.0 * gaussian_ccdf(std::sqrt(node.threshold / node.noise_var));
    if (std::abs(back - node.local_pfa) > 1e-10) {
      throw config_error("sensor threshold inconsistent with local_pfa");
    }
  }
}

/// Regular sqrt(K) x sqrt(K) deployment covering the region: the interior
/// lattice { i / (sqrt(K)+1), i = 1..sqrt(K) } per axis, so the array keeps a
/// one-lattice-step margin from the boundary. K = 1 degenerates to a single
/// node at the region center.
inline Network build_grid_network(std::size_t count, const Box& region,
                                  double noise_var, double local_pfa,
                                  double bep) {
  region.validate();
  Network network;
  network.region = region;
  if (count == 0) {
    throw config_error("sensor count must be >= 1");
  }
  const auto side = static_cast<std::size_t>(std::llround(
      std::sqrt(static_cast<double>(count))));
  if (side * side != count) {
    throw config_error("sensor count must be a perfect square");
  }
  if (region.dim() != 2 && count > 1) {
    throw config_error("grid deployment requires a 2-D region");
  }
  if (count == 1) {
    network.nodes.push_back(
        make_sensor_node(region.center(), noise_var, local_pfa, bep));
    return network;
  }
  const double x0 = region.lo.coords[0], x1 = region.hi.coords[0];
  const double y0 = region.lo.coords[1], y1 = region.hi.coords[1];
  const double denom = static_cast<double>(side + 1);
  for (std::size_t ix = 0; ix < side; ++ix) {
    for (std::size_t iy = 0; iy < side; ++iy) {
      Position p{{x0 + (x1 - x0) * static_cast<double>(ix + 1) / denom,
                  y0 + (y1 - y0) * static_cast<double>(iy + 1) / denom}};
      network.nodes.push_back(
          make_sensor_node(std::move(p), noise_var, local_pfa, bep));
    }
  }
  return network;
}

}  // namespace dfuse

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dfuse/channel.hpp"
#include "dfuse/errors.hpp"
#include "dfuse/fusion.hpp"
#include "dfuse/math.hpp"
#include "dfuse/model.hpp"

namespace dfuse {

// ============================================================================
// Score/Fisher weight pairs
// ============================================================================

/// Per-sensor weights of the locally-optimum statistics, in their BSC-aware
/// form (the error-free weights are the bep = 0 special case):
///   nu_k(b)  = (b - rho0_k) / (rho0_k (1-rho0_k)) (1-2 bep_k)
///              * pdf(sqrt(gamma_k / nv_k)) sqrt(gamma_k) / nv_k^{3/2}
///   psi_k    = (1-2 bep_k)^2 / (rho0_k (1-rho0_k))
///              * pdf^2(sqrt(gamma_k / nv_k)) gamma_k / nv_k^3
/// with nv_k the sensor noise variance and rho0_k the H0 received-1
/// probability. nu_k(1) > 0 > nu_k(0) whenever bep < 0.5, and psi_k = 0
/// exactly at bep = 0.5 (zero-information link).
struct LodWeights {
  std::vector<double> nu0;
  std::vector<double> nu1;
  std::vector<double> psi;

  std::size_t size() const { return psi.size(); }
  double nu(std::size_t k, std::uint8_t bit) const {
    return bit ? nu1[k] : nu0[k];
  }
};

inline LodWeights lod_weights(const Network& network) {
  LodWeights w;
  const std::size_t n = network.size();
  w.nu0.resize(n);
  w.nu1.resize(n);
  w.psi.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const SensorNode& node = network.nodes[k];
    const double rho0 = flip_prob(node.local_pfa, node.bep);
    if (!(rho0 > 0.0 && rho0 < 1.0)) {
      throw config_error("lod_weights: H0 received-bit probability at 0 or 1");
    }
    const double var = rho0 * (1.0 - rho0);
    const double info = 1.0 - 2.0 * node.bep;
    const double pdf = normal_pdf(std::sqrt(node.threshold / node.noise_var));
    const double slope =
        pdf * std::sqrt(node.threshold) / std::pow(node.noise_var, 1.5);
    w.nu0[k] = (0.0 - rho0) / var * info * slope;
    w.nu1[k] = (1.0 - rho0) / var * info * slope;
    w.psi[k] = info * info * pdf * pdf * node.threshold /
               (var * std::pow(node.noise_var, 3.0));
  }
  return w;
}

/// d P_d,k / d theta at theta = 0 (target power as the test parameter):
///   pdf(sqrt(gamma / nv)) sqrt(gamma) g^2 / nv^{3/2}.
/// Strictly positive, linear in g^2.
inline double pd_derivative_at_null(const SensorNode& node, double gain) {
  return normal_pdf(std::sqrt(node.threshold / node.noise_var)) *
         std::sqrt(node.threshold) * gain * gain /
         std::pow(node.noise_var, 1.5);
}

// ============================================================================
// Per-position (Davies) score and Fisher information
// ============================================================================

/// Score of the received-vector log-pmf w.r.t. target power at the null,
/// for a candidate target position: sum_k nu_k(bit_k) g^2(candidate, x_k).
inline double score_at_null(std::span<const std::uint8_t> received,
                            const Network& network, const Aaf& aaf,
                            const Position& candidate) {
  const LodWeights w = lod_weights(network);
  double score = 0.0;
  for (std::size_t k = 0; k < network.size(); ++k) {
    const double g = aaf_gain(aaf, candidate, network.nodes[k].position);
    const double g2 = g * g;
    score += w.nu(k, received[k]) * g2;
  }
  return score;
}

/// Fisher information at the null for a candidate position:
///   sum_k psi_k g^4(candidate, x_k).
inline double fisher_at_null(const Network& network, const Aaf& aaf,
                             const Position& candidate) {
  const LodWeights w = lod_weights(network);
  double fisher = 0.0;
  for (std::size_t k = 0; k < network.size(); ++k) {
    const double g = aaf_gain(aaf, candidate, network.nodes[k].position);
    const double g2 = g * g;
    fisher += w.psi[k] * g2 * g2;
  }
  return fisher;
}

/// Prior-averaged score and Fisher information, with gain_moments[k] the
/// quadrature of g^2 against the position prior (see prior_gain_moment).
/// The B-LOD statistic is score / sqrt(fisher).
struct ScoreFisher {
  double score;
  double fisher;
};

inline ScoreFisher bayes_score_and_fisher(
    std::span<const std::uint8_t> received, const Network& network,
    std::span<const double> gain_moments) {
  const LodWeights w = lod_weights(network);
  double score = 0.0;
  double fisher = 0.0;
  for (std::size_t k = 0; k < network.size(); ++k) {
    score += w.nu(k, received[k]) * gain_moments[k];
    fisher += w.psi[k] * gain_moments[k] * gain_moments[k];
  }
  if (!(fisher > 0.0)) {
    throw degenerate_statistic_error(
        "bayes_score_and_fisher: Fisher information vanishes");
  }
  return {score, fisher};
}

// ============================================================================
// B-LOD and G-LOD statistics
// ============================================================================

/// Bayesian LOD: prior-averaged score normalized by the square root of the
/// prior-averaged Fisher information.
inline double eval_blod(std::span<const std::uint8_t> received,
                        const Network& network, const LodWeights& weights,
                        std::span<const double> gain_moments) {
  double score = 0.0;
  double fisher = 0.0;
  for (std::size_t k = 0; k < network.size(); ++k) {
    score += weights.nu(k, received[k]) * gain_moments[k];
    fisher += weights.psi[k] * gain_moments[k] * gain_moments[k];
  }
  if (!(fisher > 0.0)) {
    throw degenerate_statistic_error(
        "eval_blod: Fisher information vanishes (all links uninformative or "
        "all gain moments zero)");
  }
  return score / std::sqrt(fisher);
}

/// Precomputed G-LOD evaluation table over the candidate positions:
///   statistic = max_i [ zero_score[i] + sum over set bits of bit_delta ]
///               * inv_sqrt_fisher[i].
/// Candidates whose Fisher denominator falls below 1e-300 are scored -inf.
struct GlodTable {
  std::size_t n_candidates = 0;
  std::size_t n_sensors = 0;
  std::vector<double> zero_score;       // [i]: sum_k nu_k(0) g^2
  std::vector<double> bit_delta;        // [k * n_candidates + i]
  std::vector<double> inv_sqrt_fisher;  // [i]; 0 marks a degenerate candidate
};

inline GlodTable build_glod_table(const Network& network, const Aaf& aaf,
                                  const LodWeights& weights,
                                  std::span<const PositionBin> candidates) {
  if (candidates.empty()) {
    throw config_error("build_glod_table: empty candidate set");
  }
  GlodTable table;
  table.n_candidates = candidates.size();
  table.n_sensors = network.size();
  table.zero_score.assign(candidates.size(), 0.0);
  table.bit_delta.assign(candidates.size() * network.size(), 0.0);
  table.inv_sqrt_fisher.assign(candidates.size(), 0.0);

  bool any_usable = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double fisher = 0.0;
    for (std::size_t k = 0; k < network.size(); ++k) {
      const double g =
          aaf_gain(aaf, candidates[i].center, network.nodes[k].position);
      const double g2 = g * g;
      table.zero_score[i] += weights.nu0[k] * g2;
      table.bit_delta[k * candidates.size() + i] =
          (weights.nu1[k] - weights.nu0[k]) * g2;
      fisher += weights.psi[k] * g2 * g2;
    }
    const double denom = std::sqrt(fisher);
    if (denom < 1e-300) continue;  // scored -inf at evaluation time
    table.inv_sqrt_fisher[i] = 1.0 / denom;
    any_usable = true;
  }
  if (!any_usable) {
    throw degenerate_statistic_error(
        "build_glod_table: every candidate position is degenerate");
  }
  return table;
}

inline double eval_glod(std::span<const std::uint8_t> received,
                        const GlodTable& table) {
  const std::size_t n = table.n_candidates;
  thread_local std::vector<double> scores;
  scores.assign(table.zero_score.begin(), table.zero_score.end());
  double* s = scores.data();
  for (std::size_t k = 0; k < received.size(); ++k) {
    if (!received[k]) continue;
    const double* d = table.bit_delta.data() + k * n;
    for (std::size_t i = 0; i < n; ++i) s[i] += d[i];
  }
  double best = neg_inf;
  for (std::size_t i = 0; i < n; ++i) {
    if (table.inv_sqrt_fisher[i] == 0.0) continue;
    best = std::max(best, s[i] * table.inv_sqrt_fisher[i]);
  }
  return best;
}

/// Generalized LOD (Davies): max over candidate positions of the normalized
/// per-position score.
inline double eval_glod(std::span<const std::uint8_t> received,
                        const Network& network, const Aaf& aaf,
                        const LodWeights& weights,
                        std::span<const PositionBin> candidates) {
  return eval_glod(received,
                   build_glod_table(network, aaf, weights, candidates));
}

}  // namespace dfuse

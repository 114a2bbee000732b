#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dfuse/channel.hpp"
#include "dfuse/fusion.hpp"
#include "dfuse/lod.hpp"
#include "dfuse/math.hpp"
#include "dfuse/model.hpp"
#include "dfuse/rng.hpp"
#include "dfuse/sim.hpp"

namespace dfuse {

struct SelfTestCheck {
  std::string name;
  bool pass = false;
  double worst_error = 0.0;
  double tolerance = 0.0;
};

struct SelfTestReport {
  std::vector<SelfTestCheck> checks;

  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const SelfTestCheck& c) { return c.pass; });
  }
};

namespace detail {

struct OracleScenario {
  Network network;
  Aaf aaf;
  Position candidate;
  std::vector<PositionBin> prior_bins;
};

inline OracleScenario make_oracle_scenario(std::size_t sensors, TrialRng& rng,
                                           bool nonzero_bep) {
  OracleScenario sc;
  sc.network.region = Box{Position{{0.0, 0.0}}, Position{{1.0, 1.0}}};
  for (std::size_t k = 0; k < sensors; ++k) {
    const Position pos{{rng.next_double(), rng.next_double()}};
    const double noise_var = 0.5 + 1.5 * rng.next_double();
    const double pfa = 0.02 + 0.18 * rng.next_double();
    const double bep = nonzero_bep ? 0.05 + 0.40 * rng.next_double() : 0.0;
    sc.network.nodes.push_back(make_sensor_node(pos, noise_var, pfa, bep));
  }
  if (rng.next_bernoulli(0.5)) {
    sc.aaf = PowerLawAaf{0.1 + 0.4 * rng.next_double(),
                         2.0 + 2.0 * rng.next_double()};
  } else {
    sc.aaf = ExponentialAaf{0.1 + 0.4 * rng.next_double()};
  }
  sc.candidate = Position{{rng.next_double(), rng.next_double()}};
  double total = 0.0;
  std::vector<double> raw(3);
  for (double& u : raw) {
    u = 0.1 + rng.next_double();
    total += u;
  }
  for (double u : raw) {
    sc.prior_bins.push_back(
        {Position{{rng.next_double(), rng.next_double()}}, u / total});
  }
  return sc;
}

/// Log-pmf of a received vector under H1 with explicit target power theta.
/// Evaluated through the raw operating-point formula so it stays smooth in
/// theta around 0 (including slightly negative theta, for central
/// differences).
inline double received_logpmf_at_theta(std::span<const std::uint8_t> received,
                                       const Network& network, const Aaf& aaf,
                                       const Position& target_pos,
                                       double theta) {
  double sum = 0.0;
  for (std::size_t k = 0; k < network.size(); ++k) {
    const SensorNode& node = network.nodes[k];
    const double g = aaf_gain(aaf, target_pos, node.position);
    const double pd = 2.0 * gaussian_ccdf(std::sqrt(
                                node.threshold /
                                (node.noise_var + theta * g * g)));
    const double rho1 = flip_prob(pd, node.bep);
    sum += received[k] ? std::log(rho1) : std::log(1.0 - rho1);
  }
  return sum;
}

/// Prior-averaged log-pmf at explicit theta (B-LOD's H1 density).
inline double bayes_logpmf_at_theta(std::span<const std::uint8_t> received,
                                    const Network& network, const Aaf& aaf,
                                    std::span<const PositionBin> prior_bins,
                                    double theta) {
  std::vector<double> terms;
  terms.reserve(prior_bins.size());
  double shift = neg_inf;
  for (const PositionBin& bin : prior_bins) {
    const double t =
        std::log(bin.mass) +
        received_logpmf_at_theta(received, network, aaf, bin.center, theta);
    terms.push_back(t);
    shift = std::max(shift, t);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - shift);
  return shift + std::log(sum);
}

/// Visit every received vector of length K with its H0 probability.
template <class Fn>
void enumerate_h0(const Network& network, Fn&& fn) {
  const std::vector<double> rho0 = received_h0_probs(network);
  const std::size_t n = network.size();
  std::vector<std::uint8_t> bits(n, 0);
  const std::uint64_t total = 1ULL << n;
  for (std::uint64_t m = 0; m < total; ++m) {
    double prob = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      bits[k] = (m >> k) & 1u;
      prob *= bits[k] ? rho0[k] : 1.0 - rho0[k];
    }
    fn(bits, prob);
  }
}

}  // namespace detail

/// Oracle suite behind the `selftest` CLI subcommand: exact 2^K enumeration
/// checks of the score/Fisher closed forms and finite-difference checks of
/// every analytic derivative. Deterministic; runs in well under a minute.
inline SelfTestReport run_selftest(std::uint64_t seed = 0x5e1f7e57) {
  SelfTestReport report;
  SelfTestCheck fisher_check{"fisher-equals-enumerated-score-variance", true,
                             0.0, 1e-10};
  SelfTestCheck mean_check{"score-zero-mean-under-h0", true, 0.0, 1e-12};
  SelfTestCheck score_fd_check{"score-matches-central-differences", true, 0.0,
                               1e-4};
  SelfTestCheck pd_fd_check{"pd-derivative-matches-central-differences", true,
                            0.0, 1e-5};
  SelfTestCheck order_check{"finite-difference-error-shrinks-with-h", true,
                            0.0, 1.0};

  const std::size_t sensor_counts[] = {2, 5, 10};
  for (int s = 0; s < 50; ++s) {
    TrialRng rng(seed, 100, static_cast<std::uint64_t>(s));
    const std::size_t sensors = sensor_counts[s % 3];
    const bool nonzero_bep = (s % 2) == 1;
    const detail::OracleScenario sc =
        detail::make_oracle_scenario(sensors, rng, nonzero_bep);

    const LodWeights weights = lod_weights(sc.network);
    std::vector<double> moments;
    moments.reserve(sc.network.size());
    for (const SensorNode& node : sc.network.nodes) {
      moments.push_back(prior_gain_moment(node, sc.aaf, sc.prior_bins));
    }

    // (a) Fisher information equals the enumerated variance of the score,
    // for both the per-position and the prior-averaged statistic.
    NeumaierAccumulator mean_pos, mean_bayes, var_pos, var_bayes;
    NeumaierAccumulator l1_pos, l1_bayes;
    detail::enumerate_h0(sc.network, [&](std::span<const std::uint8_t> bits,
                                         double prob) {
      const double sp = score_at_null(bits, sc.network, sc.aaf, sc.candidate);
      const double sb =
          bayes_score_and_fisher(bits, sc.network, moments).score;
      mean_pos.add(prob * sp);
      mean_bayes.add(prob * sb);
      var_pos.add(prob * sp * sp);
      var_bayes.add(prob * sb * sb);
      l1_pos.add(prob * std::abs(sp));
      l1_bayes.add(prob * std::abs(sb));
    });
    const double fisher_pos = fisher_at_null(sc.network, sc.aaf, sc.candidate);
    const double fisher_bayes =
        bayes_score_and_fisher(std::vector<std::uint8_t>(sensors, 0),
                               sc.network, moments)
            .fisher;
    const double fisher_err = std::max(
        std::abs(var_pos.total() - fisher_pos) / fisher_pos,
        std::abs(var_bayes.total() - fisher_bayes) / fisher_bayes);
    fisher_check.worst_error = std::max(fisher_check.worst_error, fisher_err);

    // (c) Zero mean of the score under H0, scaled by the enumeration's L1
    // mass so the check is scale invariant.
    const double mean_err = std::max(
        std::abs(mean_pos.total()) / std::max(1.0, l1_pos.total()),
        std::abs(mean_bayes.total()) / std::max(1.0, l1_bayes.total()));
    mean_check.worst_error = std::max(mean_check.worst_error, mean_err);

    // (b) Analytic score against central finite differences at h = 1e-6.
    std::vector<std::uint8_t> bits(sensors);
    for (std::size_t k = 0; k < sensors; ++k) {
      bits[k] = rng.next_bernoulli(0.35) ? 1 : 0;
    }
    auto central = [&](auto&& f, double h) {
      return (f(h) - f(-h)) / (2.0 * h);
    };
    auto pos_logpmf = [&](double theta) {
      return detail::received_logpmf_at_theta(bits, sc.network, sc.aaf,
                                              sc.candidate, theta);
    };
    auto bayes_logpmf = [&](double theta) {
      return detail::bayes_logpmf_at_theta(bits, sc.network, sc.aaf,
                                           sc.prior_bins, theta);
    };
    const double sp = score_at_null(bits, sc.network, sc.aaf, sc.candidate);
    const double sb = bayes_score_and_fisher(bits, sc.network, moments).score;
    const double fd_err = std::max(
        std::abs(central(pos_logpmf, 1e-6) - sp) / std::max(1e-3, std::abs(sp)),
        std::abs(central(bayes_logpmf, 1e-6) - sb) /
            std::max(1e-3, std::abs(sb)));
    score_fd_check.worst_error =
        std::max(score_fd_check.worst_error, fd_err);

    // dPd/dtheta at the null against central differences. The gain enters
    // the derivative only as the exact g^2 factor, so probe it at a
    // well-conditioned value; a vanishing gain would only starve the
    // finite-difference numerator of significant digits.
    const SensorNode& node0 = sc.network.nodes[0];
    const double gain = 0.3 + 0.7 * rng.next_double();
    auto pd_of_theta = [&](double theta) {
      return 2.0 * gaussian_ccdf(std::sqrt(
                       node0.threshold /
                       (node0.noise_var + theta * gain * gain)));
    };
    const double deriv = pd_derivative_at_null(node0, gain);
    const double pd_err =
        std::abs(central(pd_of_theta, 1e-6) - deriv) / deriv;
    pd_fd_check.worst_error = std::max(pd_fd_check.worst_error, pd_err);

    // Error order: central-difference error must shrink when h drops an
    // order of magnitude in the truncation-dominated regime.
    const double coarse = std::abs(central(pos_logpmf, 1e-2) - sp);
    const double fine = std::abs(central(pos_logpmf, 1e-3) - sp);
    if (coarse > 1e-9 && fine >= coarse) {
      order_check.worst_error = std::max(order_check.worst_error, 1.0);
    }
  }

  for (SelfTestCheck* check :
       {&fisher_check, &mean_check, &score_fd_check, &pd_fd_check}) {
    check->pass = check->worst_error < check->tolerance;
  }
  order_check.pass = order_check.worst_error < order_check.tolerance;

  report.checks = {fisher_check, mean_check, score_fd_check, pd_fd_check,
                   order_check};
  return report;
}

}  // namespace dfuse

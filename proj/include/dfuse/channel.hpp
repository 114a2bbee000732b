#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dfuse/errors.hpp"

namespace dfuse {

/// One trial's transmitted and received one-bit decisions.
struct DecisionRecord {
  std::vector<std::uint8_t> sent;
  std::vector<std::uint8_t> received;
};

/// Probability that a Bernoulli(p) bit is received as 1 through a BSC with
/// the given bit-error probability: (1-bep) p + bep (1-p).
/// Affine and order-preserving in p for bep < 0.5; identity at bep = 0 and
/// constant 0.5 at bep = 0.5, both exactly.
inline double flip_prob(double p, double bep) {
  return (1.0 - bep) * p + bep * (1.0 - p);
}

/// Push a decision vector through independent BSCs; bit k flips with
/// probability beps[k]. The caller owns the random stream.
template <class Rng>
std::vector<std::uint8_t> transmit(std::span<const std::uint8_t> sent,
                                   std::span<const double> beps, Rng& rng) {
  if (sent.size() != beps.size()) {
    throw config_error("transmit: sent/beps length mismatch");
  }
  std::vector<std::uint8_t> received(sent.size());
  for (std::size_t k = 0; k < sent.size(); ++k) {
    const bool flip = rng.next_bernoulli(beps[k]);
    received[k] = flip ? static_cast<std::uint8_t>(1 - sent[k]) : sent[k];
  }
  return received;
}

/// Log-pmf of a received vector under independent Bernoulli(probs[k]) bits.
/// A probability at exactly 0 or 1 contradicting the observed bit yields the
/// -inf sentinel (log 0) rather than an exception.
inline double decision_loglik(std::span<const std::uint8_t> received,
                              std::span<const double> probs) {
  if (received.size() != probs.size()) {
    throw config_error("decision_loglik: length mismatch");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < received.size(); ++k) {
    sum += received[k] ? std::log(probs[k]) : std::log(1.0 - probs[k]);
  }
  return sum;
}

}  // namespace dfuse

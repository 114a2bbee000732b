#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dfuse/channel.hpp"
#include "dfuse/errors.hpp"
#include "dfuse/math.hpp"
#include "dfuse/model.hpp"

namespace dfuse {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// ============================================================================
// Parameter grid
// ============================================================================

struct PositionBin {
  Position center;
  double mass;
};

struct PowerBin {
  double power;
  double mass;
};

/// Discretized search/integration space for the unknown target position and
/// average emitted power, with per-bin prior masses.
struct ParameterGrid {
  std::vector<PositionBin> position_bins;
  std::vector<PowerBin> power_bins;

  std::size_t cell_count() const {
    return position_bins.size() * power_bins.size();
  }

  void validate() const {
    if (position_bins.empty() || power_bins.empty()) {
      throw config_error("parameter grid bins must be nonempty");
    }
    const std::size_t dim = position_bins.front().center.dim();
    NeumaierAccumulator pos_mass;
    for (const PositionBin& bin : position_bins) {
      if (bin.center.dim() != dim) {
        throw config_error("parameter grid: mixed position dimensions");
      }
      if (!(bin.mass >= 0.0) || !std::isfinite(bin.mass)) {
        throw config_error("parameter grid: position masses must be >= 0");
      }
      pos_mass.add(bin.mass);
    }
    NeumaierAccumulator pow_mass;
    for (const PowerBin& bin : power_bins) {
      if (!(bin.power >= 0.0)) {
        throw config_error("parameter grid: powers must be >= 0");
      }
      if (!(bin.mass >= 0.0) || !std::isfinite(bin.mass)) {
        throw config_error("parameter grid: power masses must be >= 0");
      }
      pow_mass.add(bin.mass);
    }
    if (std::abs(pos_mass.total() - 1.0) > 1e-12 ||
        std::abs(pow_mass.total() - 1.0) > 1e-12) {
      throw config_error("parameter grid: masses must each sum to 1");
    }
  }
};

/// cells_per_axis^d cell centers over the box, uniform masses.
/// The first axis varies slowest (bins are "row-major" in the axes).
inline std::vector<PositionBin> make_uniform_position_bins(
    const Box& box, std::size_t cells_per_axis) {
  box.validate();
  if (cells_per_axis == 0) {
    throw config_error("position grid needs at least one cell per axis");
  }
  const std::size_t d = box.dim();
  std::size_t total = 1;
  for (std::size_t a = 0; a < d; ++a) total *= cells_per_axis;
  const double mass = 1.0 / static_cast<double>(total);

  std::vector<PositionBin> bins;
  bins.reserve(total);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t c = 0; c < total; ++c) {
    Position p;
    p.coords.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      const double lo = box.lo.coords[a];
      const double span = box.hi.coords[a] - box.lo.coords[a];
      p.coords[a] = lo + span * (static_cast<double>(idx[a]) + 0.5) /
                             static_cast<double>(cells_per_axis);
    }
    bins.push_back({std::move(p), mass});
    for (std::size_t a = d; a-- > 0;) {  // odometer, last axis fastest
      if (++idx[a] < cells_per_axis) break;
      idx[a] = 0;
    }
  }
  return bins;
}

/// n equal cells over [(1-rel_uncertainty) c, (1+rel_uncertainty) c],
/// centers as representative powers, uniform masses.
inline std::vector<PowerBin> make_uniform_power_bins(double center_power,
                                                     double rel_uncertainty,
                                                     std::size_t n) {
  if (n == 0) throw config_error("power grid needs at least one cell");
  if (!(center_power >= 0.0)) {
    throw config_error("power grid center must be >= 0");
  }
  if (!(rel_uncertainty >= 0.0 && rel_uncertainty <= 1.0)) {
    throw config_error("power grid relative uncertainty must be in [0,1]");
  }
  const double lo = (1.0 - rel_uncertainty) * center_power;
  const double width =
      2.0 * rel_uncertainty * center_power / static_cast<double>(n);
  std::vector<PowerBin> bins;
  bins.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    bins.push_back({lo + width * (static_cast<double>(j) + 0.5),
                    1.0 / static_cast<double>(n)});
  }
  return bins;
}

inline ParameterGrid make_uniform_grid(const Box& position_space,
                                       std::size_t cells_per_axis,
                                       double center_power,
                                       double rel_uncertainty,
                                       std::size_t power_cells) {
  ParameterGrid grid{
      make_uniform_position_bins(position_space, cells_per_axis),
      make_uniform_power_bins(center_power, rel_uncertainty, power_cells)};
  grid.validate();
  return grid;
}

// ============================================================================
// Clairvoyant LLR and Counting Rule
// ============================================================================

/// LLR over explicit per-sensor bit probabilities under each hypothesis.
inline double llr_from_rho(std::span<const std::uint8_t> received,
                           std::span<const double> rho1,
                           std::span<const double> rho0) {
  double sum = 0.0;
  for (std::size_t k = 0; k < received.size(); ++k) {
    sum += received[k] ? std::log(rho1[k] / rho0[k])
                       : std::log((1.0 - rho1[k]) / (1.0 - rho0[k]));
  }
  return sum;
}

/// Per-sensor probability of receiving a 1 under H0 (the BSC image of the
/// local false-alarm rate).
inline std::vector<double> received_h0_probs(const Network& network) {
  std::vector<double> rho0(network.size());
  for (std::size_t k = 0; k < network.size(); ++k) {
    rho0[k] = flip_prob(network.nodes[k].local_pfa, network.nodes[k].bep);
  }
  return rho0;
}

/// Per-sensor probability of receiving a 1 under H1 with the given target.
inline std::vector<double> received_h1_probs(const Network& network,
                                             const Aaf& aaf,
                                             const TargetParams& target) {
  std::vector<double> rho1(network.size());
  for (std::size_t k = 0; k < network.size(); ++k) {
    rho1[k] =
        flip_prob(local_pd(network.nodes[k], aaf, target), network.nodes[k].bep);
  }
  return rho1;
}

/// Clairvoyant log likelihood-ratio: assumes full knowledge of the target.
/// An upper-bound benchmark, not an implementable rule.
inline double eval_llr(std::span<const std::uint8_t> received,
                       const Network& network, const Aaf& aaf,
                       const TargetParams& target) {
  return llr_from_rho(received, received_h1_probs(network, aaf, target),
                      received_h0_probs(network));
}

/// Counting Rule: number of received 1-decisions.
inline double eval_cr(std::span<const std::uint8_t> received) {
  double count = 0.0;
  for (std::uint8_t bit : received) count += bit;
  return count;
}

// ============================================================================
// LLR table: affine-in-bits decomposition over the parameter grid
// ============================================================================

/// Precomputed clairvoyant-LLR coefficients on the grid, so that
///   llr(cell) = base[cell] + sum_k received[k] * weight(cell, k).
/// Cells are indexed position-major: cell = i * power_bins + j.
struct LlrTable {
  std::size_t n_pos = 0;
  std::size_t n_pow = 0;
  std::size_t n_sensors = 0;
  std::vector<double> base;     // [cell]
  std::vector<double> weights;  // [k * cells + cell]

  std::size_t cells() const { return n_pos * n_pow; }
  double weight(std::size_t cell, std::size_t k) const {
    return weights[k * cells() + cell];
  }
};

inline LlrTable build_llr_table(const Network& network, const Aaf& aaf,
                                const ParameterGrid& grid) {
  grid.validate();
  LlrTable table;
  table.n_pos = grid.position_bins.size();
  table.n_pow = grid.power_bins.size();
  table.n_sensors = network.size();
  const std::size_t cells = table.cells();
  table.base.assign(cells, 0.0);
  table.weights.assign(cells * network.size(), 0.0);

  const std::vector<double> rho0 = received_h0_probs(network);
  for (std::size_t i = 0; i < table.n_pos; ++i) {
    for (std::size_t j = 0; j < table.n_pow; ++j) {
      const std::size_t cell = i * table.n_pow + j;
      const TargetParams cell_target{grid.position_bins[i].center,
                                     grid.power_bins[j].power};
      double base = 0.0;
      for (std::size_t k = 0; k < network.size(); ++k) {
        const SensorNode& node = network.nodes[k];
        const double rho1 =
            flip_prob(local_pd(node, aaf, cell_target), node.bep);
        const double absent = std::log((1.0 - rho1) / (1.0 - rho0[k]));
        table.weights[k * cells + cell] =
            std::log(rho1 / rho0[k]) - absent;
        base += absent;
      }
      table.base[cell] = base;
    }
  }
  return table;
}

inline std::vector<std::size_t> received_ones(
    std::span<const std::uint8_t> received) {
  std::vector<std::size_t> ones;
  for (std::size_t k = 0; k < received.size(); ++k) {
    if (received[k]) ones.push_back(k);
  }
  return ones;
}

/// Reconstruct the clairvoyant LLR at one grid cell from the table.
inline double eval_table_cell(const LlrTable& table,
                              std::span<const std::uint8_t> received,
                              std::size_t cell) {
  double v = table.base[cell];
  for (std::size_t k = 0; k < received.size(); ++k) {
    if (received[k]) v += table.weights[k * table.cells() + cell];
  }
  return v;
}

namespace detail {

/// Fill values[cell] = base[cell] + sum over set bits of the sensor planes.
inline void fill_cell_values(const LlrTable& table,
                             std::span<const std::size_t> ones,
                             std::vector<double>& values) {
  const std::size_t cells = table.cells();
  values.assign(table.base.begin(), table.base.end());
  double* v = values.data();
  for (std::size_t k : ones) {
    const double* w = table.weights.data() + k * cells;
    for (std::size_t c = 0; c < cells; ++c) v[c] += w[c];
  }
}

}  // namespace detail

// ============================================================================
// Grid-search statistics
// ============================================================================

/// GLRT over the grid: max over all cells of the reconstructed LLR.
/// A singleton power grid yields the known-power GLRT.
inline double eval_glrt(std::span<const std::uint8_t> received,
                        const LlrTable& table) {
  std::vector<double> values;
  detail::fill_cell_values(table, received_ones(received), values);
  return *std::max_element(values.begin(), values.end());
}

/// Bayesian statistic with per-bin masses inside the exponent:
///   ln sum_{i,j} exp( llr(i,j) + ln r_i + ln rbar_j ),
/// computed with max-shift stabilization.
inline double eval_bayes(std::span<const std::uint8_t> received,
                         const LlrTable& table, const ParameterGrid& grid) {
  std::vector<double> values;
  detail::fill_cell_values(table, received_ones(received), values);
  double shift = neg_inf;
  for (std::size_t i = 0; i < table.n_pos; ++i) {
    for (std::size_t j = 0; j < table.n_pow; ++j) {
      const double lm = std::log(grid.position_bins[i].mass) +
                        std::log(grid.power_bins[j].mass);
      const double a = values[i * table.n_pow + j] + lm;
      values[i * table.n_pow + j] = a;
      shift = std::max(shift, a);
    }
  }
  if (shift == neg_inf) {
    throw config_error("eval_bayes: all grid masses are zero");
  }
  double sum = 0.0;
  for (double a : values) sum += std::exp(a - shift);
  return shift + std::log(sum);
}

/// Hybrid 1: max over power bins of the position-marginalized statistic,
///   max_j ln sum_i exp( llr(i,j) + ln r_i ).
inline double eval_gb1(std::span<const std::uint8_t> received,
                       const LlrTable& table, const ParameterGrid& grid) {
  std::vector<double> values;
  detail::fill_cell_values(table, received_ones(received), values);
  double best = neg_inf;
  for (std::size_t j = 0; j < table.n_pow; ++j) {
    double shift = neg_inf;
    for (std::size_t i = 0; i < table.n_pos; ++i) {
      shift = std::max(shift, values[i * table.n_pow + j] +
                                  std::log(grid.position_bins[i].mass));
    }
    if (shift == neg_inf) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i < table.n_pos; ++i) {
      sum += std::exp(values[i * table.n_pow + j] +
                      std::log(grid.position_bins[i].mass) - shift);
    }
    best = std::max(best, shift + std::log(sum));
  }
  return best;
}

/// Hybrid 2: max over position bins of the power-marginalized statistic,
///   max_i ln sum_j exp( llr(i,j) + ln rbar_j ).
inline double eval_gb2(std::span<const std::uint8_t> received,
                       const LlrTable& table, const ParameterGrid& grid) {
  std::vector<double> values;
  detail::fill_cell_values(table, received_ones(received), values);
  double best = neg_inf;
  for (std::size_t i = 0; i < table.n_pos; ++i) {
    double shift = neg_inf;
    for (std::size_t j = 0; j < table.n_pow; ++j) {
      shift = std::max(shift, values[i * table.n_pow + j] +
                                  std::log(grid.power_bins[j].mass));
    }
    if (shift == neg_inf) continue;
    double sum = 0.0;
    for (std::size_t j = 0; j < table.n_pow; ++j) {
      sum += std::exp(values[i * table.n_pow + j] +
                      std::log(grid.power_bins[j].mass) - shift);
    }
    best = std::max(best, shift + std::log(sum));
  }
  return best;
}

struct GridRuleValues {
  double glrt = neg_inf;
  double bayes = neg_inf;
  double gb1 = neg_inf;
  double gb2 = neg_inf;
};

/// One-pass evaluator for all four grid statistics, with reusable scratch.
/// Shares a single global max-shift across the three log-sum-exps; if any
/// accumulator drifts into the underflow zone the exactly-shifted standalone
/// forms are used instead.
class GridRuleKernel {
 public:
  GridRuleKernel(const LlrTable& table, const ParameterGrid& grid)
      : table_(&table), grid_(&grid) {
    grid.validate();
    pos_mass_.reserve(grid.position_bins.size());
    for (const PositionBin& bin : grid.position_bins) {
      pos_mass_.push_back(bin.mass);
    }
    pow_mass_.reserve(grid.power_bins.size());
    for (const PowerBin& bin : grid.power_bins) pow_mass_.push_back(bin.mass);
  }

  GridRuleValues evaluate(std::span<const std::uint8_t> received) {
    ones_.clear();
    for (std::size_t k = 0; k < received.size(); ++k) {
      if (received[k]) ones_.push_back(k);
    }
    detail::fill_cell_values(*table_, ones_, values_);

    const std::size_t n_pos = table_->n_pos;
    const std::size_t n_pow = table_->n_pow;
    const double shift =
        *std::max_element(values_.begin(), values_.end());

    col_acc_.assign(n_pow, 0.0);
    double bayes_acc = 0.0;
    double best_row_acc = 0.0;
    const double* v = values_.data();
    for (std::size_t i = 0; i < n_pos; ++i) {
      const double ri = pos_mass_[i];
      double row_acc = 0.0;
      for (std::size_t j = 0; j < n_pow; ++j) {
        const double e = std::exp(v[i * n_pow + j] - shift);
        row_acc += e * pow_mass_[j];
        col_acc_[j] += e * ri;
      }
      bayes_acc += row_acc * ri;
      best_row_acc = std::max(best_row_acc, row_acc);
    }
    const double best_col_acc =
        *std::max_element(col_acc_.begin(), col_acc_.end());

    constexpr double underflow_guard = 1e-280;
    if (bayes_acc < underflow_guard || best_row_acc < underflow_guard ||
        best_col_acc < underflow_guard) {
      return GridRuleValues{shift, eval_bayes(received, *table_, *grid_),
                            eval_gb1(received, *table_, *grid_),
                            eval_gb2(received, *table_, *grid_)};
    }
    return GridRuleValues{shift, shift + std::log(bayes_acc),
                          shift + std::log(best_col_acc),
                          shift + std::log(best_row_acc)};
  }

 private:
  const LlrTable* table_;
  const ParameterGrid* grid_;
  std::vector<double> pos_mass_;
  std::vector<double> pow_mass_;
  std::vector<double> values_;   // scratch, one slot per cell
  std::vector<double> col_acc_;  // scratch, one slot per power bin
  std::vector<std::size_t> ones_;
};

// ============================================================================
// Prior gain moments (B-LOD quadrature)
// ============================================================================

/// Quadrature of the prior second-moment gain for one sensor:
///   sum_i r_i g^2(x_T[i], x_k).
inline double prior_gain_moment(const SensorNode& sensor, const Aaf& aaf,
                                std::span<const PositionBin> position_bins) {
  double moment = 0.0;
  for (const PositionBin& bin : position_bins) {
    const double g = aaf_gain(aaf, bin.center, sensor.position);
    moment += bin.mass * g * g;
  }
  return moment;
}

}  // namespace dfuse

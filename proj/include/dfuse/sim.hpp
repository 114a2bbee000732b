#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "dfuse/channel.hpp"
#include "dfuse/errors.hpp"
#include "dfuse/fusion.hpp"
#include "dfuse/lod.hpp"
#include "dfuse/model.hpp"
#include "dfuse/rng.hpp"

namespace dfuse {

// ============================================================================
// Rules
// ============================================================================

enum class Rule : int {
  Llr = 0,  // clairvoyant benchmark
  Cr,
  Glrt,
  Bayes,
  Gb1,
  Gb2,
  Blod,
  Glod,
};

inline constexpr std::array<Rule, 8> all_rules = {
    Rule::Llr, Rule::Cr,  Rule::Glrt, Rule::Bayes,
    Rule::Gb1, Rule::Gb2, Rule::Blod, Rule::Glod};

inline std::string rule_name(Rule rule) {
  switch (rule) {
    case Rule::Llr:   return "llr";
    case Rule::Cr:    return "cr";
    case Rule::Glrt:  return "glrt";
    case Rule::Bayes: return "bayes";
    case Rule::Gb1:   return "gb1";
    case Rule::Gb2:   return "gb2";
    case Rule::Blod:  return "blod";
    case Rule::Glod:  return "glod";
  }
  throw config_error("unknown rule");
}

inline Rule rule_from_name(const std::string& name) {
  for (Rule rule : all_rules) {
    if (rule_name(rule) == name) return rule;
  }
  throw config_error("unknown rule '" + name + "'");
}

// ============================================================================
// Scenario
// ============================================================================

enum class Hypothesis : int { H0 = 0, H1 = 1 };

/// Full description of one Monte Carlo experiment. `grid` is the rules'
/// search/integration space; `prior_region` is where the target actually
/// appears under H1 (and the support from which the clairvoyant rule's
/// hypothetical position is drawn under H0).
struct Scenario {
  Network network;
  Aaf aaf;
  double true_power = 0.0;
  Box prior_region;
  ParameterGrid grid;
  std::vector<Rule> rules;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  /// Validation path: simulate raw measurements and apply the energy test
  /// instead of drawing decisions directly from the operating point.
  bool measurement_path = false;
  /// Worker threads; <= 0 means hardware concurrency. Results are identical
  /// for every value.
  int threads = 0;
};

/// Per-rule statistic samples, one per trial and hypothesis.
struct StatSamples {
  std::vector<double> h0;
  std::vector<double> h1;
};

// ============================================================================
// Sampling
// ============================================================================

template <class Rng>
Position sample_target(const Box& prior_region, Rng& rng) {
  Position p;
  p.coords.reserve(prior_region.dim());
  for (std::size_t a = 0; a < prior_region.dim(); ++a) {
    const double lo = prior_region.lo.coords[a];
    const double hi = prior_region.hi.coords[a];
    p.coords.push_back(lo + (hi - lo) * rng.next_double());
  }
  return p;
}

/// Draw one trial's decisions: sent bits Bernoulli at the exact operating
/// point (local_pfa under H0, local_pd under H1), then the BSC flips.
template <class Rng>
DecisionRecord sample_decisions(Hypothesis hypothesis,
                                const TargetParams* target,
                                const Network& network, const Aaf& aaf,
                                Rng& rng) {
  if ((hypothesis == Hypothesis::H1) != (target != nullptr)) {
    throw config_error("sample_decisions: target must be present iff H1");
  }
  const std::size_t n = network.size();
  DecisionRecord rec;
  rec.sent.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double p = target ? local_pd(network.nodes[k], aaf, *target)
                            : network.nodes[k].local_pfa;
    rec.sent[k] = rng.next_bernoulli(p) ? 1 : 0;
  }
  std::vector<double> beps(n);
  for (std::size_t k = 0; k < n; ++k) beps[k] = network.nodes[k].bep;
  rec.received = transmit(rec.sent, beps, rng);
  return rec;
}

/// Measurement-level variant: simulate y_k = xi_k g + w_k and apply the
/// energy test y^2 > gamma. Distributionally identical to sample_decisions.
template <class Rng>
DecisionRecord sample_decisions_measurement(Hypothesis hypothesis,
                                            const TargetParams* target,
                                            const Network& network,
                                            const Aaf& aaf, Rng& rng) {
  if ((hypothesis == Hypothesis::H1) != (target != nullptr)) {
    throw config_error("sample_decisions: target must be present iff H1");
  }
  const std::size_t n = network.size();
  DecisionRecord rec;
  rec.sent.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const SensorNode& node = network.nodes[k];
    double y = 0.0;
    if (target) {
      const double g = aaf_gain(aaf, target->position, node.position);
      y += rng.next_normal() * std::sqrt(target->power) * g;
    }
    y += rng.next_normal() * std::sqrt(node.noise_var);
    rec.sent[k] = (y * y > node.threshold) ? 1 : 0;
  }
  std::vector<double> beps(n);
  for (std::size_t k = 0; k < n; ++k) beps[k] = network.nodes[k].bep;
  rec.received = transmit(rec.sent, beps, rng);
  return rec;
}

// ============================================================================
// Engine internals
// ============================================================================

namespace detail {

struct BitKey {
  std::vector<std::uint64_t> words;
  bool operator==(const BitKey&) const = default;
};

struct BitKeyHash {
  std::size_t operator()(const BitKey& key) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint64_t w : key.words) h = mix64(h ^ w);
    return static_cast<std::size_t>(h);
  }
};

inline BitKey pack_bits(std::span<const std::uint8_t> bits) {
  BitKey key;
  key.words.assign((bits.size() + 63) / 64, 0);
  for (std::size_t k = 0; k < bits.size(); ++k) {
    if (bits[k]) key.words[k / 64] |= (1ULL << (k % 64));
  }
  return key;
}

/// Everything precomputed once per scenario and shared read-only by workers.
struct ScenarioContext {
  const Scenario* scenario = nullptr;
  std::array<bool, all_rules.size()> enabled{};
  bool need_grid_rules = false;
  LlrTable llr_table;
  LodWeights weights;
  std::vector<double> gain_moments;  // B-LOD
  GlodTable glod_table;
  std::vector<double> beps;

  bool has(Rule rule) const { return enabled[static_cast<std::size_t>(rule)]; }
};

inline ScenarioContext build_context(const Scenario& scenario) {
  validate(scenario.network);
  validate(scenario.aaf);
  scenario.prior_region.validate();
  if (!(scenario.true_power >= 0.0)) {
    throw config_error("scenario: true_power must be >= 0");
  }
  if (scenario.trials == 0) {
    throw config_error("scenario: trials must be >= 1");
  }
  if (scenario.rules.empty()) {
    throw config_error("scenario: no rules configured");
  }
  if (!scenario.network.region.contains(scenario.prior_region.lo) ||
      !scenario.network.region.contains(scenario.prior_region.hi)) {
    throw config_error("scenario: prior region not inside surveillance region");
  }

  ScenarioContext ctx;
  ctx.scenario = &scenario;
  for (Rule rule : scenario.rules) {
    ctx.enabled[static_cast<std::size_t>(rule)] = true;
  }
  ctx.need_grid_rules = ctx.has(Rule::Glrt) || ctx.has(Rule::Bayes) ||
                        ctx.has(Rule::Gb1) || ctx.has(Rule::Gb2);
  if (ctx.need_grid_rules || ctx.has(Rule::Blod) || ctx.has(Rule::Glod)) {
    scenario.grid.validate();
  }
  if (ctx.need_grid_rules) {
    ctx.llr_table =
        build_llr_table(scenario.network, scenario.aaf, scenario.grid);
  }
  if (ctx.has(Rule::Blod) || ctx.has(Rule::Glod)) {
    ctx.weights = lod_weights(scenario.network);
  }
  if (ctx.has(Rule::Blod)) {
    ctx.gain_moments.reserve(scenario.network.size());
    for (const SensorNode& node : scenario.network.nodes) {
      ctx.gain_moments.push_back(
          prior_gain_moment(node, scenario.aaf, scenario.grid.position_bins));
    }
    // Raises the degenerate-statistic error before any trial runs.
    std::vector<std::uint8_t> probe(scenario.network.size(), 0);
    eval_blod(probe, scenario.network, ctx.weights, ctx.gain_moments);
  }
  if (ctx.has(Rule::Glod)) {
    ctx.glod_table = build_glod_table(scenario.network, scenario.aaf,
                                      ctx.weights,
                                      scenario.grid.position_bins);
  }
  ctx.beps.reserve(scenario.network.size());
  for (const SensorNode& node : scenario.network.nodes) {
    ctx.beps.push_back(node.bep);
  }
  return ctx;
}

/// Per-worker evaluator. Every statistic except the clairvoyant LLR is a pure
/// function of the received vector, so values are memoized per distinct
/// vector. Caches are worker-private: workers may duplicate a computation,
/// but the values are deterministic so results never depend on scheduling.
class RuleEvaluator {
 public:
  explicit RuleEvaluator(const ScenarioContext& ctx) : ctx_(&ctx) {
    if (ctx.need_grid_rules) {
      kernel_.emplace(ctx.llr_table, ctx.scenario->grid);
    }
  }

  const std::array<double, all_rules.size()>& evaluate(
      std::span<const std::uint8_t> received) {
    const BitKey key = pack_bits(received);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    std::array<double, all_rules.size()> values{};
    const ScenarioContext& ctx = *ctx_;
    if (ctx.has(Rule::Cr)) {
      values[static_cast<std::size_t>(Rule::Cr)] = eval_cr(received);
    }
    if (kernel_) {
      const GridRuleValues grid = kernel_->evaluate(received);
      values[static_cast<std::size_t>(Rule::Glrt)] = grid.glrt;
      values[static_cast<std::size_t>(Rule::Bayes)] = grid.bayes;
      values[static_cast<std::size_t>(Rule::Gb1)] = grid.gb1;
      values[static_cast<std::size_t>(Rule::Gb2)] = grid.gb2;
    }
    if (ctx.has(Rule::Blod)) {
      values[static_cast<std::size_t>(Rule::Blod)] = eval_blod(
          received, ctx.scenario->network, ctx.weights, ctx.gain_moments);
    }
    if (ctx.has(Rule::Glod)) {
      values[static_cast<std::size_t>(Rule::Glod)] =
          eval_glod(received, ctx.glod_table);
    }
    return cache_.emplace(key, values).first->second;
  }

 private:
  const ScenarioContext* ctx_;
  std::optional<GridRuleKernel> kernel_;
  std::unordered_map<BitKey, std::array<double, all_rules.size()>, BitKeyHash>
      cache_;
};

// Stream tags of the counter-based RNG: decisions and target draws are
// separate streams per (hypothesis, trial), so enabling or disabling the
// clairvoyant rule never perturbs the decision bits.
inline constexpr std::uint64_t decision_stream(Hypothesis h) {
  return static_cast<std::uint64_t>(h);
}
inline constexpr std::uint64_t target_stream(Hypothesis h) {
  return 2 + static_cast<std::uint64_t>(h);
}

}  // namespace detail

// ============================================================================
// Monte Carlo engine
// ============================================================================

/// Run the scenario's trials under both hypotheses and return the statistic
/// samples per configured rule. Deterministic given (seed, trials) and
/// independent of the worker count: trial t under hypothesis h reads only
/// the counter-based streams keyed by (seed, h, t).
///
/// Under H1 each trial draws a fresh target position from the prior region.
/// Under H0 decisions depend on no target; only the clairvoyant LLR rule, if
/// configured, draws a hypothetical position from its dedicated stream so
/// that its null statistic is sampled against the same prior.
inline std::map<Rule, StatSamples> run_trials(const Scenario& scenario) {
  const detail::ScenarioContext ctx = detail::build_context(scenario);
  const std::size_t trials = scenario.trials;
  const bool need_llr = ctx.has(Rule::Llr);

  std::map<Rule, StatSamples> result;
  std::vector<std::pair<Rule, StatSamples*>> slots;
  for (Rule rule : scenario.rules) {
    StatSamples& samples = result[rule];
    if (!samples.h0.empty()) continue;  // rules are a set; ignore duplicates
    samples.h0.resize(trials);
    samples.h1.resize(trials);
    slots.emplace_back(rule, &samples);
  }

  unsigned hw = std::thread::hardware_concurrency();
  const std::size_t workers =
      scenario.threads > 0 ? static_cast<std::size_t>(scenario.threads)
                           : std::max(1u, hw);

  auto run_range = [&](std::size_t begin, std::size_t end) {
    detail::RuleEvaluator evaluator(ctx);
    for (Hypothesis h : {Hypothesis::H0, Hypothesis::H1}) {
      const bool is_h1 = h == Hypothesis::H1;
      for (std::size_t t = begin; t < end; ++t) {
        TrialRng dec_rng(scenario.seed, detail::decision_stream(h), t);
        TargetParams target;
        if (is_h1 || need_llr) {
          TrialRng pos_rng(scenario.seed, detail::target_stream(h), t);
          target.position = sample_target(scenario.prior_region, pos_rng);
          target.power = scenario.true_power;
        }
        const TargetParams* tp = is_h1 ? &target : nullptr;
        const DecisionRecord rec =
            scenario.measurement_path
                ? sample_decisions_measurement(h, tp, scenario.network,
                                               scenario.aaf, dec_rng)
                : sample_decisions(h, tp, scenario.network, scenario.aaf,
                                   dec_rng);
        const auto& values = evaluator.evaluate(rec.received);
        for (const auto& [rule, samples] : slots) {
          const double value =
              rule == Rule::Llr
                  ? eval_llr(rec.received, scenario.network, scenario.aaf,
                             target)
                  : values[static_cast<std::size_t>(rule)];
          (is_h1 ? samples->h1 : samples->h0)[t] = value;
        }
      }
    }
  };

  if (workers <= 1 || trials < 2 * workers) {
    run_range(0, trials);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (trials + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(trials, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run_range, begin, end);
    }
    for (std::thread& th : pool) th.join();
  }
  return result;
}

// ============================================================================
// Empirical ROC
// ============================================================================

/// Empirical operating points (P_f0, P_d0) per fusion threshold; strictly
/// increasing in pfa, nondecreasing in pd, ending at (1,1).
struct RocCurve {
  struct Point {
    double pfa;
    double pd;
  };
  std::vector<Point> points;
};

namespace detail {

/// Fraction of `sorted` (ascending) strictly above the threshold.
inline double frac_above(const std::vector<double>& sorted, double threshold) {
  const auto it =
      std::upper_bound(sorted.begin(), sorted.end(), threshold);
  return static_cast<double>(sorted.end() - it) /
         static_cast<double>(sorted.size());
}

}  // namespace detail

/// Sweep the fusion threshold over all distinct sample values, using the
/// strict inequality Pr(statistic > threshold) on both axes.
inline RocCurve empirical_roc(const StatSamples& samples) {
  if (samples.h0.empty() || samples.h1.empty()) {
    throw config_error("empirical_roc: empty sample set");
  }
  std::vector<double> h0 = samples.h0, h1 = samples.h1;
  std::sort(h0.begin(), h0.end());
  std::sort(h1.begin(), h1.end());

  std::vector<double> pooled;
  pooled.reserve(h0.size() + h1.size());
  pooled.insert(pooled.end(), h0.begin(), h0.end());
  pooled.insert(pooled.end(), h1.begin(), h1.end());
  std::sort(pooled.begin(), pooled.end(), std::greater<>());
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

  RocCurve curve;
  for (double threshold : pooled) {
    const double pfa = detail::frac_above(h0, threshold);
    const double pd = detail::frac_above(h1, threshold);
    if (!curve.points.empty() && curve.points.back().pfa == pfa) {
      curve.points.back().pd = pd;  // smallest threshold at this pfa: max pd
    } else {
      curve.points.push_back({pfa, pd});
    }
  }
  if (!curve.points.empty() && curve.points.back().pfa == 1.0) {
    curve.points.back().pd = 1.0;  // threshold below every sample
  } else {
    curve.points.push_back({1.0, 1.0});
  }
  return curve;
}

/// Detection rate at a target false-alarm rate.
struct PdAtPfa {
  double pd = 0.0;
  double achieved_pfa = 0.0;
  double threshold = 0.0;
  /// Set when target_pfa is below 1/|h0| and the quantile cannot be resolved
  /// at this trial count.
  bool quantile_unresolvable = false;
};

/// Smallest threshold whose empirical P_f0 (strict >) does not exceed
/// target_pfa; reports the achieved P_f0 since discrete statistics cannot
/// hit the target exactly.
inline PdAtPfa pd_at_pfa(const StatSamples& samples, double target_pfa) {
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    throw config_error("pd_at_pfa: target_pfa must lie in (0,1)");
  }
  if (samples.h0.empty() || samples.h1.empty()) {
    throw config_error("pd_at_pfa: empty sample set");
  }
  std::vector<double> h0 = samples.h0, h1 = samples.h1;
  std::sort(h0.begin(), h0.end());
  std::sort(h1.begin(), h1.end());

  const auto allowed = static_cast<std::size_t>(
      std::floor(target_pfa * static_cast<double>(h0.size())));
  PdAtPfa out;
  out.threshold = h0[h0.size() - 1 - allowed];  // (allowed+1)-th largest
  out.quantile_unresolvable = allowed == 0;
  out.achieved_pfa = detail::frac_above(h0, out.threshold);
  out.pd = detail::frac_above(h1, out.threshold);
  return out;
}

// ============================================================================
// Detection-probability field
// ============================================================================

/// P_d of a hypothetical sensor (template's noise/threshold) swept over a
/// resolution x resolution lattice of positions covering the region,
/// endpoints inclusive. Entry (r, c) corresponds to position
/// (axis0[r], axis1[c]).
struct PdField {
  std::size_t resolution = 0;
  std::vector<double> values;  // row-major, resolution^2
  std::vector<double> axis0;
  std::vector<double> axis1;
};

inline PdField pd_field(const SensorNode& sensor_template, const Aaf& aaf,
                        const TargetParams& target, const Box& region,
                        std::size_t resolution) {
  region.validate();
  if (region.dim() != 2) {
    throw config_error("pd_field: region must be 2-D");
  }
  if (resolution < 2) {
    throw config_error("pd_field: resolution must be >= 2");
  }
  PdField field;
  field.resolution = resolution;
  const double denom = static_cast<double>(resolution - 1);
  for (std::size_t a = 0; a < 2; ++a) {
    auto& axis = a == 0 ? field.axis0 : field.axis1;
    axis.reserve(resolution);
    for (std::size_t i = 0; i < resolution; ++i) {
      axis.push_back(region.lo.coords[a] +
                     (region.hi.coords[a] - region.lo.coords[a]) *
                         static_cast<double>(i) / denom);
    }
  }
  field.values.reserve(resolution * resolution);
  SensorNode probe = sensor_template;
  for (std::size_t r = 0; r < resolution; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      probe.position = Position{{field.axis0[r], field.axis1[c]}};
      field.values.push_back(local_pd(probe, aaf, target));
    }
  }
  return field;
}

}  // namespace dfuse

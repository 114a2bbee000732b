#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dfuse/fusion.hpp"
#include "dfuse/lod.hpp"
#include "dfuse/model.hpp"
#include "dfuse/rng.hpp"

using namespace dfuse;

namespace {

const Box unit_square{Position{{0.0, 0.0}}, Position{{1.0, 1.0}}};

Network small_network(std::size_t count, double bep) {
  return build_grid_network(count, unit_square, 1.0, 0.05, bep);
}

std::vector<std::uint8_t> random_bits(std::size_t n, TrialRng& rng,
                                      double p = 0.4) {
  std::vector<std::uint8_t> bits(n);
  for (auto& b : bits) b = rng.next_bernoulli(p) ? 1 : 0;
  return bits;
}

ParameterGrid small_grid(const Box& space, std::size_t nx, double power,
                         std::size_t npow) {
  return make_uniform_grid(space, nx, power, 0.1, npow);
}

}  // namespace

TEST_CASE("clairvoyant llr") {
  const Network net = small_network(9, 0.0);
  const Aaf aaf = PowerLawAaf{0.2, 4.0};
  TrialRng rng(31, 0, 0);

  SECTION("zero target power gives zero for every vector") {
    const TargetParams null_target{Position{{0.3, 0.7}}, 0.0};
    for (int i = 0; i < 50; ++i) {
      CHECK(eval_llr(random_bits(9, rng), net, aaf, null_target) == 0.0);
    }
  }
  SECTION("hand arithmetic on homogeneous rho") {
    const std::vector<std::uint8_t> received{1, 0};
    const std::vector<double> rho1{0.5, 0.5};
    const std::vector<double> rho0{0.25, 0.25};
    CHECK(llr_from_rho(received, rho1, rho0) ==
          Catch::Approx(std::log(4.0 / 3.0)).epsilon(1e-14));
  }
  SECTION("zero-information links give identically zero") {
    const Network noisy = small_network(9, 0.5);
    const TargetParams target{Position{{0.5, 0.5}}, 10.0};
    for (int i = 0; i < 50; ++i) {
      CHECK(eval_llr(random_bits(9, rng), noisy, aaf, target) == 0.0);
    }
  }
  SECTION("bep 0 is bit-identical to the error-free form") {
    const TargetParams target{Position{{0.4, 0.6}}, 10.0};
    std::vector<double> pd(net.size()), pfa(net.size());
    for (std::size_t k = 0; k < net.size(); ++k) {
      pd[k] = local_pd(net.nodes[k], aaf, target);
      pfa[k] = net.nodes[k].local_pfa;
      CHECK(flip_prob(pd[k], 0.0) == pd[k]);
      CHECK(flip_prob(pfa[k], 0.0) == pfa[k]);
    }
    for (int i = 0; i < 100; ++i) {
      const auto bits = random_bits(9, rng);
      CHECK(eval_llr(bits, net, aaf, target) ==
            llr_from_rho(bits, pd, pfa));
    }
  }
}

TEST_CASE("counting rule") {
  CHECK(eval_cr(std::vector<std::uint8_t>{1, 0, 1, 1}) == 3.0);
  CHECK(eval_cr(std::vector<std::uint8_t>{0, 0, 0}) == 0.0);
  // Permutation invariance.
  CHECK(eval_cr(std::vector<std::uint8_t>{1, 1, 0, 1}) ==
        eval_cr(std::vector<std::uint8_t>{1, 0, 1, 1}));
}

TEST_CASE("parameter grid validation") {
  ParameterGrid grid = small_grid(unit_square, 4, 10.0, 3);
  CHECK(grid.cell_count() == 48);
  grid.validate();

  grid.position_bins[0].mass = -0.1;
  CHECK_THROWS_AS(grid.validate(), config_error);

  ParameterGrid unnormalized = small_grid(unit_square, 2, 10.0, 2);
  unnormalized.power_bins[0].mass = 0.9;
  CHECK_THROWS_AS(unnormalized.validate(), config_error);

  CHECK_THROWS_AS(ParameterGrid{}.validate(), config_error);
}

TEST_CASE("llr table") {
  const Network net = small_network(9, 0.1);
  const Aaf aaf = ExponentialAaf{0.3};
  TrialRng rng(37, 0, 0);

  SECTION("single cell reproduces the clairvoyant llr") {
    const TargetParams target{Position{{0.25, 0.75}}, 8.0};
    const ParameterGrid grid{{{target.position, 1.0}}, {{target.power, 1.0}}};
    const LlrTable table = build_llr_table(net, aaf, grid);
    REQUIRE(table.cells() == 1);
    for (int i = 0; i < 100; ++i) {
      const auto bits = random_bits(9, rng);
      CHECK(eval_table_cell(table, bits, 0) ==
            Catch::Approx(eval_llr(bits, net, aaf, target)).margin(1e-10));
    }
  }
  SECTION("zero-power bins have zero base and weights") {
    const ParameterGrid grid{{{Position{{0.5, 0.5}}, 1.0}}, {{0.0, 1.0}}};
    const LlrTable table = build_llr_table(net, aaf, grid);
    CHECK(table.base[0] == 0.0);
    for (std::size_t k = 0; k < net.size(); ++k) {
      CHECK(table.weight(0, k) == 0.0);
    }
  }
  SECTION("cell count and full-grid reconstruction") {
    const ParameterGrid grid = small_grid(unit_square, 4, 9.0, 3);
    const LlrTable table = build_llr_table(net, aaf, grid);
    CHECK(table.cells() == grid.cell_count());
    for (int i = 0; i < 25; ++i) {
      const auto bits = random_bits(9, rng);
      for (std::size_t c = 0; c < table.cells(); ++c) {
        const TargetParams cell_target{
            grid.position_bins[c / table.n_pow].center,
            grid.power_bins[c % table.n_pow].power};
        CHECK(eval_table_cell(table, bits, c) ==
              Catch::Approx(eval_llr(bits, net, aaf, cell_target))
                  .margin(1e-10));
      }
    }
  }
}

TEST_CASE("grid statistics") {
  const Network net = small_network(9, 0.05);
  const Aaf aaf = PowerLawAaf{0.25, 3.0};
  const ParameterGrid grid = small_grid(unit_square, 5, 10.0, 4);
  const LlrTable table = build_llr_table(net, aaf, grid);
  TrialRng rng(41, 0, 0);

  SECTION("singleton grid collapses every statistic to the llr") {
    const TargetParams target{Position{{0.6, 0.4}}, 10.0};
    const ParameterGrid point{{{target.position, 1.0}}, {{target.power, 1.0}}};
    const LlrTable single = build_llr_table(net, aaf, point);
    for (int i = 0; i < 50; ++i) {
      const auto bits = random_bits(9, rng);
      const double direct = eval_table_cell(single, bits, 0);
      CHECK(eval_glrt(bits, single) == direct);
      CHECK(eval_bayes(bits, single, point) ==
            Catch::Approx(direct).margin(1e-12));
      CHECK(eval_gb1(bits, single, point) ==
            Catch::Approx(direct).margin(1e-12));
      CHECK(eval_gb2(bits, single, point) ==
            Catch::Approx(direct).margin(1e-12));
    }
  }
  SECTION("glrt dominates every cell") {
    for (int i = 0; i < 25; ++i) {
      const auto bits = random_bits(9, rng);
      const double glrt = eval_glrt(bits, table);
      for (std::size_t c = 0; c < table.cells(); ++c) {
        CHECK(glrt >= eval_table_cell(table, bits, c));
      }
    }
  }
  SECTION("log-sum-exp sandwich under uniform masses") {
    const double log_cells =
        std::log(static_cast<double>(grid.cell_count()));
    const double log_mass = std::log(grid.position_bins[0].mass) +
                            std::log(grid.power_bins[0].mass);
    for (int i = 0; i < 1000; ++i) {
      const auto bits = random_bits(9, rng);
      const double glrt = eval_glrt(bits, table);
      const double proportional = eval_bayes(bits, table, grid) - log_mass;
      CHECK(proportional >= glrt - 1e-9);
      CHECK(proportional <= glrt + log_cells + 1e-9);
      CHECK(eval_gb1(bits, table, grid) <= glrt + 1e-9);
      CHECK(eval_gb2(bits, table, grid) <= glrt + 1e-9);
    }
  }
  SECTION("gb1 with a singleton power grid equals bayes") {
    const ParameterGrid narrow{grid.position_bins, {{10.0, 1.0}}};
    const LlrTable t = build_llr_table(net, aaf, narrow);
    for (int i = 0; i < 50; ++i) {
      const auto bits = random_bits(9, rng);
      CHECK(eval_gb1(bits, t, narrow) ==
            Catch::Approx(eval_bayes(bits, t, narrow)).margin(1e-12));
    }
  }
  SECTION("gb2 with a singleton position grid is power-marginal only") {
    const ParameterGrid narrow{{{Position{{0.5, 0.5}}, 1.0}}, grid.power_bins};
    const LlrTable t = build_llr_table(net, aaf, narrow);
    const double log_npow =
        std::log(static_cast<double>(narrow.power_bins.size()));
    for (int i = 0; i < 50; ++i) {
      const auto bits = random_bits(9, rng);
      const double gb2 = eval_gb2(bits, t, narrow);
      const double glrt = eval_glrt(bits, t);
      CHECK(gb2 == Catch::Approx(eval_bayes(bits, t, narrow)).margin(1e-12));
      CHECK(gb2 >= glrt - log_npow - 1e-9);
      CHECK(gb2 <= glrt + 1e-9);
    }
  }
  SECTION("batched kernel matches the standalone forms") {
    GridRuleKernel kernel(table, grid);
    for (int i = 0; i < 200; ++i) {
      const auto bits = random_bits(9, rng);
      const GridRuleValues v = kernel.evaluate(bits);
      CHECK(v.glrt == Catch::Approx(eval_glrt(bits, table)).margin(1e-10));
      CHECK(v.bayes ==
            Catch::Approx(eval_bayes(bits, table, grid)).margin(1e-10));
      CHECK(v.gb1 == Catch::Approx(eval_gb1(bits, table, grid)).margin(1e-10));
      CHECK(v.gb2 == Catch::Approx(eval_gb2(bits, table, grid)).margin(1e-10));
    }
  }
  SECTION("all masses zero raises a configuration error") {
    ParameterGrid zero = grid;
    for (auto& bin : zero.position_bins) bin.mass = 0.0;
    const auto bits = random_bits(9, rng);
    CHECK_THROWS_AS(eval_bayes(bits, table, zero), config_error);
  }
}

TEST_CASE("homogeneous sensors make llr affine in cr") {
  // Four corner sensors, target dead center: all operating points equal.
  const Network net = small_network(4, 0.1);
  const Aaf aaf = ExponentialAaf{0.4};
  const TargetParams target{Position{{0.5, 0.5}}, 10.0};
  const double pd = local_pd(net.nodes[0], aaf, target);
  const double rho1 = flip_prob(pd, 0.1);
  const double rho0 = flip_prob(0.05, 0.1);
  const double a = std::log(rho1 * (1.0 - rho0) / (rho0 * (1.0 - rho1)));
  const double b = 4.0 * std::log((1.0 - rho1) / (1.0 - rho0));
  REQUIRE(a > 0.0);

  TrialRng rng(43, 0, 0);
  for (int i = 0; i < 1000; ++i) {
    const auto bits = random_bits(4, rng, 0.5);
    CHECK(eval_llr(bits, net, aaf, target) ==
          Catch::Approx(a * eval_cr(bits) + b).margin(1e-10));
  }
}

TEST_CASE("zero-information degeneracy of grid rules") {
  const Network noisy = small_network(9, 0.5);
  const Aaf aaf = PowerLawAaf{0.2, 4.0};
  const ParameterGrid grid = small_grid(unit_square, 3, 10.0, 2);
  const LlrTable table = build_llr_table(noisy, aaf, grid);
  TrialRng rng(47, 0, 0);

  const auto first = random_bits(9, rng);
  const double glrt0 = eval_glrt(first, table);
  const double bayes0 = eval_bayes(first, table, grid);
  for (int i = 0; i < 1000; ++i) {
    const auto bits = random_bits(9, rng);
    CHECK(eval_glrt(bits, table) == glrt0);
    CHECK(eval_bayes(bits, table, grid) == bayes0);
  }
  CHECK(glrt0 == 0.0);
}

TEST_CASE("prior gain moment") {
  const SensorNode sensor =
      make_sensor_node(Position{{0.0, 0.0}}, 1.0, 0.05, 0.0);
  const Aaf aaf = ExponentialAaf{0.5};

  SECTION("point mass returns the squared gain") {
    const Position x0{{0.3, 0.4}};
    const std::vector<PositionBin> bins{{x0, 1.0}};
    const double g = aaf_gain(aaf, x0, sensor.position);
    CHECK(prior_gain_moment(sensor, aaf, bins) == g * g);
  }
  SECTION("two bins at gains 0.6 and 0.8 average to 0.5") {
    const double eta = 0.5;
    const double r_low = eta * std::sqrt(-2.0 * std::log(0.6));
    const double r_high = eta * std::sqrt(-2.0 * std::log(0.8));
    const std::vector<PositionBin> bins{{Position{{r_low, 0.0}}, 0.5},
                                        {Position{{r_high, 0.0}}, 0.5}};
    CHECK(prior_gain_moment(sensor, aaf, bins) ==
          Catch::Approx(0.5).epsilon(1e-12));
  }
  SECTION("convex combination stays in (0, 1]") {
    TrialRng rng(53, 0, 0);
    for (int i = 0; i < 200; ++i) {
      std::vector<PositionBin> bins;
      double total = 0.0;
      for (int b = 0; b < 4; ++b) {
        bins.push_back(
            {Position{{rng.next_double() * 3.0, rng.next_double() * 3.0}},
             rng.next_double() + 0.01});
        total += bins.back().mass;
      }
      for (auto& bin : bins) bin.mass /= total;
      const double m = prior_gain_moment(sensor, aaf, bins);
      CHECK(m > 0.0);
      CHECK(m <= 1.0);
    }
  }
}

TEST_CASE("blod and glod") {
  const Aaf aaf = ExponentialAaf{0.3};

  SECTION("single-sensor hand values") {
    // K = 1, bep = 0, pfa = 0.05: the moment and pdf factors cancel.
    Network net;
    net.region = unit_square;
    net.nodes.push_back(make_sensor_node(Position{{0.5, 0.5}}, 1.0, 0.05,
                                         0.0));
    const LodWeights w = lod_weights(net);
    const std::vector<double> moments{
        prior_gain_moment(net.nodes[0], aaf,
                          std::vector<PositionBin>{{Position{{0.2, 0.2}},
                                                    1.0}})};
    const std::vector<std::uint8_t> hit{1}, miss{0};
    CHECK(eval_blod(hit, net, w, moments) ==
          Catch::Approx(std::sqrt(19.0)).epsilon(1e-12));
    CHECK(eval_blod(miss, net, w, moments) ==
          Catch::Approx(-std::sqrt(1.0 / 19.0)).epsilon(1e-12));
    // K = 1 G-LOD: the gain cancels, every candidate scores the same.
    const std::vector<PositionBin> candidates{{Position{{0.1, 0.9}}, 0.5},
                                              {Position{{0.7, 0.3}}, 0.5}};
    const double expected = w.nu1[0] / std::sqrt(w.psi[0]);
    CHECK(eval_glod(hit, net, aaf, w, candidates) ==
          Catch::Approx(expected).epsilon(1e-12));
  }
  SECTION("three-way point-mass identity") {
    const Network net = small_network(9, 0.15);
    const LodWeights w = lod_weights(net);
    const Position x0{{0.35, 0.65}};
    std::vector<double> moments;
    for (const SensorNode& node : net.nodes) {
      moments.push_back(prior_gain_moment(
          node, aaf, std::vector<PositionBin>{{x0, 1.0}}));
    }
    const std::vector<PositionBin> singleton{{x0, 1.0}};
    TrialRng rng(59, 0, 0);
    for (int i = 0; i < 200; ++i) {
      const auto bits = random_bits(9, rng);
      const double blod = eval_blod(bits, net, w, moments);
      const double glod = eval_glod(bits, net, aaf, w, singleton);
      const double inner = score_at_null(bits, net, aaf, x0) /
                           std::sqrt(fisher_at_null(net, aaf, x0));
      CHECK(blod == Catch::Approx(inner).epsilon(1e-12));
      CHECK(glod == Catch::Approx(inner).epsilon(1e-12));
    }
  }
  SECTION("zero-information links are degenerate") {
    const Network noisy = small_network(4, 0.5);
    const LodWeights w = lod_weights(noisy);
    std::vector<double> moments(4, 0.5);
    const std::vector<std::uint8_t> bits{1, 0, 0, 1};
    CHECK_THROWS_AS(eval_blod(bits, noisy, w, moments),
                    degenerate_statistic_error);
    const std::vector<PositionBin> candidates{{Position{{0.5, 0.5}}, 1.0}};
    CHECK_THROWS_AS(build_glod_table(noisy, aaf, w, candidates),
                    degenerate_statistic_error);
  }
  SECTION("glod table path matches the direct signature") {
    const Network net = small_network(16, 0.05);
    const LodWeights w = lod_weights(net);
    const auto candidates = make_uniform_position_bins(unit_square, 4);
    const GlodTable table = build_glod_table(net, aaf, w, candidates);
    TrialRng rng(61, 0, 0);
    for (int i = 0; i < 100; ++i) {
      const auto bits = random_bits(16, rng, 0.2);
      double best = neg_inf;
      for (const PositionBin& cand : candidates) {
        const double fisher = fisher_at_null(net, aaf, cand.center);
        if (std::sqrt(fisher) < 1e-300) continue;
        best = std::max(best, score_at_null(bits, net, aaf, cand.center) /
                                  std::sqrt(fisher));
      }
      CHECK(eval_glod(bits, table) == Catch::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("error-free reduction of lod weights") {
  const Network net = small_network(9, 0.0);
  const LodWeights w = lod_weights(net);
  for (std::size_t k = 0; k < net.size(); ++k) {
    const SensorNode& node = net.nodes[k];
    const double pfa = node.local_pfa;
    const double var = pfa * (1.0 - pfa);
    const double pdf = normal_pdf(std::sqrt(node.threshold / node.noise_var));
    const double slope =
        pdf * std::sqrt(node.threshold) / std::pow(node.noise_var, 1.5);
    // Error-free forms written out independently with P_f in place of rho0.
    CHECK(w.nu1[k] == (1.0 - pfa) / var * 1.0 * slope);
    CHECK(w.nu0[k] == (0.0 - pfa) / var * 1.0 * slope);
    CHECK(w.psi[k] == 1.0 * pdf * pdf * node.threshold /
                          (var * std::pow(node.noise_var, 3.0)));
  }
}

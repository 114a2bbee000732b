#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfuse/errors.hpp"
#include "dfuse/fusion.hpp"
#include "dfuse/model.hpp"
#include "dfuse/sim.hpp"

namespace dfuse {

using json = nlohmann::json;

/// One (AAF, bep) column of the detection-rate table.
struct TableVariant {
  std::string name;
  Aaf aaf;
  double bep = 0.0;
};

/// Validated run configuration; absent keys take the defaults below
/// (K = 64 grid over [0,1]^2, unit noise, local P_f = 0.05, ideal links,
/// power-law AAF eta = 0.2 / alpha = 4, 10 dB target, 100x100x10 grid,
/// 1e5 trials).
struct RunConfig {
  std::uint64_t seed = 1;
  std::uint64_t trials = 100000;
  int threads = 0;

  Box region{Position{{0.0, 0.0}}, Position{{1.0, 1.0}}};
  std::size_t sensor_count = 64;
  double noise_var = 1.0;
  double local_pfa = 0.05;
  double bep = 0.0;
  Aaf aaf = PowerLawAaf{0.2, 4.0};
  double target_power = 10.0;  // linear scale; snr_db only at the boundary
  Box prior_region{Position{{0.0, 0.0}}, Position{{1.0, 1.0}}};

  std::size_t position_cells = 100;
  std::size_t power_cells = 10;
  double power_uncertainty = 0.1;

  std::vector<Rule> rules = {Rule::Glrt, Rule::Bayes, Rule::Gb1, Rule::Gb2,
                             Rule::Blod, Rule::Cr,    Rule::Glod};
  std::vector<double> pfa_targets = {0.01, 0.1};

  std::size_t field_resolution = 100;
  std::optional<Position> field_target;  // default: region center

  double table_pfa_target = 0.01;
  std::vector<TableVariant> table_variants;  // default: Table-2 columns

  bool measurement_path = false;

  Scenario to_scenario() const {
    Scenario sc;
    sc.network =
        build_grid_network(sensor_count, region, noise_var, local_pfa, bep);
    sc.aaf = aaf;
    sc.true_power = target_power;
    sc.prior_region = prior_region;
    sc.grid = make_uniform_grid(prior_region, position_cells, target_power,
                                power_uncertainty, power_cells);
    sc.rules = rules;
    sc.trials = trials;
    sc.seed = seed;
    sc.measurement_path = measurement_path;
    sc.threads = threads;
    return sc;
  }

  json to_json() const;
};

// ============================================================================
// Parsing
// ============================================================================

namespace detail {

inline void expect_object(const json& value, const std::string& context) {
  if (!value.is_object()) {
    throw config_error("'" + context + "' must be an object");
  }
}

inline void reject_unknown_keys(const json& obj, const std::string& context,
                                std::initializer_list<const char*> allowed) {
  for (const auto& [key, unused] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw config_error("unknown key '" + key + "' in '" + context + "'");
    }
  }
}

inline double require_number(const json& obj, const std::string& context,
                             const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw config_error("'" + context + "." + key + "' must be a number");
  }
  return it->get<double>();
}

inline double number_or(const json& obj, const std::string& context,
                        const char* key, double fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) {
    throw config_error("'" + context + "." + key + "' must be a number");
  }
  return it->get<double>();
}

inline std::uint64_t unsigned_or(const json& obj, const std::string& context,
                                 const char* key, std::uint64_t fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer() || it->get<double>() < 0) {
    throw config_error("'" + context + "." + key +
                       "' must be a nonnegative integer");
  }
  return it->get<std::uint64_t>();
}

inline Position parse_position(const json& value, const std::string& context) {
  if (!value.is_array() || value.empty()) {
    throw config_error("'" + context + "' must be a nonempty array of numbers");
  }
  Position p;
  for (const json& v : value) {
    if (!v.is_number()) {
      throw config_error("'" + context + "' must contain only numbers");
    }
    p.coords.push_back(v.get<double>());
  }
  return p;
}

inline Box parse_box(const json& value, const std::string& context) {
  expect_object(value, context);
  reject_unknown_keys(value, context, {"min", "max"});
  if (!value.contains("min") || !value.contains("max")) {
    throw config_error("'" + context + "' requires 'min' and 'max'");
  }
  Box box{parse_position(value["min"], context + ".min"),
          parse_position(value["max"], context + ".max")};
  box.validate();
  return box;
}

inline Aaf parse_aaf(const json& value, const std::string& context) {
  expect_object(value, context);
  reject_unknown_keys(value, context, {"type", "eta", "alpha"});
  const auto it = value.find("type");
  if (it == value.end() || !it->is_string()) {
    throw config_error("'" + context + ".type' must be a string");
  }
  const std::string type = it->get<std::string>();
  Aaf aaf;
  if (type == "power_law") {
    aaf = PowerLawAaf{number_or(value, context, "eta", 0.2),
                      number_or(value, context, "alpha", 4.0)};
  } else if (type == "exponential") {
    if (value.contains("alpha")) {
      throw config_error("'" + context +
                         ".alpha' does not apply to the exponential aaf");
    }
    aaf = ExponentialAaf{number_or(value, context, "eta", 0.2)};
  } else {
    throw config_error("'" + context +
                       ".type' must be 'power_law' or 'exponential'");
  }
  validate(aaf);
  return aaf;
}

inline json aaf_to_json(const Aaf& aaf) {
  if (const auto* p = std::get_if<PowerLawAaf>(&aaf)) {
    return json{{"type", "power_law"}, {"eta", p->eta}, {"alpha", p->alpha}};
  }
  const auto& e = std::get<ExponentialAaf>(aaf);
  return json{{"type", "exponential"}, {"eta", e.eta}};
}

}  // namespace detail

/// Parse and validate a configuration document. Every key is optional
/// (defaults above); unknown keys are rejected by name.
inline RunConfig parse_config_json(const json& root) {
  detail::expect_object(root, "config");
  detail::reject_unknown_keys(
      root, "config",
      {"seed", "trials", "threads", "region", "sensors", "aaf", "target",
       "prior", "grid", "rules", "roc", "field", "table", "measurement_path"});

  RunConfig cfg;
  cfg.seed = detail::unsigned_or(root, "config", "seed", cfg.seed);
  cfg.trials = detail::unsigned_or(root, "config", "trials", cfg.trials);
  if (cfg.trials == 0) {
    throw config_error("'config.trials' must be >= 1");
  }
  if (root.contains("threads")) {
    if (!root["threads"].is_number_integer()) {
      throw config_error("'config.threads' must be an integer");
    }
    cfg.threads = root["threads"].get<int>();
  }
  if (root.contains("measurement_path")) {
    if (!root["measurement_path"].is_boolean()) {
      throw config_error("'config.measurement_path' must be a boolean");
    }
    cfg.measurement_path = root["measurement_path"].get<bool>();
  }

  if (root.contains("region")) {
    cfg.region = detail::parse_box(root["region"], "region");
  }
  cfg.prior_region = cfg.region;

  if (root.contains("sensors")) {
    const json& sensors = root["sensors"];
    detail::expect_object(sensors, "sensors");
    detail::reject_unknown_keys(sensors, "sensors",
                                {"count", "noise_var", "local_pfa", "bep"});
    cfg.sensor_count = detail::unsigned_or(sensors, "sensors", "count",
                                           cfg.sensor_count);
    cfg.noise_var =
        detail::number_or(sensors, "sensors", "noise_var", cfg.noise_var);
    cfg.local_pfa =
        detail::number_or(sensors, "sensors", "local_pfa", cfg.local_pfa);
    cfg.bep = detail::number_or(sensors, "sensors", "bep", cfg.bep);
  }
  if (cfg.sensor_count == 0) {
    throw config_error("'sensors.count' must be >= 1");
  }
  if (cfg.sensor_count > 1) {
    const auto side = static_cast<std::size_t>(
        std::llround(std::sqrt(static_cast<double>(cfg.sensor_count))));
    if (side * side != cfg.sensor_count) {
      throw config_error("'sensors.count' must be a perfect square");
    }
  }
  if (!(cfg.noise_var > 0.0)) {
    throw config_error("'sensors.noise_var' must be > 0");
  }
  if (!(cfg.local_pfa > 0.0 && cfg.local_pfa < 1.0)) {
    throw config_error("'sensors.local_pfa' must lie in (0,1)");
  }
  if (!(cfg.bep >= 0.0 && cfg.bep <= 0.5)) {
    throw config_error("'sensors.bep' must lie in [0, 0.5]");
  }

  if (root.contains("aaf")) {
    cfg.aaf = detail::parse_aaf(root["aaf"], "aaf");
  }

  if (root.contains("target")) {
    const json& target = root["target"];
    detail::expect_object(target, "target");
    detail::reject_unknown_keys(target, "target", {"power", "snr_db"});
    const bool has_power = target.contains("power");
    const bool has_snr = target.contains("snr_db");
    if (has_power && has_snr) {
      throw config_error("'target' accepts either 'power' or 'snr_db'");
    }
    if (has_power) {
      cfg.target_power = detail::require_number(target, "target", "power");
    } else if (has_snr) {
      const double snr_db = detail::require_number(target, "target", "snr_db");
      cfg.target_power = cfg.noise_var * std::pow(10.0, snr_db / 10.0);
    }
  }
  if (!(cfg.target_power >= 0.0)) {
    throw config_error("'target.power' must be >= 0");
  }

  if (root.contains("prior")) {
    const json& prior = root["prior"];
    detail::expect_object(prior, "prior");
    detail::reject_unknown_keys(prior, "prior", {"region"});
    if (prior.contains("region")) {
      cfg.prior_region = detail::parse_box(prior["region"], "prior.region");
    }
  }
  if (!cfg.region.contains(cfg.prior_region.lo) ||
      !cfg.region.contains(cfg.prior_region.hi)) {
    throw config_error("'prior.region' must lie inside 'region'");
  }

  if (root.contains("grid")) {
    const json& grid = root["grid"];
    detail::expect_object(grid, "grid");
    detail::reject_unknown_keys(
        grid, "grid", {"position_cells", "power_cells", "power_uncertainty"});
    cfg.position_cells = detail::unsigned_or(grid, "grid", "position_cells",
                                             cfg.position_cells);
    cfg.power_cells =
        detail::unsigned_or(grid, "grid", "power_cells", cfg.power_cells);
    cfg.power_uncertainty = detail::number_or(grid, "grid",
                                              "power_uncertainty",
                                              cfg.power_uncertainty);
  }
  if (cfg.position_cells == 0 || cfg.power_cells == 0) {
    throw config_error("'grid' cell counts must be >= 1");
  }
  if (!(cfg.power_uncertainty >= 0.0 && cfg.power_uncertainty <= 1.0)) {
    throw config_error("'grid.power_uncertainty' must lie in [0,1]");
  }

  if (root.contains("rules")) {
    const json& rules = root["rules"];
    if (!rules.is_array() || rules.empty()) {
      throw config_error("'config.rules' must be a nonempty array");
    }
    cfg.rules.clear();
    for (const json& r : rules) {
      if (!r.is_string()) {
        throw config_error("'config.rules' must contain rule names");
      }
      cfg.rules.push_back(rule_from_name(r.get<std::string>()));
    }
  }

  if (root.contains("roc")) {
    const json& roc = root["roc"];
    detail::expect_object(roc, "roc");
    detail::reject_unknown_keys(roc, "roc", {"pfa_targets"});
    if (roc.contains("pfa_targets")) {
      const json& targets = roc["pfa_targets"];
      if (!targets.is_array() || targets.empty()) {
        throw config_error("'roc.pfa_targets' must be a nonempty array");
      }
      cfg.pfa_targets.clear();
      for (const json& t : targets) {
        if (!t.is_number() || !(t.get<double>() > 0.0) ||
            !(t.get<double>() < 1.0)) {
          throw config_error("'roc.pfa_targets' entries must lie in (0,1)");
        }
        cfg.pfa_targets.push_back(t.get<double>());
      }
    }
  }

  if (root.contains("field")) {
    const json& field = root["field"];
    detail::expect_object(field, "field");
    detail::reject_unknown_keys(field, "field",
                                {"resolution", "target_position"});
    cfg.field_resolution = detail::unsigned_or(field, "field", "resolution",
                                               cfg.field_resolution);
    if (field.contains("target_position")) {
      cfg.field_target = detail::parse_position(field["target_position"],
                                                "field.target_position");
    }
  }
  if (cfg.field_resolution < 2) {
    throw config_error("'field.resolution' must be >= 2");
  }
  if (cfg.field_target && cfg.field_target->dim() != cfg.region.dim()) {
    throw config_error("'field.target_position' dimension mismatch");
  }

  // Default table columns: both AAF families at ideal and bep = 0.1 links.
  const double eta = std::holds_alternative<PowerLawAaf>(cfg.aaf)
                         ? std::get<PowerLawAaf>(cfg.aaf).eta
                         : std::get<ExponentialAaf>(cfg.aaf).eta;
  const double alpha = std::holds_alternative<PowerLawAaf>(cfg.aaf)
                           ? std::get<PowerLawAaf>(cfg.aaf).alpha
                           : 4.0;
  cfg.table_variants = {
      {"powlaw-pe0", PowerLawAaf{eta, alpha}, 0.0},
      {"exp-pe0", ExponentialAaf{eta}, 0.0},
      {"powlaw-pe0.1", PowerLawAaf{eta, alpha}, 0.1},
      {"exp-pe0.1", ExponentialAaf{eta}, 0.1},
  };
  if (root.contains("table")) {
    const json& table = root["table"];
    detail::expect_object(table, "table");
    detail::reject_unknown_keys(table, "table", {"pfa_target", "variants"});
    cfg.table_pfa_target = detail::number_or(table, "table", "pfa_target",
                                             cfg.table_pfa_target);
    if (!(cfg.table_pfa_target > 0.0 && cfg.table_pfa_target < 1.0)) {
      throw config_error("'table.pfa_target' must lie in (0,1)");
    }
    if (table.contains("variants")) {
      const json& variants = table["variants"];
      if (!variants.is_array() || variants.empty()) {
        throw config_error("'table.variants' must be a nonempty array");
      }
      cfg.table_variants.clear();
      std::size_t index = 0;
      for (const json& v : variants) {
        const std::string context = "table.variants[" + std::to_string(index) +
                                    "]";
        detail::expect_object(v, context);
        detail::reject_unknown_keys(v, context, {"name", "aaf", "bep"});
        TableVariant variant;
        variant.name = v.contains("name") ? v["name"].get<std::string>()
                                          : "variant" + std::to_string(index);
        variant.aaf = v.contains("aaf")
                          ? detail::parse_aaf(v["aaf"], context + ".aaf")
                          : cfg.aaf;
        variant.bep = detail::number_or(v, context, "bep", cfg.bep);
        if (!(variant.bep >= 0.0 && variant.bep <= 0.5)) {
          throw config_error("'" + context + ".bep' must lie in [0, 0.5]");
        }
        cfg.table_variants.push_back(std::move(variant));
        ++index;
      }
    }
  }

  return cfg;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cannot open config file '" + path.string() + "'");
  }
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error("malformed config '" + path.string() +
                       "': " + e.what());
  }
  return parse_config_json(root);
}

inline json box_to_json(const Box& box) {
  return json{{"min", box.lo.coords}, {"max", box.hi.coords}};
}

inline json RunConfig::to_json() const {
  json root;
  root["seed"] = seed;
  root["trials"] = trials;
  root["threads"] = threads;
  root["region"] = box_to_json(region);
  root["sensors"] = {{"count", sensor_count},
                     {"noise_var", noise_var},
                     {"local_pfa", local_pfa},
                     {"bep", bep}};
  root["aaf"] = detail::aaf_to_json(aaf);
  root["target"] = {{"power", target_power}};
  root["prior"] = {{"region", box_to_json(prior_region)}};
  root["grid"] = {{"position_cells", position_cells},
                  {"power_cells", power_cells},
                  {"power_uncertainty", power_uncertainty}};
  json rule_names = json::array();
  for (Rule rule : rules) rule_names.push_back(rule_name(rule));
  root["rules"] = rule_names;
  root["roc"] = {{"pfa_targets", pfa_targets}};
  json field = {{"resolution", field_resolution}};
  if (field_target) field["target_position"] = field_target->coords;
  root["field"] = field;
  json variants = json::array();
  for (const TableVariant& v : table_variants) {
    variants.push_back({{"name", v.name},
                        {"aaf", detail::aaf_to_json(v.aaf)},
                        {"bep", v.bep}});
  }
  root["table"] = {{"pfa_target", table_pfa_target}, {"variants", variants}};
  root["measurement_path"] = measurement_path;
  return root;
}

}  // namespace dfuse

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <system_error>
#include <vector>

#include "dfuse/config.hpp"
#include "dfuse/errors.hpp"
#include "dfuse/sim.hpp"

namespace dfuse {

namespace detail {

/// Shortest round-trip decimal form; locale independent, so emitted files
/// are byte-identical across runs and platforms.
inline std::string csv_number(double value) {
  if (!std::isfinite(value)) {
    throw std::runtime_error("refusing to emit non-finite value");
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw io_error("cannot open output file '" + path.string() + "'");
  }
  return out;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw io_error("cannot create output directory '" + dir.string() + "'");
  }
}

inline std::vector<Rule> rules_by_name(const std::vector<Rule>& rules) {
  std::vector<Rule> sorted;
  for (Rule rule : rules) {
    if (std::find(sorted.begin(), sorted.end(), rule) == sorted.end()) {
      sorted.push_back(rule);
    }
  }
  std::sort(sorted.begin(), sorted.end(), [](Rule a, Rule b) {
    return rule_name(a) < rule_name(b);
  });
  return sorted;
}

}  // namespace detail

/// Run the configured scenario and emit `roc.csv` (rule,pfa,pd; sorted by
/// rule then pfa) plus `roc_summary.json` (per rule, pd at each configured
/// target false-alarm rate).
inline std::vector<std::filesystem::path> cmd_roc(
    const RunConfig& config, const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  const auto csv_path = out_dir / "roc.csv";
  const auto summary_path = out_dir / "roc_summary.json";
  auto csv = detail::open_output(csv_path);
  auto summary_out = detail::open_output(summary_path);

  const std::map<Rule, StatSamples> samples = run_trials(config.to_scenario());

  csv << "rule,pfa,pd\n";
  json summary = json::object();
  for (Rule rule : detail::rules_by_name(config.rules)) {
    const StatSamples& s = samples.at(rule);
    const RocCurve curve = empirical_roc(s);
    const std::string name = rule_name(rule);
    for (const RocCurve::Point& point : curve.points) {
      csv << name << ',' << detail::csv_number(point.pfa) << ','
          << detail::csv_number(point.pd) << '\n';
    }
    json entries = json::array();
    for (double target : config.pfa_targets) {
      const PdAtPfa result = pd_at_pfa(s, target);
      if (!std::isfinite(result.pd) || !std::isfinite(result.achieved_pfa)) {
        throw std::runtime_error("non-finite summary value");
      }
      entries.push_back({{"pfa_target", target},
                         {"pfa_achieved", result.achieved_pfa},
                         {"pd", result.pd},
                         {"quantile_unresolvable",
                          result.quantile_unresolvable}});
    }
    summary[name] = entries;
  }
  summary_out << summary.dump(2) << '\n';
  if (!csv || !summary_out) {
    throw io_error("failed writing ROC outputs");
  }
  return {csv_path, summary_path};
}

/// Emit the detection-probability field as a resolution x resolution CSV
/// matrix (`pdfield.csv`, row r / column c = axis0[r] / axis1[c]) plus the
/// axis-coordinate sidecar `pdfield_axes.csv`.
inline std::vector<std::filesystem::path> cmd_pdfield(
    const RunConfig& config, const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  const auto field_path = out_dir / "pdfield.csv";
  const auto axes_path = out_dir / "pdfield_axes.csv";
  auto field_out = detail::open_output(field_path);
  auto axes_out = detail::open_output(axes_path);

  const SensorNode probe = make_sensor_node(
      config.region.center(), config.noise_var, config.local_pfa, config.bep);
  const TargetParams target{
      config.field_target ? *config.field_target : config.region.center(),
      config.target_power};
  const PdField field = pd_field(probe, config.aaf, target, config.region,
                                 config.field_resolution);

  for (std::size_t r = 0; r < field.resolution; ++r) {
    for (std::size_t c = 0; c < field.resolution; ++c) {
      if (c) field_out << ',';
      field_out << detail::csv_number(field.values[r * field.resolution + c]);
    }
    field_out << '\n';
  }
  axes_out << "axis0";
  for (double v : field.axis0) axes_out << ',' << detail::csv_number(v);
  axes_out << "\naxis1";
  for (double v : field.axis1) axes_out << ',' << detail::csv_number(v);
  axes_out << '\n';
  if (!field_out || !axes_out) {
    throw io_error("failed writing field outputs");
  }
  return {field_path, axes_path};
}

/// Run every configured (AAF, bep) variant and emit `table.csv`: one row per
/// rule, one (pd, achieved pfa) column pair per variant, at the table's
/// target false-alarm rate.
inline std::vector<std::filesystem::path> cmd_table(
    const RunConfig& config, const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  const auto table_path = out_dir / "table.csv";
  auto out = detail::open_output(table_path);

  const std::vector<Rule> rules = detail::rules_by_name(config.rules);
  out << "rule";
  for (const TableVariant& variant : config.table_variants) {
    out << ',' << variant.name << "_pd," << variant.name << "_pfa";
  }
  out << '\n';

  std::map<Rule, std::vector<PdAtPfa>> cells;
  for (const TableVariant& variant : config.table_variants) {
    RunConfig variant_config = config;
    variant_config.aaf = variant.aaf;
    variant_config.bep = variant.bep;
    const auto samples = run_trials(variant_config.to_scenario());
    for (Rule rule : rules) {
      cells[rule].push_back(
          pd_at_pfa(samples.at(rule), config.table_pfa_target));
    }
  }
  for (Rule rule : rules) {
    out << rule_name(rule);
    for (const PdAtPfa& cell : cells[rule]) {
      out << ',' << detail::csv_number(cell.pd) << ','
          << detail::csv_number(cell.achieved_pfa);
    }
    out << '\n';
  }
  if (!out) {
    throw io_error("failed writing table output");
  }
  return {table_path};
}

}  // namespace dfuse

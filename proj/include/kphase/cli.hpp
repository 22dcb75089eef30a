#pragma once

// Subcommand dispatch for the kphase tool. Kept in the library so the
// command surface can be driven from tests without spawning processes.

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "kphase/config.hpp"
#include "kphase/errors.hpp"
#include "kphase/estimation.hpp"
#include "kphase/io.hpp"
#include "kphase/montecarlo.hpp"
#include "kphase/receiver.hpp"

namespace kphase::cli {

enum ExitStatus : int {
  kSuccess = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericalError = 4,
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"simulate", "estimate", "fisher", "fano", "discriminate", "sweep"};
  return names;
}

namespace detail {

// Writes to `path`, or to `fallback` when path is empty.
inline void emit(const std::string& path, std::ostream& fallback,
                 const std::function<void(std::ostream&)>& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream file(path);
  if (!file) throw ConfigError("cannot open output file '" + path + "'");
  write(file);
  if (!file) throw ConfigError("failed writing output file '" + path + "'");
}

inline std::string prefix(const RunConfig& cfg) { return cfg.out.empty() ? "kphase_" + cfg.command : cfg.out; }

inline std::string crlb_cell(const std::optional<double>& crlb) {
  return crlb ? format_real(*crlb) : std::string("unbounded");
}

inline CountRecord require_counts(const RunConfig& cfg) {
  if (cfg.counts_path.empty()) throw ConfigError("counts must name a counts file");
  return load_counts(cfg.counts_path);
}

inline void simulate(const RunConfig& cfg, std::ostream& out) {
  const CountRecord record = sample_counts(cfg.sim());
  emit(cfg.out, out, [&](std::ostream& os) { write_counts(os, record, describe(cfg)); });
}

inline void estimate(const RunConfig& cfg, std::ostream& out) {
  const CountRecord record = require_counts(cfg);
  const PhaseGrid grid = cfg.phase_grid();
  const auto occ = record.occurrences();
  const LikelihoodModel model(cfg.amps, cfg.gamma, grid);

  std::vector<std::pair<std::string, PhasePosterior>> posts;
  if (cfg.detector != DetectorSelection::OnOff)
    posts.emplace_back("pnr", posterior(model.log_likelihood(occ), grid));
  if (cfg.detector != DetectorSelection::Pnr)
    posts.emplace_back("onoff", posterior(model.log_likelihood(to_onoff(record)), grid));

  CsvTable density;
  density.comments = describe(cfg);
  density.header = {"phi"};
  for (const auto& [name, p] : posts) density.header.push_back("density_" + name);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<std::string> row{format_real(grid[i])};
    for (const auto& [name, p] : posts) row.push_back(format_real(p.density()[i]));
    density.rows.push_back(std::move(row));
  }

  CsvTable summary;
  summary.comments = describe(cfg);
  summary.header = {"detector", "mean", "variance", "crlb", "sample_size", "skewness"};
  for (const auto& [name, p] : posts) {
    PhaseEstimate est = bayes_estimate(p, record.size());
    const DetectorKind kind = name == "pnr" ? DetectorKind::Pnr : DetectorKind::OnOff;
    est.crlb = crlb_variance(fisher_information(kind, cfg.amps, est.mean, cfg.gamma), record.size());
    summary.rows.push_back({name, format_real(est.mean), format_real(est.variance), crlb_cell(est.crlb),
                            std::to_string(est.sample_size), format_real(est.skewness)});
  }

  const std::string base = prefix(cfg);
  emit(base + "_posterior.csv", out, [&](std::ostream& os) { write_csv(os, density); });
  emit(base + "_summary.csv", out, [&](std::ostream& os) { write_csv(os, summary); });
  write_csv(out, summary);
}

inline void fisher(const RunConfig& cfg, std::ostream& out) {
  CsvTable table;
  table.comments = describe(cfg);
  table.header = {"phi", "F_pnr", "F_onoff", "onoff_degenerate"};
  const PhaseGrid grid(cfg.lo, cfg.hi, cfg.fisher_points);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const FisherValue onoff = fisher_onoff(cfg.amps, grid[i], cfg.gamma);
    table.rows.push_back({format_real(grid[i]), format_real(fisher_pnr(cfg.amps, grid[i], cfg.gamma)),
                          format_real(onoff.value), onoff.degenerate ? "1" : "0"});
  }
  emit(cfg.out, out, [&](std::ostream& os) { write_csv(os, table); });
}

inline void fano(const RunConfig& cfg, std::ostream& out) {
  const CountRecord record = require_counts(cfg);
  const PhaseEstimate est = fano_inversion_estimate(record, cfg.amps);
  double s1 = 0.0;
  double s2 = 0.0;
  for (auto n : record.counts) {
    s1 += static_cast<double>(n);
    s2 += static_cast<double>(n) * static_cast<double>(n);
  }
  const double m = static_cast<double>(record.size());
  const double mean = s1 / m;
  const double fano_hat = (s2 - m * mean * mean) / (m - 1.0) / mean;

  CsvTable table;
  table.comments = describe(cfg);
  table.header = {"phi", "variance", "clamped", "sample_size", "fano"};
  table.rows.push_back({format_real(est.mean), format_real(est.variance), est.clamped ? "1" : "0",
                        std::to_string(est.sample_size), format_real(fano_hat)});
  emit(cfg.out, out, [&](std::ostream& os) { write_csv(os, table); });
}

inline void discriminate(const RunConfig& cfg, std::ostream& out) {
  const SimConfig sim = cfg.sim();
  const auto bits = random_bits(sim.sample_size, sim.seed);
  const DiscriminationResult res = run_discrimination(sim, bits);

  CsvTable table;
  table.comments = describe(cfg);
  table.header = {"M", "errors", "error_rate", "std_error", "pe_model", "pe_limit", "helstrom"};
  table.rows.push_back({std::to_string(res.shots), std::to_string(res.errors), format_real(res.error_rate),
                        format_real(res.std_error), format_real(error_probability_at_detector(cfg.amps, cfg.phi)),
                        format_real(error_probability(cfg.amps.b, cfg.phi)),
                        format_real(helstrom_bound(cfg.amps.b))});
  emit(cfg.out, out, [&](std::ostream& os) { write_csv(os, table); });
}

inline void sweep(const RunConfig& cfg, std::ostream& out) {
  const SimConfig sim = cfg.sim();
  const PhaseGrid grid = cfg.phase_grid();
  const std::string base = prefix(cfg);
  for (EstimationMethod method : selected_methods(cfg.method)) {
    const SweepResult res = run_convergence_sweep(sim, method, cfg.sample_sizes, grid);
    const std::string tag(method_name(method));

    CsvTable rows;
    rows.comments = describe(cfg);
    rows.header = {"method", "M", "mean_estimate", "mean_ratio", "sd_estimate", "mean_variance", "crlb",
                   "mean_abs_error"};
    CsvTable traj;
    traj.comments = describe(cfg);
    traj.header = {"method", "M", "replication", "estimate", "variance"};
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
      const SweepRow& r = res.rows[i];
      rows.rows.push_back({tag, std::to_string(r.sample_size), format_real(r.mean_estimate),
                           format_real(r.mean_ratio), format_real(r.sd_estimate), format_real(r.mean_variance),
                           crlb_cell(r.crlb), format_real(r.mean_abs_error)});
      for (std::size_t rep = 0; rep < res.estimates[i].size(); ++rep) {
        const PhaseEstimate& e = res.estimates[i][rep];
        traj.rows.push_back({tag, std::to_string(r.sample_size), std::to_string(rep), format_real(e.mean),
                             format_real(e.variance)});
      }
    }
    emit(base + "_" + tag + ".csv", out, [&](std::ostream& os) { write_csv(os, rows); });
    emit(base + "_" + tag + "_trajectories.csv", out, [&](std::ostream& os) { write_csv(os, traj); });
    write_csv(out, rows);
  }
}

}  // namespace detail

/// Runs a resolved configuration. Throws the library's exception types.
inline void dispatch(const RunConfig& cfg, std::ostream& out) {
  if (cfg.command == "simulate") return detail::simulate(cfg, out);
  if (cfg.command == "estimate") return detail::estimate(cfg, out);
  if (cfg.command == "fisher") return detail::fisher(cfg, out);
  if (cfg.command == "fano") return detail::fano(cfg, out);
  if (cfg.command == "discriminate") return detail::discriminate(cfg, out);
  if (cfg.command == "sweep") return detail::sweep(cfg, out);
  throw ConfigError("unknown subcommand '" + cfg.command + "'");
}

/// Parses, dispatches and maps failures onto exit statuses.
inline int run(const std::string& command, const ConfigEntries& file_entries, const ConfigEntries& flag_entries,
               std::ostream& out, std::ostream& err) {
  try {
    dispatch(parse_config(command, file_entries, flag_entries), out);
    return kSuccess;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace kphase::cli

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion with
// the measured quantity and wall time; exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "kphase/estimation.hpp"
#include "kphase/montecarlo.hpp"
#include "kphase/photonstats.hpp"
#include "kphase/receiver.hpp"
#include "oracles.hpp"

using namespace kphase;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

const double kSqrt2 = std::sqrt(2.0);

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

SimConfig simulation_setup(double gamma, std::uint64_t seed) {
  SimConfig cfg;
  cfg.amps = {kSqrt2, kSqrt2};
  cfg.phi_star = 0.3;
  cfg.gamma = gamma;
  cfg.seed = seed;
  cfg.replications = 50;
  return cfg;
}

Outcome error_probability_reproduction() {
  SimConfig cfg;
  cfg.amps = {1.0, 1.0};
  cfg.phi_star = 0.0;
  cfg.sample_size = 100000;
  cfg.seed = 20240101;
  const auto res = run_discrimination(cfg, random_bits(cfg.sample_size, cfg.seed));
  const double expected = 0.5 * std::exp(-4.0);
  const double sigma = std::sqrt(expected * (1.0 - expected) / static_cast<double>(cfg.sample_size));
  const double z = (res.error_rate - expected) / sigma;
  return {std::abs(z) <= 3.0, fmt("rate=%.6f expected=%.6f z=%.2f", res.error_rate, expected, z)};
}

Outcome helstrom_factor_of_two() {
  double lo = 1e9, hi = -1e9;
  for (double beta = 2.0; beta <= 6.0 + 1e-12; beta += 0.05) {
    const double r = error_probability(beta, 0.0) / helstrom_bound(beta);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return {lo >= 1.98 && hi <= 2.02, fmt("ratio range [%.5f, %.5f] over beta in [2, 6]", lo, hi)};
}

Outcome fisher_zeros_and_ordering() {
  std::vector<DetectorPlaneAmplitudes> sets;
  for (double x : {0.5, 0.6, 0.7, 0.8, 0.9, 1.0}) sets.push_back({x, x});
  sets.push_back({1.12, 0.79});
  double worst_zero = 0.0;
  double worst_gap = -1e300;
  const PhaseGrid grid(0.0, M_PI / 2, 500);
  for (const auto& amps : sets) {
    for (double phi : {0.0, M_PI / 2}) {
      worst_zero = std::max({worst_zero, std::abs(fisher_pnr(amps, phi)), std::abs(fisher_onoff(amps, phi).value)});
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double gap = fisher_onoff(amps, grid[i]).value - fisher_pnr(amps, grid[i]);
      worst_gap = std::max(worst_gap, gap);
    }
  }
  return {worst_zero < 1e-9 && worst_gap <= 1e-12,
          fmt("max |F| at ends=%.3g, max(F_onoff - F_pnr)=%.3g", worst_zero, worst_gap)};
}

Outcome asymptotic_optimality() {
  SimConfig cfg = simulation_setup(0.0, 4);
  const std::vector<std::uint64_t> m{10000};
  bool ok = true;
  std::string detail;
  for (auto method : {EstimationMethod::BayesOnOff, EstimationMethod::BayesPnr}) {
    const auto res = run_convergence_sweep(cfg, method, m);
    const double ratio = res.rows[0].mean_variance / *res.rows[0].crlb;
    ok = ok && ratio >= 0.8 && ratio <= 1.3;
    detail += std::string(method_name(method)) + fmt(" Var/CRLB=%.4f ", ratio);
  }
  return {ok, detail};
}

Outcome convergence_speed() {
  const SimConfig cfg = simulation_setup(0.0, 5);
  const auto res = run_convergence_sweep(cfg, EstimationMethod::BayesPnr, default_sample_sizes());
  bool ok = true;
  std::string detail = "mean/phi*:";
  for (const auto& row : res.rows) {
    if (row.sample_size >= 1000) ok = ok && row.mean_ratio >= 0.97 && row.mean_ratio <= 1.03;
    detail += fmt(" M=%.0f:%.4f", static_cast<double>(row.sample_size), row.mean_ratio);
  }
  return {ok, detail};
}

Outcome method_ordering() {
  const SimConfig cfg = simulation_setup(0.0, 6);
  const std::vector<std::uint64_t> m{10000};
  const double fano = run_convergence_sweep(cfg, EstimationMethod::FanoInversion, m).rows[0].sd_estimate;
  const double onoff = run_convergence_sweep(cfg, EstimationMethod::BayesOnOff, m).rows[0].sd_estimate;
  const double pnr = run_convergence_sweep(cfg, EstimationMethod::BayesPnr, m).rows[0].sd_estimate;
  return {fano > onoff && onoff > pnr, fmt("sd fano=%.5f onoff=%.5f pnr=%.5f", fano, onoff, pnr)};
}

Outcome noise_robustness() {
  const std::vector<std::uint64_t> m{10000};
  bool ok = true;
  std::string detail;
  for (auto method : {EstimationMethod::BayesOnOff, EstimationMethod::BayesPnr}) {
    const auto noisy = run_convergence_sweep(simulation_setup(M_PI / 4, 7), method, m).rows[0];
    const auto clean = run_convergence_sweep(simulation_setup(0.0, 7), method, m).rows[0];
    const double offset = std::abs(noisy.mean_estimate - 0.3);
    const bool converged = offset <= 3.0 * noisy.sd_estimate;
    const bool wider = noisy.mean_variance > clean.mean_variance;
    ok = ok && converged && wider;
    detail += std::string(method_name(method)) +
              fmt(" |mean-phi*|=%.4f (3sd=%.4f) Var noisy/clean=%.4f ", offset, 3.0 * noisy.sd_estimate,
                  noisy.mean_variance / clean.mean_variance);
  }
  return {ok, detail};
}

Outcome experimental_fidelity() {
  const DetectorPlaneAmplitudes amps{1.12, 0.79};
  const std::vector<std::pair<double, double>> cases{{0.25, 0.0}, {0.25, M_PI / 4}, {M_PI / 4, 0.0}, {M_PI / 4, M_PI / 2}};
  const PhaseGrid grid;
  double worst = 1.0;
  std::string detail;
  std::uint64_t seed = 80;
  for (const auto& [phi, gamma] : cases) {
    SimConfig cfg;
    cfg.amps = amps;
    cfg.phi_star = phi;
    cfg.gamma = gamma;
    cfg.sample_size = 100000;
    cfg.seed = seed++;
    const CountRecord rec = sample_counts(cfg);
    const auto occ = rec.occurrences();
    const LikelihoodModel model(amps, gamma, grid);
    const double phi_bar = bayes_estimate(posterior(model.log_likelihood(occ), grid)).mean;
    const double f = pmf_fidelity(empirical_pmf(occ), photon_pmf_noisy(amps, phi_bar, gamma));
    worst = std::min(worst, f);
    detail += fmt("[phi*=%.3f gamma=%.3f phi_bar=%.4f F=%.6f] ", phi, gamma, phi_bar, f);
  }
  return {worst > 0.999, detail};
}

Outcome oracle_equivalences() {
  std::mt19937_64 gen(909);
  std::uniform_real_distribution<double> amp(0.05, 2.5), phase(0.0, M_PI);

  double fano_err = 0.0, dphi_err = 0.0;
  for (int i = 0; i < 200; ++i) {
    const DetectorPlaneAmplitudes amps{amp(gen), amp(gen)};
    const double phi = phase(gen);
    const std::size_t n_max = cutoff(amps);
    fano_err = std::max(fano_err, std::abs(fano_factor_closed_form(amps, phi) -
                                           oracle::fano_by_moments(oracle::mixture(amps.a, amps.b, phi, n_max))));
    const auto d = photon_pmf_dphi(amps, phi, 0.0);
    const auto fd = oracle::mixture_dphi_fd(amps.a, amps.b, phi, n_max);
    for (std::size_t n = 0; n <= n_max; ++n) dphi_err = std::max(dphi_err, std::abs(d[n] - fd[n]));
  }

  double stream_err = 0.0;
  {
    const PhaseGrid grid;
    SimConfig cfg;
    cfg.amps = {1.12, 0.79};
    cfg.phi_star = 0.25;
    cfg.sample_size = 4000;
    cfg.seed = 91;
    for (double gamma : {0.0, M_PI / 4}) {
      cfg.gamma = gamma;
      const CountRecord rec = sample_counts(cfg);
      const LikelihoodModel model(cfg.amps, gamma, grid);
      for (DetectorKind kind : {DetectorKind::Pnr, DetectorKind::OnOff}) {
        PhasePosterior stream = PhasePosterior::uniform(grid);
        for (auto n : rec.counts) stream = sequential_update(std::move(stream), n, model, kind);
        const auto batch = kind == DetectorKind::Pnr ? posterior(model.log_likelihood(rec.occurrences()), grid)
                                                     : posterior(model.log_likelihood(to_onoff(rec)), grid);
        for (std::size_t i = 0; i < grid.size(); ++i)
          stream_err = std::max(stream_err, std::abs(stream.density()[i] - batch.density()[i]));
      }
    }
  }

  double bracket_err = 0.0;
  for (const auto& [a, b, phi, gamma] : std::vector<std::tuple<double, double, double, double>>{
           {kSqrt2, kSqrt2, 0.3, M_PI / 4}, {1.12, 0.79, 0.25, M_PI / 2}, {1.12, 0.79, M_PI / 4, M_PI / 4},
           {0.5, 2.0, 1.0, 2.0 * M_PI}}) {
    const auto pmf = photon_pmf_noisy({a, b}, phi, gamma);
    const auto ref = oracle::bracket_midpoint(a, b, phi, gamma, pmf.n_max);
    for (std::size_t n = 0; n <= pmf.n_max; ++n) bracket_err = std::max(bracket_err, std::abs(pmf.probs[n] - ref[n]));
  }

  const bool ok = fano_err <= 1e-9 && dphi_err <= 1e-8 && stream_err <= 1e-10 && bracket_err <= 1e-8;
  return {ok, fmt("fano=%.2g dphi=%.2g stream=%.2g bracket=%.2g", fano_err, dphi_err, stream_err, bracket_err)};
}

Outcome sampler_calibration() {
  SimConfig cfg = simulation_setup(0.0, 0);
  cfg.sample_size = 2000;
  const PhotonPmf model = photon_pmf(cfg.amps, cfg.phi_star);
  std::vector<double> p;
  p.reserve(1000);
  for (std::uint64_t run = 0; run < 1000; ++run) {
    cfg.seed = 1000 + run;
    p.push_back(goodness_of_fit(sample_counts(cfg), model).p_value);
  }
  std::sort(p.begin(), p.end());
  double ks = 0.0;
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    ks = std::max({ks, (static_cast<double>(i) + 1.0) / n - p[i], p[i] - static_cast<double>(i) / n});
  }
  return {ks < 0.06, fmt("KS distance=%.4f over 1000 runs", ks)};
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> check;
    double budget_seconds;  // 0: no runtime limit
  };
  const std::vector<Criterion> criteria{
      {"1 error-probability reproduction", error_probability_reproduction, 5.0},
      {"2 helstrom factor of two", helstrom_factor_of_two, 1.0},
      {"3 fisher zeros and ordering", fisher_zeros_and_ordering, 10.0},
      {"4 asymptotic optimality", asymptotic_optimality, 120.0},
      {"5 convergence speed", convergence_speed, 120.0},
      {"6 method ordering", method_ordering, 0.0},
      {"7 noise robustness", noise_robustness, 0.0},
      {"8 experimental fidelity analog", experimental_fidelity, 0.0},
      {"9 oracle equivalences", oracle_equivalences, 0.0},
      {"10 sampler calibration", sampler_calibration, 0.0},
  };
  int failures = 0;
  for (const auto& [name, check, budget] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out{false, ""};
    try {
      out = check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget > 0.0 && secs > budget) {
      out.pass = false;
      out.detail += fmt(" [over %.0fs budget]", budget);
    }
    std::printf("%s criterion %s: %s (%.2fs)\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

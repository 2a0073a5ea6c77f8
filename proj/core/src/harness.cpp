#include "emuval/csv.hpp"
#include "emuval/errors.hpp"
#include "emuval/harness.hpp"
#include "emuval/parallel.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace emuval::harness {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> values) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 == 1 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

std::string theta_label(const Theta& theta) {
  std::string s;
  for (std::size_t i = 0; i < theta.size(); ++i) s += (i ? ";" : "") + format_double(theta[i]);
  return s;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput(message);
}

void check_alpha(double alpha) { require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)"); }

// Bin index for values in [0, 1] with bins (lo, hi]; 0 goes to the first bin.
std::size_t unit_bin(double v, std::size_t bins) {
  const auto b = static_cast<std::size_t>(std::ceil(v * static_cast<double>(bins)));
  return b == 0 ? 0 : std::min(b - 1, bins - 1);
}

void add_unit_histogram(std::vector<HistogramRow>& rows, const std::string& model,
                        const std::string& diagnostic, std::span<const double> values,
                        std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) ++counts[unit_bin(v, bins)];
  for (std::size_t b = 0; b < bins; ++b) {
    const auto [lo, hi] = binomial_band(values.size(), 1.0 / static_cast<double>(bins), 0.99);
    rows.push_back({model, diagnostic, b, static_cast<double>(b) / static_cast<double>(bins),
                    static_cast<double>(b + 1) / static_cast<double>(bins), counts[b], lo, hi});
  }
}

void add_rank_histogram(std::vector<HistogramRow>& rows, const std::string& model,
                        std::span<const std::size_t> ranks, std::size_t draws, std::size_t bins) {
  const std::size_t levels = draws + 1;
  bins = std::min(bins, levels);
  std::vector<std::size_t> counts(bins, 0);
  auto bin_of = [&](std::size_t r) { return r * bins / levels; };
  for (std::size_t r : ranks) ++counts[bin_of(r)];
  std::vector<std::size_t> width(bins, 0);
  for (std::size_t r = 0; r < levels; ++r) ++width[bin_of(r)];
  std::size_t first = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    const double p = static_cast<double>(width[b]) / static_cast<double>(levels);
    const auto [lo, hi] = binomial_band(ranks.size(), p, 0.99);
    rows.push_back({model, "sbc", b, static_cast<double>(first),
                    static_cast<double>(first + width[b] - 1), counts[b], lo, hi});
    first += width[b];
  }
}

// Randomized probability integral transform of ranks in {0..L}.
std::vector<double> rank_pit(std::span<const std::size_t> ranks, std::size_t draws, RngStream rng) {
  Rng gen(rng);
  std::vector<double> out;
  for (std::size_t r : ranks) {
    out.push_back((static_cast<double>(r) + gen.uniform()) / static_cast<double>(draws + 1));
  }
  return out;
}

models::SyntheticSetting setting_for(const std::string& name, std::size_t dim) {
  return models::SyntheticSetting::make(models::parse_setting(name), dim);
}

void write_histograms_csv(std::ostream& out, const std::vector<HistogramRow>& rows) {
  out << "model,diagnostic,bin,lo,hi,count,band_lo,band_hi\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.diagnostic << ',' << r.bin << ',' << format_double(r.lo) << ','
        << format_double(r.hi) << ',' << r.count << ',' << r.band_lo << ',' << r.band_hi << '\n';
  }
}

template <typename Fn>
void write_file(const std::filesystem::path& path, const Fn& fill) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  fill(out);
}

}  // namespace

// ---------------------------------------------------------------------------
// Power

PowerEstimate estimate_power(const TrialFn& trial, std::size_t trials, double alpha,
                             RngStream rng) {
  require(trials >= 1, "need at least one trial");
  check_alpha(alpha);
  std::vector<TestResult> results(trials);
  parallel_for(trials, [&](std::size_t t) {
    try {
      results[t] = trial(t, derive_substream(rng, t));
    } catch (...) {
      rethrow_with_context("trial " + std::to_string(t));
    }
  });
  PowerEstimate e;
  e.trials = trials;
  for (const auto& r : results) {
    e.p_values.push_back(r.p_value);
    e.statistics.push_back(r.statistic);
    if (r.p_value <= alpha) ++e.rejections;
  }
  e.power = static_cast<double>(e.rejections) / static_cast<double>(trials);
  e.se = std::sqrt(e.power * (1.0 - e.power) / static_cast<double>(trials));
  const std::size_t m = results.front().m_used;
  if (m > 0 && alpha < 1.0 / static_cast<double>(m + 1)) {
    e.warning = "alpha = " + format_double(alpha) + " is below 1/(M+1) = 1/" + std::to_string(m + 1) +
                "; no trial can reject";
  }
  return e;
}

PowerEstimate estimate_power(const LocalPowerSpec& spec, std::size_t trials, double alpha,
                             RngStream rng) {
  spec.test.validate();
  return estimate_power(
      [&](std::size_t, RngStream sub) {
        const Sample s0 = spec.truth(spec.theta, spec.test.n_sim0, derive_substream(sub, 0));
        if (spec.test.mc_gof) {
          const local::Sampler sampler = [&](std::size_t n, RngStream r) {
            return spec.alternative(spec.theta, n, r);
          };
          return local::mc_gof_test(s0, sampler, spec.test.n_e, spec.test.m_permutations,
                                    spec.test.statistic, derive_substream(sub, 2));
        }
        const Sample s1 = spec.alternative(spec.theta, spec.test.n_sim1, derive_substream(sub, 1));
        return local::permutation_test(s0, s1, spec.test, derive_substream(sub, 2));
      },
      trials, alpha, rng);
}

void write_power_csv(std::ostream& out, const std::vector<PowerRow>& rows) {
  out << "experiment,setting,condition,dim,statistic,n,trials,rejections,power,se,median_statistic\n";
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.setting << ',' << r.condition << ',' << r.dim << ','
        << r.statistic << ',' << r.n << ',' << r.estimate.trials << ',' << r.estimate.rejections
        << ',' << format_double(r.estimate.power) << ',' << format_double(r.estimate.se) << ','
        << format_double(r.median_statistic) << '\n';
  }
}

std::pair<std::size_t, std::size_t> binomial_band(std::size_t total, double p, double level) {
  if (total == 0) return {0, 0};
  const boost::math::binomial_distribution<double> dist(static_cast<double>(total), p);
  const double tail = (1.0 - level) / 2.0;
  const double lo = boost::math::quantile(dist, tail);
  const double hi = boost::math::quantile(boost::math::complement(dist, tail));
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// ---------------------------------------------------------------------------
// Configuration

stats::TwoSampleStatistic parse_statistic(const std::string& tag) {
  using stats::TwoSampleStatistic;
  if (tag == "rf") return TwoSampleStatistic::regression(regress::MethodSpec::random_forest());
  if (tag == "knn") return TwoSampleStatistic::regression(regress::MethodSpec::knn());
  if (tag == "constant") return TwoSampleStatistic::regression(regress::MethodSpec::constant());
  if (tag == "rf-split") {
    return TwoSampleStatistic::regression(regress::MethodSpec::random_forest(), stats::Mode::split);
  }
  if (tag == "knn-split") {
    return TwoSampleStatistic::regression(regress::MethodSpec::knn(), stats::Mode::split);
  }
  if (tag == "mmd") return TwoSampleStatistic::mmd();
  if (tag == "energy") return TwoSampleStatistic::energy();
  if (tag == "c2st-rf") return TwoSampleStatistic::c2st(regress::MethodSpec::random_forest());
  if (tag == "c2st-knn") return TwoSampleStatistic::c2st(regress::MethodSpec::knn());
  throw InvalidInput("unknown statistic '" + tag + "'");
}

std::string statistic_tag(const stats::TwoSampleStatistic& s) {
  switch (s.kind) {
    case stats::Kind::regression:
      return s.method.name() + (s.mode == stats::Mode::split ? "-split" : "");
    case stats::Kind::mmd: return "mmd";
    case stats::Kind::energy: return "energy";
    case stats::Kind::c2st: return "c2st-" + s.method.name();
  }
  return "unknown";
}

void Example1Config::validate() const {
  require(dim >= 1, "example1.dim must be at least 1");
  require(replicates >= 1, "example1.replicates must be at least 1");
  require(sbc_draws >= 1, "example1.sbc_draws must be at least 1");
  require(b >= 2, "example1.b must be at least 2");
  require(n_sim >= 1 && m_permutations >= 1 && n_null >= 1, "example1 counts must be positive");
  require(bins >= 1, "example1.bins must be at least 1");
}

void Example2Config::validate() const {
  require(!settings.empty() && !dims.empty() && !statistics.empty(),
          "example2 needs settings, dims and statistics");
  for (const auto& s : settings) {
    const auto tag = models::parse_setting(s);
    require(tag != models::Setting::example1 && tag != models::Setting::poisson_synth,
            "example2 settings are bernoulli, scaling and mog");
  }
  for (auto d : dims) require(d >= 1, "example2 dims must be positive");
  for (const auto& s : statistics) parse_statistic(s);
  require(grid_points >= 1 && n >= 1 && trials >= 1 && m_permutations >= 1,
          "example2 counts must be positive");
  check_alpha(alpha);
}

void PoissonSynthConfig::validate() const {
  require(!n_train.empty() && !models.empty(), "poisson_synth needs n_train values and models");
  for (auto n : n_train) require(n >= 2, "poisson_synth n_train values must be at least 2");
  for (const auto& m : models) {
    if (m != "true") models::parse_model_kind(m);
  }
  require(grid_per_axis >= 1 && n_sim >= 1 && trials >= 1 && m_permutations >= 1 && n_null >= 1,
          "poisson_synth counts must be positive");
  require(grid_per_axis * grid_per_axis >= 2, "poisson_synth needs at least two grid cells");
  check_alpha(alpha);
}

report::Json to_json(const ExperimentConfig& c) {
  report::Json j;
  j["example1"] = {{"dim", c.example1.dim},
                   {"replicates", c.example1.replicates},
                   {"sbc_draws", c.example1.sbc_draws},
                   {"b", c.example1.b},
                   {"n_sim", c.example1.n_sim},
                   {"m_permutations", c.example1.m_permutations},
                   {"n_null", c.example1.n_null},
                   {"bins", c.example1.bins},
                   {"statistic", statistic_tag(c.example1.statistic)}};
  j["example2"] = {{"settings", c.example2.settings},
                   {"dims", c.example2.dims},
                   {"grid_points", c.example2.grid_points},
                   {"statistics", c.example2.statistics},
                   {"n", c.example2.n},
                   {"trials", c.example2.trials},
                   {"m_permutations", c.example2.m_permutations},
                   {"alpha", c.example2.alpha}};
  j["poisson_synth"] = {{"n_train", c.poisson_synth.n_train},
                        {"grid_per_axis", c.poisson_synth.grid_per_axis},
                        {"n_sim", c.poisson_synth.n_sim},
                        {"models", c.poisson_synth.models},
                        {"trials", c.poisson_synth.trials},
                        {"m_permutations", c.poisson_synth.m_permutations},
                        {"n_null", c.poisson_synth.n_null},
                        {"alpha", c.poisson_synth.alpha},
                        {"statistic", statistic_tag(c.poisson_synth.statistic)},
                        {"mmd_test", c.poisson_synth.mmd_test}};
  return j;
}

// ---------------------------------------------------------------------------
// Example 1

Example1Result run_example1(const Example1Config& cfg, RngStream rng) {
  cfg.validate();
  const auto setting = models::SyntheticSetting::make(models::Setting::example1, cfg.dim);
  const models::GammaPrior prior;
  const models::PosteriorGrid flat_posterior(prior, [](double) { return 0.0; });

  Example1Result out;
  const std::size_t r_count = cfg.replicates;
  out.pq_true.resize(r_count);
  out.pq_flat.resize(r_count);
  out.sbc_true.resize(r_count);
  out.sbc_flat.resize(r_count);
  const RngStream pq_rng = derive_substream(rng, 0);
  parallel_for(r_count, [&](std::size_t r) {
    const RngStream sub = derive_substream(pq_rng, r);
    Rng prior_gen(derive_substream(sub, 0));
    const double theta = prior.draw(prior_gen);
    // The exact sufficient statistic: coordinates stored as doubles lose it
    // for small θ, where many of them round to 0 or 1.
    const double s = models::simulate_beta_log_statistic(theta, setting.dim, derive_substream(sub, 1));
    const models::PosteriorGrid true_posterior(prior, models::beta_log_likelihood(s, setting.dim));
    out.pq_true[r] = models::pq_statistic(true_posterior, theta);
    out.pq_flat[r] = models::pq_statistic(flat_posterior, theta);
    out.sbc_true[r] = models::sbc_rank(true_posterior, theta, cfg.sbc_draws, derive_substream(sub, 2));
    out.sbc_flat[r] = models::sbc_rank(flat_posterior, theta, cfg.sbc_draws, derive_substream(sub, 3));
  });

  global::GlobalTestConfig gcfg;
  gcfg.reference = global::ReferenceDistribution::gamma(1.0, 1.0);
  gcfg.b = cfg.b;
  gcfg.local.statistic = cfg.statistic;
  gcfg.local.m_permutations = cfg.m_permutations;
  gcfg.local.n_sim0 = cfg.n_sim;
  gcfg.local.n_sim1 = cfg.n_sim;
  gcfg.n_null = cfg.n_null;
  const local::Simulator simulator = [&](const Theta& t, std::size_t n, RngStream r) {
    return models::simulate(setting, t, n, r);
  };
  const models::SyntheticLikelihood true_model(setting, false);
  const models::SyntheticLikelihood flat_model(setting, true);
  out.global_true = global::global_test(gcfg, simulator, true_model, derive_substream(rng, 1));
  out.global_flat = global::global_test(gcfg, simulator, flat_model, derive_substream(rng, 2));

  add_unit_histogram(out.histograms, "true", "pq", out.pq_true, cfg.bins);
  add_unit_histogram(out.histograms, "flat", "pq", out.pq_flat, cfg.bins);
  add_rank_histogram(out.histograms, "true", out.sbc_true, cfg.sbc_draws, cfg.bins);
  add_rank_histogram(out.histograms, "flat", out.sbc_flat, cfg.sbc_draws, cfg.bins);
  add_unit_histogram(out.histograms, "true", "local_p", out.global_true.local_p, cfg.bins);
  add_unit_histogram(out.histograms, "flat", "local_p", out.global_flat.local_p, cfg.bins);

  const RngStream ks_rng = derive_substream(rng, 3);
  auto ks_p = [&](std::span<const double> v, std::uint64_t k) {
    return global::uniformity_pvalue(stats::ks_uniformity(v), v.size(), global::Uniformity::ks,
                                     cfg.n_null, derive_substream(ks_rng, k));
  };
  const auto pit_true = rank_pit(out.sbc_true, cfg.sbc_draws, derive_substream(rng, 4));
  const auto pit_flat = rank_pit(out.sbc_flat, cfg.sbc_draws, derive_substream(rng, 5));
  out.summary = {{"pq_ks_p", {{"true", ks_p(out.pq_true, 0)}, {"flat", ks_p(out.pq_flat, 1)}}},
                 {"sbc_ks_p", {{"true", ks_p(pit_true, 2)}, {"flat", ks_p(pit_flat, 3)}}},
                 {"global", {{"true", report::to_json(out.global_true)},
                             {"flat", report::to_json(out.global_flat)}}}};
  return out;
}

// ---------------------------------------------------------------------------
// Example 2

std::vector<PowerRow> run_example2(const Example2Config& cfg, RngStream rng) {
  cfg.validate();
  std::vector<PowerRow> rows;
  for (std::size_t si = 0; si < cfg.settings.size(); ++si) {
    for (std::size_t di = 0; di < cfg.dims.size(); ++di) {
      const auto setting = setting_for(cfg.settings[si], cfg.dims[di]);
      const auto grid = models::midpoint_grid(setting.domain(), cfg.grid_points);
      const local::Simulator truth = [setting](const Theta& t, std::size_t n, RngStream r) {
        return models::simulate(setting, t, n, r);
      };
      const local::Simulator approx = [setting](const Theta& t, std::size_t n, RngStream r) {
        return models::approximate_simulate(setting, t, n, r);
      };
      for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        // Statistics share the trial streams, so they are compared on the same draws.
        const RngStream cell = derive_substream(derive_substream(derive_substream(rng, si), di), gi);
        for (const auto& tag : cfg.statistics) {
          LocalPowerSpec spec{truth, approx, grid[gi], {}};
          spec.test.statistic = parse_statistic(tag);
          spec.test.m_permutations = cfg.m_permutations;
          spec.test.n_sim0 = cfg.n;
          spec.test.n_sim1 = cfg.n;
          PowerRow row{"example2", cfg.settings[si], theta_label(grid[gi]), cfg.dims[di], tag, cfg.n,
                       estimate_power(spec, cfg.trials, cfg.alpha, cell), 0.0};
          row.median_statistic = median(row.estimate.statistics);
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Two-count simulator

PoissonSynthResult run_poisson_synth(const PoissonSynthConfig& cfg, RngStream rng) {
  cfg.validate();
  const auto setting = models::SyntheticSetting::make(models::Setting::poisson_synth);
  const auto grid = models::midpoint_grid(setting.domain(), cfg.grid_per_axis);
  local::LocalTestConfig lcfg;
  lcfg.statistic = cfg.statistic;
  lcfg.m_permutations = cfg.m_permutations;
  lcfg.n_sim0 = cfg.n_sim;
  lcfg.n_sim1 = cfg.n_sim;
  local::LocalTestConfig mmd_cfg = lcfg;
  mmd_cfg.statistic = stats::TwoSampleStatistic::mmd();

  PoissonSynthResult out;
  for (std::size_t ni = 0; ni < cfg.n_train.size(); ++ni) {
    const std::size_t n_train = cfg.n_train[ni];
    const RngStream size_rng = derive_substream(rng, ni);
    for (const auto& model_name : cfg.models) {
      struct Trial {
        global::GlobalTestResult regression;
        double regression_median = kNaN;
        double mmd_median = kNaN;
        double mmd_global_p = kNaN;
      };
      std::vector<Trial> trials(cfg.trials);
      // Models share the trial streams, so each trial compares them on the same ensembles.
      parallel_for(cfg.trials, [&](std::size_t t) {
        const RngStream trial_rng = derive_substream(size_rng, t);
        const auto ensembles = models::make_ensembles(setting, grid, n_train, cfg.n_sim,
                                                      derive_substream(trial_rng, 0));
        std::unique_ptr<models::ApproxLikelihood> model;
        if (model_name == "true") {
          model = std::make_unique<models::SyntheticLikelihood>(setting, false);
        } else {
          model = models::fit_model(models::parse_model_kind(model_name), ensembles);
        }
        Trial& tr = trials[t];
        tr.regression = global::global_test(ensembles, *model, lcfg, global::Uniformity::ks,
                                            cfg.n_null, derive_substream(trial_rng, 1));
        tr.regression_median = median(tr.regression.local_statistic);
        std::vector<double> raw(ensembles.size());
        const RngStream raw_rng = derive_substream(trial_rng, 2);
        for (std::size_t j = 0; j < ensembles.size(); ++j) {
          const Sample s1 = model->sample(ensembles[j].theta, cfg.n_sim, derive_substream(raw_rng, j));
          raw[j] = stats::mmd_statistic(pool_and_label(ensembles[j].test, s1));
        }
        tr.mmd_median = median(raw);
        if (cfg.mmd_test) {
          tr.mmd_global_p = global::global_test(ensembles, *model, mmd_cfg, global::Uniformity::ks,
                                                cfg.n_null, derive_substream(trial_rng, 3))
                                .global_p;
        }
      });

      const std::string condition = "n_train=" + std::to_string(n_train);
      auto make_row = [&](const std::string& tag, auto p_of, auto stat_of) {
        PowerRow row{"poisson_synth", model_name, condition, 2, tag, cfg.n_sim, {}, 0.0};
        auto& e = row.estimate;
        e.trials = cfg.trials;
        for (const auto& tr : trials) {
          e.p_values.push_back(p_of(tr));
          e.statistics.push_back(stat_of(tr));
          if (e.p_values.back() <= cfg.alpha) ++e.rejections;
        }
        e.power = static_cast<double>(e.rejections) / static_cast<double>(e.trials);
        e.se = std::sqrt(e.power * (1.0 - e.power) / static_cast<double>(e.trials));
        row.median_statistic = median(e.statistics);
        return row;
      };
      out.power.push_back(make_row(
          "global-" + statistic_tag(cfg.statistic), [](const Trial& tr) { return tr.regression.global_p; },
          [](const Trial& tr) { return tr.regression_median; }));
      if (cfg.mmd_test) {
        out.power.push_back(make_row(
            "global-mmd", [](const Trial& tr) { return tr.mmd_global_p; },
            [](const Trial& tr) { return tr.mmd_median; }));
      }
      out.raw_mmd.push_back({model_name, n_train, [&] {
                               std::vector<double> m;
                               for (const auto& tr : trials) m.push_back(tr.mmd_median);
                               return median(m);
                             }()});
      out.local_maps.push_back({model_name, n_train, trials.front().regression});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output directory

void run_experiment(const std::string& name, const ExperimentConfig& config,
                    const std::filesystem::path& out_dir, std::uint64_t seed) {
  const RngStream rng{seed, 0};
  std::vector<PowerRow> power;
  std::vector<HistogramRow> histograms;
  report::Json global_json = report::Json::object();
  std::ostringstream local_csv;

  if (name == "example1") {
    const auto r = run_example1(config.example1, rng);
    histograms = r.histograms;
    global_json = r.summary;
    local_csv << "model,condition,theta0,p\n";
    for (const auto* g : {&r.global_true, &r.global_flat}) {
      const std::string model = g == &r.global_true ? "true" : "flat";
      for (std::size_t i = 0; i < g->local_p.size(); ++i) {
        local_csv << model << ",," << format_double(g->theta[i][0]) << ','
                  << format_double(g->local_p[i]) << '\n';
      }
    }
  } else if (name == "example2") {
    config.example2.validate();
    power = run_example2(config.example2, rng);
    local_csv << "model,condition,theta0,p\n";
  } else if (name == "poisson_synth") {
    const auto r = run_poisson_synth(config.poisson_synth, rng);
    power = r.power;
    local_csv << "model,condition,theta0,theta1,p\n";
    report::Json maps = report::Json::array();
    for (const auto& m : r.local_maps) {
      for (std::size_t i = 0; i < m.result.local_p.size(); ++i) {
        local_csv << m.model << ",n_train=" << m.n_train << ',' << format_double(m.result.theta[i][0])
                  << ',' << format_double(m.result.theta[i][1]) << ','
                  << format_double(m.result.local_p[i]) << '\n';
      }
      maps.push_back({{"model", m.model}, {"n_train", m.n_train}, {"first_trial", report::to_json(m.result)}});
    }
    report::Json raw = report::Json::array();
    for (const auto& m : r.raw_mmd) {
      raw.push_back({{"model", m.model}, {"n_train", m.n_train}, {"median_mmd", m.median_mmd}});
    }
    global_json = {{"median_raw_mmd", raw}, {"first_trial", maps}};
  } else {
    throw InvalidInput("unknown experiment '" + name + "' (expected example1, example2 or poisson_synth)");
  }

  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "power.csv", [&](std::ostream& o) { write_power_csv(o, power); });
  write_file(out_dir / "local_pvalues.csv", [&](std::ostream& o) { o << local_csv.str(); });
  write_file(out_dir / "histograms.csv", [&](std::ostream& o) { write_histograms_csv(o, histograms); });
  report::write_json(out_dir / "global.json", global_json);

  report::Json manifest;
  manifest["experiment"] = name;
  manifest["seed"] = seed;
  manifest["version"] = report::kVersion;
  manifest["compiler"] = __VERSION__;
  manifest["config"] = to_json(config)[name];
  manifest["files"] = {"power.csv", "local_pvalues.csv", "global.json", "histograms.csv", "manifest.json"};
  report::write_json(out_dir / "manifest.json", manifest);
}

}  // namespace emuval::harness

#include "commands.hpp"

#include <emuval/csv.hpp>
#include <emuval/diagnose.hpp>
#include <emuval/errors.hpp>
#include <emuval/globaltest.hpp>
#include <emuval/harness.hpp>
#include <emuval/localtest.hpp>
#include <emuval/models.hpp>

#include <fstream>
#include <memory>

namespace emuval::cli {
namespace {

// ---------------------------------------------------------------------------
// Shared option groups

struct StatisticOptions {
  std::string stat = "regression";
  std::string regressor = "rf";
  std::string mode = "full";
  std::size_t k = 0;
  std::size_t trees = 100;
  std::size_t mtry = 0;
  std::size_t min_leaf = 5;
  bool no_bootstrap = false;

  void add(CLI::App* app) {
    app->add_option("--stat", stat, "Two-sample statistic")
        ->check(CLI::IsMember({"regression", "mmd", "energy", "c2st"}))
        ->capture_default_str();
    add_regressor(app);
    app->add_option("--mode", mode, "Regression statistic: in-sample or split")
        ->check(CLI::IsMember({"full", "split"}))
        ->capture_default_str();
  }

  void add_regressor(CLI::App* app) {
    app->add_option("--regressor", regressor, "Regression engine for m(x)")
        ->check(CLI::IsMember({"rf", "knn", "constant"}))
        ->capture_default_str();
    app->add_option("--k", k, "Neighbours for knn (0: ceil(sqrt(n)))")->capture_default_str();
    app->add_option("--trees", trees, "Random-forest trees")->capture_default_str();
    app->add_option("--mtry", mtry, "Features per split (0: ceil(sqrt(D)))")->capture_default_str();
    app->add_option("--min-leaf", min_leaf, "Minimum leaf size")->capture_default_str();
    app->add_flag("--no-bootstrap", no_bootstrap, "Grow trees on the full training set");
  }

  regress::MethodSpec method() const {
    switch (regress::parse_method(regressor)) {
      case regress::Method::knn: return regress::MethodSpec::knn(k);
      case regress::Method::constant: return regress::MethodSpec::constant();
      case regress::Method::random_forest: break;
    }
    regress::ForestParams p;
    p.n_trees = trees;
    p.mtry = mtry;
    p.min_leaf = min_leaf;
    p.bootstrap = !no_bootstrap;
    return regress::MethodSpec::random_forest(p);
  }

  stats::TwoSampleStatistic build() const {
    switch (stats::parse_kind(stat)) {
      case stats::Kind::regression:
        return stats::TwoSampleStatistic::regression(method(), stats::parse_mode(mode));
      case stats::Kind::mmd: return stats::TwoSampleStatistic::mmd();
      case stats::Kind::energy: return stats::TwoSampleStatistic::energy();
      case stats::Kind::c2st: return stats::TwoSampleStatistic::c2st(method());
    }
    throw InvalidInput("unknown statistic");
  }

  Json regressor_json() const {
    return {{"regressor", regressor}, {"k", k}, {"trees", trees}, {"mtry", mtry},
            {"min_leaf", min_leaf}, {"bootstrap", !no_bootstrap}};
  }

  Json to_json() const {
    Json j = {{"stat", stat}, {"mode", mode}};
    j.update(regressor_json());
    return j;
  }
};

struct TestOptions {
  StatisticOptions statistic;
  std::size_t perms = 99;
  bool mc_gof = false;
  std::size_t n_e = 500;

  void add(CLI::App* app) {
    statistic.add(app);
    app->add_option("--perms", perms, "Permutations (or Monte-Carlo replicates) M")
        ->capture_default_str();
    app->add_flag("--mc-gof", mc_gof, "Monte-Carlo goodness-of-fit test instead of permutations");
    app->add_option("--n-e", n_e, "Emulator draws per Monte-Carlo replicate")->capture_default_str();
  }

  local::LocalTestConfig build(std::size_t n0, std::size_t n1) const {
    local::LocalTestConfig cfg;
    cfg.statistic = statistic.build();
    cfg.m_permutations = perms;
    cfg.n_sim0 = n0;
    cfg.n_sim1 = n1;
    cfg.mc_gof = mc_gof;
    cfg.n_e = n_e;
    cfg.validate();
    return cfg;
  }

  Json to_json() const {
    Json j = statistic.to_json();
    j["perms"] = perms;
    j["mc_gof"] = mc_gof;
    j["n_e"] = n_e;
    return j;
  }
};

/// Built-in synthetic setting, or ensembles plus a fitted model.
struct ModelOptions {
  std::string setting;
  std::size_t dim = 0;
  std::string emulator = "approx";
  std::string ensembles;
  std::string model;

  void add(CLI::App* app) {
    app->add_option("--setting", setting, "Built-in synthetic setting")
        ->check(CLI::IsMember({"example1", "bernoulli", "scaling", "mog", "poisson_synth"}));
    app->add_option("--dim", dim, "Dimension of the synthetic setting (0: setting default)")
        ->capture_default_str();
    app->add_option("--emulator", emulator,
                    "Built-in emulator for --setting: its misspecified approximation or the truth")
        ->check(CLI::IsMember({"approx", "true"}))
        ->capture_default_str();
    app->add_option("--ensembles", ensembles, "Ensemble manifest.json (batch setting)");
    app->add_option("--model", model, "Model fitted to --ensembles")
        ->check(CLI::IsMember({"gaussian", "poisson", "kde"}));
  }

  bool has_setting() const { return !setting.empty(); }
  bool has_ensembles() const { return !ensembles.empty(); }

  models::SyntheticSetting synthetic() const {
    return models::SyntheticSetting::make(models::parse_setting(setting), dim);
  }

  std::vector<models::Ensemble> load() const {
    if (model.empty()) throw InvalidInput("--ensembles requires --model");
    return models::load_ensembles(ensembles);
  }

  std::unique_ptr<models::ApproxLikelihood> synthetic_emulator() const {
    return std::make_unique<models::SyntheticLikelihood>(synthetic(), emulator == "approx");
  }

  Json to_json() const {
    Json j;
    if (has_setting()) {
      j["setting"] = setting;
      j["dim"] = synthetic().dim;
      j["emulator"] = emulator;
    }
    if (has_ensembles()) {
      j["ensembles"] = ensembles;
      j["model"] = model;
    }
    return j;
  }
};

const models::Ensemble& ensemble_at(const std::vector<models::Ensemble>& ensembles,
                                    const Theta& theta) {
  for (const auto& e : ensembles) {
    if (e.theta == theta) return e;
  }
  throw InvalidInput("no ensemble at the requested --theta");
}

local::Simulator simulator_for(const models::SyntheticSetting& setting) {
  return [setting](const Theta& t, std::size_t n, RngStream r) { return models::simulate(setting, t, n, r); };
}

void add_theta(CLI::App* app, Theta& theta) {
  app->add_option("--theta", theta, "Parameter value, comma separated")->delimiter(',');
}

void add_seed_note(Json& config, const Common& common) { config["seed"] = common.seed; }

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  return out;
}

// ---------------------------------------------------------------------------
// local

struct LocalOptions {
  std::string s0, s1;
  Theta theta;
  std::size_t n = 100, n0 = 0, n1 = 0;
  bool null_draws = false;
  ModelOptions source;
  TestOptions test;
};

}  // namespace

Command add_local(CLI::App& parent) {
  auto o = std::make_shared<LocalOptions>();
  CLI::App* app = parent.add_subcommand("local", "Local two-sample test at one parameter value");
  app->add_option("--s0", o->s0, "Simulator sample CSV")->check(CLI::ExistingFile);
  app->add_option("--s1", o->s1, "Emulator sample CSV")->check(CLI::ExistingFile);
  add_theta(app, o->theta);
  app->add_option("--n", o->n, "Draws per group for --setting")->capture_default_str();
  app->add_option("--n0", o->n0, "Simulator draws (0: --n)");
  app->add_option("--n1", o->n1, "Emulator draws (0: --n)");
  app->add_flag("--null-draws", o->null_draws, "Include the permutation null in the output");
  o->source.add(app);
  o->test.add(app);
  return {app, [o](const Common& common, Json& config) {
            const std::size_t n0 = o->n0 ? o->n0 : o->n;
            const std::size_t n1 = o->n1 ? o->n1 : o->n;
            const RngStream rng{common.seed, 0};
            config = o->test.to_json();
            TestResult r;
            if (!o->s0.empty() || !o->s1.empty()) {
              if (o->s0.empty() || o->s1.empty()) throw InvalidInput("--s0 and --s1 go together");
              const Sample s0 = read_sample_csv(o->s0);
              const Sample s1 = read_sample_csv(o->s1);
              config["s0"] = o->s0;
              config["s1"] = o->s1;
              auto cfg = o->test.build(s0.size(), s1.size());
              if (cfg.mc_gof) throw InvalidInput("--mc-gof needs an emulator; use the mc-gof command");
              r = local::permutation_test(s0, s1, cfg, rng);
            } else if (o->source.has_ensembles()) {
              const auto ensembles = o->source.load();
              const auto& e = ensemble_at(ensembles, o->theta);
              const auto model = models::fit_model(models::parse_model_kind(o->source.model), ensembles);
              config.update(o->source.to_json());
              config["theta"] = o->theta;
              r = local::local_test(o->theta, e.test, *model, o->test.build(e.test.size(), n1), rng);
            } else if (o->source.has_setting()) {
              const auto setting = o->source.synthetic();
              config.update(o->source.to_json());
              config["theta"] = o->theta;
              config["n0"] = n0;
              config["n1"] = n1;
              r = local::local_test(o->theta, simulator_for(setting), *o->source.synthetic_emulator(),
                                    o->test.build(n0, n1), rng);
            } else {
              throw InvalidInput("give --s0/--s1, --setting with --theta, or --ensembles with --model");
            }
            add_seed_note(config, common);
            return report::to_json(r, o->null_draws);
          }};
}

// ---------------------------------------------------------------------------
// global

namespace {
struct GlobalOptions {
  std::string pvalues;
  std::string reference = "grid";
  std::size_t grid_points = 10;
  double gamma_shape = 1.0, gamma_rate = 1.0;
  std::size_t b = 100;
  std::size_t n = 100;
  std::string uniformity = "ks";
  std::size_t n_null = 999;
  std::string csv;
  ModelOptions source;
  TestOptions test;
};

Sample read_pvalue_table(const std::string& path, std::vector<Theta>& theta,
                         std::vector<double>& p) {
  Sample table = read_sample_csv(path);
  const std::size_t d = table.dim();
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto row = table.row(i);
    theta.emplace_back(row.begin(), row.end() - 1);
    p.push_back(row[d - 1]);
  }
  if (d == 1) theta.clear();
  return table;
}
}  // namespace

Command add_global(CLI::App& parent) {
  auto o = std::make_shared<GlobalOptions>();
  CLI::App* app = parent.add_subcommand("global", "Global goodness-of-fit test across parameter space");
  app->add_option("--pvalues", o->pvalues, "CSV of local p-values (last column), optionally after theta columns")
      ->check(CLI::ExistingFile);
  app->add_option("--reference", o->reference, "Reference distribution for --setting")
      ->check(CLI::IsMember({"grid", "box", "gamma"}))
      ->capture_default_str();
  app->add_option("--grid-points", o->grid_points, "Grid points per axis for --reference grid")
      ->capture_default_str();
  app->add_option("--gamma-shape", o->gamma_shape, "Shape of --reference gamma")->capture_default_str();
  app->add_option("--gamma-rate", o->gamma_rate, "Rate of --reference gamma")->capture_default_str();
  app->add_option("--b", o->b, "Parameter draws B")->capture_default_str();
  app->add_option("--n", o->n, "Draws per group in each local test")->capture_default_str();
  app->add_option("--uniformity", o->uniformity, "Uniformity statistic")
      ->check(CLI::IsMember({"ks", "cvm"}))
      ->capture_default_str();
  app->add_option("--n-null", o->n_null, "Monte-Carlo draws of the uniformity null")->capture_default_str();
  app->add_option("--csv", o->csv, "Write (theta, p) rows to this file");
  o->source.add(app);
  o->test.add(app);
  return {app, [o](const Common& common, Json& config) {
            const RngStream rng{common.seed, 0};
            const auto which = global::parse_uniformity(o->uniformity);
            config = {{"uniformity", o->uniformity}, {"n_null", o->n_null}};
            global::GlobalTestResult r;
            if (!o->pvalues.empty()) {
              std::vector<Theta> theta;
              std::vector<double> p;
              read_pvalue_table(o->pvalues, theta, p);
              config["pvalues"] = o->pvalues;
              r = global::global_test_from_pvalues(std::move(theta), std::move(p), which, o->n_null, rng);
            } else if (o->source.has_ensembles()) {
              const auto ensembles = o->source.load();
              const auto model = models::fit_model(models::parse_model_kind(o->source.model), ensembles);
              config.update(o->test.to_json());
              config.update(o->source.to_json());
              r = global::global_test(ensembles, *model, o->test.build(1, o->n), which, o->n_null, rng);
            } else if (o->source.has_setting()) {
              const auto setting = o->source.synthetic();
              global::GlobalTestConfig cfg;
              if (o->reference == "grid") {
                cfg.reference = global::ReferenceDistribution::grid(
                    models::midpoint_grid(setting.domain(), o->grid_points));
              } else if (o->reference == "box") {
                cfg.reference = global::ReferenceDistribution::box(setting.domain());
              } else {
                cfg.reference = global::ReferenceDistribution::gamma(o->gamma_shape, o->gamma_rate);
              }
              cfg.b = o->b;
              cfg.local = o->test.build(o->n, o->n);
              cfg.uniformity = which;
              cfg.n_null = o->n_null;
              config.update(o->test.to_json());
              config.update(o->source.to_json());
              config["reference"] = o->reference;
              if (o->reference == "grid") config["grid_points"] = o->grid_points;
              if (o->reference == "gamma") {
                config["gamma_shape"] = o->gamma_shape;
                config["gamma_rate"] = o->gamma_rate;
              }
              config["b"] = o->b;
              config["n"] = o->n;
              r = global::global_test(cfg, simulator_for(setting), *o->source.synthetic_emulator(), rng);
            } else {
              throw InvalidInput("give --pvalues, --setting, or --ensembles with --model");
            }
            if (!o->csv.empty()) {
              auto out = open_output(o->csv);
              report::write_local_pvalues_csv(out, r);
              config["csv"] = o->csv;
            }
            add_seed_note(config, common);
            return report::to_json(r);
          }};
}

// ---------------------------------------------------------------------------
// mc-gof

namespace {
struct McGofOptions {
  std::string s;
  Theta theta;
  std::size_t n = 20;
  ModelOptions source;
  TestOptions test;
};
}  // namespace

Command add_mc_gof(CLI::App& parent) {
  auto o = std::make_shared<McGofOptions>();
  CLI::App* app = parent.add_subcommand("mc-gof", "Monte-Carlo goodness-of-fit test against an emulator");
  app->add_option("--s", o->s, "Simulator sample CSV (default: simulate --n draws from --setting)")
      ->check(CLI::ExistingFile);
  add_theta(app, o->theta);
  app->add_option("--n", o->n, "Simulator draws when --s is not given")->capture_default_str();
  o->source.add(app);
  o->test.add(app);
  return {app, [o](const Common& common, Json& config) {
            const RngStream rng{common.seed, 0};
            std::unique_ptr<models::ApproxLikelihood> emulator;
            Sample s;
            config = o->test.to_json();
            config.erase("mc_gof");
            config.update(o->source.to_json());
            config["theta"] = o->theta;
            if (o->source.has_ensembles()) {
              const auto ensembles = o->source.load();
              emulator = models::fit_model(models::parse_model_kind(o->source.model), ensembles);
              if (o->s.empty()) s = ensemble_at(ensembles, o->theta).test;
            } else if (o->source.has_setting()) {
              emulator = o->source.synthetic_emulator();
              if (o->s.empty()) {
                s = models::simulate(o->source.synthetic(), o->theta, o->n, derive_substream(rng, 0));
                config["n"] = o->n;
              }
            } else {
              throw InvalidInput("mc-gof needs an emulator: --setting or --ensembles with --model");
            }
            if (!o->s.empty()) {
              s = read_sample_csv(o->s);
              config["s"] = o->s;
            }
            if (!emulator->supports(o->theta)) throw InvalidInput("emulator is not defined at --theta");
            const auto& model = *emulator;
            const Theta theta = o->theta;
            const local::Sampler sampler = [&model, theta](std::size_t n, RngStream r) {
              return model.sample(theta, n, r);
            };
            add_seed_note(config, common);
            const auto r = local::mc_gof_test(s, sampler, o->test.n_e, o->test.perms,
                                              o->test.statistic.build(), derive_substream(rng, 1));
            return report::to_json(r);
          }};
}

// ---------------------------------------------------------------------------
// diagnose

namespace {
struct DiagnoseOptions {
  std::string s0, s1;
  Theta theta;
  std::size_t n = 100;
  std::size_t perms = 99;
  double alpha = 0.05;
  double train_fraction = 0.65;
  std::string csv;
  std::size_t pd_feature = 0;
  std::vector<double> pd_grid;
  ModelOptions source;
  StatisticOptions regressor;
};
}  // namespace

Command add_diagnose(CLI::App& parent) {
  auto o = std::make_shared<DiagnoseOptions>();
  CLI::App* app = parent.add_subcommand("diagnose", "Feature-space diagnostics with FDR control");
  app->add_option("--s0", o->s0, "Simulator sample CSV")->check(CLI::ExistingFile);
  app->add_option("--s1", o->s1, "Emulator sample CSV")->check(CLI::ExistingFile);
  add_theta(app, o->theta);
  app->add_option("--n", o->n, "Draws per group for --setting")->capture_default_str();
  app->add_option("--perms", o->perms, "Label permutations M")->capture_default_str();
  app->add_option("--alpha", o->alpha, "FDR level")->capture_default_str();
  app->add_option("--train-fraction", o->train_fraction, "Share of each group used for fitting")
      ->capture_default_str();
  app->add_option("--csv", o->csv, "Write one row per test point to this file");
  app->add_option("--pd-feature", o->pd_feature, "Feature for the partial-dependence curve")
      ->capture_default_str();
  app->add_option("--pd-grid", o->pd_grid, "Partial-dependence grid values, comma separated")
      ->delimiter(',');
  o->source.add(app);
  o->regressor.add_regressor(app);
  return {app, [o](const Common& common, Json& config) {
            const RngStream rng{common.seed, 0};
            Sample s0, s1;
            if (!o->s0.empty() || !o->s1.empty()) {
              if (o->s0.empty() || o->s1.empty()) throw InvalidInput("--s0 and --s1 go together");
              s0 = read_sample_csv(o->s0);
              s1 = read_sample_csv(o->s1);
              config = {{"s0", o->s0}, {"s1", o->s1}};
            } else if (o->source.has_setting()) {
              s0 = models::simulate(o->source.synthetic(), o->theta, o->n, derive_substream(rng, 3));
              s1 = o->source.synthetic_emulator()->sample(o->theta, o->n, derive_substream(rng, 4));
              config = o->source.to_json();
              config["theta"] = o->theta;
              config["n"] = o->n;
            } else {
              throw InvalidInput("give --s0/--s1 or --setting with --theta");
            }
            config.update(o->regressor.regressor_json());
            config["perms"] = o->perms;
            config["alpha"] = o->alpha;
            config["train_fraction"] = o->train_fraction;
            const auto split = diagnose::holdout_split(pool_and_label(s0, s1), o->train_fraction,
                                                       derive_substream(rng, 0));
            const auto method = o->regressor.method();
            const auto rows = diagnose::feature_space_test(split.train, split.test.points(), method,
                                                           o->perms, o->alpha, derive_substream(rng, 1));
            Json result;
            result["n_train"] = split.train.size();
            result["n_test"] = rows.size();
            result["pi1"] = split.train.pi1();
            Json flagged = Json::array();
            for (std::size_t j = 0; j < rows.size(); ++j) {
              if (rows[j].flagged) flagged.push_back(j);
            }
            result["n_flagged"] = flagged.size();
            result["flagged"] = flagged;
            if (!o->pd_grid.empty()) {
              const auto model = regress::fit(method, split.train, derive_substream(rng, 2));
              const auto curve = diagnose::partial_dependence(model, split.train.points(), o->pd_feature,
                                                              o->pd_grid);
              Json pd = Json::array();
              for (const auto& c : curve) pd.push_back({{"value", c.value}, {"mean_prediction", c.mean_prediction}});
              result["partial_dependence"] = {{"feature", o->pd_feature}, {"curve", pd}};
              config["pd_feature"] = o->pd_feature;
              config["pd_grid"] = o->pd_grid;
            }
            if (!o->csv.empty()) {
              auto out = open_output(o->csv);
              diagnose::write_diagnosis_csv(out, rows);
              config["csv"] = o->csv;
            }
            add_seed_note(config, common);
            return result;
          }};
}

// ---------------------------------------------------------------------------
// fit

namespace {
struct FitOptions {
  std::string ensembles;
  std::string model;
};
}  // namespace

Command add_fit(CLI::App& parent) {
  auto o = std::make_shared<FitOptions>();
  CLI::App* app = parent.add_subcommand("fit", "Fit an approximate likelihood to ensembles");
  app->add_option("--ensembles", o->ensembles, "Ensemble manifest.json")->required();
  app->add_option("--model", o->model, "Model family")
      ->required()
      ->check(CLI::IsMember({"gaussian", "poisson", "kde"}));
  return {app, [o](const Common& common, Json& config) {
            config = {{"ensembles", o->ensembles}, {"model", o->model}};
            add_seed_note(config, common);
            const auto ensembles = models::load_ensembles(o->ensembles);
            const auto kind = models::parse_model_kind(o->model);
            const auto model = models::fit_model(kind, ensembles);
            Json fits = Json::array();
            for (const auto& e : ensembles) {
              Json f = {{"theta", e.theta}, {"n_train", e.train.size()}};
              if (kind == models::ModelKind::gaussian) {
                f["mean"] = static_cast<const models::GaussianModel&>(*model).mean(e.theta);
              } else if (kind == models::ModelKind::poisson) {
                f["rates"] = static_cast<const models::PoissonModel&>(*model).rates(e.theta);
              } else {
                f["bandwidth"] = static_cast<const models::KdeModel&>(*model).fit(e.theta).bandwidth;
              }
              fits.push_back(std::move(f));
            }
            Json result = {{"model", model->name()}, {"dim", model->dim()}, {"fits", fits}};
            if (kind == models::ModelKind::gaussian) {
              result["covariance"] = static_cast<const models::GaussianModel&>(*model).covariance();
            }
            return result;
          }};
}

// ---------------------------------------------------------------------------
// kl

namespace {
struct KlOptions {
  std::string ensembles;
  std::vector<std::string> models{"gaussian", "poisson", "kde"};
};
}  // namespace

Command add_kl(CLI::App& parent) {
  auto o = std::make_shared<KlOptions>();
  CLI::App* app = parent.add_subcommand("kl", "Compare fitted models by held-out KL estimate");
  app->add_option("--ensembles", o->ensembles, "Ensemble manifest.json")->required();
  app->add_option("--model", o->models, "Models to compare (repeatable)")
      ->check(CLI::IsMember({"gaussian", "poisson", "kde"}))
      ->capture_default_str();
  return {app, [o](const Common& common, Json& config) {
            config = {{"ensembles", o->ensembles}, {"models", o->models}};
            add_seed_note(config, common);
            const auto ensembles = models::load_ensembles(o->ensembles);
            Json rows = Json::array();
            for (const auto& name : o->models) {
              const auto model = models::fit_model(models::parse_model_kind(name), ensembles);
              const auto kl = models::kl_estimate(*model, ensembles);
              Json row = {{"model", name}, {"n_points", kl.n_points}, {"n_nonfinite", kl.n_nonfinite}};
              if (std::isfinite(kl.value)) {
                row["kl"] = kl.value;
              } else {
                row["kl"] = "inf";
              }
              rows.push_back(std::move(row));
            }
            return Json{{"models", rows}};
          }};
}

// ---------------------------------------------------------------------------
// power

namespace {
struct PowerOptions {
  std::string setting;
  std::size_t dim = 0;
  Theta theta;
  std::size_t n = 100;
  std::size_t trials = 100;
  double alpha = 0.05;
  bool null = false;
  TestOptions test;
};
}  // namespace

Command add_power(CLI::App& parent) {
  auto o = std::make_shared<PowerOptions>();
  CLI::App* app = parent.add_subcommand("power", "Estimate local-test power on a synthetic setting");
  app->add_option("--setting", o->setting, "Synthetic setting")
      ->required()
      ->check(CLI::IsMember({"example1", "bernoulli", "scaling", "mog", "poisson_synth"}));
  app->add_option("--dim", o->dim, "Dimension (0: setting default)")->capture_default_str();
  add_theta(app, o->theta);
  app->add_option("--n", o->n, "Draws per group")->capture_default_str();
  app->add_option("--trials", o->trials, "Repeated trials")->capture_default_str();
  app->add_option("--alpha", o->alpha, "Test level")->capture_default_str();
  app->add_flag("--null", o->null, "Test the truth against itself (size check)");
  o->test.add(app);
  return {app, [o](const Common& common, Json& config) {
            const auto setting = models::SyntheticSetting::make(models::parse_setting(o->setting), o->dim);
            config = o->test.to_json();
            config.update({{"setting", o->setting}, {"dim", setting.dim}, {"theta", o->theta},
                           {"n", o->n}, {"trials", o->trials}, {"alpha", o->alpha}, {"null", o->null}});
            add_seed_note(config, common);
            harness::LocalPowerSpec spec;
            spec.truth = simulator_for(setting);
            if (o->null) {
              spec.alternative = spec.truth;
            } else {
              spec.alternative = [setting](const Theta& t, std::size_t n, RngStream r) {
                return models::approximate_simulate(setting, t, n, r);
              };
            }
            spec.theta = o->theta;
            spec.test = o->test.build(o->n, o->n);
            const auto e = harness::estimate_power(spec, o->trials, o->alpha, RngStream{common.seed, 0});
            Json result = {{"trials", e.trials}, {"rejections", e.rejections}, {"power", e.power},
                           {"se", e.se}, {"p_values", e.p_values}, {"statistics", e.statistics}};
            if (!e.warning.empty()) result["warning"] = e.warning;
            return result;
          }};
}

// ---------------------------------------------------------------------------
// experiment

namespace {
struct ExperimentOptions {
  std::string name;
  std::string out;
  harness::ExperimentConfig config;
  std::string e1_statistic = "knn";
  std::string ps_statistic = "rf";
  bool full_scale = false;
};
}  // namespace

Command add_experiment(CLI::App& parent) {
  auto o = std::make_shared<ExperimentOptions>();
  auto& e1 = o->config.example1;
  auto& e2 = o->config.example2;
  auto& ps = o->config.poisson_synth;
  CLI::App* app = parent.add_subcommand("experiment", "Reproduce a full experiment into a report directory");
  app->add_option("--name", o->name, "Experiment")
      ->required()
      ->check(CLI::IsMember({"example1", "example2", "poisson_synth"}));
  app->add_option("--out", o->out, "Report directory")->required();
  app->add_option("--e1-dim", e1.dim, "example1: coordinates per draw")->capture_default_str();
  app->add_option("--e1-replicates", e1.replicates, "example1: PQ/SBC replicates")->capture_default_str();
  app->add_option("--e1-sbc-draws", e1.sbc_draws, "example1: posterior draws per rank")->capture_default_str();
  app->add_option("--e1-b", e1.b, "example1: parameter draws B")->capture_default_str();
  app->add_option("--e1-n-sim", e1.n_sim, "example1: draws per local test group")->capture_default_str();
  app->add_option("--e1-perms", e1.m_permutations, "example1: permutations M")->capture_default_str();
  app->add_option("--e1-n-null", e1.n_null, "example1: uniformity null draws")->capture_default_str();
  app->add_option("--e1-bins", e1.bins, "example1: histogram bins")->capture_default_str();
  app->add_option("--e1-statistic", o->e1_statistic, "example1: local statistic tag")->capture_default_str();
  app->add_option("--e2-settings", e2.settings, "example2: settings")->delimiter(',')->capture_default_str();
  app->add_option("--e2-dims", e2.dims, "example2: dimensions")->delimiter(',')->capture_default_str();
  app->add_option("--e2-grid-points", e2.grid_points, "example2: theta grid size")->capture_default_str();
  app->add_option("--e2-statistics", e2.statistics, "example2: statistic tags")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--e2-n", e2.n, "example2: draws per group")->capture_default_str();
  app->add_option("--e2-trials", e2.trials, "example2: trials per cell")->capture_default_str();
  app->add_option("--e2-perms", e2.m_permutations, "example2: permutations M")->capture_default_str();
  app->add_option("--e2-alpha", e2.alpha, "example2: test level")->capture_default_str();
  app->add_option("--ps-n-train", ps.n_train, "poisson_synth: training sizes")->delimiter(',')->capture_default_str();
  app->add_option("--ps-grid-per-axis", ps.grid_per_axis, "poisson_synth: grid points per axis")
      ->capture_default_str();
  app->add_option("--ps-n-sim", ps.n_sim, "poisson_synth: held-out draws per theta")->capture_default_str();
  app->add_option("--ps-models", ps.models, "poisson_synth: models (gaussian, poisson, kde, true)")
      ->delimiter(',')
      ->capture_default_str();
  app->add_option("--ps-trials", ps.trials, "poisson_synth: global-test trials")->capture_default_str();
  app->add_option("--ps-perms", ps.m_permutations, "poisson_synth: permutations M")->capture_default_str();
  app->add_option("--ps-n-null", ps.n_null, "poisson_synth: uniformity null draws")->capture_default_str();
  app->add_option("--ps-alpha", ps.alpha, "poisson_synth: test level")->capture_default_str();
  app->add_option("--ps-statistic", o->ps_statistic, "poisson_synth: local statistic tag")->capture_default_str();
  app->add_flag("--ps-mmd-test", ps.mmd_test, "poisson_synth: also run the MMD global test");
  app->add_flag("--full-scale", o->full_scale, "poisson_synth: use n_train = 50,100,10000");
  return {app, [o](const Common& common, Json& config) {
            auto cfg = o->config;
            cfg.example1.statistic = harness::parse_statistic(o->e1_statistic);
            cfg.poisson_synth.statistic = harness::parse_statistic(o->ps_statistic);
            if (o->full_scale) cfg.poisson_synth.n_train = {50, 100, 10000};
            config = harness::to_json(cfg)[o->name];
            config["name"] = o->name;
            config["out"] = o->out;
            add_seed_note(config, common);
            harness::run_experiment(o->name, cfg, o->out, common.seed);
            return Json{{"out", o->out},
                        {"files", {"power.csv", "local_pvalues.csv", "global.json", "histograms.csv",
                                   "manifest.json"}}};
          }};
}

// ---------------------------------------------------------------------------
// simulate

namespace {
struct SimulateOptions {
  std::string setting;
  std::size_t dim = 0;
  std::vector<Theta> theta;
  std::vector<double> theta_flat;
  std::size_t grid_points = 0;
  std::size_t n_train = 100;
  std::size_t n_test = 100;
  bool approx = false;
  std::string out;
};
}  // namespace

Command add_simulate(CLI::App& parent) {
  auto o = std::make_shared<SimulateOptions>();
  CLI::App* app = parent.add_subcommand("simulate", "Write ensembles from a synthetic setting");
  app->add_option("--setting", o->setting, "Synthetic setting")
      ->required()
      ->check(CLI::IsMember({"example1", "bernoulli", "scaling", "mog", "poisson_synth"}));
  app->add_option("--dim", o->dim, "Dimension (0: setting default)")->capture_default_str();
  app->add_option("--theta", o->theta_flat,
                  "Parameter values, comma separated; consecutive groups of the parameter dimension")
      ->delimiter(',');
  app->add_option("--grid-points", o->grid_points, "Midpoint grid per axis instead of --theta");
  app->add_option("--n-train", o->n_train, "Training draws per theta")->capture_default_str();
  app->add_option("--n-test", o->n_test, "Held-out draws per theta")->capture_default_str();
  app->add_flag("--approx", o->approx, "Draw from the built-in approximation instead of the truth");
  app->add_option("--out", o->out, "Output directory")->required();
  return {app, [o](const Common& common, Json& config) {
            const auto setting = models::SyntheticSetting::make(models::parse_setting(o->setting), o->dim);
            std::vector<Theta> grid;
            const std::size_t p = setting.domain().size();
            if (o->grid_points > 0) {
              grid = models::midpoint_grid(setting.domain(), o->grid_points);
            } else {
              if (o->theta_flat.empty() || o->theta_flat.size() % p != 0) {
                throw InvalidInput("--theta needs a multiple of " + std::to_string(p) + " values");
              }
              for (std::size_t i = 0; i < o->theta_flat.size(); i += p) {
                grid.emplace_back(o->theta_flat.begin() + static_cast<std::ptrdiff_t>(i),
                                  o->theta_flat.begin() + static_cast<std::ptrdiff_t>(i + p));
              }
            }
            config = {{"setting", o->setting}, {"dim", setting.dim}, {"theta", grid},
                      {"n_train", o->n_train}, {"n_test", o->n_test}, {"approx", o->approx},
                      {"out", o->out}};
            add_seed_note(config, common);
            const RngStream rng{common.seed, 0};
            std::vector<models::Ensemble> ensembles;
            if (o->approx) {
              for (std::size_t j = 0; j < grid.size(); ++j) {
                const RngStream sub = derive_substream(rng, j);
                ensembles.push_back({grid[j],
                                     models::approximate_simulate(setting, grid[j], o->n_train, derive_substream(sub, 0)),
                                     models::approximate_simulate(setting, grid[j], o->n_test, derive_substream(sub, 1))});
              }
            } else {
              ensembles = models::make_ensembles(setting, grid, o->n_train, o->n_test, rng);
            }
            models::save_ensembles(o->out, ensembles);
            return Json{{"manifest", o->out + "/manifest.json"}, {"ensembles", ensembles.size()}};
          }};
}

}  // namespace emuval::cli

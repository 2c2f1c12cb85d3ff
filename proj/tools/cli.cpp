#include "cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "implreg/ensemble.hpp"
#include "implreg/errors.hpp"
#include "implreg/io.hpp"
#include "implreg/parallel.hpp"
#include "implreg/paths.hpp"
#include "implreg/simdata.hpp"
#include "implreg/transforms.hpp"
#include "implreg/tuning.hpp"
#include "implreg/weights.hpp"

#ifndef IMPLREG_VERSION
#define IMPLREG_VERSION "0.0.0"
#endif

namespace implreg::cli {
namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Strict config reading: every key must be consumed by a field.

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InputError("config section '" + path_ + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) {
    if (!j_.contains(key) || j_.at(key).is_null()) {
      seen_.insert(key);
      return std::nullopt;
    }
    return convert<T>(key);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw InputError("unknown config key '" + (path_.empty() ? it.key() : path_ + "." + it.key()) + "'");
  }

 private:
  template <class T>
  T convert(const std::string& key) {
    seen_.insert(key);
    const json& v = j_.at(key);
    const std::string where = path_.empty() ? key : path_ + "." + key;
    try {
      if constexpr (std::is_same_v<T, std::uint64_t> || std::is_same_v<T, std::size_t>) {
        const bool nonneg = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        if (!nonneg) throw InputError("config key '" + where + "' must be a nonnegative integer");
      } else if constexpr (std::is_same_v<T, Index>) {
        if (!v.is_number_integer()) throw InputError("config key '" + where + "' must be an integer");
      } else if constexpr (std::is_same_v<T, std::vector<Index>> || std::is_same_v<T, std::vector<std::size_t>>) {
        if (!v.is_array()) throw InputError("config key '" + where + "' must be an array of integers");
        for (const json& e : v)
          if (!e.is_number_integer()) throw InputError("config key '" + where + "' must be an array of integers");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw InputError("config key '" + where + "' has the wrong type: " + e.what());
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// ---------------------------------------------------------------------------

struct DataConfig {
  std::string source = "sim";
  SimConfig sim;
  std::string features, response;
  bool center = true;
};

struct PathConfig {
  std::vector<double> mu_grid{0.1, 1.0, 10.0};
  std::vector<Index> k_grid;
  std::vector<double> lambda_grid;
  std::size_t draws = 20;
};

struct EnsembleConfig {
  double mu = 1.0;
  Index k = 0;
  std::vector<std::size_t> sizes{1, 2, 4, 8, 16};
  std::size_t draws = 100;
  Index oracle_rows = 100000;
};

struct TuneConfig {
  double lambda = 1e-3;
  std::vector<Index> k_grid;
  std::size_t m0 = 25;
  double delta = 1e-3;
  std::string method = "holdout";
  double holdout_fraction = 0.2;
  bool fit_final = true;
};

struct STransformConfig {
  std::string kind = "subsample";
  Index n = 200;
  Index k = 100;
  double decay = 0.9;
  std::uint64_t seed = 0;
  std::vector<double> w_grid;
};

struct Config {
  std::uint64_t master_seed = 0;
  DataConfig data;
  PathConfig path;
  EnsembleConfig ensemble;
  TuneConfig tune;
  STransformConfig stransform;
  std::string output_directory = "out";
};

std::vector<double> logspace(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i)
    out.push_back(std::pow(10.0, lo + (hi - lo) * i / std::max(1, count - 1)));
  return out;
}

Index data_rows(const Config& c) {
  if (c.data.source == "sim") return c.data.sim.n;
  return -1;
}

/// Applies defaults that depend on other fields; `n` is the dataset size
/// when known.
void fill_defaults(Config& c, Index n) {
  if (n > 0) {
    if (c.path.k_grid.empty())
      for (int j = 1; j <= 10; ++j) c.path.k_grid.push_back(std::max<Index>(1, (n * j) / 10));
    if (c.ensemble.k == 0) c.ensemble.k = std::max<Index>(1, n / 2);
    if (c.tune.k_grid.empty()) {
      const Index n_train = c.tune.method == "holdout"
                                ? n - static_cast<Index>(std::llround(c.tune.holdout_fraction * static_cast<double>(n)))
                                : n;
      for (Index k = 20; k <= n_train; k += 20) c.tune.k_grid.push_back(k);
      if (c.tune.k_grid.empty()) c.tune.k_grid.push_back(std::max<Index>(1, n_train));
    }
  }
  if (c.path.lambda_grid.empty()) c.path.lambda_grid = logspace(-2.0, 1.0, 13);
}

Config parse_config(const json& doc_in) {
  const json* doc = &doc_in;
  if (doc_in.is_object() && doc_in.contains("manifest_version")) {
    if (!doc_in.contains("config")) throw InputError("manifest has no config section");
    doc = &doc_in.at("config");
  }
  Section root(*doc, "");
  const auto version = root.maybe<std::int64_t>("schema_version");
  if (!version) throw InputError("config is missing schema_version");
  if (*version != kSchemaVersion)
    throw InputError("unsupported schema_version " + std::to_string(*version));
  Config c;
  c.master_seed = root.get<std::uint64_t>("master_seed", 0);

  Section data = root.child("data");
  c.data.source = data.get<std::string>("source", "sim");
  c.data.center = data.get<bool>("center", true);
  if (c.data.source != "sim" && c.data.source != "file")
    throw InputError("data.source must be 'sim' or 'file'");
  {
    Section sim = data.child("sim");
    c.data.sim.n = sim.get<Index>("n", 1000);
    c.data.sim.p = sim.get<Index>("p", 100);
    c.data.sim.feature_kind = feature_kind_from_string(sim.get<std::string>("feature_kind", "linear"));
    const Index dflt_d = c.data.sim.feature_kind == FeatureKind::random_relu ? 2 * c.data.sim.p : c.data.sim.p;
    c.data.sim.d = sim.get<Index>("d", dflt_d);
    c.data.sim.rho_ar = sim.get<double>("rho_ar", 0.25);
    c.data.sim.seed = sim.get<std::uint64_t>("seed", c.master_seed);
    sim.finish();
    if (c.data.source == "sim") c.data.sim.validate();
  }
  {
    Section file = data.child("file");
    c.data.features = file.get<std::string>("features", "");
    c.data.response = file.get<std::string>("response", "");
    file.finish();
    if (c.data.source == "file" && (c.data.features.empty() || c.data.response.empty()))
      throw InputError("data.file needs 'features' and 'response' paths");
  }
  data.finish();

  Section path = root.child("path");
  c.path.mu_grid = path.get<std::vector<double>>("mu_grid", c.path.mu_grid);
  c.path.k_grid = path.get<std::vector<Index>>("k_grid", {});
  c.path.lambda_grid = path.get<std::vector<double>>("lambda_grid", {});
  c.path.draws = path.get<std::size_t>("draws", c.path.draws);
  path.finish();

  Section ens = root.child("ensemble");
  c.ensemble.mu = ens.get<double>("mu", c.ensemble.mu);
  c.ensemble.k = ens.get<Index>("k", 0);
  c.ensemble.sizes = ens.get<std::vector<std::size_t>>("M", c.ensemble.sizes);
  c.ensemble.draws = ens.get<std::size_t>("draws", c.ensemble.draws);
  c.ensemble.oracle_rows = ens.get<Index>("oracle_rows", c.ensemble.oracle_rows);
  ens.finish();

  Section tn = root.child("tune");
  c.tune.lambda = tn.get<double>("lambda", c.tune.lambda);
  c.tune.k_grid = tn.get<std::vector<Index>>("k_grid", {});
  c.tune.m0 = tn.get<std::size_t>("m0", c.tune.m0);
  c.tune.delta = tn.get<double>("delta", c.tune.delta);
  c.tune.method = tn.get<std::string>("method", c.tune.method);
  risk_method_from_string(c.tune.method);
  c.tune.holdout_fraction = tn.get<double>("holdout_fraction", c.tune.holdout_fraction);
  c.tune.fit_final = tn.get<bool>("fit_final", c.tune.fit_final);
  tn.finish();

  Section st = root.child("stransform");
  c.stransform.kind = st.get<std::string>("kind", c.stransform.kind);
  const WeightKind wk = weight_kind_from_string(c.stransform.kind);
  if (wk == WeightKind::identity || wk == WeightKind::dense)
    throw InputError("stransform.kind must be subsample, bootstrap or nonuniform");
  c.stransform.n = st.get<Index>("n", c.stransform.n);
  c.stransform.k = st.get<Index>("k", c.stransform.k);
  c.stransform.decay = st.get<double>("decay", c.stransform.decay);
  c.stransform.seed = st.get<std::uint64_t>("seed", c.master_seed);
  c.stransform.w_grid = st.get<std::vector<double>>("w_grid", {});
  st.finish();

  Section outp = root.child("output");
  c.output_directory = outp.get<std::string>("directory", c.output_directory);
  outp.finish();
  root.finish();
  return c;
}

json to_json(const Config& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["master_seed"] = c.master_seed;
  json sim = {{"n", c.data.sim.n},
              {"d", c.data.sim.d},
              {"p", c.data.sim.p},
              {"rho_ar", c.data.sim.rho_ar},
              {"feature_kind", std::string(to_string(c.data.sim.feature_kind))},
              {"seed", c.data.sim.seed}};
  j["data"] = {{"source", c.data.source},
               {"center", c.data.center},
               {"sim", sim},
               {"file", {{"features", c.data.features}, {"response", c.data.response}}}};
  j["path"] = {{"mu_grid", c.path.mu_grid},
               {"k_grid", c.path.k_grid},
               {"lambda_grid", c.path.lambda_grid},
               {"draws", c.path.draws}};
  j["ensemble"] = {{"mu", c.ensemble.mu},
                   {"k", c.ensemble.k},
                   {"M", c.ensemble.sizes},
                   {"draws", c.ensemble.draws},
                   {"oracle_rows", c.ensemble.oracle_rows}};
  j["tune"] = {{"lambda", c.tune.lambda},     {"k_grid", c.tune.k_grid},
               {"m0", c.tune.m0},             {"delta", c.tune.delta},
               {"method", c.tune.method},     {"holdout_fraction", c.tune.holdout_fraction},
               {"fit_final", c.tune.fit_final}};
  j["stransform"] = {{"kind", c.stransform.kind}, {"n", c.stransform.n},
                     {"k", c.stransform.k},       {"decay", c.stransform.decay},
                     {"seed", c.stransform.seed}, {"w_grid", c.stransform.w_grid}};
  j["output"] = {{"directory", c.output_directory}};
  return j;
}

// ---------------------------------------------------------------------------

struct Loaded {
  std::optional<FeatureDataset> features;
  std::optional<MatrixXd> kernel;
  VectorXd kernel_y;
  std::optional<SimOracle> oracle;
  FeatureMap map;
  Index n = 0;
};

Loaded load_data(const Config& c) {
  Loaded out;
  if (c.data.source == "file") {
    MatrixXd phi = load_matrix(c.data.features);
    MatrixXd y = load_matrix(c.data.response);
    if (y.cols() != 1 && y.rows() == 1) y.transposeInPlace();
    if (y.cols() != 1) throw InputError("response file must hold a single column");
    out.features = FeatureDataset::create(std::move(phi), y.col(0), c.data.center);
    out.n = out.features->n();
    return out;
  }
  SimData sd = gen_mar1(c.data.sim);
  out.map = make_feature_map(c.data.sim);
  out.n = c.data.sim.n;
  if (c.data.sim.feature_kind == FeatureKind::kernel_poly3) {
    out.kernel = poly3_kernel(sd.raw.x);
    out.kernel_y = sd.raw.y;
    if (c.data.center) out.kernel_y.array() -= out.kernel_y.mean();
  } else {
    out.features = FeatureDataset::create(out.map.apply(sd.raw.x), sd.raw.y, c.data.center);
  }
  out.oracle = std::move(sd.oracle);
  return out;
}

using Outputs = std::vector<std::pair<std::string, std::string>>;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// ---------------------------------------------------------------------------
// Subcommands

void cmd_gen_data(const Config& c, const Loaded& d, Outputs& out) {
  if (d.features) {
    out.emplace_back("features.fpmx", encode_fpmx(d.features->phi));
    out.emplace_back("response.fpmx", encode_fpmx(d.features->y));
  } else {
    out.emplace_back("kernel.fpmx", encode_fpmx(*d.kernel));
    out.emplace_back("response.fpmx", encode_fpmx(d.kernel_y));
  }
  if (d.oracle) {
    Table t{{"beta0"}, {}};
    for (Index i = 0; i < d.oracle->beta0.size(); ++i) t.add({d.oracle->beta0[i]});
    out.emplace_back("oracle_beta0.csv", render_table(t));
    json o = {{"sigma0_sq", d.oracle->sigma0_sq}, {"rho_ar", c.data.sim.rho_ar}, {"d", c.data.sim.d}};
    out.emplace_back("oracle.json", o.dump(2) + "\n");
  }
}

Table heatmap_table(const HeatmapResult& r) {
  Table t{{"k_over_n", "lambda", "df_bar_mean", "proj_mean", "n_draws"}, {}};
  for (const HeatmapCell& cell : r.cells)
    t.add({cell.k_over_n, cell.lambda, cell.df_bar_mean, cell.proj_mean, static_cast<double>(cell.n_draws)});
  return t;
}

void cmd_path_heatmap(const Config& c, const Loaded& d, Outputs& out) {
  const HeatmapResult r =
      d.features ? path_heatmap(*d.features, c.path.k_grid, c.path.lambda_grid, c.path.draws, c.master_seed,
                                c.path.mu_grid)
                 : path_heatmap_kernel(*d.kernel, c.path.k_grid, c.path.lambda_grid, c.path.draws,
                                       c.master_seed, c.path.mu_grid);
  const std::string cells = render_table(heatmap_table(r));
  out.emplace_back("heatmap_df.csv", cells);
  out.emplace_back("heatmap_proj.csv", cells);
  Table paths{{"mu", "k_over_n", "lambda", "df_bar"}, {}};
  for (const PathPoint& pt : r.predicted)
    paths.add({pt.mu, pt.subsample_fraction.value_or(nan()), pt.lambda, pt.dof_normalized});
  out.emplace_back("predicted_paths.csv", render_table(paths));
}

void cmd_verify_equiv(const Config& c, const Loaded& d, Outputs& out) {
  Table t{{"mu", "k_over_n", "lambda", "df_full", "df_gap", "projection_gap", "projection_gap_per_draw",
           "n_draws", "skipped_draws"},
          {}};
  const double n = static_cast<double>(d.n);
  for (Index k : c.path.k_grid) {
    if (d.features) {
      for (const EquivalenceReport& r :
           verify_equivalence(*d.features, c.path.mu_grid, k, c.path.draws, c.master_seed))
        t.add({r.point.mu, static_cast<double>(k) / n, r.point.lambda, r.point.dof_normalized, r.df_gap,
               r.projection_gap, r.projection_gap_per_draw, static_cast<double>(r.num_draws),
               static_cast<double>(r.skipped_draws)});
    } else {
      const GramSpectrum full = kernel_spectrum(*d.kernel);
      const std::vector<GramSpectrum> draws = kernel_subsample_spectra(*d.kernel, k, c.path.draws, c.master_seed);
      for (const DofEquivalencePoint& r : dof_equivalence(full, draws, c.path.mu_grid, static_cast<double>(k) / n))
        t.add({r.point.mu, static_cast<double>(k) / n, r.point.lambda, r.point.dof_normalized, r.df_gap, nan(),
               nan(), static_cast<double>(r.num_draws), static_cast<double>(r.skipped_draws)});
    }
  }
  out.emplace_back("equivalence.csv", render_table(t));
}

void cmd_ensemble_risk(const Config& c, const Loaded& d, Outputs& out) {
  if (!d.oracle || !d.features)
    throw InputError("ensemble-risk needs simulated linear or random_relu features");
  const TestOracle oracle =
      c.data.sim.feature_kind == FeatureKind::linear
          ? d.oracle->test_oracle
          : estimate_feature_oracle(*d.oracle, d.map, c.ensemble.oracle_rows,
                                    derive_seed(c.master_seed, 0, Stream::oracle));
  const RiskDecomposition rd = risk_decomposition(*d.features, c.ensemble.mu, c.ensemble.k, oracle, c.ensemble.sizes);
  const EmpiricalRiskCurve emp = empirical_risk_curve(*d.features, oracle, {WeightKind::subsample, c.ensemble.k, 0.9},
                                                      rd.lambda, c.ensemble.sizes, c.ensemble.draws, c.master_seed);
  Table t{{"M", "empirical_risk", "predicted_risk", "empirical_excess", "predicted_excess"}, {}};
  for (const auto& [m, r] : emp.risk)
    t.add({static_cast<double>(m), r, rd.predicted(m), r - rd.r_full, rd.predicted(m) - rd.r_full});
  out.emplace_back("ensemble_risk.csv", render_table(t));
  json j = {{"mu", rd.mu},
            {"lambda", rd.lambda},
            {"k_over_n", rd.k_over_n},
            {"dof_normalized", rd.dof_normalized},
            {"r_full", rd.r_full},
            {"c_constant", rd.c_constant},
            {"path_slope", rd.path_slope},
            {"s_prime", rd.s_prime},
            {"test_trace", rd.test_trace},
            {"variance_trace", rd.variance_trace},
            {"oracle_estimated", oracle.estimated},
            {"rejected_draws", emp.rejected_draws}};
  if (emp.risk.size() >= 3) {
    const RateFit rf = rate_check(emp.risk);
    j["rate_check"] = {{"slope", rf.slope}, {"intercept", rf.intercept}, {"r_squared", rf.r_squared}};
  }
  out.emplace_back("decomposition.json", j.dump(2) + "\n");
}

void cmd_tune(const Config& c, const Loaded& d, Outputs& out) {
  if (!d.features) throw InputError("tune needs a feature matrix (kernel features are not supported)");
  TuneOptions opt;
  opt.ladder.method = risk_method_from_string(c.tune.method);
  opt.ladder.holdout_fraction = c.tune.holdout_fraction;
  opt.fit_final = c.tune.fit_final;
  const TuneResult r = tune(*d.features, c.tune.lambda, c.tune.k_grid, c.tune.m0, c.tune.delta, opt, c.master_seed);
  json ladders = json::object();
  Table t{{"k", "m", "risk", "r_inf"}, {}};
  for (const auto& [k, l] : r.ladder_per_k) {
    ladders[std::to_string(k)] = {{"per_m", l.per_m}, {"r_inf", l.r_inf}, {"m0", l.m0}};
    for (std::size_t m = 0; m < l.per_m.size(); ++m)
      t.add({static_cast<double>(k), static_cast<double>(m + 1), l.per_m[m], l.r_inf});
  }
  json infeasible = json::object();
  for (const auto& [k, why] : r.infeasible) infeasible[std::to_string(k)] = why;
  json j = {{"k_hat", r.k_hat},
            {"m_hat", r.m_hat},
            {"lambda", r.lambda},
            {"r_inf_at_k_hat", r.ladder_per_k.at(r.k_hat).r_inf},
            {"gram_rank", r.gram_rank},
            {"k_within_rank", r.k_within_rank},
            {"ladders", ladders},
            {"infeasible", infeasible}};
  if (c.tune.fit_final) {
    j["final_fit"] = {{"members", r.final_fit.members.size()}, {"rejected_draws", r.final_fit.rejected_draws}};
    Table beta{{"beta"}, {}};
    for (Index i = 0; i < r.final_fit.mean_beta.size(); ++i) beta.add({r.final_fit.mean_beta[i]});
    out.emplace_back("final_beta.csv", render_table(beta));
  }
  out.emplace_back("tune_result.json", j.dump(2) + "\n");
  out.emplace_back("ladders.csv", render_table(t));
}

void cmd_stransform(const Config& c, Outputs& out) {
  const STransformConfig& s = c.stransform;
  const WeightKind kind = weight_kind_from_string(s.kind);
  const WeightSpectrum spec =
      kind == WeightKind::subsample
          ? WeightSpectrum::subsample(static_cast<std::size_t>(s.n), static_cast<std::size_t>(s.k))
          : draw_weights(s.n, {kind, s.k, s.decay}, s.seed).spectrum();
  std::vector<double> grid = s.w_grid;
  if (grid.empty()) {
    const double lo = -spec.nonzero_fraction();
    for (int j = 1; j < 50; ++j) grid.push_back(lo * (1.0 - j / 50.0));
  }
  const double q = static_cast<double>(s.k) / static_cast<double>(s.n);
  Table t{{"w", "s_empirical", "s_closed", "ds_empirical", "ds_closed"}, {}};
  for (double w : grid) {
    const bool closed = kind == WeightKind::subsample;
    t.add({w, s_transform_empirical(spec, w), closed ? s_transform_subsample(q, w) : nan(),
           s_transform_empirical_derivative(spec, w), closed ? s_transform_subsample_derivative(q, w) : nan()});
  }
  out.emplace_back("stransform.csv", render_table(t));
}

// ---------------------------------------------------------------------------

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message,
                 const json& extra = json::object()) {
  json j = {{"error", kind}, {"message", message}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  err << j.dump() << '\n';
}

int run(const std::string& sub, const std::string& config_path, std::optional<std::uint64_t> seed,
        std::optional<std::string> out_dir, unsigned threads, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  json doc;
  {
    const std::string text = read_file(config_path);
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError("config is not valid JSON: " + std::string(e.what()), e.byte, ParseError::Unit::byte_offset);
    }
  }
  // Overrides apply before defaults so derived seeds follow --seed.
  if (doc.is_object() && doc.contains("manifest_version") && doc.contains("config")) doc = doc.at("config");
  if (seed && doc.is_object()) doc["master_seed"] = *seed;
  Config c = parse_config(doc);
  if (out_dir) c.output_directory = *out_dir;
  fill_defaults(c, data_rows(c));
  set_worker_threads(threads);

  Outputs files;
  if (sub == "stransform") {
    cmd_stransform(c, files);
  } else {
    const Loaded d = load_data(c);
    fill_defaults(c, d.n);
    if (sub == "gen-data") cmd_gen_data(c, d, files);
    else if (sub == "path-heatmap") cmd_path_heatmap(c, d, files);
    else if (sub == "verify-equiv") cmd_verify_equiv(c, d, files);
    else if (sub == "ensemble-risk") cmd_ensemble_risk(c, d, files);
    else if (sub == "tune") cmd_tune(c, d, files);
  }

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(c.output_directory, ec);
  if (ec) throw IoError("cannot create output directory '" + c.output_directory + "': " + ec.message());
  std::vector<std::string> names;
  for (const auto& [name, content] : files) {
    write_file((fs::path(c.output_directory) / name).string(), content);
    names.push_back(name);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest = {{"manifest_version", 1},
                   {"subcommand", sub},
                   {"config", to_json(c)},
                   {"versions", {{"implreg", IMPLREG_VERSION}, {"eigen", eigen_version()},
                                 {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                       std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                   {"threads", threads},
                   {"wall_time_seconds", wall},
                   {"outputs", names}};
  write_file((fs::path(c.output_directory) / "manifest.json").string(), manifest.dump(2) + "\n");
  out << "wrote " << names.size() + 1 << " files to " << c.output_directory << '\n';
  return kExitOk;
}

}  // namespace

json resolve_config(const json& doc) {
  Config c = parse_config(doc);
  fill_defaults(c, data_rows(c));
  return to_json(c);
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weighted and subsampled ridge regression experiments", "implreg"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  unsigned threads = 1;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"gen-data", "generate a simulated dataset"},
      {"path-heatmap", "degrees of freedom and probe heatmaps over (k, lambda)"},
      {"verify-equiv", "Monte-Carlo check of the subsample equivalence"},
      {"ensemble-risk", "ensemble risk against the finite-M decomposition"},
      {"tune", "tune subsample size and ensemble size by risk extrapolation"},
      {"stransform", "tabulate the S-transform of a weight spectrum"}};
  for (const auto& [name, desc] : subs) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->add_option("--config", config_path, "experiment config (JSON) or run manifest")->required();
    s->add_option("--seed", seed, "override master_seed");
    s->add_option("--out", out_dir, "override output.directory");
    s->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
  }
  if (!args.empty() && !args.front().empty() && args.front().front() != '-') {
    bool known = false;
    for (const auto& entry : subs) known = known || entry.first == args.front();
    if (!known) {
      print_error(err, "usage", "unknown subcommand '" + args.front() + "'");
      err << app.help();
      return kExitInput;
    }
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    err << app.help();
    return kExitInput;
  }
  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    return run(sub, config_path, seed, out_dir, threads, out);
  } catch (const ParseError& e) {
    print_error(err, std::string(to_string(e.kind())), e.what(),
                {{e.unit() == ParseError::Unit::line ? "line" : "byte_offset", e.position()}});
    return kExitInput;
  } catch (const Error& e) {
    print_error(err, std::string(to_string(e.kind())), e.what());
    return e.is_input_error() ? kExitInput : kExitNumerical;
  } catch (const std::bad_alloc&) {
    print_error(err, "numerical", "out of memory");
    return kExitNumerical;
  }
}

}  // namespace implreg::cli

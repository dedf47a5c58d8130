#include "fmicl/cli.hpp"

#include "fmicl/diagnostics.hpp"
#include "fmicl/errors.hpp"
#include "fmicl/io.hpp"
#include "fmicl/json_fields.hpp"
#include "fmicl/nn.hpp"
#include "fmicl/trainer.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

namespace fmicl::cli {

namespace {

using nlohmann::json;
using json_fields::read_field;
using json_fields::reject_unknown_keys;

constexpr std::array kVerbs{ std::pair{ Verb::Verify, "verify" },     std::pair{ Verb::Train, "train" },
                             std::pair{ Verb::Diagnose, "diagnose" }, std::pair{ Verb::Simplex, "simplex" },
                             std::pair{ Verb::Sweep, "sweep" },       std::pair{ Verb::Report, "report" } };

std::vector<std::string>
all_tokens()
{
  std::vector<std::string> out;
  for (const auto& d : all_divergences())
    out.push_back(d.token());
  return out;
}

// Tokens must name a divergence; the error carries the config location.
void
check_divergence(const std::string& token, const std::string& where)
{
  try {
    parse_divergence(token);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

struct VerifyConfig
{
  std::vector<std::string> families = all_tokens();
  double mu{ 1.0 };
  double sigma2{ 0.5 };
  int points{ 1000 };
  double fenchel_tolerance{ 1e-9 };
  int batches{ 100 };
  int batch_size{ 8 };
  int dim{ 4 };
  std::uint64_t seed{ 0 };
};

struct SimplexConfig
{
  std::string divergence{ "kl" };
  double mu{ 1.0 };
  double sigma2{ 1.0 };
  int n{ 3 };
  int dim{ 2 };
  std::uint64_t seed{ 0 };
  SimplexOptions options;
  //! Unmet convergence exits 1 instead of 0.
  bool acceptance{ false };
};

struct DiagnoseConfig
{
  std::string checkpoint;
  int probe_pairs{ kDefaultProbePairs };
  std::uint64_t seed{ 0 };
};

struct SweepConfig
{
  std::vector<int> batch_sizes{ 4, 16, 64 };
};

struct ReportConfig
{
  std::vector<std::string> families = all_tokens();
  std::vector<std::uint64_t> seeds{ 0, 1, 2 };
};

json
to_json_value(const VerifyConfig& c)
{
  return json{ { "families", c.families },   { "mu", c.mu },
               { "sigma2", c.sigma2 },       { "points", c.points },
               { "fenchel_tolerance", c.fenchel_tolerance },
               { "batches", c.batches },     { "batch_size", c.batch_size },
               { "dim", c.dim },             { "seed", c.seed } };
}

json
to_json_value(const SimplexConfig& c)
{
  return json{ { "divergence", c.divergence },
               { "mu", c.mu },
               { "sigma2", c.sigma2 },
               { "n", c.n },
               { "dim", c.dim },
               { "seed", c.seed },
               { "max_steps", c.options.max_steps },
               { "step_size", c.options.step_size },
               { "tolerance", c.options.tolerance },
               { "acceptance", c.acceptance } };
}

json
to_json_value(const DiagnoseConfig& c)
{
  return json{ { "checkpoint", c.checkpoint }, { "probe_pairs", c.probe_pairs }, { "seed", c.seed } };
}

json
to_json_value(const SweepConfig& c)
{
  return json{ { "batch_sizes", c.batch_sizes } };
}

json
to_json_value(const ReportConfig& c)
{
  return json{ { "families", c.families }, { "seeds", c.seeds } };
}

VerifyConfig
parse_verify(const json& j)
{
  const std::string s = "verify";
  reject_unknown_keys(
    j, { "families", "mu", "sigma2", "points", "fenchel_tolerance", "batches", "batch_size", "dim", "seed" }, s);
  VerifyConfig c;
  read_field(j, "families", c.families, s);
  read_field(j, "mu", c.mu, s);
  read_field(j, "sigma2", c.sigma2, s);
  read_field(j, "points", c.points, s);
  read_field(j, "fenchel_tolerance", c.fenchel_tolerance, s);
  read_field(j, "batches", c.batches, s);
  read_field(j, "batch_size", c.batch_size, s);
  read_field(j, "dim", c.dim, s);
  read_field(j, "seed", c.seed, s);
  if (c.families.empty())
    throw ConfigError("verify.families: must not be empty");
  for (const auto& f : c.families)
    check_divergence(f, "verify.families");
  if (!(c.mu > 0.0) || !(c.sigma2 > 0.0))
    throw ConfigError("verify: mu and sigma2 must be positive");
  if (c.points < 2 || c.batches < 1 || c.batch_size < 2 || c.dim < 2)
    throw ConfigError("verify: need points >= 2, batches >= 1, batch_size >= 2, dim >= 2");
  if (!(c.fenchel_tolerance >= 0.0))
    throw ConfigError("verify.fenchel_tolerance: must be non-negative");
  return c;
}

SimplexConfig
parse_simplex(const json& j)
{
  const std::string s = "simplex";
  reject_unknown_keys(j,
                      { "divergence", "mu", "sigma2", "n", "dim", "seed", "max_steps", "step_size", "tolerance",
                        "acceptance" },
                      s);
  SimplexConfig c;
  read_field(j, "divergence", c.divergence, s);
  read_field(j, "mu", c.mu, s);
  read_field(j, "sigma2", c.sigma2, s);
  read_field(j, "n", c.n, s);
  read_field(j, "dim", c.dim, s);
  read_field(j, "seed", c.seed, s);
  read_field(j, "max_steps", c.options.max_steps, s);
  read_field(j, "step_size", c.options.step_size, s);
  read_field(j, "tolerance", c.options.tolerance, s);
  read_field(j, "acceptance", c.acceptance, s);
  check_divergence(c.divergence, "simplex.divergence");
  if (c.n < 2 || c.n > c.dim + 1)
    throw ConfigError("simplex: need 2 <= n <= dim + 1");
  if (!(c.mu > 0.0) || !(c.sigma2 > 0.0) || !(c.options.step_size > 0.0) || c.options.max_steps < 1)
    throw ConfigError("simplex: mu, sigma2, step_size and max_steps must be positive");
  return c;
}

DiagnoseConfig
parse_diagnose(const json& j)
{
  const std::string s = "diagnose";
  reject_unknown_keys(j, { "checkpoint", "probe_pairs", "seed" }, s);
  DiagnoseConfig c;
  read_field(j, "checkpoint", c.checkpoint, s);
  read_field(j, "probe_pairs", c.probe_pairs, s);
  read_field(j, "seed", c.seed, s);
  if (c.probe_pairs < 2)
    throw ConfigError("diagnose.probe_pairs: must be at least 2");
  return c;
}

SweepConfig
parse_sweep(const json& j)
{
  reject_unknown_keys(j, { "batch_sizes" }, "sweep");
  SweepConfig c;
  read_field(j, "batch_sizes", c.batch_sizes, "sweep");
  if (c.batch_sizes.empty() || std::any_of(c.batch_sizes.begin(), c.batch_sizes.end(), [](int b) { return b < 2; }))
    throw ConfigError("sweep.batch_sizes: need at least one size, each >= 2");
  return c;
}

ReportConfig
parse_report(const json& j)
{
  reject_unknown_keys(j, { "families", "seeds" }, "report");
  ReportConfig c;
  read_field(j, "families", c.families, "report");
  read_field(j, "seeds", c.seeds, "report");
  if (c.families.empty() || c.seeds.empty())
    throw ConfigError("report: families and seeds must not be empty");
  for (const auto& f : c.families)
    check_divergence(f, "report.families");
  return c;
}

TrainConfig
parse_train(const json& j)
{
  TrainConfig c;
  from_json(j, c);
  check_divergence(c.divergence, "train.divergence");
  return c;
}

SyntheticSpec
parse_data(const json& j)
{
  SyntheticSpec s;
  from_json(j, s);
  try {
    generate_synthetic(s);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  return s;
}

int
parse_threads(const json& config)
{
  int threads = 1;
  read_field(config, "threads", threads, "config");
  if (threads < 1)
    throw ConfigError("threads: must be at least 1");
  return threads;
}

void
validate_config(const json& config)
{
  parse_threads(config);
  parse_data(config.at("data"));
  const TrainConfig train = parse_train(config.at("train"));
  if (train.encoder_dims.front() != config.at("data").at("input_dim").get<int>())
    throw ConfigError("train.encoder_dims: first width must equal data.input_dim");
  parse_verify(config.at("verify"));
  parse_simplex(config.at("simplex"));
  parse_diagnose(config.at("diagnose"));
  parse_sweep(config.at("sweep"));
  parse_report(config.at("report"));
}

const char*
kind_of(const json& v)
{
  if (v.is_number())
    return "number";
  if (v.is_string())
    return "string";
  if (v.is_boolean())
    return "bool";
  if (v.is_array())
    return "array";
  if (v.is_object())
    return "object";
  return "null";
}

// Overlays `patch` on `base`; every key in `patch` must already exist in `base`
// with the same kind.
void
merge_into(json& base, const json& patch, const std::string& where)
{
  if (!patch.is_object())
    throw ConfigError((where.empty() ? std::string("config") : where) + ": expected a JSON object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key))
      throw ConfigError(path + ": unknown key");
    json& target = base[key];
    if (std::string(kind_of(target)) != kind_of(value))
      throw ConfigError(path + ": expected " + kind_of(target) + ", got " + kind_of(value));
    if (target.is_object())
      merge_into(target, value, path);
    else
      target = value;
  }
}

std::vector<std::string>
split_path(std::string_view key)
{
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    parts.emplace_back(key.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (parts.back().empty())
      throw ConfigError("override key '" + std::string(key) + "' has an empty component");
    if (dot == std::string_view::npos)
      return parts;
    start = dot + 1;
  }
}

std::string
dump(const json& j)
{
  return dump_json(j) + "\n";
}

// CSV artifacts carry the resolved config on a leading comment line.
std::string
with_config_header(const json& config, const std::string& csv)
{
  return "# config: " + dump_json(config, -1) + "\n" + csv;
}

Matrix
random_unit_rows(std::mt19937_64& rng, int n, int d)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k)
      m(i, k) = normal(rng);
    m.row(i).normalize();
  }
  return m;
}

HConvexity
expected_h_convexity(Family family)
{
  switch (family) {
    case Family::ReverseKL:
      return HConvexity::AffineOrLinear;
    case Family::NeymanChi2:
      return HConvexity::Concave;
    default:
      return HConvexity::StrictlyConvex;
  }
}

std::vector<double>
log_grid(double lo, double hi, int n)
{
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  return out;
}

int
run_verify(const json& config, const std::filesystem::path& out_dir, std::ostream& out)
{
  const VerifyConfig c = parse_verify(config.at("verify"));
  bool all_pass = true;

  json families = json::array();
  const auto grid = log_grid(1e-3, 1e3, c.points);
  for (const auto& token : c.families) {
    const Divergence d = parse_divergence(token);
    double fenchel = 0.0;
    double table = std::abs(d.f(1.0));
    for (double u : grid) {
      fenchel = std::max(fenchel, fenchel_residual(d, u));
      const double closed = d.fstar_of_fprime(u);
      const double composed = d.fstar(d.fprime(u));
      table = std::max(table, std::abs(closed - composed) / std::max(1.0, std::abs(closed)));
    }
    const HConvexity cls = classify_h_convexity(d, c.mu, c.sigma2);
    const HConvexity expected = expected_h_convexity(d.family());
    const bool fenchel_pass = fenchel <= c.fenchel_tolerance;
    const bool table_pass = table <= 1e-9;
    const bool convexity_pass = cls == expected;
    all_pass = all_pass && fenchel_pass && table_pass && convexity_pass;
    families.push_back(json{ { "divergence", token },
                             { "fenchel_max_residual", fenchel },
                             { "fenchel_pass", fenchel_pass },
                             { "table_max_deviation", table },
                             { "table_pass", table_pass },
                             { "h_convexity", to_string(cls) },
                             { "expected_h_convexity", to_string(expected) },
                             { "convexity_pass", convexity_pass } });
  }

  // Equivalences on random batches.
  std::mt19937_64 rng(c.seed);
  const GaussianSimilarity pearson{ c.mu, c.sigma2, Divergence(Family::PearsonChi2) };
  const GaussianSimilarity kl{ c.mu, c.sigma2, Divergence(Family::KL) };
  const AnySimilarity au_kl{ GaussianSimilarity{ 1.0, 0.5, Divergence(Family::KL) } };
  std::optional<double> spectral_offset;
  double spectral_dev = 0.0, affine_dev = 0.0, au_dev = 0.0;
  int jensen_violations = 0;
  for (int b = 0; b < c.batches; ++b) {
    Matrix x = random_unit_rows(rng, c.batch_size, c.dim);
    Matrix y = random_unit_rows(rng, c.batch_size, c.dim);
    const EmbeddingBatch batch(x, y);
    const double diff = fmicl_loss(batch, pearson, 1.0).loss - spectral_loss(batch, c.mu, c.sigma2);
    if (!spectral_offset)
      spectral_offset = diff;
    spectral_dev = std::max(spectral_dev, std::abs(diff - *spectral_offset));
    for (int i = 0; i < c.batch_size; ++i)
      for (int j = 0; j < c.batch_size; ++j) {
        const double cosv = x.row(i).dot(y.row(j));
        const double affine = (2.0 * cosv - 2.0) / (2.0 * c.sigma2) + std::log(c.mu) + 1.0;
        affine_dev = std::max(affine_dev, std::abs(f_gaussian(kl, x.row(i), y.row(j)) - affine));
      }
    au_dev = std::max(au_dev, std::abs(au_loss(batch) - dv_shifted_kl_loss(batch, au_kl)));
    if (infonce_loss(batch, AnySimilarity{ kl }) > dv_shifted_kl_loss(batch, AnySimilarity{ kl }) + 1e-12)
      ++jensen_violations;
  }
  const bool spectral_pass = spectral_dev <= 1e-9;
  const bool affine_pass = affine_dev <= 1e-12;
  const bool au_pass = au_dev <= 1e-9;
  const bool jensen_pass = jensen_violations == 0;
  all_pass = all_pass && spectral_pass && affine_pass && au_pass && jensen_pass;

  const json summary{
    { "config", config },
    { "families", families },
    { "equivalence",
      json{ { "batches", c.batches },
            { "spectral_pearson_offset", *spectral_offset },
            { "spectral_pearson_max_deviation", spectral_dev },
            { "spectral_pearson_pass", spectral_pass },
            { "kl_cosine_affine_max_deviation", affine_dev },
            { "kl_cosine_affine_pass", affine_pass },
            { "au_dv_kl_max_deviation", au_dev },
            { "au_dv_kl_pass", au_pass },
            { "jensen_violations", jensen_violations },
            { "jensen_pass", jensen_pass } } },
    { "passed", all_pass },
  };
  write_text_file(out_dir / "verify.json", dump(summary));
  out << "verify: " << c.families.size() << " families, " << (all_pass ? "all checks passed" : "FAILED") << "\n";
  return all_pass ? kExitSuccess : kExitCheckFailure;
}

int
run_train(const json& config, const std::filesystem::path& out_dir, std::ostream& out)
{
  const TrainConfig c = parse_train(config.at("train"));
  const Dataset data = generate_synthetic(parse_data(config.at("data")));
  const TrainHistory h = train(c, data);
  const double accuracy = trained_knn_accuracy(h.final_params, data, kDefaultKnnK, c.seed);
  const double initial_accuracy = trained_knn_accuracy(h.initial_params, data, kDefaultKnnK, c.seed);

  write_text_file(out_dir / "history.csv", with_config_header(config, history_csv(h)));
  save_params(h.final_params, out_dir / "params.bin");
  const json loss{ { "config", config },
                   { "epochs", h.epochs.size() },
                   { "initial", h.epochs.empty() ? json() : json(h.epochs.front()) },
                   { "final", h.epochs.empty() ? json() : json(h.epochs.back()) } };
  write_text_file(out_dir / "loss.json", dump(loss));
  const json acc{ { "config", config },
                  { "k", kDefaultKnnK },
                  { "accuracy", accuracy },
                  { "initial_accuracy", initial_accuracy } };
  write_text_file(out_dir / "accuracy.json", dump(acc));
  out << "train: " << c.divergence << " k-NN accuracy " << format_double(accuracy) << "\n";
  return kExitSuccess;
}

int
run_diagnose(const json& config, const std::filesystem::path& out_dir, std::ostream& out)
{
  const DiagnoseConfig c = parse_diagnose(config.at("diagnose"));
  const TrainConfig train_config = parse_train(config.at("train"));
  if (c.checkpoint.empty())
    throw ConfigError("diagnose.checkpoint: a parameter file is required");
  EncoderParams params;
  try {
    params = load_params(c.checkpoint);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("diagnose.checkpoint: " + std::string(e.what()));
  }
  const Dataset data = generate_synthetic(parse_data(config.at("data")));
  if (params.input_dim() != data.inputs.cols())
    throw ConfigError("diagnose.checkpoint: input width does not match data.input_dim");
  if (c.probe_pairs > data.inputs.rows())
    throw ConfigError("diagnose.probe_pairs: exceeds the number of samples");

  const Matrix embedded = forward(params, data.inputs);
  const auto [px, py] = probe_pairs(data, c.probe_pairs, train_config.noise_scale, c.seed);
  const UniformityProfile profile = uniformity_profile(EmbeddingBatch(forward(params, px), forward(params, py)));
  const double mpd = mean_pairwise_distance(embedded);
  const bool collapsed = collapse_detector(embedded);
  const double accuracy = knn_evaluate(embedded, data.labels, kDefaultKnnK, c.seed);

  write_text_file(out_dir / "profile.csv", with_config_header(config, profile_csv(profile)));
  const json report{ { "config", config },
                     { "collapsed", collapsed },
                     { "collapse_threshold", kDefaultCollapseThreshold },
                     { "mean_pairwise_distance", mpd },
                     { "knn_accuracy", accuracy },
                     { "alignment", profile.alignment },
                     { "spread", profile.spread } };
  write_text_file(out_dir / "diagnose.json", dump(report));
  out << "diagnose: collapsed " << (collapsed ? "true" : "false") << ", mean pairwise distance "
      << format_double(mpd) << "\n";
  return kExitSuccess;
}

int
run_simplex(const json& config, const std::filesystem::path& out_dir, std::ostream& out)
{
  const SimplexConfig c = parse_simplex(config.at("simplex"));
  const SimplexReport r =
    minimize_negative_term(parse_divergence(c.divergence), c.mu, c.sigma2, c.n, c.dim, c.seed, c.options);
  write_text_file(out_dir / "simplex.json", dump(json{ { "config", config }, { "report", r } }));
  out << "simplex: " << c.divergence << " N=" << c.n << " dim=" << c.dim << " converged "
      << (r.converged ? "true" : "false") << " after " << r.steps << " steps\n";
  return (c.acceptance && !r.converged) ? kExitCheckFailure : kExitSuccess;
}

int
run_sweep(const json& config, const std::filesystem::path& out_dir, std::ostream& out)
{
  const SweepConfig c = parse_sweep(config.at("sweep"));
  const TrainConfig base = parse_train(config.at("train"));
  const Dataset data = generate_synthetic(parse_data(config.at("data")));
  const auto rows = batch_size_sweep(base, data, c.batch_sizes, parse_threads(config));
  write_text_file(out_dir / "sweep.csv", with_config_header(config, sweep_csv(rows)));
  out << "sweep: " << rows.size() << " runs\n";
  return kExitSuccess;
}

int
run_report(const json& config, const std::filesystem::path& out_dir, std::ostream& out)
{
  const ReportConfig c = parse_report(config.at("report"));
  const TrainConfig base = parse_train(config.at("train"));
  const SyntheticSpec spec = parse_data(config.at("data"));
  const auto runs = family_comparison(base, spec, c.families, c.seeds, parse_threads(config));

  json families = json::array();
  for (std::size_t f = 0; f < c.families.size(); ++f) {
    double knn = 0.0, mpd = 0.0;
    bool spread_down = true, alignment_down = true;
    for (std::size_t s = 0; s < c.seeds.size(); ++s) {
      const FamilyRun& r = runs[f * c.seeds.size() + s];
      knn += r.knn_accuracy;
      mpd += r.mean_pairwise_distance;
      spread_down = spread_down && r.trained.spread < r.initial.spread;
      alignment_down = alignment_down && r.trained.alignment < r.initial.alignment;
    }
    const double n = static_cast<double>(c.seeds.size());
    families.push_back(json{ { "divergence", c.families[f] },
                             { "h_convexity",
                               to_string(classify_h_convexity(parse_divergence(c.families[f]), base.mu, base.sigma2)) },
                             { "mean_knn_accuracy", knn / n },
                             { "mean_pairwise_distance", mpd / n },
                             { "collapsed", mpd / n < kDefaultCollapseThreshold },
                             { "spread_decreased_every_seed", spread_down },
                             { "alignment_decreased_every_seed", alignment_down } });
  }
  write_text_file(out_dir / "report.csv", with_config_header(config, family_csv(runs)));
  write_text_file(out_dir / "report.json", dump(json{ { "config", config }, { "families", families } }));
  out << "report: " << runs.size() << " runs over " << c.families.size() << " families\n";
  return kExitSuccess;
}

} // namespace

std::string
to_string(Verb verb)
{
  for (const auto& [v, name] : kVerbs)
    if (v == verb)
      return name;
  return "unknown";
}

Verb
parse_verb(std::string_view token)
{
  for (const auto& [v, name] : kVerbs)
    if (token == name)
      return v;
  throw ConfigError("unknown verb '" + std::string(token) + "'");
}

json
default_config()
{
  return json{ { "threads", 1 },
               { "data", SyntheticSpec{} },
               { "train", TrainConfig{} },
               { "verify", to_json_value(VerifyConfig{}) },
               { "simplex", to_json_value(SimplexConfig{}) },
               { "diagnose", to_json_value(DiagnoseConfig{}) },
               { "sweep", to_json_value(SweepConfig{}) },
               { "report", to_json_value(ReportConfig{}) } };
}

void
apply_override(json& config, Verb verb, std::string_view assignment)
{
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  const std::string_view key = assignment.substr(0, eq);
  const std::string raw(assignment.substr(eq + 1));

  std::vector<std::string> path = split_path(key);
  if (path.size() == 1) {
    bool found = false;
    for (const std::string& section : { to_string(verb), std::string("train"), std::string("data") })
      if (config.at(section).contains(path[0])) {
        path.insert(path.begin(), section);
        found = true;
        break;
      }
    if (!found && !config.contains(path[0]))
      throw ConfigError("override key '" + std::string(key) + "' matches no config entry");
  }

  json* target = &config;
  for (const auto& part : path) {
    if (!target->is_object() || !target->contains(part))
      throw ConfigError("override key '" + std::string(key) + "' matches no config entry");
    target = &(*target)[part];
  }
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  if (target->is_object())
    throw ConfigError("override key '" + std::string(key) + "' names a section, not a value");
  if (std::string(kind_of(*target)) != kind_of(value))
    throw ConfigError("override '" + std::string(key) + "': expected " + kind_of(*target) + ", got " +
                      kind_of(value));
  *target = std::move(value);
}

json
resolve_config(const Command& command)
{
  json config = default_config();
  if (!command.config_path.empty()) {
    const std::string text = read_text_file(command.config_path);
    json file;
    try {
      file = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(command.config_path.string() + ": " + e.what());
    }
    merge_into(config, file, "");
  }
  if (command.seed) {
    for (const char* section : { "data", "train", "verify", "simplex", "diagnose" })
      config[section]["seed"] = *command.seed;
    config["report"]["seeds"] = json::array({ *command.seed });
  }
  if (command.threads)
    config["threads"] = *command.threads;
  for (const auto& o : command.overrides)
    apply_override(config, command.verb, o);
  validate_config(config);
  return config;
}

int
run(const Command& command, std::ostream& out, std::ostream& err)
{
  try {
    const json config = resolve_config(command);
    std::error_code ec;
    std::filesystem::create_directories(command.output_dir, ec);
    if (ec)
      throw ConfigError("cannot create output directory '" + command.output_dir.string() + "': " + ec.message());
    switch (command.verb) {
      case Verb::Verify:
        return run_verify(config, command.output_dir, out);
      case Verb::Train:
        return run_train(config, command.output_dir, out);
      case Verb::Diagnose:
        return run_diagnose(config, command.output_dir, out);
      case Verb::Simplex:
        return run_simplex(config, command.output_dir, out);
      case Verb::Sweep:
        return run_sweep(config, command.output_dir, out);
      case Verb::Report:
        return run_report(config, command.output_dir, out);
    }
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "fmicl: config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "fmicl: invalid parameter: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalDivergence& e) {
    err << "fmicl: training diverged: " << e.what() << "\n";
    return kExitCheckFailure;
  } catch (const std::exception& e) {
    err << "fmicl: " << e.what() << "\n";
    return kExitCheckFailure;
  }
}

int
main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "f-MICL contrastive learning toolkit", "fmicl" };
  std::string verb;
  std::string config_path;
  std::string output_dir = "fmicl-out";
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int threads = 1;

  std::vector<std::string> names;
  for (const auto& [v, name] : kVerbs)
    names.emplace_back(name);
  app.add_option("verb", verb, "verify | train | diagnose | simplex | sweep | report")
    ->required()
    ->check(CLI::IsMember(names));
  app.add_option("--config", config_path, "JSON config file with per-verb sections");
  app.add_option("--out", output_dir, "output directory for artifacts")->capture_default_str();
  app.add_option("--override", overrides, "key=value override (dot path; repeatable)")
    ->expected(1)
    ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  auto* seed_opt = app.add_option("--seed", seed, "seed applied to every section");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads for sweep and report")
                        ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitSuccess : kExitUsage;
  }

  Command command;
  command.verb = parse_verb(verb);
  command.config_path = config_path;
  command.output_dir = output_dir;
  command.overrides = overrides;
  if (seed_opt->count() > 0)
    command.seed = seed;
  if (threads_opt->count() > 0)
    command.threads = threads;
  return run(command, out, err);
}

} // namespace fmicl::cli

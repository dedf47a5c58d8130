#include "fmicl/diagnostics.hpp"

#include "fmicl/errors.hpp"
#include "fmicl/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace fmicl {

namespace {

// Stop once no coordinate moves by more than this in a step.
constexpr double kStationaryStep = 1e-13;

// Separates the probe-batch stream from the init and data streams.
constexpr std::uint64_t kProbeStream = 0x5851f42d4c957f2dULL;

// Runs body(0..count-1) on up to `threads` workers and rethrows the first
// failure by index. Each index writes only its own output slot.
template<class Body>
void
parallel_for(std::size_t count, int threads, Body body)
{
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{ 0 };
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp<int>(threads, 1, static_cast<int>(std::max<std::size_t>(1, count)));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < workers; ++t)
      pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

Matrix
uniform_sphere(int count, int dim, std::mt19937_64& rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(count, dim);
  for (int i = 0; i < count; ++i) {
    double n = 0.0;
    do {
      for (int k = 0; k < dim; ++k)
        out(i, k) = normal(rng);
      n = out.row(i).norm();
    } while (n < 1e-8);
    out.row(i) /= n;
  }
  return out;
}

struct Fit
{
  double slope, intercept, r2;
};

Fit
least_squares(const std::vector<double>& x, const std::vector<double>& y)
{
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  const double r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return { slope, my - slope * mx, r2 };
}

} // namespace

SimplexReport
minimize_negative_term(const Divergence& d,
                       double mu,
                       double sigma2,
                       int n,
                       int dim,
                       std::uint64_t seed,
                       const SimplexOptions& options)
{
  if (n < 2 || dim < 2)
    throw ParameterError("simplex minimization needs N >= 2 and dim >= 2");
  if (n > dim + 1)
    throw ParameterError("N = " + std::to_string(n) + " exceeds dim + 1 = " + std::to_string(dim + 1));
  if (!(mu > 0.0) || !(sigma2 > 0.0))
    throw ParameterError("mu and sigma2 must be positive");

  std::mt19937_64 rng(seed);
  Matrix x = uniform_sphere(n, dim, rng);
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma2);

  SimplexReport r;
  r.n = n;
  r.dim = dim;
  r.target = 2.0 * n / (n - 1.0);

  Matrix grad(n, dim);
  int step = 0;
  for (; step < options.max_steps; ++step) {
    grad.setZero();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j)
          continue;
        const Eigen::RowVectorXd diff = x.row(i) - x.row(j);
        const double g = gaussian_kernel(mu, sigma2, diff.squaredNorm());
        const double dh = -g * g * d.curvature(g) * inv_two_sigma2;
        grad.row(i) += (2.0 * dh) * diff;
        grad.row(j) -= (2.0 * dh) * diff;
      }
    Matrix next = x - options.step_size * grad;
    for (int i = 0; i < n; ++i) {
      const double norm = next.row(i).norm();
      if (!(norm > 0.0) || !std::isfinite(norm))
        break;
      next.row(i) /= norm;
    }
    const double moved = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    if (!(moved > kStationaryStep)) {
      ++step;
      break;
    }
  }
  r.steps = step;

  r.objective = 0.0;
  r.max_deviation = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j)
        continue;
      const double t = (x.row(i) - x.row(j)).squaredNorm();
      r.objective += d.fstar_of_fprime(gaussian_kernel(mu, sigma2, t));
      if (i < j) {
        r.sqdists.push_back(t);
        r.max_deviation = std::max(r.max_deviation, std::abs(t - r.target));
      }
    }
  r.simplex_objective = n * (n - 1.0) * d.fstar_of_fprime(gaussian_kernel(mu, sigma2, r.target));
  r.centroid_norm = x.colwise().mean().norm();
  r.converged = std::isfinite(r.objective) && r.max_deviation <= options.tolerance &&
                r.centroid_norm <= options.tolerance;
  return r;
}

UniformityProfile
uniformity_profile(const EmbeddingBatch& batch)
{
  const Matrix& x = batch.view_x();
  const Matrix& y = batch.view_y();
  const Eigen::Index n = batch.size();
  UniformityProfile p;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      p.distances.push_back((x.row(i) - x.row(j)).norm());
  std::sort(p.distances.begin(), p.distances.end());

  double mean = 0.0;
  for (double v : p.distances)
    mean += v;
  mean /= static_cast<double>(p.distances.size());
  double var = 0.0;
  for (double v : p.distances)
    var += (v - mean) * (v - mean);
  p.spread = std::sqrt(var / static_cast<double>(p.distances.size()));

  for (Eigen::Index i = 0; i < n; ++i)
    p.alignment += (x.row(i) - y.row(i)).norm();
  p.alignment /= static_cast<double>(n);
  return p;
}

double
mean_pairwise_distance(const Matrix& e)
{
  const Eigen::Index m = e.rows();
  if (m < 2)
    throw ParameterError("need at least two embeddings");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      sum += (e.row(i) - e.row(j)).norm();
  return sum / (0.5 * static_cast<double>(m) * static_cast<double>(m - 1));
}

bool
collapse_detector(const Matrix& embeddings, double threshold)
{
  return mean_pairwise_distance(embeddings) < threshold;
}

LinearityFit
assumption_linearity_check(const Matrix& x, const Matrix& y, int bins)
{
  if (bins < 2)
    throw ParameterError("need at least two bins");
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw ParameterError("pair matrices differ in shape");
  const Eigen::Index n = x.rows();
  if (n < 10 * static_cast<Eigen::Index>(bins))
    throw ParameterError("need at least 10 pairs per bin");

  Matrix z(n, 2 * x.cols());
  z << x, y;
  const Eigen::Index dims = z.cols();

  std::vector<double> sq(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    sq[static_cast<std::size_t>(i)] = (x.row(i) - y.row(i)).squaredNorm();
  const auto [lo_it, hi_it] = std::minmax_element(sq.begin(), sq.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi - lo > 1e-12))
    throw ParameterError("pair distances have no spread; cannot bin");

  // Scott's rule with the per-coordinate standard deviations averaged into
  // one isotropic bandwidth.
  const Eigen::RowVectorXd mean = z.colwise().mean();
  double std_sum = 0.0;
  for (Eigen::Index k = 0; k < dims; ++k)
    std_sum += std::sqrt((z.col(k).array() - mean(k)).square().sum() / static_cast<double>(n - 1));
  LinearityFit fit;
  fit.bandwidth = std_sum / static_cast<double>(dims) * std::pow(static_cast<double>(n), -1.0 / (dims + 4.0));
  if (!(fit.bandwidth > 0.0))
    throw ParameterError("degenerate sample: zero bandwidth");
  const double inv_two_h2 = 1.0 / (2.0 * fit.bandwidth * fit.bandwidth);
  const double log_norm = static_cast<double>(dims) * std::log(std::sqrt(2.0 * std::numbers::pi) * fit.bandwidth);

  std::vector<double> bin_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<int> bin_count(static_cast<std::size_t>(bins), 0);
  std::vector<double> expo(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double e = i == j ? -std::numeric_limits<double>::infinity()
                              : -(z.row(i) - z.row(j)).squaredNorm() * inv_two_h2;
      expo[static_cast<std::size_t>(j)] = e;
      m = std::max(m, e);
    }
    double s = 0.0;
    for (double e : expo)
      s += std::exp(e - m);
    const double log_density = m + std::log(s / static_cast<double>(n - 1)) - log_norm;
    int b = static_cast<int>((sq[static_cast<std::size_t>(i)] - lo) / (hi - lo) * bins);
    b = std::clamp(b, 0, bins - 1);
    bin_sum[static_cast<std::size_t>(b)] += log_density;
    ++bin_count[static_cast<std::size_t>(b)];
  }

  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    if (bin_count[static_cast<std::size_t>(b)] == 0)
      continue;
    fit.bin_centers.push_back(lo + (b + 0.5) * width);
    fit.bin_log_density.push_back(bin_sum[static_cast<std::size_t>(b)] / bin_count[static_cast<std::size_t>(b)]);
  }
  if (fit.bin_centers.size() < 2)
    throw ParameterError("fewer than two occupied bins");
  const Fit f = least_squares(fit.bin_centers, fit.bin_log_density);
  fit.slope = f.slope;
  fit.intercept = f.intercept;
  fit.r2 = f.r2;
  return fit;
}

std::pair<Matrix, Matrix>
sample_vmf_pairs(int count, int dim, double sigma2, std::uint64_t seed)
{
  if (count < 1 || dim < 2 || !(sigma2 > 0.0))
    throw ParameterError("sample_vmf_pairs: bad arguments");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix x(count, dim), y(count, dim);
  for (int i = 0; i < count;) {
    const Matrix a = uniform_sphere(1, dim, rng);
    const Matrix b = uniform_sphere(1, dim, rng);
    // acceptance exp((x.y - 1) / sigma2) <= 1
    if (unit(rng) < std::exp((a.row(0).dot(b.row(0)) - 1.0) / sigma2)) {
      x.row(i) = a.row(0);
      y.row(i) = b.row(0);
      ++i;
    }
  }
  return { std::move(x), std::move(y) };
}

std::pair<Matrix, Matrix>
sample_uniform_pairs(int count, int dim, std::uint64_t seed)
{
  if (count < 1 || dim < 2)
    throw ParameterError("sample_uniform_pairs: bad arguments");
  std::mt19937_64 rng(seed);
  Matrix x = uniform_sphere(count, dim, rng);
  Matrix y = uniform_sphere(count, dim, rng);
  return { std::move(x), std::move(y) };
}

double
trained_knn_accuracy(const EncoderParams& params, const Dataset& data, int k, std::uint64_t split_seed)
{
  return knn_evaluate(forward(params, data.inputs), data.labels, k, split_seed);
}

std::vector<SweepRow>
batch_size_sweep(const TrainConfig& base, const Dataset& data, const std::vector<int>& sizes, int threads)
{
  for (int s : sizes)
    if (s < 2)
      throw ParameterError("every sweep batch size must be at least 2");
  std::vector<SweepRow> rows(sizes.size());
  parallel_for(sizes.size(), threads, [&](std::size_t i) {
    TrainConfig c = base;
    c.batch_size = sizes[i];
    const TrainHistory h = train(c, data);
    rows[i].batch_size = sizes[i];
    rows[i].knn_accuracy = trained_knn_accuracy(h.final_params, data, kDefaultKnnK, c.seed);
    rows[i].final_loss = h.epochs.empty() ? std::nan("") : h.epochs.back().loss;
  });
  return rows;
}

std::pair<Matrix, Matrix>
probe_pairs(const Dataset& data, int count, double noise_scale, std::uint64_t seed)
{
  const auto rows = data.inputs.rows();
  if (count < 2 || count > rows)
    throw ParameterError("probe size must be in [2, number of samples]");
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), Eigen::Index{ 0 });
  std::shuffle(order.begin(), order.end(), rng);
  Matrix x(count, data.inputs.cols()), y(count, data.inputs.cols());
  for (int i = 0; i < count; ++i) {
    const auto r = data.inputs.row(order[static_cast<std::size_t>(i)]);
    x.row(i) = augment(r, rng, noise_scale);
    y.row(i) = augment(r, rng, noise_scale);
  }
  return { std::move(x), std::move(y) };
}

FamilyRun
run_family(const TrainConfig& config, const Dataset& data, int probe_count)
{
  const TrainHistory h = train(config, data);
  const Matrix embedded = forward(h.final_params, data.inputs);
  const auto [px, py] = probe_pairs(data, probe_count, config.noise_scale, config.seed ^ kProbeStream);

  FamilyRun run;
  run.divergence = config.divergence;
  run.seed = config.seed;
  run.knn_accuracy = knn_evaluate(embedded, data.labels, kDefaultKnnK, config.seed);
  run.mean_pairwise_distance = mean_pairwise_distance(embedded);
  run.collapsed = collapse_detector(embedded);
  run.initial = uniformity_profile(EmbeddingBatch(forward(h.initial_params, px), forward(h.initial_params, py)));
  run.trained = uniformity_profile(EmbeddingBatch(forward(h.final_params, px), forward(h.final_params, py)));
  run.final_loss = h.epochs.empty() ? std::nan("") : h.epochs.back().loss;
  return run;
}

std::vector<FamilyRun>
family_comparison(const TrainConfig& base,
                  const SyntheticSpec& data,
                  const std::vector<std::string>& divergences,
                  const std::vector<std::uint64_t>& seeds,
                  int threads)
{
  for (const auto& d : divergences)
    parse_divergence(d);
  std::vector<FamilyRun> runs(divergences.size() * seeds.size());
  parallel_for(runs.size(), threads, [&](std::size_t i) {
    const std::uint64_t seed = seeds[i % seeds.size()];
    SyntheticSpec spec = data;
    spec.seed = seed;
    TrainConfig c = base;
    c.divergence = divergences[i / seeds.size()];
    c.seed = seed;
    runs[i] = run_family(c, generate_synthetic(spec));
  });
  return runs;
}

std::string
family_csv(const std::vector<FamilyRun>& runs)
{
  std::ostringstream out;
  out << "divergence,seed,knn_accuracy,mean_pairwise_distance,collapsed,"
         "initial_alignment,trained_alignment,initial_spread,trained_spread,final_loss\n";
  for (const auto& r : runs)
    out << r.divergence << ',' << r.seed << ',' << format_double(r.knn_accuracy) << ','
        << format_double(r.mean_pairwise_distance) << ',' << (r.collapsed ? "true" : "false") << ','
        << format_double(r.initial.alignment) << ',' << format_double(r.trained.alignment) << ','
        << format_double(r.initial.spread) << ',' << format_double(r.trained.spread) << ','
        << format_double(r.final_loss) << '\n';
  return out.str();
}

std::string
sweep_csv(const std::vector<SweepRow>& rows)
{
  std::ostringstream out;
  out << "batch_size,knn_accuracy,final_loss\n";
  for (const auto& r : rows)
    out << r.batch_size << ',' << format_double(r.knn_accuracy) << ',' << format_double(r.final_loss) << '\n';
  return out.str();
}

void
to_json(nlohmann::json& j, const SimplexReport& r)
{
  j = nlohmann::json{ { "n", r.n },
                      { "dim", r.dim },
                      { "target", r.target },
                      { "sqdists", r.sqdists },
                      { "max_deviation", r.max_deviation },
                      { "centroid_norm", r.centroid_norm },
                      { "objective", r.objective },
                      { "simplex_objective", r.simplex_objective },
                      { "steps", r.steps },
                      { "converged", r.converged } };
}

void
to_json(nlohmann::json& j, const UniformityProfile& p)
{
  j = nlohmann::json{ { "distances", p.distances }, { "alignment", p.alignment }, { "spread", p.spread } };
}

void
to_json(nlohmann::json& j, const LinearityFit& f)
{
  j = nlohmann::json{ { "slope", f.slope },
                      { "intercept", f.intercept },
                      { "r2", f.r2 },
                      { "bandwidth", f.bandwidth },
                      { "bin_centers", f.bin_centers },
                      { "bin_log_density", f.bin_log_density } };
}

std::string
profile_csv(const UniformityProfile& p)
{
  std::ostringstream os;
  os << "rank,distance\n";
  for (std::size_t i = 0; i < p.distances.size(); ++i)
    os << i << ',' << format_double(p.distances[i]) << '\n';
  return os.str();
}

} // namespace fmicl

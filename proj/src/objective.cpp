#include "fmicl/objective.hpp"

#include "fmicl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fmicl {

namespace {

void
require_alpha(double alpha)
{
  if (!(alpha >= 0.0) || std::isinf(alpha))
    throw ParameterError("alpha must be a finite nonnegative real");
}

// Mean of f* o f'(G(|v_i - v_j|^2)) over ordered pairs i != j of one view.
double
negative_mean(const Matrix& v, const GaussianSimilarity& sim)
{
  const Eigen::Index n = v.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j)
        continue;
      const double g = gaussian_kernel(sim.mu, sim.sigma2, (v.row(i) - v.row(j)).squaredNorm());
      sum += sim.divergence.fstar_of_fprime(g);
    }
  return sum / static_cast<double>(n * (n - 1));
}

// Adds scale * d/dv of the summed negative term of one view into grad.
void
accumulate_negative_grad(const Matrix& v, const GaussianSimilarity& sim, double scale, Matrix& grad)
{
  const Eigen::Index n = v.rows();
  const double inv_two_sigma2 = 1.0 / (2.0 * sim.sigma2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j)
        continue;
      const Eigen::RowVectorXd diff = v.row(i) - v.row(j);
      const double g = gaussian_kernel(sim.mu, sim.sigma2, diff.squaredNorm());
      // d/dt f*(f'(G(t))) = G f''(G) G'(t), with G'(t) = -G / (2 sigma2)
      const double dh = -g * g * sim.divergence.curvature(g) * inv_two_sigma2;
      const Eigen::RowVectorXd contrib = (scale * dh * 2.0) * diff;
      grad.row(i) += contrib;
      grad.row(j) -= contrib;
    }
}

double
log_mean_exp(const std::vector<double>& values)
{
  if (values.empty())
    throw ParameterError("log-mean-exp of an empty vector");
  const double m = *std::max_element(values.begin(), values.end());
  if (std::isinf(m))
    return m;
  double sum = 0.0;
  for (double s : values)
    sum += std::exp(s - m);
  return m + std::log(sum / static_cast<double>(values.size()));
}

} // namespace

EmbeddingBatch::EmbeddingBatch(Matrix view_x, Matrix view_y, double tolerance)
  : x_(std::move(view_x))
  , y_(std::move(view_y))
{
  if (x_.rows() != y_.rows() || x_.cols() != y_.cols())
    throw ParameterError("view_x and view_y must have the same shape");
  if (x_.rows() < 2)
    throw BatchTooSmall("an embedding batch needs at least two samples, got " +
                        std::to_string(x_.rows()));
  if (x_.cols() < 1)
    throw ParameterError("embedding dimension must be positive");
  if (!std::isinf(tolerance))
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      require_unit_norm(x_.row(i), tolerance);
      require_unit_norm(y_.row(i), tolerance);
    }
}

LossReport
fmicl_loss(const EmbeddingBatch& batch, const GaussianSimilarity& sim, double alpha, NegativesMode negatives)
{
  require_alpha(alpha);
  validate(sim);
  const Matrix& x = batch.view_x();
  const Matrix& y = batch.view_y();
  const Eigen::Index n = batch.size();

  LossReport r;
  r.alpha = alpha;
  double pos = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    pos += sim.from_sqdist((x.row(i) - y.row(i)).squaredNorm());
  r.positive_term = pos / static_cast<double>(n);

  r.negative_term = negative_mean(x, sim);
  if (negatives == NegativesMode::BothViews)
    r.negative_term = 0.5 * (r.negative_term + negative_mean(y, sim));

  r.loss = -r.positive_term + alpha * r.negative_term;
  return r;
}

std::pair<Matrix, Matrix>
fmicl_embedding_grad(const EmbeddingBatch& batch,
                     const GaussianSimilarity& sim,
                     double alpha,
                     NegativesMode negatives)
{
  require_alpha(alpha);
  validate(sim);
  const Matrix& x = batch.view_x();
  const Matrix& y = batch.view_y();
  const Eigen::Index n = batch.size();
  const double nn = static_cast<double>(n);
  Matrix gx = Matrix::Zero(n, batch.dim());
  Matrix gy = Matrix::Zero(n, batch.dim());
  const double inv_two_sigma2 = 1.0 / (2.0 * sim.sigma2);

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd diff = x.row(i) - y.row(i);
    const double g = gaussian_kernel(sim.mu, sim.sigma2, diff.squaredNorm());
    // d/dt f'(G(t)) = f''(G) G'(t)
    const double ds = -g * sim.divergence.curvature(g) * inv_two_sigma2;
    const Eigen::RowVectorXd contrib = (-ds * 2.0 / nn) * diff;
    gx.row(i) += contrib;
    gy.row(i) -= contrib;
  }

  const double pairs = nn * (nn - 1.0);
  if (alpha != 0.0) {
    if (negatives == NegativesMode::BothViews) {
      accumulate_negative_grad(x, sim, 0.5 * alpha / pairs, gx);
      accumulate_negative_grad(y, sim, 0.5 * alpha / pairs, gy);
    } else {
      accumulate_negative_grad(x, sim, alpha / pairs, gx);
    }
  }
  return { std::move(gx), std::move(gy) };
}

std::vector<double>
positive_similarities(const EmbeddingBatch& batch, const AnySimilarity& sim)
{
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(batch.size()));
  for (Eigen::Index i = 0; i < batch.size(); ++i)
    out.push_back(score_unchecked(sim, batch.view_x().row(i), batch.view_y().row(i)));
  return out;
}

std::vector<double>
cross_similarities(const EmbeddingBatch& batch, const AnySimilarity& sim)
{
  const Eigen::Index n = batch.size();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n * (n - 1)));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j)
        out.push_back(score_unchecked(sim, batch.view_x().row(i), batch.view_x().row(j)));
  return out;
}

double
infonce_loss(const EmbeddingBatch& batch, const AnySimilarity& sim)
{
  const Eigen::Index n = batch.size();
  const std::vector<double> pos = positive_similarities(batch, sim);
  const double pos_mean = std::accumulate(pos.begin(), pos.end(), 0.0) / static_cast<double>(n);

  double neg = 0.0;
  std::vector<double> row;
  row.reserve(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i)
        row.push_back(score_unchecked(sim, batch.view_x().row(i), batch.view_x().row(j)));
    neg += log_mean_exp(row);
  }
  return -(pos_mean - neg / static_cast<double>(n));
}

double
au_loss(const EmbeddingBatch& batch)
{
  const Matrix& x = batch.view_x();
  const Matrix& y = batch.view_y();
  const Eigen::Index n = batch.size();
  double align = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    align += (x.row(i) - y.row(i)).squaredNorm();
  align /= static_cast<double>(n);

  std::vector<double> neg;
  neg.reserve(static_cast<std::size_t>(n * (n - 1)));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j)
        neg.push_back(-(x.row(i) - x.row(j)).squaredNorm());
  return -(-align - log_mean_exp(neg));
}

double
spectral_loss(const EmbeddingBatch& batch, double mu, double sigma2)
{
  const Matrix& x = batch.view_x();
  const Matrix& y = batch.view_y();
  const Eigen::Index n = batch.size();
  double pos = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    pos += gaussian_kernel(mu, sigma2, (x.row(i) - y.row(i)).squaredNorm());
  pos /= static_cast<double>(n);

  double neg = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j)
        continue;
      const double g = gaussian_kernel(mu, sigma2, (x.row(i) - x.row(j)).squaredNorm());
      neg += g * g;
    }
  neg /= static_cast<double>(n * (n - 1));
  return -(2.0 * pos - neg);
}

double
dv_shift_optimum(const std::vector<double>& cross)
{
  if (cross.empty())
    throw ParameterError("dv_shift_optimum: empty similarity vector");
  return log_mean_exp(cross) - 1.0;
}

double
dv_objective(const Divergence& d,
             const std::vector<double>& positives,
             const std::vector<double>& cross,
             double v)
{
  if (positives.empty() || cross.empty())
    throw ParameterError("dv_objective: empty similarity vector");
  double pos = 0.0;
  for (double s : positives)
    pos += s;
  double neg = 0.0;
  for (double s : cross)
    neg += d.fstar(s - v);
  return pos / static_cast<double>(positives.size()) - v - neg / static_cast<double>(cross.size());
}

double
dv_shifted_kl_loss(const EmbeddingBatch& batch, const AnySimilarity& sim)
{
  const std::vector<double> pos = positive_similarities(batch, sim);
  const double pos_mean = std::accumulate(pos.begin(), pos.end(), 0.0) / static_cast<double>(pos.size());
  return -(pos_mean - log_mean_exp(cross_similarities(batch, sim)));
}

BoundConstants
estimation_bound_constants(const Divergence& d, double mu, double sigma2, long n, double delta)
{
  if (n < 2)
    throw ParameterError("estimation_bound_constants: N must be at least 2");
  if (!(delta > 0.0 && delta < 1.0))
    throw ParameterError("estimation_bound_constants: delta must lie in (0, 1)");
  const double hi = gaussian_kernel(mu, sigma2, 0.0);
  const double lo = gaussian_kernel(mu, sigma2, 4.0);
  BoundConstants c;
  c.r_t = d.fprime(hi) - d.fprime(lo);
  c.r_f = d.fstar_of_fprime(hi) - d.fstar_of_fprime(lo);
  c.tail = (c.r_t + 2.0 * c.r_f) * std::sqrt(std::log(6.0 / delta) / (2.0 * static_cast<double>(n - 1)));
  return c;
}

} // namespace fmicl

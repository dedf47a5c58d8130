#pragma once

#include "fmicl/fdiv.hpp"
#include "fmicl/similarity.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace fmicl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

//! Two views of N samples; row i of view_x and row i of view_y form the
//! positive pair, rows i != j of view_x form the negative pairs.
class EmbeddingBatch
{
public:
  //! Rows must be unit norm within `tolerance`. An infinite tolerance skips the
  //! check, which finite-difference code needs when it perturbs raw rows.
  EmbeddingBatch(Matrix view_x, Matrix view_y, double tolerance = kUnitNormTolerance);

  const Matrix& view_x() const { return x_; }
  const Matrix& view_y() const { return y_; }
  Eigen::Index size() const { return x_.rows(); }
  Eigen::Index dim() const { return x_.cols(); }

private:
  Matrix x_;
  Matrix y_;
};

enum class NegativesMode
{
  ViewX,
  //! Average of the view_x and view_y negative terms.
  BothViews
};

struct LossReport
{
  double positive_term{};
  double negative_term{};
  double alpha{};
  double loss{};
};

LossReport
fmicl_loss(const EmbeddingBatch& batch,
           const GaussianSimilarity& sim,
           double alpha,
           NegativesMode negatives = NegativesMode::ViewX);

//! d(loss)/d(view_x), d(loss)/d(view_y) in the ambient space.
std::pair<Matrix, Matrix>
fmicl_embedding_grad(const EmbeddingBatch& batch,
                     const GaussianSimilarity& sim,
                     double alpha,
                     NegativesMode negatives = NegativesMode::ViewX);

//! Minimization form: -[mean_i s(x_i, y_i) - mean_i log mean_{j != i} exp s(x_i, x_j)].
double
infonce_loss(const EmbeddingBatch& batch, const AnySimilarity& sim);

//! -[-mean_+ |x - y|^2 - log mean_x exp(-|x - y|^2)]
double
au_loss(const EmbeddingBatch& batch);

//! -[2 mean_+ G - mean_x G^2], additive constant dropped.
double
spectral_loss(const EmbeddingBatch& batch, double mu, double sigma2);

//! v* = log(mean(exp(s))) - 1, the maximizing shift of the KL case.
double
dv_shift_optimum(const std::vector<double>& cross_similarities);

//! mean_+ s - v - mean_x f*(s - v) for an explicit shift v.
double
dv_objective(const Divergence& d,
             const std::vector<double>& positive_similarities,
             const std::vector<double>& cross_similarities,
             double v);

//! KL objective at the optimal shift, written as a loss:
//! -[mean_+ s - log mean_x exp s].
double
dv_shifted_kl_loss(const EmbeddingBatch& batch, const AnySimilarity& sim);

//! Positive-pair similarities s(x_i, y_i).
std::vector<double>
positive_similarities(const EmbeddingBatch& batch, const AnySimilarity& sim);

//! Ordered negative-pair similarities s(x_i, x_j), i != j, row-major order.
std::vector<double>
cross_similarities(const EmbeddingBatch& batch, const AnySimilarity& sim);

struct BoundConstants
{
  double r_t{};
  double r_f{};
  double tail{};
};

BoundConstants
estimation_bound_constants(const Divergence& d, double mu, double sigma2, long n, double delta);

} // namespace fmicl

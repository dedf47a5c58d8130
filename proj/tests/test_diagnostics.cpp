#include "doctest.h"

#include "fmicl/diagnostics.hpp"
#include "fmicl/errors.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace fmicl;

TEST_CASE("simplex examples")
{
  const Divergence kl(Family::KL), js(Family::JS);
  const SimplexReport two = minimize_negative_term(kl, 1.0, 1.0, 2, 3, 0);
  CHECK(two.target == 4.0);
  CHECK(two.converged);
  CHECK(two.sqdists[0] == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(two.centroid_norm <= 1e-3);

  const SimplexReport tri = minimize_negative_term(kl, 1.0, 1.0, 3, 2, 1);
  CHECK(tri.target == doctest::Approx(3.0));
  CHECK(tri.converged);
  for (double t : tri.sqdists)
    CHECK(t == doctest::Approx(3.0).epsilon(1e-4));

  const SimplexReport tet = minimize_negative_term(js, 1.0, 1.0, 4, 3, 2);
  CHECK(tet.target == doctest::Approx(8.0 / 3.0));
  CHECK(tet.converged);
  CHECK(tet.sqdists.size() == 6);
  // the analytic simplex objective, computed independently from h
  const double h = h_value(js, 1.0, 1.0, 8.0 / 3.0);
  CHECK(tet.objective == doctest::Approx(12.0 * h).epsilon(1e-6));
}

TEST_CASE("simplex objective is a lower bound over restarts")
{
  const Divergence vlc(Family::VinczeLeCam);
  const SimplexReport best = minimize_negative_term(vlc, 1.0, 1.0, 4, 3, 0);
  REQUIRE(best.converged);
  for (std::uint64_t seed = 1; seed < 6; ++seed)
    CHECK(minimize_negative_term(vlc, 1.0, 1.0, 4, 3, seed).objective >= best.simplex_objective - 1e-9);
  CHECK(std::abs(best.objective - best.simplex_objective) <= 1e-6);
}

TEST_CASE("Neyman does not reach the simplex")
{
  const Divergence neyman(Family::NeymanChi2);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SimplexReport r = minimize_negative_term(neyman, 1.0, 1.0, 4, 3, seed);
    CHECK_FALSE(r.converged);
    CHECK(r.max_deviation > 0.1);
  }
}

TEST_CASE("simplex argument checks")
{
  CHECK_THROWS_AS(minimize_negative_term(Divergence(Family::KL), 1.0, 1.0, 5, 3, 0), ParameterError);
  CHECK_THROWS_AS(minimize_negative_term(Divergence(Family::KL), 1.0, 1.0, 1, 3, 0), ParameterError);
}

TEST_CASE("uniformity profile")
{
  const UniformityProfile c = uniformity_profile(testing::coincident_batch());
  CHECK(c.alignment == 0.0);
  CHECK(std::all_of(c.distances.begin(), c.distances.end(), [](double d) { return d == 0.0; }));

  Matrix tri(3, 2);
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 3.0;
    tri.row(i) << std::cos(a), std::sin(a);
  }
  const UniformityProfile s = uniformity_profile(EmbeddingBatch(tri, tri));
  CHECK(s.alignment == 0.0);
  CHECK(s.distances.size() == 3);
  for (double d : s.distances)
    CHECK(d == doctest::Approx(std::sqrt(3.0)));
  CHECK(s.spread <= 1e-12);

  const UniformityProfile r = uniformity_profile(testing::random_batch(0, 20, 4));
  CHECK(std::is_sorted(r.distances.begin(), r.distances.end()));
  CHECK(r.distances.front() >= 0.0);
  CHECK(r.distances.back() <= 2.0);
  const std::string csv = profile_csv(r);
  CHECK(csv.rfind("rank,distance\n0,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 191);
}

TEST_CASE("collapse detector")
{
  CHECK(collapse_detector(Matrix::Ones(5, 3) / std::sqrt(3.0)));
  Matrix anti(2, 2);
  anti << 1, 0, -1, 0;
  CHECK_FALSE(collapse_detector(anti));
  CHECK(mean_pairwise_distance(anti) == 2.0);
  CHECK_THROWS_AS(collapse_detector(Matrix::Ones(1, 3)), ParameterError);
}

TEST_CASE("linearity check on model-consistent pairs")
{
  for (double sigma2 : { 0.5, 1.0 }) {
    const auto [x, y] = sample_vmf_pairs(2000, 3, sigma2, 0);
    const LinearityFit fit = assumption_linearity_check(x, y, 10);
    const double target = -1.0 / (2.0 * sigma2);
    CHECK(std::abs(fit.slope - target) <= 0.2 * std::abs(target));
    CHECK(fit.r2 >= 0.9);
  }
  const auto [ux, uy] = sample_uniform_pairs(2000, 3, 0);
  CHECK(assumption_linearity_check(ux, uy, 10).r2 < 0.5);
}

TEST_CASE("linearity check rejects degenerate input")
{
  const auto [x, y] = sample_uniform_pairs(50, 3, 0);
  CHECK_THROWS_AS(assumption_linearity_check(x, y, 10), ParameterError);
  const auto [a, b] = sample_uniform_pairs(200, 3, 0);
  CHECK_THROWS_AS(assumption_linearity_check(a, a, 10), ParameterError);
}

TEST_CASE("vMF sampler concentrates with small variance")
{
  const auto [x, y] = sample_vmf_pairs(500, 3, 0.1, 1);
  double mean_dot = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    CHECK(std::abs(x.row(i).norm() - 1.0) <= 1e-12);
    mean_dot += x.row(i).dot(y.row(i));
  }
  // on S^2 the pair density exp(c / sigma2) gives E[c] = coth(1/sigma2) - sigma2
  const double k = 10.0;
  CHECK(mean_dot / 500.0 == doctest::Approx(1.0 / std::tanh(k) - 1.0 / k).epsilon(0.02));
}

TEST_CASE("batch size sweep")
{
  SyntheticSpec s;
  const Dataset d = generate_synthetic(s);
  TrainConfig c;
  c.epochs = 10;
  c.alpha = 10.0;
  c.nonlinearity = Nonlinearity::Tanh;
  const auto rows = batch_size_sweep(c, d, { 4, 16, 64 }, 2);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].batch_size == 4);
  CHECK(rows[2].batch_size == 64);
  for (const auto& r : rows)
    CHECK(r.knn_accuracy > 1.0 / 3.0);
  const auto again = batch_size_sweep(c, d, { 4, 16, 64 }, 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].knn_accuracy == rows[i].knn_accuracy);
    CHECK(again[i].final_loss == rows[i].final_loss);
  }
  c.epochs = 1;
  CHECK(batch_size_sweep(c, d, { 2 }).size() == 1);
  CHECK_THROWS_AS(batch_size_sweep(c, d, { 1 }), ParameterError);
}

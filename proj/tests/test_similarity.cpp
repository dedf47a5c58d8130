#include "doctest.h"

#include "fmicl/errors.hpp"
#include "fmicl/similarity.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace fmicl;

TEST_CASE("gaussian_kernel")
{
  CHECK(gaussian_kernel(1.0, 0.5, 0.0) == 1.0);
  CHECK(gaussian_kernel(1.0, 0.5, 4.0) == doctest::Approx(0.0183156388887342));
  CHECK(gaussian_kernel(2.0, 0.5, 0.0) == 2.0);
  CHECK_THROWS_AS(gaussian_kernel(0.0, 0.5, 1.0), ParameterError);
  CHECK_THROWS_AS(gaussian_kernel(1.0, -0.5, 1.0), ParameterError);
  CHECK_THROWS_AS(gaussian_kernel(1.0, 0.5, -1.0), DomainError);
}

TEST_CASE("f_gaussian examples")
{
  Eigen::RowVectorXd x(2), y(2);
  x << 1, 0;
  y << -1, 0;
  const GaussianSimilarity kl{ 1.0, 0.5, Divergence(Family::KL) };
  CHECK(f_gaussian(kl, x, x) == doctest::Approx(1.0));
  CHECK(f_gaussian(kl, x, y) == doctest::Approx(-3.0));
  const GaussianSimilarity pearson{ 1.0, 0.5, Divergence(Family::PearsonChi2) };
  CHECK(f_gaussian(pearson, x, x) == 0.0);

  Eigen::RowVectorXd bad(2);
  bad << 1.1, 0;
  CHECK_THROWS_AS(f_gaussian(kl, bad, x), NormalizationError);
}

TEST_CASE("cosine examples")
{
  Eigen::RowVectorXd x(2), y(2), z(2);
  x << 1, 0;
  y << 0, 1;
  z << -1, 0;
  CHECK(cosine(CosineSimilarity{ 1.0 }, x, x) == 1.0);
  CHECK(cosine(CosineSimilarity{ 0.5 }, x, y) == 0.0);
  CHECK(cosine(CosineSimilarity{ 1.0 }, x, z) == -1.0);
  CHECK(cosine(CosineSimilarity{ 0.5 }, x, x) == 2.0);
  CHECK_THROWS_AS(cosine(CosineSimilarity{ 1.0 }, 2.0 * x, y), NormalizationError);
}

TEST_CASE("KL f-Gaussian similarity is affine in the cosine")
{
  std::mt19937_64 rng(7);
  const double mu = 1.7, sigma2 = 0.8;
  const GaussianSimilarity kl{ mu, sigma2, Divergence(Family::KL) };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Matrix p = testing::random_unit_rows(rng, 2, 5);
    const double c = p.row(0).dot(p.row(1));
    const double affine = (2.0 * c - 2.0) / (2.0 * sigma2) + std::log(mu) + 1.0;
    worst = std::max(worst, std::abs(f_gaussian(kl, p.row(0), p.row(1)) - affine));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("f-Gaussian similarity is symmetric and decreasing in distance")
{
  std::mt19937_64 rng(3);
  for (const auto& d : all_divergences()) {
    if (classify_h_convexity(d, 1.0, 0.5) != HConvexity::StrictlyConvex)
      continue;
    const GaussianSimilarity sim{ 1.0, 0.5, d };
    double prev = sim.from_sqdist(0.0);
    for (int i = 1; i <= 400; ++i) {
      const double s = sim.from_sqdist(4.0 * i / 400.0);
      REQUIRE_MESSAGE(s < prev, d.token());
      prev = s;
    }
    for (int i = 0; i < 50; ++i) {
      const Matrix p = testing::random_unit_rows(rng, 2, 3);
      CHECK(f_gaussian(sim, p.row(0), p.row(1)) == f_gaussian(sim, p.row(1), p.row(0)));
    }
  }
}

TEST_CASE("similarity tokens")
{
  const GaussianSimilarity g{ 1.0, 0.5, Divergence(Family::JS) };
  const AnySimilarity a = parse_similarity("fgaussian", g);
  CHECK(std::holds_alternative<GaussianSimilarity>(a));
  CHECK(similarity_token(a) == "fgaussian");
  const AnySimilarity c = parse_similarity("cosine:0.25", g);
  CHECK(std::get<CosineSimilarity>(c).temperature == 0.25);
  CHECK(similarity_token(c) == "cosine:0.25");
  CHECK(std::get<CosineSimilarity>(parse_similarity("cosine", g)).temperature == 0.5);
  CHECK_THROWS_AS(parse_similarity("cosine:-1", g), ParameterError);
  CHECK_THROWS_AS(parse_similarity("dot", g), ParameterError);
}

#include "doctest.h"

#include "fmicl/errors.hpp"
#include "fmicl/nn.hpp"
#include "test_support.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace fmicl;

namespace {

Matrix
random_inputs(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = normal(rng);
  return m;
}

// Visits every scalar parameter in a fixed order.
template<typename F>
void
for_each_param(EncoderParams& p, F&& f)
{
  for (auto& l : p.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        f(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      f(l.bias(r));
  }
}

std::vector<double>
flatten(const GradientBundle& g)
{
  std::vector<double> out;
  for (const auto& l : g.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        out.push_back(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      out.push_back(l.bias(r));
  }
  return out;
}

double
max_rel(const std::vector<double>& a, const std::vector<double>& b)
{
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

} // namespace

TEST_CASE("init_params")
{
  const EncoderParams a = init_params(0, { 2, 16, 3 });
  const EncoderParams b = init_params(0, { 2, 16, 3 });
  const EncoderParams c = init_params(1, { 2, 16, 3 });
  REQUIRE(a.layers.size() == 2);
  CHECK(a.layers[0].weight.rows() == 16);
  CHECK(a.layers[0].weight.cols() == 2);
  CHECK(a.layers[0].bias.size() == 16);
  CHECK(a.layers[1].weight.rows() == 3);
  CHECK(a.layers[1].weight.cols() == 16);
  CHECK(a.layers[1].bias.size() == 3);
  bool differs = false;
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(a.layers[l].weight == b.layers[l].weight);
    CHECK(a.layers[l].bias.isZero(0.0));
    differs = differs || a.layers[l].weight != c.layers[l].weight;
    const double bound = std::sqrt(6.0 / (a.layers[l].weight.rows() + a.layers[l].weight.cols()));
    CHECK(a.layers[l].weight.cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(differs);
  CHECK(a.dims() == std::vector<int>{ 2, 16, 3 });
  CHECK_THROWS_AS(init_params(0, { 2 }), ParameterError);
  CHECK_THROWS_AS(init_params(0, { 2, 0, 3 }), ParameterError);
  CHECK_THROWS_AS(init_params(0, { 2, 1 }), ParameterError);
}

TEST_CASE("forward normalizes rows")
{
  EncoderParams p;
  p.layers.push_back({ Matrix::Identity(2, 2), Eigen::VectorXd::Zero(2) });
  Matrix in(1, 2);
  in << 3, 4;
  const Matrix out = forward(p, in);
  CHECK(out(0, 0) == doctest::Approx(0.6));
  CHECK(out(0, 1) == doctest::Approx(0.8));

  const EncoderParams q = init_params(4, { 5, 7, 3 }, Nonlinearity::Tanh);
  const Matrix x = random_inputs(1, 9, 5);
  const Matrix z = forward(q, x);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    CHECK(std::abs(z.row(i).norm() - 1.0) <= 1e-10);

  // positive scaling of the last layer does not change the output
  EncoderParams s = q;
  s.layers.back().weight *= 3.5;
  s.layers.back().bias *= 3.5;
  CHECK((forward(s, x) - z).cwiseAbs().maxCoeff() <= 1e-14);

  // rows are processed independently
  const Matrix single = forward(q, x.row(4));
  CHECK((single.row(0) - z.row(4)).cwiseAbs().maxCoeff() <= 1e-15);

  // renormalizing is a no-op
  Matrix again = z;
  again.rowwise().normalize();
  CHECK((again - z).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("forward rejects degenerate outputs and bad shapes")
{
  EncoderParams p;
  p.layers.push_back({ Matrix::Zero(2, 2), Eigen::VectorXd::Zero(2) });
  CHECK_THROWS_AS(forward(p, Matrix::Ones(1, 2)), DegenerateEmbedding);
  CHECK_THROWS_AS(forward(init_params(0, { 3, 2 }), Matrix::Ones(1, 2)), ParameterError);
}

TEST_CASE("backward special cases")
{
  const EncoderParams p = init_params(0, { 2, 8, 3 });
  const Matrix x = random_inputs(0, 4, 2);
  const GradientBundle zero = backward(p, x, Matrix::Zero(4, 3));
  for (double v : flatten(zero))
    CHECK(v == 0.0);

  const Matrix z = forward(p, x);
  const GradientBundle radial = backward(p, x, 2.5 * z);
  for (double v : flatten(radial))
    CHECK(std::abs(v) <= 1e-14);
}

TEST_CASE("backward matches finite differences")
{
  for (Nonlinearity nl : { Nonlinearity::ReLU, Nonlinearity::Tanh }) {
    EncoderParams p = init_params(0, { 2, 8, 3 }, nl);
    for (auto& l : p.layers)
      l.bias.setConstant(0.05);
    const Matrix x = random_inputs(0, 4, 2);
    const Matrix w = random_inputs(9, 4, 3);
    auto objective = [&](const EncoderParams& q) { return forward(q, x).cwiseProduct(w).sum(); };

    std::vector<double> fd;
    const double h = 1e-5;
    for_each_param(p, [&](double& v) {
      const double keep = v;
      v = keep + h;
      const double up = objective(p);
      v = keep - h;
      const double down = objective(p);
      v = keep;
      fd.push_back((up - down) / (2 * h));
    });
    CHECK(max_rel(flatten(backward(p, x, w)), fd) <= 1e-4);
  }
}

TEST_CASE("end-to-end gradient through the loss")
{
  const Family families[] = { Family::KL,       Family::JS,      Family::PearsonChi2,
                              Family::SquaredHellinger, Family::Tsallis, Family::VinczeLeCam };
  for (Family f : families) {
    EncoderParams p = init_params(3, { 4, 6, 3 }, Nonlinearity::Tanh);
    const Matrix x1 = random_inputs(5, 5, 4);
    const Matrix x2 = x1 + 0.3 * random_inputs(6, 5, 4);
    const GaussianSimilarity sim{ 1.0, 0.5, Divergence(f) };
    auto loss = [&](const EncoderParams& q) {
      return fmicl_loss(EmbeddingBatch(forward(q, x1), forward(q, x2)), sim, 5.0).loss;
    };
    const EmbeddingBatch b(forward(p, x1), forward(p, x2));
    const auto [gx, gy] = fmicl_embedding_grad(b, sim, 5.0);
    GradientBundle g = backward(p, x1, gx);
    g += backward(p, x2, gy);

    std::vector<double> fd;
    const double h = 1e-5;
    for_each_param(p, [&](double& v) {
      const double keep = v;
      v = keep + h;
      const double up = loss(p);
      v = keep - h;
      const double down = loss(p);
      v = keep;
      fd.push_back((up - down) / (2 * h));
    });
    CHECK_MESSAGE(max_rel(flatten(g), fd) <= 1e-4, to_string(f));
  }
}

TEST_CASE("parameter files round-trip")
{
  const EncoderParams p = init_params(12, { 3, 5, 4 }, Nonlinearity::Tanh);
  const auto path = std::filesystem::temp_directory_path() / "fmicl_nn_roundtrip.bin";
  save_params(p, path);
  const EncoderParams q = load_params(path);
  CHECK(q.nonlinearity == Nonlinearity::Tanh);
  REQUIRE(q.dims() == p.dims());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(q.layers[l].weight == p.layers[l].weight);
    CHECK(q.layers[l].bias == p.layers[l].bias);
  }
  std::ifstream is(path, std::ios::binary);
  char magic[6];
  is.read(magic, 6);
  CHECK(std::string(magic, 6) == "FMICL1");
  std::filesystem::remove(path);

  const auto junk = std::filesystem::temp_directory_path() / "fmicl_nn_junk.bin";
  std::ofstream(junk) << "not a parameter file";
  CHECK_THROWS_AS(load_params(junk), ParameterError);
  std::filesystem::remove(junk);
}

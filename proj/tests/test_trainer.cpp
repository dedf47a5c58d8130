#include "doctest.h"

#include "fmicl/errors.hpp"
#include "fmicl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

using namespace fmicl;

namespace {

Dataset
small_data(std::uint64_t seed = 0)
{
  SyntheticSpec s;
  s.samples_per_class = 40;
  s.seed = seed;
  return generate_synthetic(s);
}

TrainConfig
small_config()
{
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.encoder_dims = { 8, 16, 4 };
  c.alpha = 10.0;
  return c;
}

} // namespace

TEST_CASE("generate_synthetic bookkeeping")
{
  const Dataset d = generate_synthetic(SyntheticSpec{});
  CHECK(d.inputs.rows() == 300);
  CHECK(d.inputs.cols() == 8);
  std::map<int, int> counts;
  for (int l : d.labels)
    ++counts[l];
  CHECK(counts == std::map<int, int>{ { 0, 100 }, { 1, 100 }, { 2, 100 } });
}

TEST_CASE("zero noise puts every sample on its center")
{
  for (SyntheticKind kind : { SyntheticKind::GaussianClusters, SyntheticKind::RingClusters }) {
    SyntheticSpec s;
    s.kind = kind;
    s.num_classes = 4;
    s.samples_per_class = 5;
    s.intra_scale = 0.0;
    s.cluster_separation = 3.0;
    const Dataset d = generate_synthetic(s);
    std::vector<Eigen::RowVectorXd> centers;
    for (int c = 0; c < 4; ++c) {
      const Eigen::RowVectorXd first = d.inputs.row(c * 5);
      for (int i = 1; i < 5; ++i)
        CHECK(d.inputs.row(c * 5 + i) == first);
      centers.push_back(first);
    }
    if (kind == SyntheticKind::GaussianClusters) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(8);
      for (int a = 0; a < 4; ++a) {
        mean += centers[a] / 4.0;
        for (int b = a + 1; b < 4; ++b)
          CHECK((centers[a] - centers[b]).norm() == doctest::Approx(3.0));
      }
      CHECK(mean.norm() <= 1e-12);
    } else {
      for (int a = 0; a < 4; ++a)
        CHECK((centers[a] - centers[(a + 1) % 4]).norm() == doctest::Approx(3.0));
    }
  }
}

TEST_CASE("well separated clusters have a positive margin")
{
  SyntheticSpec s;
  s.cluster_separation = 10.0;
  s.intra_scale = 0.1;
  const Dataset d = generate_synthetic(s);
  double max_intra = 0.0, min_inter = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < d.inputs.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.inputs.rows(); ++j) {
      const double dist = (d.inputs.row(i) - d.inputs.row(j)).norm();
      if (d.labels[i] == d.labels[j])
        max_intra = std::max(max_intra, dist);
      else
        min_inter = std::min(min_inter, dist);
    }
  CHECK(min_inter > max_intra);
}

TEST_CASE("synthetic data is deterministic per seed")
{
  CHECK(small_data(3).inputs == small_data(3).inputs);
  CHECK(small_data(3).inputs != small_data(4).inputs);
  SyntheticSpec s;
  s.num_classes = 1;
  CHECK_THROWS_AS(generate_synthetic(s), ParameterError);
}

TEST_CASE("augment")
{
  Eigen::RowVectorXd x(3);
  x << 1.0, -2.0, 0.5;
  std::mt19937_64 rng(0);
  CHECK(augment(x, rng, 0.0) == x);
  std::mt19937_64 a(1), b(2);
  CHECK(augment(x, a, 1.0) != augment(x, b, 1.0));

  const int draws = 100000;
  const double scale = 0.7;
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(3);
  std::mt19937_64 r(5);
  for (int i = 0; i < draws; ++i)
    mean += augment(x, r, scale);
  mean /= draws;
  CHECK(((mean - x).cwiseAbs().array() <= 3.0 * scale / std::sqrt(double(draws))).all());
  CHECK_THROWS_AS(augment(x, r, -1.0), ParameterError);
}

TEST_CASE("lr = 0 leaves parameters untouched")
{
  TrainConfig c = small_config();
  c.lr = 0.0;
  const TrainHistory h = train(c, small_data());
  for (std::size_t l = 0; l < h.final_params.layers.size(); ++l) {
    CHECK(h.final_params.layers[l].weight == h.initial_params.layers[l].weight);
    CHECK(h.final_params.layers[l].bias == h.initial_params.layers[l].bias);
  }
  CHECK(h.epochs.size() == 3);
}

TEST_CASE("training is deterministic")
{
  const TrainConfig c = small_config();
  const TrainHistory a = train(c, small_data());
  const TrainHistory b = train(c, small_data());
  CHECK(history_csv(a) == history_csv(b));
  for (std::size_t l = 0; l < a.final_params.layers.size(); ++l)
    CHECK(a.final_params.layers[l].weight == b.final_params.layers[l].weight);
}

TEST_CASE("KL training lowers the loss with the default weighting")
{
  SyntheticSpec s;
  const Dataset d = generate_synthetic(s);
  TrainConfig c;
  c.divergence = "kl";
  c.alpha = 40.0;
  c.epochs = 20;
  const TrainHistory h = train(c, d);
  CHECK(h.epochs.back().loss < h.epochs.front().loss);
}

TEST_CASE("non-finite loss aborts with context")
{
  TrainConfig c = small_config();
  c.lr = 1e300;
  c.momentum = 0.0;
  try {
    train(c, small_data());
    FAIL("expected NumericalDivergence or DegenerateEmbedding");
  } catch (const NumericalDivergence& e) {
    CHECK(e.epoch() >= 0);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  } catch (const DegenerateEmbedding&) {
  } catch (const DomainError&) {
  }
}

TEST_CASE("train validates its inputs")
{
  TrainConfig c = small_config();
  c.batch_size = 1;
  CHECK_THROWS_AS(train(c, small_data()), ParameterError);
  c = small_config();
  c.encoder_dims = { 5, 4 };
  CHECK_THROWS_AS(train(c, small_data()), ParameterError);
  c = small_config();
  c.divergence = "bogus";
  CHECK_THROWS_AS(train(c, small_data()), ParameterError);
}

TEST_CASE("knn_evaluate")
{
  // one-hot class indicators
  Matrix onehot = Matrix::Zero(60, 3);
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    onehot(i, i % 3) = 1.0;
    labels.push_back(i % 3);
  }
  CHECK(knn_evaluate(onehot, labels, 5, 0) == 1.0);

  // duplicated points with k = 1: the nearest neighbour of a held-out point
  // is its twin whenever the twin landed in the reference set
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix base(50, 4);
  for (Eigen::Index i = 0; i < 50; ++i)
    for (Eigen::Index k = 0; k < 4; ++k)
      base(i, k) = normal(rng);
  Matrix dup(100, 4);
  std::vector<int> dup_labels;
  for (int i = 0; i < 100; ++i) {
    dup.row(i) = base.row(i / 2);
    dup_labels.push_back((i / 2) % 5);
  }
  // oracle: count held-out points whose twin sits in the reference set
  std::vector<std::size_t> perm(100);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 split(0);
  std::shuffle(perm.begin(), perm.end(), split);
  std::vector<bool> held(100, false);
  for (std::size_t i = 0; i < 20; ++i)
    held[perm[i]] = true;
  int guaranteed = 0;
  for (std::size_t i = 0; i < 100; ++i)
    guaranteed += held[i] && !held[i ^ 1];
  CHECK(knn_evaluate(dup, dup_labels, 1, 0) >= guaranteed / 20.0);

  // with ten copies of each point a copy always remains in the reference set
  Matrix many(500, 4);
  std::vector<int> many_labels;
  for (int i = 0; i < 500; ++i) {
    many.row(i) = base.row(i / 10);
    many_labels.push_back((i / 10) % 5);
  }
  CHECK(knn_evaluate(many, many_labels, 1, 0) == 1.0);
}

TEST_CASE("knn tie rule on identical embeddings")
{
  const int per_class = 20;
  Matrix same = Matrix::Ones(3 * per_class, 2);
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_class; ++i)
      labels.push_back(c);
  const int k = 5;
  for (std::uint64_t seed : { 0, 1, 2 }) {
    // oracle: same split, neighbours are the first k reference points, the
    // vote goes to the most common label with ties toward the smallest
    std::vector<std::size_t> perm(labels.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t test = perm.size() / 5;
    int votes[3] = { 0, 0, 0 };
    for (int i = 0; i < k; ++i)
      ++votes[labels[perm[test + i]]];
    const int winner = int(std::max_element(votes, votes + 3) - votes);
    int hits = 0;
    for (std::size_t i = 0; i < test; ++i)
      hits += labels[perm[i]] == winner;
    CHECK(knn_evaluate(same, labels, k, seed) == doctest::Approx(double(hits) / test));
  }
  CHECK_THROWS_AS(knn_evaluate(same, labels, 0, 0), ParameterError);
  CHECK_THROWS_AS(knn_evaluate(same, labels, 59, 0), ParameterError);
}

TEST_CASE("config JSON round-trip and strictness")
{
  TrainConfig c;
  c.divergence = "tsallis:2.5";
  c.alpha = 0.1;
  c.nonlinearity = Nonlinearity::Tanh;
  c.negatives = NegativesMode::BothViews;
  const nlohmann::json j = c;
  const TrainConfig back = j.get<TrainConfig>();
  CHECK(nlohmann::json(back) == j);

  CHECK_THROWS_AS(nlohmann::json::parse(R"({"alpah": 1})").get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"alpha": "x"})").get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"batch_size": 1})").get<TrainConfig>(), ConfigError);
  // integers are never truncated or wrapped
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"epochs": 2.5})").get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"seed": -1})").get<TrainConfig>(), ConfigError);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"encoder_dims": [8, 3.5, 8]})").get<TrainConfig>(), ConfigError);
  CHECK(nlohmann::json::parse(R"({"alpha": 3})").get<TrainConfig>().alpha == 3.0);

  SyntheticSpec s;
  s.kind = SyntheticKind::RingClusters;
  const nlohmann::json js = s;
  CHECK(nlohmann::json(js.get<SyntheticSpec>()) == js);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"kind": "spiral"})").get<SyntheticSpec>(), ConfigError);
}

TEST_CASE("history CSV layout")
{
  TrainHistory h;
  h.epochs.push_back({ 0.5, 0.25, 2.0, 0.0 });
  CHECK(history_csv(h) == "epoch,positive,negative,alpha,loss\n0,0.5,0.25,2,0\n");
}

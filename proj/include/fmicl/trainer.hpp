#pragma once

#include "fmicl/nn.hpp"
#include "fmicl/objective.hpp"

#include "json.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fmicl {

enum class SyntheticKind
{
  GaussianClusters,
  RingClusters
};

struct SyntheticSpec
{
  SyntheticKind kind{ SyntheticKind::GaussianClusters };
  int num_classes{ 3 };
  int samples_per_class{ 100 };
  int input_dim{ 8 };
  double cluster_separation{ 5.0 };
  double intra_scale{ 1.0 };
  std::uint64_t seed{ 0 };
};

struct Dataset
{
  Matrix inputs;
  std::vector<int> labels;
};

//! GaussianClusters: class centers form a regular simplex (pairwise distance
//! `cluster_separation`, centroid at the origin) in the first num_classes - 1
//! coordinates. RingClusters: centers equally spaced on a circle in the first
//! two coordinates, adjacent centers `cluster_separation` apart. Samples are
//! center + N(0, intra_scale^2 I), stored class by class.
Dataset
generate_synthetic(const SyntheticSpec& spec);

//! x + eps with eps ~ N(0, noise_scale^2 I).
Eigen::RowVectorXd
augment(const RowRef& x, std::mt19937_64& rng, double noise_scale);

struct TrainConfig
{
  std::string divergence{ "kl" };
  double mu{ 1.0 };
  double sigma2{ 0.5 };
  double alpha{ 40.0 };
  double lr{ 0.1 };
  double momentum{ 0.9 };
  int epochs{ 40 };
  int batch_size{ 32 };
  std::vector<int> encoder_dims{ 8, 32, 8 };
  Nonlinearity nonlinearity{ Nonlinearity::ReLU };
  double noise_scale{ 1.5 };
  std::uint64_t seed{ 0 };
  NegativesMode negatives{ NegativesMode::ViewX };
};

//! Throws ParameterError on invalid values.
void
validate(const TrainConfig& config);

GaussianSimilarity
similarity_of(const TrainConfig& config);

struct TrainHistory
{
  //! Mean of the mini-batch reports of each epoch, evaluated before the
  //! corresponding updates.
  std::vector<LossReport> epochs;
  EncoderParams initial_params;
  EncoderParams final_params;
  double wall_clock_seconds{};
};

//! SGD with momentum on the f-MICL loss. Each epoch reshuffles the data and
//! walks it in mini-batches of `batch_size` (a trailing partial batch is
//! dropped). Throws NumericalDivergence on a non-finite loss.
TrainHistory
train(const TrainConfig& config, const Dataset& data);

//! Fraction of held-out points (20%, chosen by `split_seed`) whose k nearest
//! training neighbours vote for the right label. Ties in the vote go to the
//! smallest label; ties in distance go to the earlier training point.
double
knn_evaluate(const Matrix& embeddings, const std::vector<int>& labels, int k, std::uint64_t split_seed);

//! epoch,positive,negative,alpha,loss
std::string
history_csv(const TrainHistory& history);

//! label,x0,x1,...
std::string
dataset_csv(const Dataset& data);

void
to_json(nlohmann::json& j, const LossReport& r);
void
to_json(nlohmann::json& j, const TrainConfig& c);
//! Unknown keys and wrong types raise ConfigError.
void
from_json(const nlohmann::json& j, TrainConfig& c);
void
to_json(nlohmann::json& j, const SyntheticSpec& s);
void
from_json(const nlohmann::json& j, SyntheticSpec& s);

std::string
to_string(NegativesMode m);
NegativesMode
parse_negatives(std::string_view token);

} // namespace fmicl

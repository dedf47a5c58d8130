#include "fmicl/trainer.hpp"

#include "fmicl/errors.hpp"
#include "fmicl/json_fields.hpp"
#include "fmicl/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace fmicl {

using json_fields::read_field;
using json_fields::reject_unknown_keys;

namespace {

// Independent streams for initialization and for shuffling/augmentation.
constexpr std::uint64_t kDataStreamSalt = 0x9e3779b97f4a7c15ULL;

Matrix
simplex_centers(int classes, int dim, double separation)
{
  if (dim < classes - 1)
    throw ParameterError("GaussianClusters needs input_dim >= num_classes - 1");
  Matrix c = Matrix::Zero(classes, dim);
  // Helmert basis of the sum-zero subspace; the images of the standard basis
  // vectors are sqrt(2) apart, hence the rescaling.
  const double scale = separation / std::numbers::sqrt2;
  for (int k = 1; k < classes; ++k) {
    const double norm = std::sqrt(static_cast<double>(k) * (k + 1));
    for (int j = 0; j < k; ++j)
      c(j, k - 1) = scale / norm;
    c(k, k - 1) = -scale * k / norm;
  }
  return c;
}

Matrix
ring_centers(int classes, int dim, double separation)
{
  if (dim < 2)
    throw ParameterError("RingClusters needs input_dim >= 2");
  Matrix c = Matrix::Zero(classes, dim);
  const double step = 2.0 * std::numbers::pi / classes;
  const double radius = separation / (2.0 * std::sin(step / 2.0));
  for (int k = 0; k < classes; ++k) {
    c(k, 0) = radius * std::cos(step * k);
    c(k, 1) = radius * std::sin(step * k);
  }
  return c;
}

void
sgd_update(std::vector<Layer>& params, std::vector<Layer>& velocity, const std::vector<Layer>& grad,
           double lr, double momentum)
{
  for (std::size_t l = 0; l < params.size(); ++l) {
    velocity[l].weight = momentum * velocity[l].weight + grad[l].weight;
    velocity[l].bias = momentum * velocity[l].bias + grad[l].bias;
    params[l].weight -= lr * velocity[l].weight;
    params[l].bias -= lr * velocity[l].bias;
  }
}

} // namespace

Dataset
generate_synthetic(const SyntheticSpec& spec)
{
  if (spec.num_classes < 2)
    throw ParameterError("need at least two classes");
  if (spec.samples_per_class < 1 || spec.input_dim < 1)
    throw ParameterError("samples_per_class and input_dim must be positive");
  if (!(spec.cluster_separation >= 0.0) || !(spec.intra_scale >= 0.0))
    throw ParameterError("cluster_separation and intra_scale must be nonnegative");

  const Matrix centers = spec.kind == SyntheticKind::GaussianClusters
                           ? simplex_centers(spec.num_classes, spec.input_dim, spec.cluster_separation)
                           : ring_centers(spec.num_classes, spec.input_dim, spec.cluster_separation);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(spec.num_classes) * spec.samples_per_class, spec.input_dim);
  Eigen::Index row = 0;
  for (int c = 0; c < spec.num_classes; ++c)
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (int k = 0; k < spec.input_dim; ++k)
        out.inputs(row, k) = centers(c, k) + spec.intra_scale * noise(rng);
      out.labels.push_back(c);
    }
  return out;
}

Eigen::RowVectorXd
augment(const RowRef& x, std::mt19937_64& rng, double noise_scale)
{
  if (!(noise_scale >= 0.0))
    throw ParameterError("noise_scale must be nonnegative");
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::RowVectorXd out = x;
  for (Eigen::Index k = 0; k < out.size(); ++k)
    out(k) += noise_scale * noise(rng);
  return out;
}

void
validate(const TrainConfig& c)
{
  parse_divergence(c.divergence);
  if (!(c.mu > 0.0) || !(c.sigma2 > 0.0))
    throw ParameterError("mu and sigma2 must be positive");
  if (!(c.alpha >= 0.0) || std::isinf(c.alpha))
    throw ParameterError("alpha must be finite and nonnegative");
  if (!(c.lr >= 0.0) || !(c.momentum >= 0.0 && c.momentum < 1.0))
    throw ParameterError("lr must be nonnegative and momentum in [0, 1)");
  if (c.epochs < 0)
    throw ParameterError("epochs must be nonnegative");
  if (c.batch_size < 2)
    throw ParameterError("batch_size must be at least 2");
  if (c.encoder_dims.size() < 2 || c.encoder_dims.back() < 2)
    throw ParameterError("encoder_dims needs an input width and an output width >= 2");
  if (!(c.noise_scale >= 0.0))
    throw ParameterError("noise_scale must be nonnegative");
}

GaussianSimilarity
similarity_of(const TrainConfig& config)
{
  return GaussianSimilarity{ config.mu, config.sigma2, parse_divergence(config.divergence) };
}

TrainHistory
train(const TrainConfig& config, const Dataset& data)
{
  validate(config);
  const Eigen::Index m = data.inputs.rows();
  if (m == 0)
    throw ParameterError("training data is empty");
  if (m < config.batch_size)
    throw ParameterError("batch_size exceeds the number of samples");
  if (data.inputs.cols() != config.encoder_dims.front())
    throw ParameterError("encoder input width does not match the data");

  const auto start = std::chrono::steady_clock::now();
  const GaussianSimilarity sim = similarity_of(config);
  TrainHistory h;
  h.initial_params = init_params(config.seed, config.encoder_dims, config.nonlinearity);
  EncoderParams params = h.initial_params;
  std::vector<Layer> velocity;
  for (const auto& l : params.layers)
    velocity.push_back({ Matrix::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size()) });

  std::mt19937_64 rng(config.seed ^ kDataStreamSalt);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{ 0 });
  const Eigen::Index n = config.batch_size;
  const Eigen::Index batches = m / n;
  const Eigen::Index width = data.inputs.cols();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossReport mean{ 0.0, 0.0, config.alpha, 0.0 };
    for (Eigen::Index b = 0; b < batches; ++b) {
      Matrix x1(n, width), x2(n, width);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = data.inputs.row(order[static_cast<std::size_t>(b * n + i)]);
        x1.row(i) = augment(src, rng, config.noise_scale);
        x2.row(i) = augment(src, rng, config.noise_scale);
      }
      const EmbeddingBatch batch(forward(params, x1), forward(params, x2));
      const LossReport r = fmicl_loss(batch, sim, config.alpha, config.negatives);
      if (!std::isfinite(r.loss))
        throw NumericalDivergence("non-finite loss", epoch, static_cast<int>(b));
      auto [gx, gy] = fmicl_embedding_grad(batch, sim, config.alpha, config.negatives);
      GradientBundle g = backward(params, x1, gx);
      g += backward(params, x2, gy);
      sgd_update(params.layers, velocity, g.layers, config.lr, config.momentum);

      mean.positive_term += r.positive_term;
      mean.negative_term += r.negative_term;
      mean.loss += r.loss;
    }
    const double nb = static_cast<double>(batches);
    mean.positive_term /= nb;
    mean.negative_term /= nb;
    mean.loss /= nb;
    h.epochs.push_back(mean);
  }
  h.final_params = std::move(params);
  h.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return h;
}

double
knn_evaluate(const Matrix& embeddings, const std::vector<int>& labels, int k, std::uint64_t split_seed)
{
  const Eigen::Index m = embeddings.rows();
  if (static_cast<std::size_t>(m) != labels.size())
    throw ParameterError("embeddings and labels differ in length");
  if (k < 1)
    throw ParameterError("k must be positive");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Eigen::Index{ 0 });
  std::mt19937_64 rng(split_seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t test_count = std::max<std::size_t>(1, perm.size() / 5);
  if (perm.size() < test_count + static_cast<std::size_t>(k))
    throw ParameterError("too few samples for the requested k");
  const std::vector<Eigen::Index> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_count));
  const std::vector<Eigen::Index> reference(perm.begin() + static_cast<std::ptrdiff_t>(test_count), perm.end());

  std::size_t correct = 0;
  std::vector<std::pair<double, std::size_t>> dist(reference.size());
  for (Eigen::Index q : test) {
    for (std::size_t r = 0; r < reference.size(); ++r)
      dist[r] = { (embeddings.row(q) - embeddings.row(reference[r])).squaredNorm(), r };
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::map<int, int> votes;
    for (int i = 0; i < k; ++i)
      ++votes[labels[static_cast<std::size_t>(reference[dist[static_cast<std::size_t>(i)].second])]];
    int best_label = 0, best_count = -1;
    for (const auto& [label, count] : votes)
      if (count > best_count) {
        best_label = label;
        best_count = count;
      }
    if (best_label == labels[static_cast<std::size_t>(q)])
      ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_count);
}

std::string
history_csv(const TrainHistory& history)
{
  std::ostringstream os;
  os << "epoch,positive,negative,alpha,loss\n";
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const LossReport& r = history.epochs[e];
    os << e << ',' << format_double(r.positive_term) << ',' << format_double(r.negative_term) << ','
       << format_double(r.alpha) << ',' << format_double(r.loss) << '\n';
  }
  return os.str();
}

std::string
dataset_csv(const Dataset& data)
{
  std::ostringstream os;
  os << "label";
  for (Eigen::Index k = 0; k < data.inputs.cols(); ++k)
    os << ",x" << k;
  os << '\n';
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    os << data.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < data.inputs.cols(); ++k)
      os << ',' << format_double(data.inputs(i, k));
    os << '\n';
  }
  return os.str();
}

std::string
to_string(NegativesMode m)
{
  return m == NegativesMode::ViewX ? "view-x" : "both-views";
}

NegativesMode
parse_negatives(std::string_view token)
{
  if (token == "view-x")
    return NegativesMode::ViewX;
  if (token == "both-views")
    return NegativesMode::BothViews;
  throw ParameterError("unknown negatives mode '" + std::string(token) + "'");
}

void
to_json(nlohmann::json& j, const LossReport& r)
{
  j = nlohmann::json{ { "positive", r.positive_term },
                      { "negative", r.negative_term },
                      { "alpha", r.alpha },
                      { "loss", r.loss } };
}

void
to_json(nlohmann::json& j, const TrainConfig& c)
{
  j = nlohmann::json{ { "divergence", c.divergence },
                      { "mu", c.mu },
                      { "sigma2", c.sigma2 },
                      { "alpha", c.alpha },
                      { "lr", c.lr },
                      { "momentum", c.momentum },
                      { "epochs", c.epochs },
                      { "batch_size", c.batch_size },
                      { "encoder_dims", c.encoder_dims },
                      { "nonlinearity", to_string(c.nonlinearity) },
                      { "noise_scale", c.noise_scale },
                      { "seed", c.seed },
                      { "negatives", to_string(c.negatives) } };
}

void
from_json(const nlohmann::json& j, TrainConfig& c)
{
  const std::string section = "train";
  reject_unknown_keys(j,
                      { "divergence", "mu", "sigma2", "alpha", "lr", "momentum", "epochs", "batch_size",
                        "encoder_dims", "nonlinearity", "noise_scale", "seed", "negatives" },
                      section);
  read_field(j, "divergence", c.divergence, section);
  read_field(j, "mu", c.mu, section);
  read_field(j, "sigma2", c.sigma2, section);
  read_field(j, "alpha", c.alpha, section);
  read_field(j, "lr", c.lr, section);
  read_field(j, "momentum", c.momentum, section);
  read_field(j, "epochs", c.epochs, section);
  read_field(j, "batch_size", c.batch_size, section);
  read_field(j, "encoder_dims", c.encoder_dims, section);
  read_field(j, "noise_scale", c.noise_scale, section);
  read_field(j, "seed", c.seed, section);
  std::string token;
  try {
    if (j.contains("nonlinearity")) {
      read_field(j, "nonlinearity", token, section);
      c.nonlinearity = parse_nonlinearity(token);
    }
    if (j.contains("negatives")) {
      read_field(j, "negatives", token, section);
      c.negatives = parse_negatives(token);
    }
    validate(c);
  } catch (const ParameterError& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

void
to_json(nlohmann::json& j, const SyntheticSpec& s)
{
  j = nlohmann::json{ { "kind", s.kind == SyntheticKind::GaussianClusters ? "gaussian-clusters" : "ring-clusters" },
                      { "num_classes", s.num_classes },
                      { "samples_per_class", s.samples_per_class },
                      { "input_dim", s.input_dim },
                      { "cluster_separation", s.cluster_separation },
                      { "intra_scale", s.intra_scale },
                      { "seed", s.seed } };
}

void
from_json(const nlohmann::json& j, SyntheticSpec& s)
{
  const std::string section = "data";
  reject_unknown_keys(
    j, { "kind", "num_classes", "samples_per_class", "input_dim", "cluster_separation", "intra_scale", "seed" }, section);
  if (j.contains("kind")) {
    std::string kind;
    read_field(j, "kind", kind, section);
    if (kind == "gaussian-clusters")
      s.kind = SyntheticKind::GaussianClusters;
    else if (kind == "ring-clusters")
      s.kind = SyntheticKind::RingClusters;
    else
      throw ConfigError(section + ".kind: unknown dataset kind '" + kind + "'");
  }
  read_field(j, "num_classes", s.num_classes, section);
  read_field(j, "samples_per_class", s.samples_per_class, section);
  read_field(j, "input_dim", s.input_dim, section);
  read_field(j, "cluster_separation", s.cluster_separation, section);
  read_field(j, "intra_scale", s.intra_scale, section);
  read_field(j, "seed", s.seed, section);
}

} // namespace fmicl

#pragma once

#include "fmicl/fdiv.hpp"
#include "fmicl/objective.hpp"
#include "fmicl/trainer.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fmicl {

struct SimplexOptions
{
  int max_steps{ 20000 };
  double step_size{ 0.1 };
  double tolerance{ 1e-3 };
};

struct SimplexReport
{
  int n{};
  int dim{};
  std::vector<double> sqdists; // i < j, row-major
  double target{};             // 2N / (N - 1)
  double max_deviation{};
  double centroid_norm{};
  //! sum over ordered pairs i != j of h(|x_i - x_j|^2)
  double objective{};
  //! N (N - 1) h(target), the value at a regular simplex
  double simplex_objective{};
  int steps{};
  bool converged{};
};

//! Projected gradient descent of the summed negative term over N points on
//! S^{dim-1}: a gradient step followed by row renormalization, repeated until
//! the iterate stops moving or the step budget runs out.
SimplexReport
minimize_negative_term(const Divergence& d,
                       double mu,
                       double sigma2,
                       int n,
                       int dim,
                       std::uint64_t seed,
                       const SimplexOptions& options = {});

struct UniformityProfile
{
  std::vector<double> distances; // view_x pairs i < j, sorted
  double alignment{};            // mean |x_i - y_i|
  double spread{};               // population std of `distances`
};

UniformityProfile
uniformity_profile(const EmbeddingBatch& batch);

inline constexpr double kDefaultCollapseThreshold = 0.05;

double
mean_pairwise_distance(const Matrix& embeddings);

bool
collapse_detector(const Matrix& embeddings, double threshold = kDefaultCollapseThreshold);

struct LinearityFit
{
  double slope{};
  double intercept{};
  double r2{};
  double bandwidth{};
  std::vector<double> bin_centers;
  std::vector<double> bin_log_density;
};

//! Leave-one-out Gaussian KDE of the concatenated pairs (x, y), isotropic
//! bandwidth by Scott's rule, then least squares of the per-bin mean log
//! density against the bin center of |x - y|^2.
LinearityFit
assumption_linearity_check(const Matrix& x, const Matrix& y, int bins = 10);

//! Pairs from the density proportional to exp(x.y / sigma2) on S^{d-1} x S^{d-1}
//! by rejection from the uniform product.
std::pair<Matrix, Matrix>
sample_vmf_pairs(int count, int dim, double sigma2, std::uint64_t seed);

//! Independent uniform pairs on S^{d-1}.
std::pair<Matrix, Matrix>
sample_uniform_pairs(int count, int dim, std::uint64_t seed);

struct SweepRow
{
  int batch_size{};
  double knn_accuracy{};
  double final_loss{};
};

inline constexpr int kDefaultKnnK = 5;

//! Embeds the clean inputs with trained parameters and scores k-NN.
double
trained_knn_accuracy(const EncoderParams& params, const Dataset& data, int k, std::uint64_t split_seed);

//! Independent training runs that differ only in batch size. Runs are farmed
//! out to `threads` workers; rows come back in the order of `sizes`.
std::vector<SweepRow>
batch_size_sweep(const TrainConfig& base, const Dataset& data, const std::vector<int>& sizes, int threads = 1);

//! `count` distinct samples of `data` (count <= rows), each augmented twice,
//! x-view first, from mt19937_64(seed).
std::pair<Matrix, Matrix>
probe_pairs(const Dataset& data, int count, double noise_scale, std::uint64_t seed);

inline constexpr int kDefaultProbePairs = 128;

struct FamilyRun
{
  std::string divergence;
  std::uint64_t seed{};
  double knn_accuracy{};
  double mean_pairwise_distance{};
  bool collapsed{};
  UniformityProfile initial; // probe batch under the initial parameters
  UniformityProfile trained; // same probe batch after training
  double final_loss{};
};

//! Trains `config` on `data`, scores k-NN and collapse on the clean inputs,
//! and profiles one probe batch before and after training.
FamilyRun
run_family(const TrainConfig& config, const Dataset& data, int probe_count = kDefaultProbePairs);

//! One run per (divergence, seed), divergence-major. Each run regenerates the
//! data with `data.seed = seed` and trains with `config.seed = seed`.
std::vector<FamilyRun>
family_comparison(const TrainConfig& base,
                  const SyntheticSpec& data,
                  const std::vector<std::string>& divergences,
                  const std::vector<std::uint64_t>& seeds,
                  int threads = 1);

//! divergence,seed,knn_accuracy,mean_pairwise_distance,collapsed,
//! initial_alignment,trained_alignment,initial_spread,trained_spread,final_loss
std::string
family_csv(const std::vector<FamilyRun>& runs);

//! batch_size,knn_accuracy,final_loss
std::string
sweep_csv(const std::vector<SweepRow>& rows);

void
to_json(nlohmann::json& j, const SimplexReport& r);
void
to_json(nlohmann::json& j, const UniformityProfile& p);
void
to_json(nlohmann::json& j, const LinearityFit& f);

//! rank,distance
std::string
profile_csv(const UniformityProfile& p);

} // namespace fmicl

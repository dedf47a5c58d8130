#pragma once

#include "fmicl/objective.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fmicl {

enum class Nonlinearity
{
  ReLU,
  Tanh
};

std::string
to_string(Nonlinearity n);
Nonlinearity
parse_nonlinearity(std::string_view token);

struct Layer
{
  Matrix weight; // out x in
  Eigen::VectorXd bias;
};

//! Affine layers with an elementwise nonlinearity between them (not after the
//! last one), followed by projection onto the unit sphere.
struct EncoderParams
{
  std::vector<Layer> layers;
  Nonlinearity nonlinearity{ Nonlinearity::ReLU };

  //! [in, hidden..., out]
  std::vector<int> dims() const;
  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
};

//! Same shapes as EncoderParams::layers.
struct GradientBundle
{
  std::vector<Layer> layers;

  GradientBundle& operator+=(const GradientBundle& other);
};

inline constexpr double kDegenerateNorm = 1e-12;

//! Xavier-uniform weights, zero biases, mt19937_64 seeded by `seed`.
EncoderParams
init_params(std::uint64_t seed, const std::vector<int>& dims, Nonlinearity nonlinearity = Nonlinearity::ReLU);

Matrix
forward(const EncoderParams& params, const Matrix& inputs);

//! Gradient of sum_b <grad_embeddings_b, g(inputs_b)> with respect to params.
GradientBundle
backward(const EncoderParams& params, const Matrix& inputs, const Matrix& grad_embeddings);

//! "FMICL1" magic, uint32 layer count, uint32 dims, nonlinearity token, then
//! each layer's weight (row-major) and bias as little-endian float64.
void
save_params(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams
load_params(const std::filesystem::path& path);

} // namespace fmicl

#include "fmicl/nn.hpp"

#include "fmicl/errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace fmicl {

namespace {

constexpr char kMagic[] = "FMICL1";
constexpr std::size_t kMagicSize = 6;

void
apply_activation(Nonlinearity n, Matrix& h)
{
  if (n == Nonlinearity::ReLU)
    h = h.cwiseMax(0.0);
  else
    h = h.array().tanh().matrix();
}

// Derivative of the activation, expressed through its pre-activation input.
Matrix
activation_derivative(Nonlinearity n, const Matrix& pre)
{
  if (n == Nonlinearity::ReLU)
    return (pre.array() > 0.0).cast<double>().matrix();
  const Eigen::ArrayXXd t = pre.array().tanh();
  return (1.0 - t * t).matrix();
}

struct ForwardCache
{
  std::vector<Matrix> activations; // input of each layer
  std::vector<Matrix> pre;         // output of each affine map
};

ForwardCache
run_layers(const EncoderParams& params, const Matrix& inputs)
{
  if (params.layers.empty())
    throw ParameterError("encoder has no layers");
  if (inputs.cols() != params.input_dim())
    throw ParameterError("input width " + std::to_string(inputs.cols()) + " does not match encoder input " +
                         std::to_string(params.input_dim()));
  ForwardCache c;
  Matrix a = inputs;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Layer& layer = params.layers[l];
    Matrix h = a * layer.weight.transpose();
    h.rowwise() += layer.bias.transpose();
    c.activations.push_back(std::move(a));
    c.pre.push_back(h);
    if (l + 1 < params.layers.size())
      apply_activation(params.nonlinearity, h);
    a = std::move(h);
  }
  return c;
}

Eigen::VectorXd
row_norms(const Matrix& z)
{
  Eigen::VectorXd n = z.rowwise().norm();
  for (Eigen::Index i = 0; i < n.size(); ++i)
    if (!(n(i) >= kDegenerateNorm))
      throw DegenerateEmbedding("encoder output row " + std::to_string(i) +
                                " has (near-)zero norm before normalization");
  return n;
}

template<typename T>
void
write_le(std::ostream& os, T value)
{
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template<typename T>
T
read_le(std::istream& is)
{
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is)
    throw ParameterError("truncated parameter file");
  return value;
}

} // namespace

std::string
to_string(Nonlinearity n)
{
  return n == Nonlinearity::ReLU ? "relu" : "tanh";
}

Nonlinearity
parse_nonlinearity(std::string_view token)
{
  if (token == "relu")
    return Nonlinearity::ReLU;
  if (token == "tanh")
    return Nonlinearity::Tanh;
  throw ParameterError("unknown nonlinearity '" + std::string(token) + "'");
}

std::vector<int>
EncoderParams::dims() const
{
  std::vector<int> d;
  if (layers.empty())
    return d;
  d.push_back(static_cast<int>(layers.front().weight.cols()));
  for (const auto& l : layers)
    d.push_back(static_cast<int>(l.weight.rows()));
  return d;
}

Eigen::Index
EncoderParams::input_dim() const
{
  return layers.empty() ? 0 : layers.front().weight.cols();
}

Eigen::Index
EncoderParams::output_dim() const
{
  return layers.empty() ? 0 : layers.back().weight.rows();
}

GradientBundle&
GradientBundle::operator+=(const GradientBundle& other)
{
  if (other.layers.size() != layers.size())
    throw ParameterError("gradient bundles have different layer counts");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
  }
  return *this;
}

EncoderParams
init_params(std::uint64_t seed, const std::vector<int>& dims, Nonlinearity nonlinearity)
{
  if (dims.size() < 2)
    throw ParameterError("encoder needs at least an input and an output width");
  for (int w : dims)
    if (w < 1)
      throw ParameterError("layer widths must be positive");
  if (dims.back() < 2)
    throw ParameterError("output width must be at least 2");

  std::mt19937_64 rng(seed);
  EncoderParams p;
  p.nonlinearity = nonlinearity;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double scale = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-scale, scale);
    Layer layer{ Matrix(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out) };
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c)
        layer.weight(r, c) = dist(rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Matrix
forward(const EncoderParams& params, const Matrix& inputs)
{
  ForwardCache c = run_layers(params, inputs);
  const Matrix& z = c.pre.back();
  const Eigen::VectorXd n = row_norms(z);
  return n.cwiseInverse().asDiagonal() * z;
}

GradientBundle
backward(const EncoderParams& params, const Matrix& inputs, const Matrix& grad_embeddings)
{
  ForwardCache c = run_layers(params, inputs);
  const Matrix& z = c.pre.back();
  if (grad_embeddings.rows() != z.rows() || grad_embeddings.cols() != z.cols())
    throw ParameterError("gradient shape does not match encoder output");
  const Eigen::VectorXd n = row_norms(z);

  // normalization Jacobian (I - e e^T) / |z| with e = z / |z|
  Matrix delta(z.rows(), z.cols());
  for (Eigen::Index b = 0; b < z.rows(); ++b) {
    const Eigen::RowVectorXd e = z.row(b) / n(b);
    const Eigen::RowVectorXd g = grad_embeddings.row(b);
    delta.row(b) = (g - g.dot(e) * e) / n(b);
  }

  GradientBundle out;
  out.layers.resize(params.layers.size());
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    out.layers[l].weight = delta.transpose() * c.activations[l];
    out.layers[l].bias = delta.colwise().sum().transpose();
    if (l == 0)
      break;
    Matrix upstream = delta * params.layers[l].weight;
    delta = upstream.cwiseProduct(activation_derivative(params.nonlinearity, c.pre[l - 1]));
  }
  return out;
}

void
save_params(const EncoderParams& params, const std::filesystem::path& path)
{
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw ParameterError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic, kMagicSize);
  const std::vector<int> dims = params.dims();
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.layers.size()));
  for (int d : dims)
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  const std::string token = to_string(params.nonlinearity);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(token.size()));
  os.write(token.data(), static_cast<std::streamsize>(token.size()));
  for (const auto& layer : params.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index col = 0; col < layer.weight.cols(); ++col)
        write_le<double>(os, layer.weight(r, col));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
      write_le<double>(os, layer.bias(r));
  }
  if (!os)
    throw ParameterError("failed writing '" + path.string() + "'");
}

EncoderParams
load_params(const std::filesystem::path& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw ParameterError("cannot open '" + path.string() + "'");
  char magic[kMagicSize];
  is.read(magic, kMagicSize);
  if (!is || std::memcmp(magic, kMagic, kMagicSize) != 0)
    throw ParameterError("'" + path.string() + "' is not an encoder parameter file");
  const auto count = read_le<std::uint32_t>(is);
  if (count == 0 || count > 1024)
    throw ParameterError("implausible layer count in parameter file");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i <= count; ++i)
    dims.push_back(static_cast<int>(read_le<std::uint32_t>(is)));
  const auto token_size = read_le<std::uint32_t>(is);
  if (token_size > 16)
    throw ParameterError("implausible nonlinearity token in parameter file");
  std::string token(token_size, '\0');
  is.read(token.data(), token_size);
  EncoderParams p;
  p.nonlinearity = parse_nonlinearity(token);
  for (std::uint32_t l = 0; l < count; ++l) {
    Layer layer{ Matrix(dims[l + 1], dims[l]), Eigen::VectorXd(dims[l + 1]) };
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index col = 0; col < layer.weight.cols(); ++col)
        layer.weight(r, col) = read_le<double>(is);
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
      layer.bias(r) = read_le<double>(is);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

} // namespace fmicl

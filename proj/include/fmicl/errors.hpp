#pragma once

#include <stdexcept>
#include <string>

namespace fmicl {

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! A point lies outside the domain of the requested function.
class DomainError : public Error
{
public:
  using Error::Error;
};

class ParameterError : public Error
{
public:
  using Error::Error;
};

//! An embedding row that should lie on the unit sphere does not.
class NormalizationError : public Error
{
public:
  using Error::Error;
};

class BatchTooSmall : public Error
{
public:
  using Error::Error;
};

//! A pre-normalization encoder output is (numerically) the zero vector.
class DegenerateEmbedding : public Error
{
public:
  using Error::Error;
};

class NumericalDivergence : public Error
{
public:
  NumericalDivergence(const std::string& what, int epoch, int batch)
    : Error(what + " (epoch " + std::to_string(epoch) + ", batch " +
            std::to_string(batch) + ")")
    , epoch_(epoch)
    , batch_(batch)
  {
  }

  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

private:
  int epoch_;
  int batch_;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

} // namespace fmicl

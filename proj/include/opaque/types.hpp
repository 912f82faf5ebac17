#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace opaque {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VectorX<double>;
using Mat = MatrixX<double>;

/// An observation sequence o_0 .. o_T as indices into the observation alphabet.
using ObservationSequence = std::vector<Index>;

/// Tolerance used when validating that probability vectors sum to one.
inline constexpr double kStochasticTolerance = 1e-12;

/// Sequences whose probability falls below this are treated as impossible.
inline constexpr double kNegligibleProbability = 1e-300;

/// Default bound on |O|^(T+1) for exact enumeration.
inline constexpr double kDefaultEnumerationCap = 1e6;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model (MDP, observation model, automaton, transducer) violates its invariants.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Malformed caller input: bad symbols, mismatched dimensions, unparsable files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Exact enumeration would exceed the configured cap; use sampled mode instead.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// A posterior was requested for an observation sequence of probability zero.
class UndefinedPosterior : public Error {
 public:
  using Error::Error;
};

/// A gradient or iterate became non-finite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace opaque

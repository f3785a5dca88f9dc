#pragma once

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <string>

namespace wasncal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Positions are stored column-wise: a D x K matrix holds K points in D dims.
using PositionMatrix = Eigen::MatrixXd;

using Rng = std::mt19937_64;

// Derives an independent engine from a master seed and up to three stream
// indices. Keying streams by index (not by execution order) is what keeps
// multi-threaded experiment runs byte-identical.
inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c),    static_cast<std::uint32_t>(c >> 32)};
  return Rng(seq);
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PlacementInfeasibleError : Error {
  using Error::Error;
};

struct DimensionError : Error {
  using Error::Error;
};

// Carries the offending singular value so callers can report how degenerate
// the emitter geometry is.
struct RankDeficiencyError : Error {
  RankDeficiencyError(const std::string& what, double smallest_sv)
      : Error(what), smallest_singular_value(smallest_sv) {}
  double smallest_singular_value;
};

struct CoincidentPairError : Error {
  using Error::Error;
};

struct SingularMatrixError : Error {
  using Error::Error;
};

struct DurationError : Error {
  using Error::Error;
};

struct FlatPeakError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace wasncal

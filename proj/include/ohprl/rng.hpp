#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace ohprl {

// The engine is fully specified by the standard; the distributions below are
// written out so seeded streams match across standard library vendors.
using Rng = std::mt19937_64;

/// Uniform in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Uniform in [lo, hi).
double uniform(Rng& rng, double lo, double hi);

/// Standard normal via Box-Muller (one draw per call; no cached pair).
double standard_normal(Rng& rng);

/// rows x cols matrix of independent standard normals, filled column by column.
Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols);

/// Derives an independent child seed from a parent seed and a stream tag (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ohprl

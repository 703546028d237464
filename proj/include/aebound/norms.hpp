#pragma once

#include <cstddef>
#include <cstdint>

#include "aebound/matrix.hpp"

namespace aebound {

struct SpectralNorm {
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

inline constexpr double kPowerIterationTol = 1e-9;
inline constexpr std::size_t kPowerIterationMaxIter = 10000;
inline constexpr std::uint64_t kPowerIterationSeed = 0x5eed5eedULL;

/// Largest singular value by power iteration on W^T W from a seeded uniform
/// start vector. Stops once successive Rayleigh quotients differ by at most
/// `tol` relative; otherwise returns the last estimate with converged=false.
SpectralNorm spectral_norm(const Matrix& w, double tol = kPowerIterationTol,
                           std::size_t max_iter = kPowerIterationMaxIter,
                           std::uint64_t seed = kPowerIterationSeed);

double frobenius_norm(const Matrix& w);

}  // namespace aebound

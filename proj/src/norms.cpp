#include "aebound/norms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aebound/rng.hpp"

namespace aebound {

SpectralNorm spectral_norm(const Matrix& w, double tol, std::size_t max_iter, std::uint64_t seed) {
    if (w.empty()) throw std::invalid_argument("spectral_norm: empty matrix");
    if (!(tol > 0.0)) throw std::invalid_argument("spectral_norm: tol must be positive");
    if (max_iter == 0) throw std::invalid_argument("spectral_norm: max_iter must be positive");
    if (!w.all_finite()) throw std::invalid_argument("spectral_norm: matrix has non-finite entries");

    // Work on W / 2^k so that huge or tiny weights cannot overflow the
    // Rayleigh quotient; power-of-two scaling is exact.
    double max_abs = 0.0;
    for (double x : w.values()) max_abs = std::max(max_abs, std::abs(x));
    if (max_abs > 0.0 && (max_abs > 0x1p+100 || max_abs < 0x1p-100)) {
        const int k = std::ilogb(max_abs);
        Matrix scaled = w;
        for (double& x : scaled.values()) x = std::ldexp(x, -k);
        SpectralNorm out = spectral_norm(scaled, tol, max_iter, seed);
        out.value = std::ldexp(out.value, k);
        return out;
    }

    Rng rng(seed);
    Vector v(w.cols());
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    double n = norm2(v);
    for (double& x : v) x /= n;

    SpectralNorm out;
    double prev = -1.0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const Vector wv = w.apply(v);
        // Rayleigh quotient of W^T W at unit v.
        const double rayleigh = dot(wv, wv);
        out.value = std::sqrt(rayleigh);
        out.iterations = it;
        if (rayleigh == 0.0) {
            // v in the null space: either W == 0 or an unlucky start.
            if (frobenius_norm(w) == 0.0) {
                out.converged = true;
                return out;
            }
            for (double& x : v) x = rng.uniform(-1.0, 1.0);
            n = norm2(v);
            for (double& x : v) x /= n;
            prev = -1.0;
            continue;
        }
        if (prev >= 0.0 && std::abs(rayleigh - prev) <= tol * rayleigh) {
            out.converged = true;
            return out;
        }
        prev = rayleigh;
        v = w.apply_transposed(wv);
        n = norm2(v);
        for (double& x : v) x /= n;
    }
    return out;
}

double frobenius_norm(const Matrix& w) {
    double acc = 0.0;
    for (double x : w.values()) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace aebound

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pnrlab/math.hpp"

namespace pnrlab {

/// Thrown when a Fock-space truncation drops too much probability mass.
class InsufficientCutoffError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Real symmetric density matrix in a truncated Fock basis. Coherent
/// amplitudes are taken real and positive, so all states here are real.
struct DensityMatrix {
    int cutoff = 0;
    std::vector<double> data;  // row-major, (cutoff+1)^2

    int dim() const { return cutoff + 1; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * dim() + j]; }
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * dim() + j]; }

    double trace() const {
        double t = 0.0;
        for (int i = 0; i < dim(); ++i) t += at(i, i);
        return t;
    }

    double purity() const {
        double p = 0.0;
        for (int i = 0; i < dim(); ++i)
            for (int j = 0; j < dim(); ++j) p += at(i, j) * at(j, i);
        return p;
    }
};

namespace detail {

inline constexpr double kCutoffFailTail = 1e-8;

inline DensityMatrix zero_matrix(int cutoff) {
    if (cutoff < 0) throw std::invalid_argument("DensityMatrix cutoff must be >= 0");
    DensityMatrix dm;
    dm.cutoff = cutoff;
    dm.data.assign(static_cast<std::size_t>(cutoff + 1) * (cutoff + 1), 0.0);
    return dm;
}

}  // namespace detail

/// Smallest cutoff at which the Bose-Einstein tail of a thermal state with
/// this mean drops below 1e-10.
inline int thermal_auto_cutoff(double mean_n) {
    if (!std::isfinite(mean_n) || mean_n < 0.0)
        throw std::invalid_argument("thermal_auto_cutoff: mean_n must be finite and >= 0");
    if (mean_n == 0.0) return 16;
    // tail beyond cutoff c is (mean/(mean+1))^(c+1)
    const double ratio = std::log(mean_n / (mean_n + 1.0));
    const int c = static_cast<int>(std::ceil(-10.0 * std::log(10.0) / ratio)) + 1;
    return std::max(c, 16);
}

/// Thermal state: diagonal Bose-Einstein weights, renormalized to unit trace.
inline DensityMatrix thermal_state(double mean_n, int cutoff) {
    if (!std::isfinite(mean_n) || mean_n < 0.0)
        throw std::invalid_argument("thermal_state: mean_n must be finite and >= 0");
    DensityMatrix dm = detail::zero_matrix(cutoff);
    if (mean_n == 0.0) {
        dm.at(0, 0) = 1.0;
        return dm;
    }
    const double log_p = std::log(mean_n / (mean_n + 1.0));
    const double log_norm = -std::log(mean_n + 1.0);
    double sum = 0.0;
    for (int n = 0; n <= cutoff; ++n) {
        dm.at(n, n) = std::exp(log_norm + n * log_p);
        sum += dm.at(n, n);
    }
    if (1.0 - sum >= detail::kCutoffFailTail)
        throw InsufficientCutoffError("thermal_state: cutoff drops >= 1e-8 of the state");
    for (int n = 0; n <= cutoff; ++n) dm.at(n, n) /= sum;
    return dm;
}

/// Coherent state |alpha><alpha| with alpha = sqrt(mean_n): rank-one
/// projector with log-space Fock amplitudes, renormalized to unit trace.
inline DensityMatrix coherent_state(double mean_n, int cutoff) {
    if (!std::isfinite(mean_n) || mean_n < 0.0)
        throw std::invalid_argument("coherent_state: mean_n must be finite and >= 0");
    DensityMatrix dm = detail::zero_matrix(cutoff);
    if (mean_n == 0.0) {
        dm.at(0, 0) = 1.0;
        return dm;
    }
    std::vector<double> amp(static_cast<std::size_t>(cutoff) + 1);
    const double log_m = std::log(mean_n);
    double norm2 = 0.0;
    for (int n = 0; n <= cutoff; ++n) {
        amp[static_cast<std::size_t>(n)] =
            std::exp(-0.5 * mean_n + 0.5 * n * log_m - 0.5 * log_gamma(n + 1.0));
        norm2 += amp[static_cast<std::size_t>(n)] * amp[static_cast<std::size_t>(n)];
    }
    if (1.0 - norm2 >= detail::kCutoffFailTail)
        throw InsufficientCutoffError("coherent_state: cutoff drops >= 1e-8 of the state");
    const double inv = 1.0 / std::sqrt(norm2);
    for (auto& a : amp) a *= inv;
    for (int i = 0; i <= cutoff; ++i)
        for (int j = 0; j <= cutoff; ++j)
            dm.at(i, j) = amp[static_cast<std::size_t>(i)] * amp[static_cast<std::size_t>(j)];
    return dm;
}

/// Eigenvalues of a dense real symmetric matrix (row-major, dim x dim),
/// sorted ascending.
///
/// Cyclic Jacobi: sweeps of plane rotations until the off-diagonal Frobenius
/// norm falls below 1e-12. Quadratically convergent; ample for the <= 512
/// dimensional matrices used here.
inline std::vector<double> eigenvalues_symmetric(std::vector<double> m, int dim) {
    if (dim < 1 || m.size() != static_cast<std::size_t>(dim) * dim)
        throw std::invalid_argument("eigenvalues_symmetric: bad dimensions");
    auto at = [&m, dim](int i, int j) -> double& {
        return m[static_cast<std::size_t>(i) * dim + j];
    };

    auto off_norm = [&]() {
        double s = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j) s += 2.0 * at(i, j) * at(i, j);
        return std::sqrt(s);
    };

    constexpr double kTol = 1e-12;
    constexpr int kMaxSweeps = 64;
    for (int sweep = 0; sweep < kMaxSweeps && off_norm() > kTol; ++sweep) {
        for (int p = 0; p < dim - 1; ++p) {
            for (int q = p + 1; q < dim; ++q) {
                const double apq = at(p, q);
                if (apq == 0.0) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < dim; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < dim; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    if (off_norm() > kTol)
        throw std::runtime_error("eigenvalues_symmetric: Jacobi failed to converge");

    std::vector<double> eig(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) eig[static_cast<std::size_t>(i)] = at(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

inline std::vector<double> eigenvalues_symmetric(const DensityMatrix& dm) {
    return eigenvalues_symmetric(dm.data, dm.dim());
}

/// Minimum error probability for discriminating a thermal and a coherent
/// state of equal mean photon number: 0.5 - 0.25 * ||rho_th - rho_coh||_1,
/// with the trace norm computed from the eigenvalues of the difference.
inline double helstrom_error(double mean_n, int cutoff) {
    const DensityMatrix th = thermal_state(mean_n, cutoff);
    const DensityMatrix coh = coherent_state(mean_n, cutoff);
    std::vector<double> diff(th.data.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = th.data[i] - coh.data[i];
    const std::vector<double> eig = eigenvalues_symmetric(std::move(diff), th.dim());
    double trace_norm = 0.0;
    for (double lambda : eig) trace_norm += std::fabs(lambda);
    return 0.5 - 0.25 * trace_norm;
}

}  // namespace pnrlab

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sbr/error.hpp"
#include "sbr/parallel.hpp"
#include "sbr/transport.hpp"

namespace sbr {

inline constexpr double kSpeedOfLight = 299792458.0;

/// How the propagation phase of a record is formed.
///   RoundTrip:  k * (R + return_path), the full launch-plane-to-launch-plane path.
///   DoublePath: 2 k R. Identical for single-bounce rays; incoherent across multi-bounce
///               returns whose exit points sit at different depths (e.g. a dihedral).
enum class PhaseModel { RoundTrip, DoublePath };

struct ScatterParams {
    double frequency = 0;   // Hz
    double wavelength = 0;  // m
    double wavenumber = 0;  // rad/m
    double gamma = -1.0;    // scalar reflection coefficient per bounce
    double cell_area = 0;   // m^2, the ray-tube weight
    PhaseModel phase = PhaseModel::RoundTrip;
    bool count_trapped = false;  // keep rays that end inside the target after B_max bounces
    bool tube_integration = true;  // integrate the linear phase across each tube instead of point sampling

    static ScatterParams from_wavelength(double lambda, double cell_area) {
        ScatterParams p;
        p.wavelength = lambda;
        p.frequency = kSpeedOfLight / lambda;
        p.wavenumber = 2.0 * std::numbers::pi / lambda;
        p.cell_area = cell_area;
        return p;
    }

    static ScatterParams from_frequency(double hz, double cell_area) {
        ScatterParams p = from_wavelength(kSpeedOfLight / hz, cell_area);
        p.frequency = hz;
        return p;
    }
};

using ComplexAmp = std::complex<double>;

namespace detail {

inline constexpr std::size_t kReductionBlock = 256;

inline ComplexAmp pairwise(std::span<const ComplexAmp> v) {
    if (v.size() <= 8) {
        ComplexAmp s{};
        for (const auto& x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise(v.first(half)) + pairwise(v.subspan(half));
}

}  // namespace detail

/// Pairwise (tree) sum with a fixed split pattern, so the rounding is a pure function of the input.
inline ComplexAmp pairwise_sum(std::span<const ComplexAmp> values) { return detail::pairwise(values); }

/// sin(x)/x, with 0 for non-finite arguments (a tube seen exactly edge-on).
inline double sinc(double x) {
    if (!std::isfinite(x)) return 0.0;
    if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
    return std::sin(x) / x;
}

/// Average of exp(-j phase) over a square tube of side ds whose phase varies linearly with
/// slopes (k slope_u, k slope_v) across it.
inline double tube_factor(double k, double spacing, double slope_u, double slope_v) {
    return sinc(0.5 * k * slope_u * spacing) * sinc(0.5 * k * slope_v * spacing);
}

template <typename Real>
bool contributes(const HitRecord<Real>& r, const Vec3d& k_inc, const ScatterParams& p) {
    if (!r.valid || (r.trapped && !p.count_trapped)) return false;
    return dot(Vec3d(r.normal), -k_inc) > 0.0;
}

/// Coherent physical-optics backscatter amplitude
///   A = (j k dA / 4 pi) * sum_i 2 (n_i . -k) Gamma^N_i exp(-j phase_i) T_i
/// over contributing records, where T_i is the tube factor (1 when tube integration is off).
/// Terms are reduced in fixed blocks of record-index order and the block sums combined
/// pairwise, which keeps the result bit-identical for any worker count.
template <typename Real>
ComplexAmp accumulate(std::span<const HitRecord<Real>> records, const Vec3d& k_inc, const ScatterParams& p,
                      unsigned workers = 1) {
    const std::size_t blocks = (records.size() + detail::kReductionBlock - 1) / detail::kReductionBlock;
    std::vector<ComplexAmp> partial(blocks);
    const double k = p.wavenumber;
    const double spacing = std::sqrt(p.cell_area);

    parallel_for(blocks, workers, [&](std::size_t b) {
        std::array<ComplexAmp, detail::kReductionBlock> terms{};
        const std::size_t begin = b * detail::kReductionBlock;
        const std::size_t end = std::min(records.size(), begin + detail::kReductionBlock);
        for (std::size_t i = begin; i < end; ++i) {
            const HitRecord<Real>& r = records[i];
            ComplexAmp& term = terms[i - begin];
            if (!contributes(r, k_inc, p)) continue;
            const double cosine = dot(Vec3d(r.normal), -k_inc);
            const double phase = p.phase == PhaseModel::RoundTrip
                                     ? k * (static_cast<double>(r.path) + static_cast<double>(r.return_path))
                                     : 2.0 * k * static_cast<double>(r.path);
            double weight = 2.0 * cosine * std::pow(p.gamma, static_cast<int>(r.bounces));
            if (p.tube_integration)
                weight *= tube_factor(k, spacing, static_cast<double>(r.slope_u), static_cast<double>(r.slope_v));
            term = ComplexAmp(weight * std::cos(phase), -weight * std::sin(phase));
            if (!std::isfinite(term.real()) || !std::isfinite(term.imag()))
                throw NumericalError("non-finite scattering term at record " + std::to_string(i));
        }
        partial[b] = pairwise_sum(std::span<const ComplexAmp>(terms.data(), end - begin));
    });

    const ComplexAmp scale(0.0, k * p.cell_area / (4.0 * std::numbers::pi));
    const ComplexAmp a = scale * pairwise_sum(partial);
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) throw NumericalError("scattering amplitude overflowed");
    return a;
}

struct RcsValue {
    double sigma = 0;  // m^2
    double dbsm = -std::numeric_limits<double>::infinity();
};

inline double to_dbsm(double sigma) {
    return sigma > 0 ? 10.0 * std::log10(sigma) : -std::numeric_limits<double>::infinity();
}

/// sigma = 4 pi |A|^2
inline RcsValue rcs(ComplexAmp a) {
    const double sigma = 4.0 * std::numbers::pi * (a.real() * a.real() + a.imag() * a.imag());
    return {sigma, to_dbsm(sigma)};
}

/// Normal-incidence PO cross section of a square PEC plate of side a: 4 pi a^4 / lambda^2.
inline double plate_reference(double side, double lambda) {
    return 4.0 * std::numbers::pi * std::pow(side, 4) / (lambda * lambda);
}

}  // namespace sbr

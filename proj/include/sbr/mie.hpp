#pragma once

// Exact monostatic cross section of a perfectly conducting sphere (Mie series).
//
// Time convention e^{+j omega t}: outgoing waves use the spherical Hankel function of the
// second kind h_n = j_n - j y_n. With Riccati functions psi_n = x j_n, xi_n = x h_n the PEC
// coefficients are a_n = psi_n / xi_n and b_n = psi_n' / xi_n', and
//   sigma = lambda^2 / (4 pi) * | sum_n (-1)^n (2n + 1) (b_n - a_n) |^2.
// The magnitude does not depend on the convention.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "sbr/error.hpp"

namespace sbr {

inline constexpr double kMaxMieSize = 1e5;

/// Wiscombe-style truncation order ceil(x + 4 x^(1/3) + 2).
inline int mie_truncation_order(double x) { return static_cast<int>(std::ceil(x + 4.0 * std::cbrt(x) + 2.0)); }

/// Spherical Bessel j_0..j_n_max by normalised downward (Miller) recurrence.
inline std::vector<double> spherical_bessel_j(double x, int n_max) {
    // start above both n_max and x: below x the recurrence is oscillatory and forgets nothing
    const int top = std::max(n_max, static_cast<int>(std::ceil(x)));
    const int start = top + 16 + 4 * static_cast<int>(std::ceil(std::cbrt(x))) + static_cast<int>(std::sqrt(x));
    std::vector<double> j(static_cast<std::size_t>(n_max) + 1);
    double next = 0.0, cur = 1e-300;
    for (int n = start; n >= 0; --n) {
        // cur = f_n, next = f_{n+1};  f_{n-1} = (2n + 1)/x f_n - f_{n+1}
        if (n <= n_max) j[static_cast<std::size_t>(n)] = cur;
        const double prev = (2.0 * n + 1.0) / x * cur - next;
        next = cur;
        cur = prev;
        if (std::abs(cur) > 1e250) {
            cur *= 1e-250;
            next *= 1e-250;
            for (int m = n; m <= n_max; ++m) j[static_cast<std::size_t>(m)] *= 1e-250;
        }
    }
    const double j0 = std::sin(x) / x;
    const double j1 = std::sin(x) / (x * x) - std::cos(x) / x;
    const double scale = std::abs(j0) >= std::abs(j1) ? j0 / j[0] : j1 / j[1];
    for (auto& v : j) v *= scale;
    return j;
}

/// Spherical Bessel y_0..y_n_max by upward recurrence; entries past an overflow are infinite.
inline std::vector<double> spherical_bessel_y(double x, int n_max) {
    std::vector<double> y(static_cast<std::size_t>(n_max) + 1, -std::numeric_limits<double>::infinity());
    y[0] = -std::cos(x) / x;
    if (n_max >= 1) y[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
    for (int n = 1; n < n_max; ++n) {
        const double v = (2.0 * n + 1.0) / x * y[static_cast<std::size_t>(n)] - y[static_cast<std::size_t>(n) - 1];
        if (!std::isfinite(v)) break;
        y[static_cast<std::size_t>(n) + 1] = v;
    }
    return y;
}

struct MieResult {
    double sigma = 0;        // m^2
    int terms = 0;           // orders summed
    std::complex<double> series{};
};

/// Backscatter of a PEC sphere of radius r at electrical size x = k r. Sums at least to the
/// Wiscombe order and continues until the last term is below 1e-12 of the partial sum.
inline MieResult mie_backscatter_pec_detail(double x, double radius, int min_order = 0) {
    if (!(x > 0) || x > kMaxMieSize) throw ConfigError("Mie electrical size must be in (0, 1e5]");
    if (!(radius > 0)) throw ConfigError("Mie radius must be positive");

    const int n_min = std::max(mie_truncation_order(x), min_order);
    const int n_cap = n_min + 40 + static_cast<int>(6.0 * std::cbrt(x));
    const std::vector<double> j = spherical_bessel_j(x, n_cap);
    const std::vector<double> y = spherical_bessel_y(x, n_cap);

    std::complex<double> sum{};
    double last = 0;
    int n = 1;
    for (; n <= n_cap; ++n) {
        const auto un = static_cast<std::size_t>(n);
        if (!std::isfinite(y[un])) break;  // y_n overflowed: a_n, b_n are zero to working precision
        const std::complex<double> h(j[un], -y[un]);
        const std::complex<double> h_prev(j[un - 1], -y[un - 1]);
        const double psi = x * j[un];
        const double dpsi = x * j[un - 1] - n * j[un];
        const std::complex<double> xi = x * h;
        const std::complex<double> dxi = x * h_prev - static_cast<double>(n) * h;
        const std::complex<double> an = psi / xi;
        const std::complex<double> bn = dpsi / dxi;
        const std::complex<double> term = (n % 2 == 0 ? 1.0 : -1.0) * (2.0 * n + 1.0) * (bn - an);
        sum += term;
        last = std::abs(term);
        if (n >= n_min && last <= 1e-12 * std::abs(sum)) break;
    }
    if (n > n_cap)
        throw NumericalError("Mie series did not converge at x = " + std::to_string(x) +
                             " (last term " + std::to_string(last) + ")");

    const double lambda = 2.0 * std::numbers::pi * radius / x;
    return {lambda * lambda / (4.0 * std::numbers::pi) * std::norm(sum), std::min(n, n_cap), sum};
}

inline double mie_backscatter_pec(double x, double radius) { return mie_backscatter_pec_detail(x, radius).sigma; }

}  // namespace sbr

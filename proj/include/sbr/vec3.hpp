#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace sbr {

/// Plain 3-vector used for positions (m), directions and normals.
template <typename Real>
struct Vec3 {
    Real x{0}, y{0}, z{0};

    constexpr Vec3() = default;
    constexpr Vec3(Real x_, Real y_, Real z_) : x(x_), y(y_), z(z_) {}

    template <typename Other>
    constexpr explicit Vec3(const Vec3<Other>& o)
        : x(static_cast<Real>(o.x)), y(static_cast<Real>(o.y)), z(static_cast<Real>(o.z)) {}

    constexpr Real operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr Real& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(Real s) { x *= s; y *= s; z *= s; return *this; }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator*(Vec3 a, Real s) { return a *= s; }
    friend constexpr Vec3 operator*(Real s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator/(const Vec3& a, Real s) { return {a.x / s, a.y / s, a.z / s}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

template <typename Real>
constexpr Real dot(const Vec3<Real>& a, const Vec3<Real>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename Real>
constexpr Vec3<Real> cross(const Vec3<Real>& a, const Vec3<Real>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename Real>
Real length(const Vec3<Real>& a) {
    return std::sqrt(dot(a, a));
}

template <typename Real>
Vec3<Real> normalize(const Vec3<Real>& a) {
    return a / length(a);
}

template <typename Real>
constexpr Vec3<Real> min(const Vec3<Real>& a, const Vec3<Real>& b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}

template <typename Real>
constexpr Vec3<Real> max(const Vec3<Real>& a, const Vec3<Real>& b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

template <typename Real>
bool is_finite(const Vec3<Real>& a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

using Vec3d = Vec3<double>;
using Vec3f = Vec3<float>;

}  // namespace sbr

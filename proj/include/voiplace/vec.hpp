#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace voiplace {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    // Component-wise product.
    Vec3 scaled(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }

    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Lexicographic order on (x, y, z); used for deterministic tie-breaking.
inline bool lex_less(const Vec3& a, const Vec3& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
}

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int r, int c) const { return m[r * 3 + c]; }
    double& operator()(int r, int c) { return m[r * 3 + c]; }

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    // R^T v; for rotation matrices this is the inverse transform.
    Vec3 apply_transposed(const Vec3& v) const {
        return {m[0] * v.x + m[3] * v.y + m[6] * v.z,
                m[1] * v.x + m[4] * v.y + m[7] * v.z,
                m[2] * v.x + m[5] * v.y + m[8] * v.z};
    }

    Mat3 multiply(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }
};

// Intrinsic Z-Y-X Euler rotation: R = Rz(az) * Ry(ay) * Rx(ax).
// Columns are the box axes expressed in world coordinates.
inline Mat3 rotation_zyx(const Vec3& angles) {
    const double cz = std::cos(angles.x), sz = std::sin(angles.x);
    const double cy = std::cos(angles.y), sy = std::sin(angles.y);
    const double cx = std::cos(angles.z), sx = std::sin(angles.z);
    // angles = (az, ay, ax) stored x->az, y->ay, z->ax
    Mat3 r;
    r.m = {cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
           sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
           -sy,     cy * sx,                cy * cx};
    return r;
}

// Normalize an angle to (-pi, pi].
inline double normalize_angle(double a) {
    constexpr double pi = 3.14159265358979323846;
    a = std::remainder(a, 2 * pi);
    if (a <= -pi) a += 2 * pi;
    return a;
}

inline double deg_to_rad(double d) { return d * 3.14159265358979323846 / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / 3.14159265358979323846; }

}  // namespace voiplace

#pragma once

#include <cmath>

namespace rehab {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x; y += o.y; z += o.z;
        return *this;
    }
    bool operator==(const Vec3& o) const {
        return x == o.x && y == o.y && z == o.z;
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z,
            a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    return n > 0.0 ? v * (1.0 / n) : Vec3{};
}

constexpr double kPi = 3.14159265358979323846;

inline double deg_from_rad(double r) { return r * (180.0 / kPi); }
inline double rad_from_deg(double d) { return d * (kPi / 180.0); }

// Rodrigues rotation of v about a unit axis by the given angle.
inline Vec3 rotate_about_axis(const Vec3& v, const Vec3& unit_axis,
                              double angle_rad) {
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    return v * c + cross(unit_axis, v) * s + unit_axis * (dot(unit_axis, v) * (1.0 - c));
}

struct Mat3 {
    // Row-major.
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    Vec3 operator*(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
};

inline Mat3 rotation_from_axis_angle(const Vec3& unit_axis, double angle_rad) {
    Mat3 r;
    Vec3 ex = rotate_about_axis({1, 0, 0}, unit_axis, angle_rad);
    Vec3 ey = rotate_about_axis({0, 1, 0}, unit_axis, angle_rad);
    Vec3 ez = rotate_about_axis({0, 0, 1}, unit_axis, angle_rad);
    r.m[0][0] = ex.x; r.m[0][1] = ey.x; r.m[0][2] = ez.x;
    r.m[1][0] = ex.y; r.m[1][1] = ey.y; r.m[1][2] = ez.y;
    r.m[2][0] = ex.z; r.m[2][1] = ey.z; r.m[2][2] = ez.z;
    return r;
}

}  // namespace rehab

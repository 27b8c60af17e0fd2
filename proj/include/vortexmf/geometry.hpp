#pragma once

#include <cmath>

namespace vortexmf {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    // Rotation by +pi/2: (x, y) -> (-y, x).
    Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// 2x2 matrix, row-major.
struct Mat2 {
    double a00 = 0.0, a01 = 0.0, a10 = 0.0, a11 = 0.0;

    Mat2() = default;
    Mat2(double m00, double m01, double m10, double m11)
        : a00(m00), a01(m01), a10(m10), a11(m11) {}

    Mat2 operator+(const Mat2& o) const {
        return {a00 + o.a00, a01 + o.a01, a10 + o.a10, a11 + o.a11};
    }
    Mat2 operator-(const Mat2& o) const {
        return {a00 - o.a00, a01 - o.a01, a10 - o.a10, a11 - o.a11};
    }
    Mat2 operator*(double s) const { return {a00 * s, a01 * s, a10 * s, a11 * s}; }
    Mat2& operator+=(const Mat2& o) {
        a00 += o.a00; a01 += o.a01; a10 += o.a10; a11 += o.a11;
        return *this;
    }

    Vec2 apply(const Vec2& v) const { return {a00 * v.x + a01 * v.y, a10 * v.x + a11 * v.y}; }
    double trace() const { return a00 + a11; }
    double frobenius2() const { return a00 * a00 + a01 * a01 + a10 * a10 + a11 * a11; }
    // Frobenius inner product A : B.
    double contract(const Mat2& o) const {
        return a00 * o.a00 + a01 * o.a01 + a10 * o.a10 + a11 * o.a11;
    }
    double maxAbs() const {
        return std::max(std::max(std::abs(a00), std::abs(a01)),
                        std::max(std::abs(a10), std::abs(a11)));
    }
    static Mat2 outer(const Vec2& u, const Vec2& v) {
        return {u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y};
    }
    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
};

inline Mat2 operator*(double s, const Mat2& m) { return m * s; }

}  // namespace vortexmf

// Minimal 3x3 matrix for planar projective transforms.
#pragma once

#include <cmath>

#include "segprop/common.hpp"

namespace segprop {

struct Mat3 {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    static Mat3 identity() { return Mat3{}; }

    static Mat3 translation(double tx, double ty) {
        Mat3 r;
        r.m[0][2] = tx;
        r.m[1][2] = ty;
        return r;
    }

    static Mat3 rotation(double theta) {
        Mat3 r;
        r.m[0][0] = std::cos(theta);
        r.m[0][1] = -std::sin(theta);
        r.m[1][0] = std::sin(theta);
        r.m[1][1] = std::cos(theta);
        return r;
    }

    static Mat3 scale(double sx, double sy) {
        Mat3 r;
        r.m[0][0] = sx;
        r.m[1][1] = sy;
        return r;
    }

    static Mat3 perspective(double gx, double gy) {
        Mat3 r;
        r.m[2][0] = gx;
        r.m[2][1] = gy;
        return r;
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += m[i][k] * o.m[k][j];
                r.m[i][j] = s;
            }
        return r;
    }

    double det() const {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }

    Mat3 inverse() const {
        double d = det();
        if (std::abs(d) < 1e-300) throw Error("Mat3: singular matrix");
        Mat3 r;
        r.m[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
        r.m[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
        r.m[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
        r.m[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
        r.m[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
        r.m[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
        r.m[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
        r.m[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
        r.m[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
        return r;
    }

    /// Projective application to a 2D point.
    void apply(double x, double y, double& ox, double& oy) const {
        double w = m[2][0] * x + m[2][1] * y + m[2][2];
        ox = (m[0][0] * x + m[0][1] * y + m[0][2]) / w;
        oy = (m[1][0] * x + m[1][1] * y + m[1][2]) / w;
    }
};

}  // namespace segprop

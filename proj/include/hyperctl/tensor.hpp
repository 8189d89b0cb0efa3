#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace hyperctl {

// Dense row-major fields. Dimensions are small enough (<= a few 1e7
// entries) that plain vectors beat anything fancier.

class Field1 {
public:
    Field1() = default;
    explicit Field1(int n0, double fill = 0.0) : n0_(n0), d_(static_cast<size_t>(n0), fill) {}

    int n0() const { return n0_; }
    double& operator()(int i) { return d_[static_cast<size_t>(i)]; }
    const double& operator()(int i) const { return d_[static_cast<size_t>(i)]; }
    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }
    size_t size() const { return d_.size(); }

private:
    int n0_ = 0;
    std::vector<double> d_;
};

class Field2 {
public:
    Field2() = default;
    Field2(int n0, int n1, double fill = 0.0)
        : n0_(n0), n1_(n1), d_(static_cast<size_t>(n0) * n1, fill) {}

    int n0() const { return n0_; }
    int n1() const { return n1_; }
    double& operator()(int i, int j) { return d_[static_cast<size_t>(i) * n1_ + j]; }
    const double& operator()(int i, int j) const { return d_[static_cast<size_t>(i) * n1_ + j]; }
    double* row(int i) { return d_.data() + static_cast<size_t>(i) * n1_; }
    const double* row(int i) const { return d_.data() + static_cast<size_t>(i) * n1_; }
    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }
    size_t size() const { return d_.size(); }

private:
    int n0_ = 0, n1_ = 0;
    std::vector<double> d_;
};

class Field3 {
public:
    Field3() = default;
    Field3(int n0, int n1, int n2, double fill = 0.0)
        : n0_(n0), n1_(n1), n2_(n2), d_(static_cast<size_t>(n0) * n1 * n2, fill) {}

    int n0() const { return n0_; }
    int n1() const { return n1_; }
    int n2() const { return n2_; }
    double& operator()(int i, int j, int k) {
        return d_[(static_cast<size_t>(i) * n1_ + j) * n2_ + k];
    }
    const double& operator()(int i, int j, int k) const {
        return d_[(static_cast<size_t>(i) * n1_ + j) * n2_ + k];
    }
    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }
    size_t size() const { return d_.size(); }

private:
    int n0_ = 0, n1_ = 0, n2_ = 0;
    std::vector<double> d_;
};

class Field4 {
public:
    Field4() = default;
    Field4(int n0, int n1, int n2, int n3, double fill = 0.0)
        : n0_(n0), n1_(n1), n2_(n2), n3_(n3),
          d_(static_cast<size_t>(n0) * n1 * n2 * n3, fill) {}

    int n0() const { return n0_; }
    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int n3() const { return n3_; }
    double& operator()(int i, int j, int k, int l) {
        return d_[((static_cast<size_t>(i) * n1_ + j) * n2_ + k) * n3_ + l];
    }
    const double& operator()(int i, int j, int k, int l) const {
        return d_[((static_cast<size_t>(i) * n1_ + j) * n2_ + k) * n3_ + l];
    }
    // Pointer to the (eta, zeta) plane at fixed (i, j); contiguous n2*n3 block.
    double* plane(int i, int j) {
        return d_.data() + (static_cast<size_t>(i) * n1_ + j) * n2_ * n3_;
    }
    const double* plane(int i, int j) const {
        return d_.data() + (static_cast<size_t>(i) * n1_ + j) * n2_ * n3_;
    }
    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }
    size_t size() const { return d_.size(); }

private:
    int n0_ = 0, n1_ = 0, n2_ = 0, n3_ = 0;
    std::vector<double> d_;
};

// Uniform axis: node k at x0 + k*dx.
struct Axis {
    double x0 = 0.0;
    double dx = 1.0;
    int n = 0;

    double operator[](int k) const { return x0 + k * dx; }
    double back() const { return x0 + (n - 1) * dx; }

    // Locate t for interpolation: i in [0, n-2], w in [0,1] with
    // t ~ (1-w)*node[i] + w*node[i+1]. Clamps outside the axis, so
    // evaluation linearly extrapolates at the ends.
    void locate(double t, int& i, double& w) const {
        double s = (t - x0) / dx;
        i = static_cast<int>(std::floor(s));
        if (i < 0) i = 0;
        if (i > n - 2) i = n - 2;
        w = s - i;
    }

    double lerp(const double* values, double t) const {
        if (n == 1) return values[0];
        int i;
        double w;
        locate(t, i, w);
        return (1.0 - w) * values[i] + w * values[i + 1];
    }

    // Same but for strided data (stride in doubles).
    double lerp_strided(const double* values, size_t stride, double t) const {
        if (n == 1) return values[0];
        int i;
        double w;
        locate(t, i, w);
        return (1.0 - w) * values[static_cast<size_t>(i) * stride] +
               w * values[static_cast<size_t>(i + 1) * stride];
    }
};

// Endpoint-inclusive axis on [0,1] with n nodes.
inline Axis space_axis(int n) { return Axis{0.0, n > 1 ? 1.0 / (n - 1) : 1.0, n}; }

// Cell-centered axis on [0,1] with n nodes: node k at (k + 1/2)/n.
// Midpoint quadrature weight is 1/n per node.
inline Axis ensemble_axis(int n) { return Axis{0.5 / n, 1.0 / n, n}; }

// Trapezoid weights for an endpoint axis.
inline std::vector<double> trapezoid_weights(const Axis& ax) {
    std::vector<double> w(static_cast<size_t>(ax.n), ax.dx);
    if (ax.n >= 2) {
        w.front() = 0.5 * ax.dx;
        w.back() = 0.5 * ax.dx;
    } else {
        w.front() = 1.0;
    }
    return w;
}

}  // namespace hyperctl

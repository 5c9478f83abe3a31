#include "fgfpca/bspline.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "fgfpca/errors.hpp"

namespace fgfpca {

namespace {

// Uniform cubic B-spline pieces; t is the position inside the knot interval.
inline void cardinal_cubic(double t, double out[4])
{
    const double s = 1.0 - t;
    out[0] = s * s * s / 6.0;
    out[1] = (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0;
    out[2] = (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0;
    out[3] = t * t * t / 6.0;
}

} // namespace

BSplineBasis::BSplineBasis(double lo, double hi, int size, bool periodic)
    : lo_(lo), hi_(hi), size_(size), periodic_(periodic)
{
    if (!(hi > lo)) throw ConfigError("spline basis needs hi > lo");
    spacing_ = periodic ? (hi - lo) / size : (hi - lo) / (size - 3);
}

BSplineBasis BSplineBasis::open(double lo, double hi, int n_interior_knots)
{
    if (n_interior_knots < 0) throw ConfigError("number of interior knots must be >= 0");
    return {lo, hi, n_interior_knots + 4, false};
}

BSplineBasis BSplineBasis::periodic(double lo, double hi, int segments)
{
    if (segments < 4) throw ConfigError("periodic cubic basis needs at least 4 segments");
    return {lo, hi, segments, true};
}

Eigen::MatrixXd BSplineBasis::design(std::span<const double> x) const
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), size_);
    double w[4];
    for (std::size_t i = 0; i < x.size(); ++i) {
        double u = (x[i] - lo_) / spacing_;
        if (periodic_) {
            u = std::fmod(u, static_cast<double>(size_));
            if (u < 0) u += size_;
            auto s = static_cast<int>(std::floor(u));
            if (s >= size_) s = size_ - 1;
            cardinal_cubic(u - s, w);
            for (int q = 0; q < 4; ++q) out(static_cast<Eigen::Index>(i), (s + q) % size_) += w[q];
        } else {
            const int n_intervals = size_ - 3;
            int s = static_cast<int>(std::floor(u));
            if (s < 0) s = 0;
            if (s > n_intervals - 1) s = n_intervals - 1;
            cardinal_cubic(u - s, w);
            for (int q = 0; q < 4; ++q) out(static_cast<Eigen::Index>(i), s + q) = w[q];
        }
    }
    return out;
}

Eigen::MatrixXd BSplineBasis::difference_penalty(int order) const
{
    const Eigen::MatrixXd d = difference_matrix(order);
    return d.transpose() * d;
}

Eigen::MatrixXd BSplineBasis::difference_matrix(int order) const
{
    Eigen::VectorXd stencil = Eigen::VectorXd::Ones(1);
    for (int o = 0; o < order; ++o) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(stencil.size() + 1);
        next.head(stencil.size()) -= stencil;
        next.tail(stencil.size()) += stencil;
        stencil = next;
    }
    const int rows = periodic_ ? size_ : size_ - order;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows, size_);
    for (int r = 0; r < rows; ++r)
        for (int q = 0; q < stencil.size(); ++q) d(r, (r + q) % size_) += stencil(q);
    return d;
}

PenalizedSmoother::PenalizedSmoother(const Eigen::MatrixXd& design, const Eigen::MatrixXd& penalty)
{
    const Eigen::MatrixXd btb = design.transpose() * design;
    Eigen::LLT<Eigen::MatrixXd> llt(btb);
    const double scale = btb.diagonal().maxCoeff();
    if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 1e-7 * std::sqrt(scale))
        throw NumericalError("spline design is rank deficient: use more bins or fewer knots");
    const Eigen::MatrixXd l = llt.matrixL();
    const Eigen::MatrixXd linv = l.triangularView<Eigen::Lower>().solve(
        Eigen::MatrixXd::Identity(l.rows(), l.cols()));
    Eigen::MatrixXd m = linv * penalty * linv.transpose();
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
    basis_ = design * linv.transpose() * eig.eigenvectors();
}

Eigen::MatrixXd PenalizedSmoother::smoother_matrix(double lambda) const
{
    const Eigen::VectorXd shrink = (1.0 + lambda * eigenvalues_.array()).inverse();
    return basis_ * shrink.asDiagonal() * basis_.transpose();
}

double PenalizedSmoother::trace(double lambda) const
{
    return (1.0 + lambda * eigenvalues_.array()).inverse().sum();
}

Eigen::MatrixXd PenalizedSmoother::smooth_rows(const Eigen::MatrixXd& rows, double lambda) const
{
    const Eigen::VectorXd shrink = (1.0 + lambda * eigenvalues_.array()).inverse();
    return (rows * basis_) * shrink.asDiagonal() * basis_.transpose();
}

namespace {

struct GcvTerms {
    double total_ss;
    double projected_ss;
    Eigen::VectorXd component_ss;
    double n_rows;
    double n_points;
};

double gcv_score(const GcvTerms& g, const Eigen::VectorXd& eigenvalues, double lambda)
{
    double rss = g.total_ss - g.projected_ss;
    double tr = 0.0;
    for (Eigen::Index d = 0; d < eigenvalues.size(); ++d) {
        const double keep = 1.0 / (1.0 + lambda * eigenvalues(d));
        rss += (1.0 - keep) * (1.0 - keep) * g.component_ss(d);
        tr += keep;
    }
    const double denom = 1.0 - tr / g.n_points;
    if (denom <= 0) return std::numeric_limits<double>::infinity();
    return std::max(rss, 0.0) / (g.n_rows * g.n_points) / (denom * denom);
}

} // namespace

double PenalizedSmoother::gcv(const Eigen::MatrixXd& rows, double lambda) const
{
    const Eigen::MatrixXd q = rows * basis_;
    const GcvTerms g{rows.squaredNorm(), q.squaredNorm(), q.colwise().squaredNorm().transpose(),
                     static_cast<double>(rows.rows()), static_cast<double>(rows.cols())};
    return gcv_score(g, eigenvalues_, lambda);
}

PenalizedSmoother::Selection PenalizedSmoother::select(const Eigen::MatrixXd& rows, double log_lower,
                                                       double log_upper) const
{
    const Eigen::MatrixXd q = rows * basis_;
    const GcvTerms g{rows.squaredNorm(), q.squaredNorm(), q.colwise().squaredNorm().transpose(),
                     static_cast<double>(rows.rows()), static_cast<double>(rows.cols())};
    auto score = [&](double log_lambda) { return gcv_score(g, eigenvalues_, std::exp(log_lambda)); };

    constexpr int grid = 60;
    double best_x = log_lower;
    double best_f = std::numeric_limits<double>::infinity();
    int best_i = -1;
    const double step = (log_upper - log_lower) / grid;
    for (int i = 0; i <= grid; ++i) {
        const double x = log_lower + i * step;
        const double f = score(x);
        if (std::isfinite(f) && f < best_f) {
            best_f = f;
            best_x = x;
            best_i = i;
        }
    }
    if (best_i < 0) return {0.5 * (log_lower + log_upper), std::numeric_limits<double>::quiet_NaN(), true};

    double a = std::max(log_lower, best_x - step);
    double b = std::min(log_upper, best_x + step);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = score(c);
    double fd = score(d);
    for (int it = 0; it < 60 && b - a > 1e-6; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = score(d);
        }
    }
    const double x = 0.5 * (a + b);
    const double f = score(x);
    if (std::isfinite(f) && f <= best_f) return {x, f, false};
    return {best_x, best_f, false};
}

GaussHermiteRule gauss_hermite(int n)
{
    if (n < 1) throw ConfigError("quadrature needs at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        jacobi(k, k - 1) = std::sqrt(k / 2.0);
        jacobi(k - 1, k) = jacobi(k, k - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    GaussHermiteRule rule;
    rule.nodes = eig.eigenvalues();
    rule.weights.resize(n);
    rule.log_adjusted_weights.resize(n);
    for (int q = 0; q < n; ++q) {
        const double v = eig.eigenvectors()(0, q);
        rule.weights(q) = std::sqrt(std::numbers::pi) * v * v;
        rule.log_adjusted_weights(q) = std::log(rule.weights(q)) + rule.nodes(q) * rule.nodes(q);
    }
    return rule;
}

} // namespace fgfpca

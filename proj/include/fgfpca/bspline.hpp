#pragma once

#include <span>

#include <Eigen/Dense>

namespace fgfpca {

/// Uniform cubic B-spline basis, either open on [lo, hi] or periodic with
/// period `hi - lo`.
///
/// Open bases use n_interior equally spaced interior knots and have
/// n_interior + 4 functions; evaluation outside [lo, hi] continues the end
/// polynomial pieces. Periodic bases have `segments` functions, one per knot
/// interval.
class BSplineBasis {
public:
    static BSplineBasis open(double lo, double hi, int n_interior_knots);
    static BSplineBasis periodic(double lo, double hi, int segments);

    [[nodiscard]] int size() const { return size_; }
    [[nodiscard]] bool is_periodic() const { return periodic_; }
    [[nodiscard]] double lower() const { return lo_; }
    [[nodiscard]] double upper() const { return hi_; }

    /// Row i holds all basis functions at x[i].
    [[nodiscard]] Eigen::MatrixXd design(std::span<const double> x) const;

    /// D'D for the difference operator of the given order (cyclic when periodic).
    [[nodiscard]] Eigen::MatrixXd difference_penalty(int order = 2) const;
    /// D with difference_penalty = D'D.
    [[nodiscard]] Eigen::MatrixXd difference_matrix(int order = 2) const;

    /// Dimension of the penalty null space.
    [[nodiscard]] int penalty_null_dim(int order = 2) const { return periodic_ ? 1 : order; }

private:
    BSplineBasis(double lo, double hi, int size, bool periodic);

    double lo_;
    double hi_;
    int size_;
    bool periodic_;
    double spacing_;
};

/// Penalised regression smoother S(lambda) = B (B'B + lambda P)^-1 B' in
/// Demmler-Reinsch form, so that every lambda costs O(L D).
class PenalizedSmoother {
public:
    /// Throws NumericalError when B'B is singular.
    PenalizedSmoother(const Eigen::MatrixXd& design, const Eigen::MatrixXd& penalty);

    [[nodiscard]] Eigen::Index n_points() const { return basis_.rows(); }
    [[nodiscard]] Eigen::Index n_basis() const { return basis_.cols(); }

    [[nodiscard]] Eigen::MatrixXd smoother_matrix(double lambda) const;
    [[nodiscard]] double trace(double lambda) const;

    /// Smooths every row of `rows` (each row is one curve on the design points).
    [[nodiscard]] Eigen::MatrixXd smooth_rows(const Eigen::MatrixXd& rows, double lambda) const;

    /// GCV score for smoothing the rows of `rows`.
    [[nodiscard]] double gcv(const Eigen::MatrixXd& rows, double lambda) const;

    struct Selection {
        double log_lambda;
        double gcv;
        bool fallback;
    };
    /// Minimises GCV over log(lambda) in [lower, upper]: coarse grid, then
    /// golden-section refinement. Falls back to the interval midpoint if no
    /// finite score is found.
    [[nodiscard]] Selection select(const Eigen::MatrixXd& rows, double log_lower, double log_upper) const;

private:
    Eigen::MatrixXd basis_;       // orthonormal columns, L x D
    Eigen::VectorXd eigenvalues_; // penalty eigenvalues in the rotated basis
};

/// Physicists' Gauss-Hermite rule: nodes x_q and log(w_q) + x_q^2 (the
/// weights used when integrating against a non-Gaussian-weighted integrand).
struct GaussHermiteRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
    Eigen::VectorXd log_adjusted_weights;
};

GaussHermiteRule gauss_hermite(int n);

} // namespace fgfpca

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <tuple>
#include <vector>

#include "kdvlab/grid.hpp"

namespace kdvlab {

/// Amplitudes beta (distinct, positive) and phase parameters c of an
/// N-soliton profile.  beta_m is both the decay rate and the square root
/// of minus the m-th bound-state energy; the wave built from these
/// parameters has wells of depth -2 beta_m^2 travelling at speed 4 beta_m^2.
struct MultisolitonParams {
    std::vector<double> beta;
    std::vector<double> c;

    static constexpr double min_gap = 1e-9;

    MultisolitonParams() = default;
    MultisolitonParams(std::vector<double> beta_, std::vector<double> c_)
        : beta(std::move(beta_)), c(std::move(c_)) {
        validate();
    }

    std::size_t order() const { return beta.size(); }

    void validate() const {
        if (beta.size() != c.size())
            throw invalid_input("MultisolitonParams: beta and c length mismatch");
        for (double b : beta) {
            if (!(b > 0.0) || !std::isfinite(b))
                throw invalid_input("MultisolitonParams: amplitudes must be positive");
        }
        for (double v : c)
            if (!std::isfinite(v)) throw invalid_input("MultisolitonParams: non-finite position");
        for (std::size_t i = 0; i < beta.size(); ++i)
            for (std::size_t j = i + 1; j < beta.size(); ++j)
                if (std::abs(beta[i] - beta[j]) <= min_gap)
                    throw invalid_input("MultisolitonParams: amplitudes closer than 1e-9");
    }

    MultisolitonParams at_time(double t) const {
        MultisolitonParams p = *this;
        for (std::size_t m = 0; m < p.c.size(); ++m) p.c[m] += 4.0 * beta[m] * beta[m] * t;
        return p;
    }
};

/// The N x N interaction matrix
///   A_{mu nu}(x) = delta_{mu nu} + exp(-b_mu (x-c_mu) - b_nu (x-c_nu)) / (b_mu + b_nu),
/// identity plus a Gram matrix, hence symmetric positive definite for
/// every real x.
inline Eigen::MatrixXd cauchy_matrix(const MultisolitonParams& p, double x) {
    const auto n = static_cast<Eigen::Index>(p.order());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double e = std::exp(-p.beta[i] * (x - p.c[i]) - p.beta[j] * (x - p.c[j]));
            a(i, j) = (i == j ? 1.0 : 0.0) + e / (p.beta[i] + p.beta[j]);
        }
    }
    return a;
}

namespace detail {

/// Pointwise -2 (ln det A)'' via analytic derivatives of the rescaled
/// matrix.  With e_mu = exp(-b_mu (x-c_mu)) and d_mu = max(e_mu, 1),
///   A = D (D^{-2} + et C et) D,   et_mu = e_mu/d_mu <= 1,
/// where C is the Cauchy block 1/(b_mu+b_nu).  The diagonal scaling D is
/// frozen at the evaluation point, so the trace formulas for the first
/// and second log-derivatives apply to the bounded matrix
/// M = D^{-2} + et C et: with Adot = -et et^T and
/// Addot_{mu nu} = (b_mu+b_nu) et_mu et_nu,
///   (ln det A)'  = tr(M^{-1} Adot) = -et^T M^{-1} et,
///   (ln det A)'' = tr(M^{-1} Addot) - (et^T M^{-1} et)^2.
/// This keeps every matrix entry in [0, 1+1/(2 b_min)] for all real x,
/// where the naive A overflows once any exponent passes ~700.
inline double q_value(const std::vector<double>& beta, const std::vector<double>& c, double x) {
    const auto n = static_cast<Eigen::Index>(beta.size());
    if (n == 0) return 0.0;

    Eigen::VectorXd et(n), dinv2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = -beta[i] * (x - c[i]);
        if (t > 0.0) {
            // e_mu > 1: d = e, et = 1, 1/d^2 = exp(-2t) (underflow to 0 is fine)
            et(i) = 1.0;
            dinv2(i) = std::exp(-2.0 * t);
        } else {
            et(i) = std::exp(t);
            dinv2(i) = 1.0;
        }
    }

    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            m(i, j) = (i == j ? dinv2(i) : 0.0) + et(i) * et(j) / (beta[i] + beta[j]);

    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw numerical_failure("multisoliton profile: Cholesky of the scaled interaction matrix failed");

    const Eigen::VectorXd w = llt.solve(et);
    const double s1 = et.dot(w);  // et^T M^{-1} et

    double tr = 0.0;  // tr(M^{-1} Addot), Addot = (b_mu+b_nu) et_mu et_nu
    // tr(M^{-1} Addot) = sum_{mu,nu} (M^{-1})_{nu mu} (b_mu+b_nu) et_mu et_nu
    //                  = 2 * (beta .* et)^T M^{-1} et  by symmetry
    Eigen::VectorXd bet(n);
    for (Eigen::Index i = 0; i < n; ++i) bet(i) = beta[i] * et(i);
    tr = 2.0 * bet.dot(w);

    const double val = -2.0 * (tr - s1 * s1);
    if (!std::isfinite(val))
        throw numerical_failure("multisoliton profile: non-finite value");
    return val;
}

}  // namespace detail

/// Evaluate the profile at a single point.
inline double profile_value(const MultisolitonParams& p, double x) {
    return detail::q_value(p.beta, p.c, x);
}

namespace detail {

/// Analytic bound on |Q| at the box edges: each well contributes at most
/// 8 b^2 exp(-2 b dist) there (sech^2 envelope).  The evaluated samples
/// cannot be used for this check; their floating-point floor (~1e-13 of
/// the well scale) sits above the 1e-14 tail budget.
inline void check_tail_budget(const std::vector<double>& beta, const std::vector<double>& center,
                              double half_length, double budget = 1e-14) {
    double tail = 0.0;
    for (std::size_t m = 0; m < beta.size(); ++m) {
        const double dist = half_length - std::abs(center[m]);
        if (dist <= 0.0) throw domain_too_small("profile: a soliton center lies outside the box");
        tail += 8.0 * beta[m] * beta[m] * std::exp(-2.0 * beta[m] * dist);
    }
    if (tail > budget) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "profile: boundary tail bound %.3e exceeds budget %.1e; enlarge the box",
                      tail, budget);
        throw domain_too_small(buf);
    }
}

}  // namespace detail

/// Sample Q_{beta,c} on the grid.  Errors out if the tail bound at the box
/// boundary exceeds 1e-14, since all line-vs-box comparisons rest on that.
inline Field profile(const MultisolitonParams& p, GridPtr grid) {
    p.validate();
    detail::check_tail_budget(p.beta, p.c, grid->length() / 2);
    std::vector<double> q(grid->size());
    for (std::size_t j = 0; j < q.size(); ++j) q[j] = profile_value(p, grid->node(j));
    return Field(std::move(grid), std::move(q));
}

inline Field profile_at_time(const MultisolitonParams& p, double t, GridPtr grid) {
    return profile(p.at_time(t), std::move(grid));
}

/// The single solitary wave -2 b^2 sech^2(b [x - 4 b^2 t - x0]).
inline Field one_soliton(double beta, double x0, double t, GridPtr grid) {
    if (!(beta > 0.0)) throw invalid_input("one_soliton: beta must be positive");
    const double center = x0 + 4.0 * beta * beta * t;
    detail::check_tail_budget({beta}, {center}, grid->length() / 2);
    std::vector<double> q(grid->size());
    for (std::size_t j = 0; j < q.size(); ++j) {
        const double s = 1.0 / std::cosh(beta * (grid->node(j) - center));
        q[j] = -2.0 * beta * beta * s * s;
    }
    return Field(std::move(grid), std::move(q));
}

struct Invariants {
    double integral = 0.0;  // int q
    double momentum = 0.0;  // P = int q^2/2
    double energy = 0.0;    // H = int q'^2/2 + q^3
};

/// Closed-form invariants of a multisoliton; independent of c.
inline Invariants exact_invariants(const MultisolitonParams& p) {
    p.validate();
    Invariants v;
    for (double b : p.beta) {
        v.integral -= 4.0 * b;
        v.momentum += 8.0 / 3.0 * b * b * b;
        v.energy -= 32.0 / 5.0 * b * b * b * b * b;
    }
    return v;
}

/// Quadrature values of (int q, P, H) with the derivative taken spectrally.
inline Invariants functionals(const Field& q) {
    Invariants v;
    v.integral = q.integral();
    v.momentum = 0.5 * q.l2_norm_sq();
    const Field qp = q.derivative(1);
    double h = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j)
        h += 0.5 * qp[j] * qp[j] + q[j] * q[j] * q[j];
    v.energy = h * q.grid()->dx();
    return v;
}

}  // namespace kdvlab

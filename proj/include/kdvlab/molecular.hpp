#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "kdvlab/multisoliton.hpp"

namespace kdvlab {

/// A rarefied gas of multisolitons: J groups, group j holding amplitudes
/// beta^j with intra-group offsets c^j, placed at position x^j.  Larger j
/// sits further right.  Amplitudes are globally distinct; they need not be
/// ordered by group.
struct MolecularLayout {
    struct Group {
        std::vector<double> beta;
        std::vector<double> c;
        double position = 0.0;
    };
    std::vector<Group> groups;

    MolecularLayout() = default;
    explicit MolecularLayout(std::vector<Group> gs) : groups(std::move(gs)) { validate(); }

    std::size_t order() const {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.beta.size();
        return n;
    }

    void validate() const {
        std::vector<double> all;
        for (const auto& g : groups) {
            if (g.beta.size() != g.c.size())
                throw invalid_input("MolecularLayout: beta/c length mismatch in a group");
            if (g.beta.empty()) throw invalid_input("MolecularLayout: empty group");
            all.insert(all.end(), g.beta.begin(), g.beta.end());
        }
        MultisolitonParams probe(all, std::vector<double>(all.size(), 0.0));  // distinctness
        for (std::size_t j = 1; j < groups.size(); ++j)
            if (!(groups[j - 1].position < groups[j].position))
                throw invalid_input("MolecularLayout: group positions must be increasing");
    }

    /// Flattened amplitudes in group order.
    std::vector<double> amplitudes() const {
        std::vector<double> all;
        for (const auto& g : groups) all.insert(all.end(), g.beta.begin(), g.beta.end());
        return all;
    }
};

/// The phase-shift composition law: for mu in group j,
///   (c_n)_mu = x^j + c^j_mu - (1/beta_mu) sum_sigma log|(b_sigma - b_mu)/(b_sigma + b_mu)|
/// with sigma running over all amplitudes in groups to the right of j.
/// The absolute value inside the log is deliberate: sign flips enter the
/// reduced determinants only through a diagonal +-1 similarity, which
/// leaves the profile unchanged.
inline std::vector<double> composed_positions(const MolecularLayout& layout) {
    layout.validate();
    std::vector<double> out;
    for (std::size_t j = 0; j < layout.groups.size(); ++j) {
        const auto& g = layout.groups[j];
        for (std::size_t m = 0; m < g.beta.size(); ++m) {
            const double bmu = g.beta[m];
            double shift = 0.0;
            for (std::size_t l = j + 1; l < layout.groups.size(); ++l)
                for (double bs : layout.groups[l].beta)
                    shift += std::log(std::abs((bs - bmu) / (bs + bmu)));
            out.push_back(g.position + g.c[m] - shift / bmu);
        }
    }
    return out;
}

/// The single exact multisoliton that shadows the layout.
inline MultisolitonParams composed_params(const MolecularLayout& layout) {
    return MultisolitonParams(layout.amplitudes(), composed_positions(layout));
}

// ---------------------------------------------------------------------------
// Cauchy determinant induction step
// ---------------------------------------------------------------------------

/// Determinant by Gaussian elimination with exact division; works for
/// double and for exact rational scalars alike.  n stays single-digit here.
template <typename Scalar>
Scalar dense_determinant(std::vector<std::vector<Scalar>> m) {
    const std::size_t n = m.size();
    Scalar det(1);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        while (piv < n && m[piv][k] == Scalar(0)) ++piv;
        if (piv == n) return Scalar(0);
        if (piv != k) {
            std::swap(m[piv], m[k]);
            det = -det;
        }
        det *= m[k][k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const Scalar f = m[i][k] / m[k][k];
            for (std::size_t c = k; c < n; ++c) m[i][c] -= f * m[k][c];
        }
    }
    return det;
}

template <typename Scalar>
struct CauchyStep {
    Scalar lhs;
    Scalar rhs;
};

/// Both sides of the determinant induction: the (N+1)x(N+1) bordered
///   det[ D + a a^T/(b_mu+b_nu) , a_mu/(b_mu+b_{N+1}) ;
///        a_nu/(b_{N+1}+b_nu)   , 1/(2 b_{N+1}) ]
/// against (2 b_{N+1})^{-1} det[ D + at at^T/(b_mu+b_nu) ] with
/// at_mu = (b_{N+1}-b_mu)/(b_{N+1}+b_mu) a_mu.  Equal identically; with
/// exact rational scalars the two sides must match bit for bit.
template <typename Scalar>
CauchyStep<Scalar> cauchy_step(const std::vector<std::vector<Scalar>>& d,
                               const std::vector<Scalar>& a, const std::vector<Scalar>& beta) {
    const std::size_t n = a.size();
    if (d.size() != n || beta.size() != n + 1)
        throw invalid_input("cauchy_step: need D (NxN), a (N), beta (N+1)");
    for (const auto& row : d)
        if (row.size() != n) throw invalid_input("cauchy_step: D is not square");
    for (const auto& b : beta)
        if (!(b > Scalar(0))) throw invalid_input("cauchy_step: amplitudes must be positive");

    std::vector<std::vector<Scalar>> big(n + 1, std::vector<Scalar>(n + 1));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            big[i][j] = d[i][j] + a[i] * a[j] / (beta[i] + beta[j]);
        big[i][n] = a[i] / (beta[i] + beta[n]);
        big[n][i] = a[i] / (beta[n] + beta[i]);
    }
    big[n][n] = Scalar(1) / (beta[n] + beta[n]);

    std::vector<Scalar> at(n);
    for (std::size_t i = 0; i < n; ++i) at[i] = (beta[n] - beta[i]) / (beta[n] + beta[i]) * a[i];
    std::vector<std::vector<Scalar>> red(n, std::vector<Scalar>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            red[i][j] = d[i][j] + at[i] * at[j] / (beta[i] + beta[j]);

    CauchyStep<Scalar> r;
    r.lhs = dense_determinant(big);
    r.rhs = dense_determinant(red) / (Scalar(2) * beta[n]);
    return r;
}

// ---------------------------------------------------------------------------
// Block matrices B^{(j)} and E^{(j)}
// ---------------------------------------------------------------------------

/// The dominant/error split of the rescaled interaction matrix around
/// group j.  Indexing is over the flattened amplitude list; rows and
/// columns belonging to groups right of j carry the extracted factor
/// exp(-2 b_mu (x - c_mu)), so
///   det A(x) = det[B + E] * prod_{mu in groups > j} exp(-2 b_mu (x-c_mu)).
struct BlockMatrices {
    Eigen::MatrixXd b;
    Eigen::MatrixXd e;
    std::size_t group = 0;      // j, zero-based
    std::size_t lo = 0, hi = 0; // flattened index range [lo,hi) of group j
};

namespace detail {

struct FlatLayout {
    std::vector<double> beta;
    std::vector<double> cn;      // composed positions
    std::vector<std::size_t> grp;  // group index per flattened entry
};

inline FlatLayout flatten(const MolecularLayout& layout) {
    FlatLayout f;
    f.beta = layout.amplitudes();
    f.cn = composed_positions(layout);
    for (std::size_t j = 0; j < layout.groups.size(); ++j)
        f.grp.insert(f.grp.end(), layout.groups[j].beta.size(), j);
    return f;
}

}  // namespace detail

inline BlockMatrices block_matrices(const MolecularLayout& layout, std::size_t j, double x) {
    layout.validate();
    if (j >= layout.groups.size()) throw invalid_input("block_matrices: group index out of range");
    const auto f = detail::flatten(layout);
    const auto n = static_cast<Eigen::Index>(f.beta.size());

    auto ee = [&](Eigen::Index m) { return std::exp(-f.beta[m] * (x - f.cn[m])); };
    auto amat = [&](Eigen::Index m, Eigen::Index l) {
        return (m == l ? 1.0 : 0.0) + ee(m) * ee(l) / (f.beta[m] + f.beta[l]);
    };

    BlockMatrices r;
    r.group = j;
    r.b = Eigen::MatrixXd::Zero(n, n);
    r.e = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index l = 0; l < n; ++l) {
            const std::size_t gm = f.grp[m], gl = f.grp[l];
            const double denom = f.beta[m] + f.beta[l];
            if (gm < j) {
                if (gl < j) {
                    r.b(m, l) = (m == l) ? 1.0 : 0.0;
                    r.e(m, l) = amat(m, l) - (m == l ? 1.0 : 0.0);
                } else if (gl == j) {
                    r.e(m, l) = amat(m, l);
                } else {
                    r.e(m, l) = ee(m) / denom;
                }
            } else if (gm == j) {
                if (gl < j) {
                    r.e(m, l) = amat(m, l);
                } else if (gl == j) {
                    r.b(m, l) = amat(m, l);
                } else {
                    r.b(m, l) = ee(m) / denom;
                }
            } else {
                if (gl < j) {
                    r.e(m, l) = ee(l) / denom;
                } else if (gl == j) {
                    r.b(m, l) = ee(l) / denom;
                } else {
                    r.b(m, l) = 1.0 / denom;
                    if (m == l) r.e(m, l) = std::exp(f.beta[m] * (x - f.cn[m]) + f.beta[l] * (x - f.cn[l]));
                }
            }
        }
    }
    std::size_t lo = 0;
    for (std::size_t g = 0; g < j; ++g) lo += layout.groups[g].beta.size();
    r.lo = lo;
    r.hi = lo + layout.groups[j].beta.size();
    return r;
}

/// ln det A(x) for the composed multisoliton, stable for all real x
/// (same diagonal rescaling as the profile evaluation).
inline double log_det_interaction(const MultisolitonParams& p, double x) {
    const auto n = static_cast<Eigen::Index>(p.order());
    if (n == 0) return 0.0;
    Eigen::VectorXd et(n), dinv2(n);
    double logd = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = -p.beta[i] * (x - p.c[i]);
        if (t > 0.0) {
            et(i) = 1.0;
            dinv2(i) = std::exp(-2.0 * t);
            logd += 2.0 * t;
        } else {
            et(i) = std::exp(t);
            dinv2(i) = 1.0;
        }
    }
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index l = 0; l < n; ++l)
            m(i, l) = (i == l ? dinv2(i) : 0.0) + et(i) * et(l) / (p.beta[i] + p.beta[l]);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw numerical_failure("log_det_interaction: Cholesky failed");
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += std::log(llt.matrixL()(i, i));
    return logd + 2.0 * s;
}

/// -2 d^2/dx^2 ln det B^{(j)} at x, from analytic entrywise derivatives.
/// By the determinant induction this must reproduce the group-j
/// multisoliton translated to x^j; the test compares the two routes.
inline double group_determinant_reduction(const MolecularLayout& layout, std::size_t j, double x) {
    const auto f = detail::flatten(layout);
    const auto n = static_cast<Eigen::Index>(f.beta.size());
    const BlockMatrices bm = block_matrices(layout, j, x);

    auto ee = [&](Eigen::Index m) { return std::exp(-f.beta[m] * (x - f.cn[m])); };
    Eigen::MatrixXd b1 = Eigen::MatrixXd::Zero(n, n);  // dB/dx
    Eigen::MatrixXd b2 = Eigen::MatrixXd::Zero(n, n);  // d2B/dx2
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index l = 0; l < n; ++l) {
            const std::size_t gm = f.grp[m], gl = f.grp[l];
            const double denom = f.beta[m] + f.beta[l];
            if (gm == j && gl == j) {
                const double p = ee(m) * ee(l);
                b1(m, l) = -p;
                b2(m, l) = denom * p;
            } else if (gm == j && gl > j) {
                b1(m, l) = -f.beta[m] * ee(m) / denom;
                b2(m, l) = f.beta[m] * f.beta[m] * ee(m) / denom;
            } else if (gm > j && gl == j) {
                b1(m, l) = -f.beta[l] * ee(l) / denom;
                b2(m, l) = f.beta[l] * f.beta[l] * ee(l) / denom;
            }
        }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm.b);
    const Eigen::MatrixXd w1 = lu.solve(b1);
    const Eigen::MatrixXd w2 = lu.solve(b2);
    const double val = -2.0 * (w2.trace() - (w1 * w1).trace());
    if (!std::isfinite(val)) throw numerical_failure("group_determinant_reduction: non-finite");
    return val;
}

/// L^2 distance between the composed multisoliton and the plain sum of the
/// groups, on the given grid.  The exact statement is that this vanishes
/// as the separations grow.
inline double molecular_error(const MolecularLayout& layout, GridPtr grid) {
    const MultisolitonParams whole = composed_params(layout);
    Field diff = profile(whole, grid);
    for (const auto& g : layout.groups) {
        std::vector<double> shifted = g.c;
        for (auto& c : shifted) c += g.position;
        diff -= profile(MultisolitonParams(g.beta, shifted), grid);
    }
    return diff.l2_norm();
}

}  // namespace kdvlab

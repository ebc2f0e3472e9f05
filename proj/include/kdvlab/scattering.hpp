#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/numeric/odeint.hpp>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "kdvlab/grid.hpp"

namespace kdvlab {

// ---------------------------------------------------------------------------
// G and the closed forms on multisolitons
// ---------------------------------------------------------------------------

namespace detail {
inline double g_series(double x) {
    // sum_{l>=1} 2/(2l+1) x^{2l+1}; needs ~ -37/ln(x^2) terms near x = 1
    double term = x * x * x, sum = 0.0;
    for (int l = 1; l < 20000; ++l) {
        const double add = 2.0 / (2.0 * l + 1.0) * term;
        sum += add;
        term *= x * x;
        if (add < 1e-18 * (sum + 1e-300)) break;
    }
    return sum;
}
inline double g_closed(double x) { return -(2.0 * x + std::log1p(-x) - std::log1p(x)); }
}  // namespace detail

/// G(x) = -[2x + ln((1-x)/(1+x))] >= 0 for 0 < x < 1; equals the series
/// sum 2/(2l+1) x^{2l+1}.  Series evaluation below x = 1/2 avoids the
/// cancellation in the closed form.
inline double g_function(double x) {
    if (!(x > 0.0 && x < 1.0)) throw out_of_domain("g_function: argument must lie in (0,1)");
    return x < 0.5 ? detail::g_series(x) : detail::g_closed(x);
}

/// alpha(kappa; Q_{beta,c}) = sum_m G(beta_m/kappa), valid for kappa above
/// every amplitude.
inline double alpha_closed_form(const std::vector<double>& betas, double kappa) {
    double s = 0.0;
    for (double b : betas) {
        if (!(kappa > b)) throw out_of_domain("alpha_closed_form: kappa must exceed every beta");
        s += g_function(b / kappa);
    }
    return s;
}

/// Blaschke product prod (k - i b_m)/(k + i b_m): the transmission
/// reciprocal of a pure multisoliton.
inline complex blaschke(const std::vector<double>& betas, complex k) {
    complex p(1.0, 0.0);
    for (double b : betas) p *= (k - complex(0.0, b)) / (k + complex(0.0, b));
    return p;
}

/// a_ren of a multisoliton: Blaschke times exp(2 i beta_m / k).
inline complex a_ren_closed_form(const std::vector<double>& betas, complex k) {
    complex p = blaschke(betas, k);
    for (double b : betas) p *= std::exp(complex(0.0, 2.0 * b) / k);
    return p;
}

// ---------------------------------------------------------------------------
// Full-lattice pair sums (closed form)
// ---------------------------------------------------------------------------

namespace detail {

inline complex clamped_cot(complex w) {
    // cot(a+ib) -> -i sign(b) as |b| grows; switch at |b| = 40 where the
    // correction is ~exp(-80)
    if (std::abs(w.imag()) > 40.0) return complex(0.0, w.imag() > 0 ? -1.0 : 1.0);
    return std::cos(w) / std::sin(w);
}

/// S(u) = sum over the frequency lattice eta in dxi*Z of
///   1 / ( ((eta+u)^2 - k^2) (eta^2 - k^2) ),   Im k > 0,
/// by residues against cot(pi z / dxi).  This is the eta-sum appearing in
/// the full-lattice tr(K^2); summing it in closed form is what lets the
/// Hilbert-Schmidt identity hold to near machine precision without ever
/// materializing the infinite matrix.
inline complex lattice_pair_sum(double u, complex k, double dxi) {
    const complex ik2 = 2.0 * k;
    if (u == 0.0) {
        // double poles at +-k: S(0) = (pi/(2 d)) [ (pi/d) csc^2(pi k/d)/k^2
        //                                          + cot(pi k/d)/k^3 ]
        const complex w = pi * k / dxi;
        complex csc2, cotw;
        if (std::abs(w.imag()) > 40.0) {
            csc2 = 0.0;
            cotw = complex(0.0, w.imag() > 0 ? -1.0 : 1.0);
        } else {
            const complex s = std::sin(w);
            csc2 = 1.0 / (s * s);
            cotw = std::cos(w) / s;
        }
        return (pi / (2.0 * dxi)) * ((pi / dxi) * csc2 / (k * k) + cotw / (k * k * k));
    }
    const std::array<complex, 4> poles = {k, -k, -u + k, -u - k};
    const std::array<complex, 4> res = {
        1.0 / (ik2 * u * (u + ik2)), -1.0 / (ik2 * u * (u - ik2)),
        1.0 / (ik2 * u * (u - ik2)), -1.0 / (ik2 * u * (u + ik2))};
    complex s(0.0, 0.0);
    for (int i = 0; i < 4; ++i) s += res[i] * clamped_cot(pi * poles[i] / dxi);
    return -(pi / dxi) * s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// KMatrix
// ---------------------------------------------------------------------------

/// Fourier-basis truncation of sqrt(R0(k)) q sqrt(R0(k)) on the box.
///
/// The window holds the grid's symmetric modes (Nyquist excluded); the
/// weight is w(xi) = (xi^2 - k^2)^{-1/2} with the principal branch, which
/// continues the positive-definite square root from k on the imaginary
/// axis.  tr2_full carries the full-lattice tr(K^2) from the closed-form
/// pair sum; values derived from the window matrix are corrected with it
/// so the l=2 part of every trace series is lattice-exact.
struct KMatrix {
    complex k;
    double dxi = 0.0;
    bool hermitian = false;            // k on the positive imaginary axis
    std::vector<double> freqs;         // ascending window frequencies
    Eigen::MatrixXcd mat;
    complex tr_win;                    // tr K over the window
    complex tr2_win;                   // tr K^2 over the window
    complex tr2_full;                  // tr K^2 over the full lattice
    double i2_win = 0.0;               // sum |K_ml|^2 over the window

    /// Hilbert-Schmidt norm squared over the full lattice.  For k = i kappa
    /// this equals tr2_full, which is real positive.
    double hs_norm_sq() const {
        if (!hermitian)
            throw out_of_domain("KMatrix: full-lattice HS norm is computed on the imaginary axis");
        return tr2_full.real();
    }
    /// Windowed-out remainder of ||K||_{I2}^2 (>= 0 up to roundoff).
    double i2_tail_sq() const { return std::max(0.0, hs_norm_sq() - i2_win); }
};

/// Assemble the K matrix at spectral point k (Im k > 0).  max_abs_freq
/// trims the window; the default keeps every symmetric grid mode.
inline KMatrix build_k_matrix_at(const Field& q, complex k,
                                 double max_abs_freq = std::numeric_limits<double>::infinity()) {
    if (!(k.imag() > 0.0)) throw out_of_domain("build_k_matrix_at: need Im k > 0");
    const auto& g = *q.grid();
    const double dxi = g.dxi();
    KMatrix km;
    km.k = k;
    km.dxi = dxi;
    km.hermitian = (k.real() == 0.0);

    const long half = static_cast<long>(g.size() / 2);
    long mmax = half - 1;
    if (std::isfinite(max_abs_freq))
        mmax = std::min(mmax, static_cast<long>(std::floor(max_abs_freq / dxi)));
    if (mmax < 1) throw invalid_input("build_k_matrix_at: window too small");

    // spectrum lookup by signed mode; zero outside the resolved band
    std::vector<complex> qhat(2 * static_cast<std::size_t>(half) + 1, complex(0.0, 0.0));
    auto hat_at = [&](long mode) -> complex {
        if (mode < -(half - 1) || mode > half - 1) return complex(0.0, 0.0);
        return qhat[static_cast<std::size_t>(mode + half)];
    };
    for (std::size_t s = 0; s < g.size(); ++s) {
        const long mode = g.mode(s);
        if (mode == -half) continue;  // Nyquist excluded
        qhat[static_cast<std::size_t>(mode + half)] = q.hat(s);
    }

    const auto n = static_cast<Eigen::Index>(2 * mmax + 1);
    km.freqs.resize(static_cast<std::size_t>(n));
    std::vector<complex> w(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const long mode = -mmax + static_cast<long>(i);
        const double xi = dxi * static_cast<double>(mode);
        km.freqs[static_cast<std::size_t>(i)] = xi;
        w[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(complex(xi * xi, 0.0) - k * k);
    }

    const double scale = dxi / std::sqrt(2.0 * pi);
    km.mat.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const long mi = -mmax + static_cast<long>(i);
        for (Eigen::Index j = 0; j < n; ++j) {
            const long mj = -mmax + static_cast<long>(j);
            km.mat(i, j) = scale * hat_at(mi - mj) * w[static_cast<std::size_t>(i)] *
                           w[static_cast<std::size_t>(j)];
        }
    }
    if (km.hermitian) km.mat = 0.5 * (km.mat + km.mat.adjoint()).eval();

    km.tr_win = km.mat.trace();
    km.tr2_win = (km.mat * km.mat).trace();
    km.i2_win = km.mat.squaredNorm();

    complex tr2(0.0, 0.0);
    for (long u = -(2 * half - 2); u <= 2 * half - 2; ++u) {
        const complex h = hat_at(u);
        if (h == complex(0.0, 0.0) && u != 0) continue;
        tr2 += std::norm(h) * detail::lattice_pair_sum(dxi * static_cast<double>(u), k, dxi);
    }
    km.tr2_full = tr2 * dxi * dxi / (2.0 * pi);
    return km;
}

/// Spec surface: the Hermitian matrix at k = i kappa.
inline KMatrix build_k_matrix(const Field& q, double kappa,
                              double max_abs_freq = std::numeric_limits<double>::infinity()) {
    if (!(kappa > 0.0)) throw invalid_input("build_k_matrix: kappa must be positive");
    return build_k_matrix_at(q, complex(0.0, kappa), max_abs_freq);
}

// ---------------------------------------------------------------------------
// alpha and the renormalized determinant
// ---------------------------------------------------------------------------

struct AlphaOptions {
    double tol = 1e-12;
    /// Enforce kappa >= 1 + ||q||_{H^{-1}}^2 (sufficient for convergence).
    /// When disabled, the series ratio ||K||_{I2} < 0.9 still gates the
    /// evaluation; this is the knob for potentials whose plain H^{-1} norm
    /// is large while the operator itself is already tiny.
    bool enforce_threshold = true;
    double max_abs_freq = std::numeric_limits<double>::infinity();
};

namespace detail {

inline Eigen::VectorXd hermitian_eigenvalues(const KMatrix& km) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(km.mat, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw numerical_failure("KMatrix: Hermitian eigensolve failed");
    return es.eigenvalues();
}

inline void check_ratio(double ratio) {
    if (!(ratio < 0.9)) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "alpha series: ratio ||K||_I2 = %.3f >= 0.9", ratio);
        throw out_of_domain(buf);
    }
}

}  // namespace detail

/// alpha(q; kappa) = sum_{l>=2} (-1)^l tr(K^l)/l by partial sums of
/// matrix-power traces.  The l = 2 term uses the lattice-exact closed form;
/// l >= 3 come from the eigenvalues of the window matrix.  Terms are added
/// until the geometric tail r^{l+1}/((l+1)(1-r)), r = ||K||_{I2}, certifies
/// the requested remainder.
inline double alpha_series(const Field& q, double kappa, const AlphaOptions& opt = {}) {
    if (!(kappa > 0.0)) throw invalid_input("alpha_series: kappa must be positive");
    if (opt.enforce_threshold) {
        const double h = q.sobolev_norm_sq(SobolevSpec::hs(-1.0));
        if (!(kappa >= 1.0 + h)) {
            char buf[112];
            std::snprintf(buf, sizeof(buf),
                          "alpha series: kappa %.4g below threshold 1 + ||q||_{H^-1}^2 = %.4g",
                          kappa, 1.0 + h);
            throw out_of_domain(buf);
        }
    }
    const KMatrix km = build_k_matrix(q, kappa, opt.max_abs_freq);
    const double r = std::sqrt(km.hs_norm_sq());
    detail::check_ratio(r);

    double alpha = 0.5 * km.tr2_full.real();
    if (r == 0.0) return alpha;
    const Eigen::VectorXd lam = detail::hermitian_eigenvalues(km);
    Eigen::ArrayXd pw = lam.array() * lam.array();
    double rl = r * r;
    for (int l = 3; l <= 400; ++l) {
        pw *= lam.array();
        rl *= r;
        alpha += (l % 2 == 0 ? 1.0 : -1.0) * pw.sum() / static_cast<double>(l);
        const double tail = rl * r / ((l + 1) * (1.0 - r));
        if (tail < opt.tol) return alpha;
    }
    throw resolution_error("alpha series: tail bound not certified within 400 terms");
}

/// det2(1 + K) = det(1 + K) exp(-tr K) on the window, carried to the full
/// lattice with the exact l = 2 tail factor exp(-(tr2_full - tr2_win)/2).
/// kappa_equiv sets the modulus at which the truncation budget is audited;
/// by the resolvent comparison the I2 mass of K(k) is dominated by
/// (|k|/Im k)^2 times the mass at i*kappa_equiv.
inline complex a_ren_det2(const Field& q, complex k, double kappa_equiv,
                          double tail_budget = 0.05,
                          double max_abs_freq = std::numeric_limits<double>::infinity()) {
    if (!(k.imag() > 0.0)) throw out_of_domain("a_ren_det2: need Im k > 0");
    if (!(kappa_equiv > 0.0)) throw invalid_input("a_ren_det2: kappa_equiv must be positive");

    const KMatrix audit = build_k_matrix(q, kappa_equiv, max_abs_freq);
    const double amp = std::norm(k) / (k.imag() * k.imag());
    if (std::sqrt(audit.i2_tail_sq() * amp) > tail_budget) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "a_ren_det2: windowed-out I2 mass %.3e exceeds budget %.3e",
                      std::sqrt(audit.i2_tail_sq() * amp), tail_budget);
        throw resolution_error(buf);
    }

    const bool on_axis = (k.real() == 0.0);
    const KMatrix km = on_axis && std::abs(k.imag() - kappa_equiv) < 1e-14
                           ? audit
                           : build_k_matrix_at(q, k, max_abs_freq);

    const auto n = km.mat.rows();
    Eigen::MatrixXcd ipk = Eigen::MatrixXcd::Identity(n, n) + km.mat;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(ipk);
    complex logdet(0.0, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(lu.matrixLU()(i, i));
    const int parity = lu.permutationP().determinant();
    if (parity < 0) logdet += complex(0.0, pi);

    const complex log_det2_win = logdet - km.tr_win;
    const complex correction = -0.5 * (km.tr2_full - km.tr2_win);
    return std::exp(log_det2_win + correction);
}

// ---------------------------------------------------------------------------
// Jost route
// ---------------------------------------------------------------------------

namespace detail {

/// 8-point Lagrange interpolation of the samples; spectral fields lose
/// ~(dx)^8 here, far below the Jost tolerances.
class FieldInterpolant {
  public:
    explicit FieldInterpolant(const Field& f)
        : l_(f.grid()->length()), dx_(f.grid()->dx()), s_(f.samples()) {}

    double operator()(double x) const {
        const double u = (x + l_ / 2) / dx_;
        long j0 = static_cast<long>(std::floor(u)) - 3;
        j0 = std::max(0L, std::min(j0, static_cast<long>(s_.size()) - 8));
        double val = 0.0;
        for (int a = 0; a < 8; ++a) {
            double w = 1.0;
            for (int b = 0; b < 8; ++b)
                if (b != a) w *= (u - (j0 + b)) / static_cast<double>(a - b);
            val += w * s_[static_cast<std::size_t>(j0 + a)];
        }
        return val;
    }

  private:
    double l_, dx_;
    const std::vector<double>& s_;
};

}  // namespace detail

/// Reciprocal transmission coefficient a(k) by integrating the Jost
/// equation m'' + 2ik m' = q m from the right edge (m = 1, m' = 0)
/// leftward; a = m + m'/(2ik) at the left edge.  The substitution
/// psi = e^{ikx} m removed the oscillatory factor already.
inline complex a_jost(const Field& q, complex k) {
    if (k == complex(0.0, 0.0)) throw out_of_domain("a_jost: k = 0 is excluded");
    if (k.imag() < 0.0) throw out_of_domain("a_jost: need Im k >= 0");
    const double edge = std::max(std::abs(q.samples().front()), std::abs(q.samples().back()));
    if (edge > 1e-12)
        throw domain_too_small("a_jost: field is not supported inside the box (tail > 1e-12)");

    const detail::FieldInterpolant qi(q);
    const double r = q.grid()->length() / 2 - q.grid()->dx();

    using state = std::array<double, 4>;  // Re m, Im m, Re m', Im m'
    auto rhs = [&](const state& y, state& dy, double x) {
        const complex m(y[0], y[1]), mp(y[2], y[3]);
        const complex mpp = qi(x) * m - 2.0 * complex(0.0, 1.0) * k * mp;
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = mpp.real();
        dy[3] = mpp.imag();
    };

    state y{1.0, 0.0, 0.0, 0.0};
    std::size_t steps = 0;
    auto counter = [&steps](const state&, double) {
        if (++steps > 2000000)
            throw solver_error("a_jost: step budget exhausted (2e6 accepted steps)");
    };
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(1e-12, 1e-10, ode::runge_kutta_dopri5<state>());
    try {
        ode::integrate_adaptive(stepper, rhs, y, r, -r, -q.grid()->dx(), counter);
    } catch (const solver_error&) {
        throw;
    } catch (const std::exception& e) {
        throw solver_error(std::string("a_jost: integration failed after ") +
                           std::to_string(steps) + " steps: " + e.what());
    }
    const complex m(y[0], y[1]), mp(y[2], y[3]);
    return m + mp / (2.0 * complex(0.0, 1.0) * k);
}

/// a(k) with the determinant normalization: a_jost * exp(-(i/2k) int q).
inline complex a_ren_jost(const Field& q, complex k) {
    return a_jost(q, k) * std::exp(-complex(0.0, 1.0) / (2.0 * k) * q.integral());
}

// ---------------------------------------------------------------------------
// Bound states
// ---------------------------------------------------------------------------

struct BoundStates {
    std::vector<double> betas;         // sqrt(-E) for reliable E < 0, ascending
    std::vector<double> near_threshold;  // |E| <= 1e-8: reported, not trusted
};

/// Negative spectrum of -d^2/dx^2 + q on the box, from the dense symmetric
/// Fourier discretization.  Eigenvalues within 1e-8 of zero land in
/// near_threshold and are excluded from variational sums.
inline BoundStates bound_states(const Field& q) {
    const auto& g = *q.grid();
    const auto n = static_cast<Eigen::Index>(g.size());

    // first row of the circulant -d^2: c_r = (1/M) sum_m xi_m^2 cos(2 pi m r / M)
    std::vector<complex> sym(g.size());
    for (std::size_t m = 0; m < g.size(); ++m) {
        const double xi = g.freq(m);
        sym[m] = complex(xi * xi, 0.0);
    }
    g.ifft(sym);

    Eigen::MatrixXd h(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const std::size_t r = static_cast<std::size_t>((i - j + n) % n);
            h(i, j) = sym[r].real();
        }
    for (Eigen::Index i = 0; i < n; ++i) h(i, i) += q[static_cast<std::size_t>(i)];

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw numerical_failure("bound_states: eigensolve failed");

    BoundStates out;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = es.eigenvalues()(i);
        if (e >= -1e-8) {
            if (e <= 1e-8) out.near_threshold.push_back(e);
            continue;
        }
        out.betas.push_back(std::sqrt(-e));
    }
    std::sort(out.betas.begin(), out.betas.end());
    return out;
}

/// Sign-change scan of a(i beta) along the imaginary axis: a cross-check
/// that the spectral bound states are zeros of the Jost route.  Returns the
/// number of sign changes of Re a(i b) over the bracketing grid.
inline int jost_zero_count(const Field& q, double beta_max, int samples = 60) {
    int changes = 0;
    double prev = a_jost(q, complex(0.0, 1e-3)).real();
    for (int i = 1; i <= samples; ++i) {
        const double b = 1e-3 + (beta_max - 1e-3) * static_cast<double>(i) / samples;
        const double cur = a_jost(q, complex(0.0, b)).real();
        if (prev * cur < 0.0) ++changes;
        prev = cur;
    }
    return changes;
}

// ---------------------------------------------------------------------------
// Variational gap
// ---------------------------------------------------------------------------

/// alpha(kappa; q) - sum_m G(beta_m/kappa).  Nonnegative for every
/// admissible potential; zero exactly on multisolitons.  Near-threshold
/// eigenvalues are excluded (which can only increase the gap).
inline double variational_gap(const Field& q, double kappa, const AlphaOptions& opt = {}) {
    const BoundStates bs = bound_states(q);
    if (!bs.betas.empty() && !(kappa > bs.betas.back()))
        throw out_of_domain("variational_gap: kappa must exceed the largest bound state");
    const double a = alpha_series(q, kappa, opt);
    return a - (bs.betas.empty() ? 0.0 : alpha_closed_form(bs.betas, kappa));
}

}  // namespace kdvlab

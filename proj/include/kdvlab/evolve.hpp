#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kdvlab/multisoliton.hpp"
#include "kdvlab/scattering.hpp"

namespace kdvlab {

/// Fourth-order exponential time differencing for q_t = -q''' + 6 q q'.
///
/// The linear symbol i xi^3 is propagated exactly; the quadratic
/// nonlinearity 3 i xi (q^2)^ is dealiased with the 2/3 rule, so a state
/// band-limited to |m| <= M/3 stays band-limited forever.  Coefficients
/// use the direct phi formulas away from z = 0 and a 32-point unit-circle
/// contour mean inside |z| < 1/2 where the formulas cancel.
class Etdrk4 {
  public:
    Etdrk4(GridPtr grid, double dt) : grid_(std::move(grid)), dt_(dt) {
        if (dt == 0.0 || !std::isfinite(dt)) throw invalid_input("Etdrk4: bad step size");
        const std::size_t m = grid_->size();
        e_full_.resize(m);
        e_half_.resize(m);
        qc_.resize(m);
        f1_.resize(m);
        f2_.resize(m);
        f3_.resize(m);
        mask_.resize(m);
        const auto third = static_cast<long>(m / 3);
        for (std::size_t s = 0; s < m; ++s) {
            const double xi = grid_->freq(s);
            const complex lz(0.0, xi * xi * xi);  // L = i xi^3
            const complex z = dt * lz;
            e_full_[s] = std::exp(z);
            e_half_[s] = std::exp(0.5 * z);
            qc_[s] = dt * phi_q(z);
            f1_[s] = dt * phi_f1(z);
            f2_[s] = dt * phi_f2(z);
            f3_[s] = dt * phi_f3(z);
            const long mode = std::labs(grid_->mode(s));
            mask_[s] = (mode <= third && static_cast<std::size_t>(mode) != m / 2) ? 1.0 : 0.0;
        }
    }

    const GridPtr& grid() const { return grid_; }
    double dt() const { return dt_; }

    /// One step on the raw DFT vector (fft of the samples, no scaling).
    void step_spectrum(std::vector<complex>& v) const {
        const std::size_t m = grid_->size();
        std::vector<complex> nv(m), a(m), na(m), b(m), nb(m), c(m), nc(m);
        nonlinear(v, nv);
        for (std::size_t s = 0; s < m; ++s) a[s] = e_half_[s] * v[s] + qc_[s] * nv[s];
        nonlinear(a, na);
        for (std::size_t s = 0; s < m; ++s) b[s] = e_half_[s] * v[s] + qc_[s] * na[s];
        nonlinear(b, nb);
        for (std::size_t s = 0; s < m; ++s) c[s] = e_half_[s] * a[s] + qc_[s] * (2.0 * nb[s] - nv[s]);
        nonlinear(c, nc);
        for (std::size_t s = 0; s < m; ++s)
            v[s] = (e_full_[s] * v[s] + f1_[s] * nv[s] + 2.0 * f2_[s] * (na[s] + nb[s]) +
                    f3_[s] * nc[s]) *
                   mask_[s];
    }

    /// Largest |q| at the two box edges seen by the last nonlinear() call.
    double last_edge_amplitude() const { return edge_; }

  private:
    // N(v) = 3 i xi (q^2)^ with the 2/3-rule mask
    void nonlinear(const std::vector<complex>& v, std::vector<complex>& out) const {
        const std::size_t m = grid_->size();
        std::vector<complex> w(v);
        grid_->ifft(w);
        edge_ = std::max(std::abs(w.front().real()), std::abs(w[m - 1].real()));
        for (auto& z : w) {
            const double r = z.real();
            z = complex(r * r, 0.0);
        }
        grid_->fft(w);
        for (std::size_t s = 0; s < m; ++s) {
            const complex ixi(0.0, grid_->freq(s));
            out[s] = 3.0 * ixi * w[s] * mask_[s];
        }
    }

    static complex phi_q(complex z) {
        if (std::abs(z) >= 0.5) return (std::exp(0.5 * z) - 1.0) / z;
        return contour([](complex w) { return (std::exp(0.5 * w) - 1.0) / w; }, z);
    }
    static complex phi_f1(complex z) {
        auto f = [](complex w) {
            return (-4.0 - w + std::exp(w) * (4.0 - 3.0 * w + w * w)) / (w * w * w);
        };
        return std::abs(z) >= 0.5 ? f(z) : contour(f, z);
    }
    static complex phi_f2(complex z) {
        auto f = [](complex w) { return (2.0 + w + std::exp(w) * (-2.0 + w)) / (w * w * w); };
        return std::abs(z) >= 0.5 ? f(z) : contour(f, z);
    }
    static complex phi_f3(complex z) {
        auto f = [](complex w) {
            return (-4.0 - 3.0 * w - w * w + std::exp(w) * (4.0 - w)) / (w * w * w);
        };
        return std::abs(z) >= 0.5 ? f(z) : contour(f, z);
    }
    template <typename F>
    static complex contour(F f, complex z) {
        complex acc(0.0, 0.0);
        constexpr int n = 32;
        for (int j = 0; j < n; ++j) {
            const double th = pi * (j + 0.5) / n;
            acc += f(z + std::polar(1.0, th)) + f(z + std::polar(1.0, -th));
        }
        return acc / (2.0 * n);
    }

    GridPtr grid_;
    double dt_;
    std::vector<complex> e_full_, e_half_, qc_, f1_, f2_, f3_;
    std::vector<double> mask_;
    mutable double edge_ = 0.0;
};

/// Mutable trajectory state: the field, current time, step size, and the
/// accumulated conservation drift log.  One owner per trajectory.
struct EvolutionState {
    EvolutionState(Field q0, double dt, std::vector<double> monitor_kappas = {})
        : q(std::move(q0)), dt(dt), kappas(std::move(monitor_kappas)) {
        stepper = std::make_shared<Etdrk4>(q.grid(), dt);
        spectrum_raw.assign(q.grid()->size(), complex(0.0, 0.0));
        for (std::size_t j = 0; j < q.size(); ++j) spectrum_raw[j] = q[j];
        q.grid()->fft(spectrum_raw);
    }

    Field materialize() const {
        std::vector<complex> w = spectrum_raw;
        q.grid()->ifft(w);
        std::vector<double> s(w.size());
        for (std::size_t j = 0; j < w.size(); ++j) s[j] = w[j].real();
        return Field(q.grid(), std::move(s));
    }

    Field q;
    double t = 0.0;
    double dt;
    std::vector<double> kappas;
    std::map<std::string, double> drift;  // monitor name -> max relative drift
    std::shared_ptr<const Etdrk4> stepper;
    std::vector<complex> spectrum_raw;
    std::size_t steps_taken = 0;
};

struct EvolveOptions {
    double dt = 2.5e-4;
    std::size_t sample_count = 6;          // including t = 0
    std::vector<double> monitor_kappas;    // alpha monitors
    double monitor_window_freq = 24.0;     // K-matrix window for the monitors
    double cfl_constant = 120.0;           // require dt <= C / max|xi|^3
    double boundary_budget = 1e-10;
    bool abort_on_boundary = true;
};

/// One ETDRK4 step.  Throws blow_up_error with the last valid samples if
/// the update leaves the representable range.
inline void step(EvolutionState& st) {
    std::vector<complex> trial = st.spectrum_raw;
    st.stepper->step_spectrum(trial);
    for (const complex& z : trial) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
            throw blow_up_error("kdv step: non-finite spectrum at t = " + std::to_string(st.t),
                                st.t, st.materialize().samples());
        }
    }
    st.spectrum_raw = std::move(trial);
    st.t += st.dt;
    ++st.steps_taken;
    // keep the spectrum Hermitian against roundoff drift
    if (st.steps_taken % 64 == 0) {
        const std::size_t m = st.spectrum_raw.size();
        for (std::size_t s = 1; s < m - s; ++s) {
            const complex avg = 0.5 * (st.spectrum_raw[s] + std::conj(st.spectrum_raw[m - s]));
            st.spectrum_raw[s] = avg;
            st.spectrum_raw[m - s] = std::conj(avg);
        }
        st.spectrum_raw[0] = complex(st.spectrum_raw[0].real(), 0.0);
    }
}

struct TrajectorySample {
    double t;
    Field q;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    std::map<std::string, double> max_drift;   // relative to the t=0 value
    double dt = 0.0;
    std::size_t total_steps = 0;
};

namespace detail {

inline double rel_drift(double now, double initial) {
    return std::abs(now - initial) / std::max(1e-12, std::abs(initial));
}

}  // namespace detail

/// Integrate q0 to t_final (either sign), sampling uniformly and tracking
/// the drift of int q, P, H and alpha(kappa_i) relative to t = 0.  The
/// alpha monitors run on a trimmed K window; translation invariance of the
/// windowed eigenvalues makes the drift insensitive to the trim.
inline Trajectory evolve(const Field& q0, double t_final, const EvolveOptions& opt = {}) {
    if (!std::isfinite(t_final)) throw invalid_input("evolve: t_final must be finite");
    const auto& g = *q0.grid();
    const double ximax = g.max_freq();
    if (std::abs(opt.dt) > opt.cfl_constant / (ximax * ximax * ximax))
        throw invalid_input("evolve: dt violates the configured step bound C/max|xi|^3");
    if (opt.sample_count < 2) throw invalid_input("evolve: need at least two samples");

    const std::size_t n_steps = (t_final == 0.0)
        ? 0
        : static_cast<std::size_t>(std::ceil(std::abs(t_final) / std::abs(opt.dt) - 1e-9));
    const double dt = (n_steps == 0) ? opt.dt : t_final / static_cast<double>(n_steps);

    EvolutionState st(q0, dt, opt.monitor_kappas);
    Trajectory out;
    out.dt = dt;

    const Invariants inv0 = functionals(q0);
    AlphaOptions aopt;
    aopt.enforce_threshold = false;  // monitoring is a regression diagnostic
    aopt.max_abs_freq = opt.monitor_window_freq;
    std::vector<double> alpha0;
    for (double k : opt.monitor_kappas) alpha0.push_back(alpha_series(q0, k, aopt));

    auto record = [&](const Field& q, double t) {
        out.samples.push_back({t, q});
        const Invariants inv = functionals(q);
        auto bump = [&](const std::string& key, double v) {
            auto it = out.max_drift.find(key);
            if (it == out.max_drift.end() || it->second < v) out.max_drift[key] = v;
        };
        bump("integral", detail::rel_drift(inv.integral, inv0.integral));
        bump("momentum", detail::rel_drift(inv.momentum, inv0.momentum));
        bump("energy", detail::rel_drift(inv.energy, inv0.energy));
        for (std::size_t i = 0; i < opt.monitor_kappas.size(); ++i) {
            const double a = alpha_series(q, opt.monitor_kappas[i], aopt);
            char key[32];
            std::snprintf(key, sizeof(key), "alpha_%g", opt.monitor_kappas[i]);
            bump(key, detail::rel_drift(a, alpha0[i]));
        }
        const double edge = std::max(std::abs(q.samples().front()), std::abs(q.samples().back()));
        if (edge > opt.boundary_budget && opt.abort_on_boundary)
            throw domain_too_small("evolve: boundary amplitude " + std::to_string(edge) +
                                   " exceeds budget; radiation wrap-around invalidates "
                                   "line comparisons");
    };

    record(q0, 0.0);
    std::size_t next_sample = 1;
    for (std::size_t s = 1; s <= n_steps; ++s) {
        step(st);
        const auto due = static_cast<std::size_t>(
            std::llround(static_cast<double>(next_sample) * static_cast<double>(n_steps) /
                         static_cast<double>(opt.sample_count - 1)));
        if (s == due || s == n_steps) {
            record(st.materialize(), st.t);
            ++next_sample;
        }
    }
    out.total_steps = st.steps_taken;
    return out;
}

}  // namespace kdvlab

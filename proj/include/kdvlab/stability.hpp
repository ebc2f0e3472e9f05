#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "kdvlab/evolve.hpp"
#include "kdvlab/multisoliton.hpp"

namespace kdvlab {

// ---------------------------------------------------------------------------
// Nelder-Mead
// ---------------------------------------------------------------------------

namespace detail {

struct NelderMeadResult {
    std::vector<double> x;
    double fmin = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Plain downhill simplex with standard coefficients.  The objectives here
/// are smooth but multi-basin, so callers run it from several seeds.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, double scale, std::size_t max_iter,
                                    double ftol = 1e-24, double xtol = 1e-11) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += scale;
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = f(pts[i]);

    NelderMeadResult res;
    for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
        std::vector<std::size_t> order(n + 1);
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order[0], worst = order[n], second = order[n - 1];

        double diam = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            diam = std::max(diam, std::abs(pts[worst][i] - pts[best][i]));
        if (std::abs(fv[worst] - fv[best]) < ftol || diam < xtol) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t k = 0; k <= n; ++k) {
            if (k == worst) continue;
            for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[k][i] / static_cast<double>(n);
        }
        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i)
                p[i] = centroid[i] + t * (pts[worst][i] - centroid[i]);
            return p;
        };

        const std::vector<double> xr = blend(-1.0);
        const double fr = f(xr);
        if (fr < fv[best]) {
            const std::vector<double> xe = blend(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                pts[worst] = xe;
                fv[worst] = fe;
            } else {
                pts[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            pts[worst] = xr;
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            const std::vector<double> xc = blend(outside ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[worst])) {
                pts[worst] = xc;
                fv[worst] = fc;
            } else {
                for (std::size_t k = 0; k <= n; ++k) {
                    if (k == best) continue;
                    for (std::size_t i = 0; i < n; ++i)
                        pts[k][i] = pts[best][i] + 0.5 * (pts[k][i] - pts[best][i]);
                    fv[k] = f(pts[k]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    res.x = pts[best];
    res.fmin = fv[best];
    return res;
}

/// Profile samples without the box-tail gate, for use inside optimization
/// loops that may probe positions near the box edge; a quadratic penalty
/// steers the search back inside.
inline double penalized_profile_mismatch(const Field& q, const std::vector<double>& beta,
                                         const std::vector<double>& c, const SobolevSpec& spec) {
    const auto& g = *q.grid();
    const double margin = g.length() / 2 - 5.0;
    double penalty = 0.0;
    for (double ci : c)
        if (std::abs(ci) > margin) penalty += 1e8 * (std::abs(ci) - margin) * (std::abs(ci) - margin);
    if (penalty > 0.0) return 1e8 + penalty;
    std::vector<double> s(g.size());
    for (std::size_t j = 0; j < s.size(); ++j)
        s[j] = detail::q_value(beta, c, g.node(j));
    Field diff = q;
    diff -= Field(q.grid(), std::move(s));
    return diff.sobolev_norm_sq(spec);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Manifold distance
// ---------------------------------------------------------------------------

struct ManifoldFit {
    std::vector<double> beta;     // as given (fixed during the fit)
    std::vector<double> c;        // fitted positions
    double distance = 0.0;        // in the requested norm
    std::size_t iterations = 0;   // summed over restarts
    std::size_t restarts = 0;
    bool converged = false;       // simplex converged and local-minimum check passed
};

struct FitOptions {
    std::size_t restart_budget = 8;
    std::size_t max_iter_per_restart = 1200;
    unsigned seed = 0x5eed;       // jitter stream for the extra starts
    double jitter = 1.5;
};

/// inf over c of ||q - Q_{beta,c}|| in the requested Sobolev norm, by
/// downhill simplex from peak-detected seeds.  Wells deeper than
/// -beta_min^2 seed the positions (deepest well takes the largest
/// amplitude); remaining restarts jitter the seed.
inline ManifoldFit manifold_distance(const Field& q, std::vector<double> beta,
                                     const SobolevSpec& spec, const FitOptions& opt = {}) {
    MultisolitonParams(beta, std::vector<double>(beta.size(), 0.0));  // validate betas
    spec.validate();
    const auto& g = *q.grid();
    const std::size_t n = beta.size();

    // descending amplitude order for depth matching, undone at the end
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return beta[a] > beta[b]; });
    std::vector<double> bsort(n);
    for (std::size_t i = 0; i < n; ++i) bsort[i] = beta[perm[i]];

    // peak detection: local minima deeper than -beta_min^2
    const double bmin = bsort.back();
    std::vector<std::pair<double, double>> wells;  // depth, position
    for (std::size_t j = 1; j + 1 < q.size(); ++j)
        if (q[j] < q[j - 1] && q[j] < q[j + 1] && q[j] < -bmin * bmin)
            wells.emplace_back(q[j], g.node(j));
    std::sort(wells.begin(), wells.end());  // deepest first

    std::vector<double> seed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double peak = (i < wells.size()) ? wells[i].second
                            : (wells.empty() ? 0.0 : wells[0].second);
        seed[i] = peak + std::log(2.0 * bsort[i]) / (2.0 * bsort[i]);
    }

    auto objective = [&](const std::vector<double>& c) {
        return detail::penalized_profile_mismatch(q, bsort, c, spec);
    };

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss;
    ManifoldFit fit;
    fit.beta = beta;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> bestc = seed;
    bool any_converged = false;
    std::size_t stale = 0;
    for (std::size_t r = 0; r < opt.restart_budget; ++r) {
        // odd restarts shuffle the well-to-amplitude assignment: overlapping
        // wells make the depth ordering unreliable and the N! basins are the
        // failure mode multistart exists for
        std::vector<double> x0 = seed;
        if (r > 0 && r % 2 == 1 && n > 1) {
            std::vector<std::size_t> shuffle(n);
            for (std::size_t i = 0; i < n; ++i) shuffle[i] = i;
            std::shuffle(shuffle.begin(), shuffle.end(), rng);
            for (std::size_t i = 0; i < n; ++i) x0[i] = seed[shuffle[i]];
        }
        if (r > 0)
            for (auto& v : x0) v += opt.jitter * gauss(rng);
        const auto nm = detail::nelder_mead(objective, x0, 0.5, opt.max_iter_per_restart);
        fit.iterations += nm.iterations;
        ++fit.restarts;
        if (nm.fmin < best - 1e-16) {
            best = nm.fmin;
            bestc = nm.x;
            any_converged = nm.converged;
            stale = 0;
        } else if (++stale >= 3 && r >= 4 && any_converged) {
            break;  // enough of the budget spent without progress
        }
    }

    // local-minimum audit: +-1e-4 coordinate moves must not improve
    bool local_min = true;
    for (std::size_t i = 0; i < n && local_min; ++i) {
        for (double sgn : {-1.0, 1.0}) {
            std::vector<double> probe = bestc;
            probe[i] += sgn * 1e-4;
            if (objective(probe) < best - 1e-15) {
                local_min = false;
                break;
            }
        }
    }

    fit.distance = std::sqrt(std::max(0.0, best));
    fit.c.resize(n);
    for (std::size_t i = 0; i < n; ++i) fit.c[perm[i]] = bestc[i];
    fit.converged = any_converged && local_min;
    return fit;
}

// ---------------------------------------------------------------------------
// Seeded perturbations
// ---------------------------------------------------------------------------

/// Band-limited white noise, windowed to the central part of the box so
/// evolution keeps meaningful boundary diagnostics, then scaled to hit the
/// target norm exactly.
inline Field perturbation_noise(GridPtr grid, unsigned seed, double band_freq,
                                const SobolevSpec& spec, double target_norm) {
    if (!(band_freq > grid->dxi()))
        throw invalid_input("perturbation_noise: band must exceed the lowest nonzero mode");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const std::size_t m = grid->size();
    std::vector<complex> h(m, complex(0.0, 0.0));
    for (std::size_t s = 1; s < m / 2; ++s) {
        const double xi = grid->freq(s);
        if (std::abs(xi) > band_freq) continue;
        const complex z(gauss(rng), gauss(rng));
        h[s] = z;
        h[m - s] = std::conj(z);
    }
    Field raw = Field::from_spectrum(grid, h);

    // super-Gaussian window, flat inside |x| < 0.3 L, ~1e-26 at the edges
    std::vector<double> s(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double u = grid->node(j) / (0.3 * grid->length());
        const double u4 = u * u * u * u;
        s[j] = raw[j] * std::exp(-u4 * u4);
    }
    Field windowed(grid, std::move(s));
    const double nrm = windowed.sobolev_norm(spec);
    if (!(nrm > 0.0)) throw invalid_input("perturbation_noise: empty band");
    return (target_norm / nrm) * windowed;
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::vector<double> beta;
    std::vector<double> c;
    double grid_length = 200.0;
    std::size_t grid_points = 4096;
    double horizon = 5.0;
    double dt = 2.5e-4;
    std::size_t samples = 11;
    unsigned seed = 20250801;
    double perturbation_amplitude = 1e-3;   // in the first requested norm
    double perturbation_band = 4.0;
    std::vector<SobolevSpec> norms = {SobolevSpec::hs(-1.0), SobolevSpec::hs(0.0),
                                      SobolevSpec::hs(1.0)};
    double boundary_budget = 1e-9;
    bool abort_on_boundary = false;
    FitOptions fit;
};

struct StabilityReport {
    std::vector<double> times;
    std::vector<std::vector<double>> distances;  // [time][norm]
    std::vector<std::vector<double>> fitted_c;   // [time] best-fit c in the first norm
    std::vector<double> max_over_initial;        // per norm
    std::map<std::string, double> drift;
    double boundary_max = 0.0;
    bool all_converged = true;
};

/// Evolve a perturbed multisoliton and track the manifold distance in each
/// requested norm at the sample times.  The sup over t is the sampled
/// maximum on the configured horizon; the report's ratios are
/// max-over-samples divided by the t=0 value.
inline StabilityReport stability_run(const ExperimentConfig& cfg) {
    MultisolitonParams params(cfg.beta, cfg.c);
    auto grid = Grid::make(cfg.grid_length, cfg.grid_points);
    Field q0 = profile(params, grid);
    if (cfg.perturbation_amplitude > 0.0) {
        q0 += perturbation_noise(grid, cfg.seed, cfg.perturbation_band, cfg.norms.at(0),
                                 cfg.perturbation_amplitude);
    }

    EvolveOptions eopt;
    eopt.dt = cfg.dt;
    eopt.sample_count = cfg.samples;
    eopt.boundary_budget = cfg.boundary_budget;
    eopt.abort_on_boundary = cfg.abort_on_boundary;
    const Trajectory tr = evolve(q0, cfg.horizon, eopt);

    StabilityReport rep;
    rep.drift = tr.max_drift;
    rep.max_over_initial.assign(cfg.norms.size(), 0.0);
    std::vector<double> initial(cfg.norms.size(), 0.0);
    for (std::size_t t = 0; t < tr.samples.size(); ++t) {
        const auto& sample = tr.samples[t];
        rep.times.push_back(sample.t);
        std::vector<double> row;
        for (std::size_t k = 0; k < cfg.norms.size(); ++k) {
            const ManifoldFit fit = manifold_distance(sample.q, cfg.beta, cfg.norms[k], cfg.fit);
            rep.all_converged = rep.all_converged && fit.converged;
            row.push_back(fit.distance);
            if (k == 0) rep.fitted_c.push_back(fit.c);
            if (t == 0) initial[k] = fit.distance;
        }
        rep.distances.push_back(row);
        const double edge = std::max(std::abs(sample.q.samples().front()),
                                     std::abs(sample.q.samples().back()));
        rep.boundary_max = std::max(rep.boundary_max, edge);
    }
    for (std::size_t k = 0; k < cfg.norms.size(); ++k) {
        double mx = 0.0;
        for (const auto& row : rep.distances) mx = std::max(mx, row[k]);
        rep.max_over_initial[k] = mx / std::max(initial[k], 1e-300);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Tail monitor
// ---------------------------------------------------------------------------

/// sup over sampled times of ||P_{>=N} q(t)||_{H^s}: the high-frequency
/// content that an equicontinuous family must keep uniformly small.
inline double tail_monitor(const Trajectory& tr, double band, double s) {
    if (tr.samples.empty()) throw invalid_input("tail_monitor: empty trajectory");
    double mx = 0.0;
    for (const auto& sample : tr.samples) {
        // P_{>=N} keeps every dyadic shell at and above N, i.e. |xi| > N/2
        Field hi = lp_project(sample.q, band / 2.0, BandMode::above);
        mx = std::max(mx, hi.sobolev_norm(SobolevSpec::hs(s)));
    }
    return mx;
}

}  // namespace kdvlab

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "kdvlab/errors.hpp"

namespace kdvlab {

using complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi_v<double>;

/// Periodic box [-L/2, L/2) with M = 2^p sample points, M >= 8.
///
/// Frequencies are xi_m = 2*pi*m/L for signed mode index m in
/// {-M/2, ..., M/2-1}; storage order is FFT order (0, 1, ..., -1).
/// The grid owns the twiddle tables, so transforms are lock-free and
/// Grid instances can be shared across threads.
class Grid {
  public:
    static std::shared_ptr<const Grid> make(double length, std::size_t point_count) {
        return std::shared_ptr<const Grid>(new Grid(length, point_count));
    }

    double length() const { return length_; }
    std::size_t size() const { return m_; }
    double dx() const { return length_ / static_cast<double>(m_); }
    double dxi() const { return 2.0 * pi / length_; }

    /// Signed integer mode index for FFT-order slot m.
    long mode(std::size_t m) const {
        return m < m_ / 2 ? static_cast<long>(m) : static_cast<long>(m) - static_cast<long>(m_);
    }
    double node(std::size_t j) const { return -length_ / 2 + static_cast<double>(j) * dx(); }
    double freq(std::size_t m) const { return dxi() * static_cast<double>(mode(m)); }
    double max_freq() const { return dxi() * static_cast<double>(m_ / 2 - 1); }
    std::size_t nyquist_slot() const { return m_ / 2; }

    std::vector<double> nodes() const {
        std::vector<double> x(m_);
        for (std::size_t j = 0; j < m_; ++j) x[j] = node(j);
        return x;
    }

    /// In-place unnormalized DFT, v_k <- sum_j v_j exp(-2*pi*i*j*k/M).
    void fft(std::vector<complex>& v) const { fft_impl(v, false); }
    /// Inverse of fft() including the 1/M normalization.
    void ifft(std::vector<complex>& v) const {
        fft_impl(v, true);
        const double s = 1.0 / static_cast<double>(m_);
        for (auto& z : v) z *= s;
    }

  private:
    Grid(double length, std::size_t point_count) : length_(length), m_(point_count) {
        if (!(length > 0.0)) throw invalid_input("Grid: length must be positive");
        if (m_ < 8 || (m_ & (m_ - 1)) != 0)
            throw invalid_input("Grid: point count must be a power of two, at least 8");
        twiddle_.resize(m_ / 2);
        for (std::size_t j = 0; j < m_ / 2; ++j)
            twiddle_[j] = std::polar(1.0, -2.0 * pi * static_cast<double>(j) / static_cast<double>(m_));
        bitrev_.resize(m_);
        std::size_t bits = 0;
        while ((1u << bits) < m_) ++bits;
        for (std::size_t i = 0; i < m_; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
            bitrev_[i] = r;
        }
    }

    void fft_impl(std::vector<complex>& v, bool inverse) const {
        if (v.size() != m_) throw invalid_input("fft: size mismatch with grid");
        for (std::size_t i = 0; i < m_; ++i)
            if (bitrev_[i] > i) std::swap(v[i], v[bitrev_[i]]);
        for (std::size_t len = 2; len <= m_; len <<= 1) {
            const std::size_t stride = m_ / len;
            for (std::size_t i = 0; i < m_; i += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    complex w = twiddle_[k * stride];
                    if (inverse) w = std::conj(w);
                    const complex u = v[i + k];
                    const complex t = w * v[i + k + len / 2];
                    v[i + k] = u + t;
                    v[i + k + len / 2] = u - t;
                }
            }
        }
    }

    double length_;
    std::size_t m_;
    std::vector<complex> twiddle_;
    std::vector<std::size_t> bitrev_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Sobolev norm request: plain H^s with weight (1+xi^2)^s, or the modulated
/// family H^{-1}_kappa with weight (xi^2 + 4 kappa^2)^{-1} when kappa is set.
struct SobolevSpec {
    double s = 0.0;
    std::optional<double> kappa;

    static SobolevSpec hs(double s) {
        SobolevSpec sp;
        sp.s = s;
        sp.validate();
        return sp;
    }
    static SobolevSpec hm1_kappa(double kappa) {
        SobolevSpec sp;
        sp.s = -1.0;
        sp.kappa = kappa;
        sp.validate();
        return sp;
    }

    void validate() const {
        if (!(s >= -1.0 && s <= 1.0)) throw invalid_input("SobolevSpec: s must lie in [-1,1]");
        if (kappa && !(*kappa > 0.0)) throw invalid_input("SobolevSpec: kappa must be positive");
    }

    double weight(double xi) const {
        if (kappa) return 1.0 / (xi * xi + 4.0 * *kappa * *kappa);
        return std::pow(1.0 + xi * xi, s);
    }
};

/// Real field on a Grid with its spectrum computed eagerly at construction.
///
/// Spectrum convention is the unitary line transform restricted to the box,
///   qhat(xi_m) = (2*pi)^{-1/2} * (L/M) * sum_j q(x_j) exp(-i xi_m x_j),
/// so the discrete Plancherel identity
///   (L/M) sum_j q_j^2  ==  sum_m |qhat_m|^2 * dxi
/// holds to roundoff.  This is the convention under which the trace
/// identity tr(K^2) = ||q||^2_{H^{-1}_kappa}/kappa comes out exactly.
class Field {
  public:
    Field(GridPtr grid, std::vector<double> samples)
        : grid_(std::move(grid)), samples_(std::move(samples)) {
        if (!grid_) throw invalid_input("Field: null grid");
        if (samples_.size() != grid_->size()) throw invalid_input("Field: sample count mismatch");
        for (double v : samples_)
            if (!std::isfinite(v)) throw invalid_input("Field: non-finite sample");
        compute_spectrum();
    }

    static Field zero(GridPtr grid) {
        return Field(std::move(grid), std::vector<double>(0), ZeroTag{});
    }

    /// Build a field from spectral coefficients (same convention as hat()).
    /// The imaginary residue of the inverse transform must be below 1e-10
    /// of the field scale; callers constructing real fields spectrally
    /// should pass Hermitian-symmetric data.
    static Field from_spectrum(GridPtr grid, const std::vector<complex>& hat) {
        if (!grid) throw invalid_input("Field: null grid");
        const std::size_t m = grid->size();
        if (hat.size() != m) throw invalid_input("Field: spectrum size mismatch");
        const double scale = std::sqrt(2.0 * pi) / grid->dx();
        std::vector<complex> v(m);
        for (std::size_t k = 0; k < m; ++k) {
            const double sign = (grid->mode(k) % 2 == 0) ? 1.0 : -1.0;
            v[k] = hat[k] * sign * scale;
        }
        grid->ifft(v);
        std::vector<double> samples(m);
        double max_im = 0.0, max_re = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            samples[j] = v[j].real();
            max_im = std::max(max_im, std::abs(v[j].imag()));
            max_re = std::max(max_re, std::abs(v[j].real()));
        }
        if (max_im > 1e-10 * std::max(1.0, max_re))
            throw invalid_input("Field::from_spectrum: spectrum is not Hermitian-symmetric");
        return Field(std::move(grid), std::move(samples));
    }

    const GridPtr& grid() const { return grid_; }
    std::size_t size() const { return samples_.size(); }
    const std::vector<double>& samples() const { return samples_; }
    const std::vector<complex>& spectrum() const { return hat_; }
    double operator[](std::size_t j) const { return samples_[j]; }
    complex hat(std::size_t m) const { return hat_[m]; }

    /// Trapezoid (= spectrally exact) integral over the box.
    double integral() const {
        double s = 0.0;
        for (double v : samples_) s += v;
        return s * grid_->dx();
    }

    double l2_norm_sq() const {
        double s = 0.0;
        for (double v : samples_) s += v * v;
        return s * grid_->dx();
    }
    double l2_norm() const { return std::sqrt(l2_norm_sq()); }

    double sup_norm() const {
        double s = 0.0;
        for (double v : samples_) s = std::max(s, std::abs(v));
        return s;
    }

    double sobolev_norm_sq(const SobolevSpec& spec) const {
        spec.validate();
        double s = 0.0;
        for (std::size_t m = 0; m < hat_.size(); ++m)
            s += std::norm(hat_[m]) * spec.weight(grid_->freq(m));
        return s * grid_->dxi();
    }
    double sobolev_norm(const SobolevSpec& spec) const { return std::sqrt(sobolev_norm_sq(spec)); }

    /// Spectral n-th derivative; the Nyquist mode is zeroed to keep real
    /// fields real.
    Field derivative(unsigned order = 1) const {
        std::vector<complex> h(hat_);
        for (std::size_t m = 0; m < h.size(); ++m) {
            const complex ixi(0.0, grid_->freq(m));
            complex f = 1.0;
            for (unsigned r = 0; r < order; ++r) f *= ixi;
            h[m] *= f;
        }
        h[grid_->nyquist_slot()] = 0.0;
        return from_spectrum(grid_, h);
    }

    /// Spectral resampling onto a grid of the same length: pads with zero
    /// modes when refining, drops the tail when coarsening.  Coarsening is
    /// refused if the dropped modes carry more than 1e-10 of the amplitude.
    Field resample(GridPtr target) const {
        if (!target) throw invalid_input("resample: null grid");
        if (target->length() != grid_->length())
            throw invalid_input("resample: box length must match");
        const double scale = std::max(1e-300, sup_norm());
        std::vector<complex> h(target->size(), complex(0.0, 0.0));
        double dropped = 0.0;
        for (std::size_t m = 0; m < hat_.size(); ++m) {
            const long mode = grid_->mode(m);
            if (mode == -static_cast<long>(grid_->size() / 2)) continue;  // Nyquist
            if (std::labs(mode) < static_cast<long>(target->size() / 2)) {
                const std::size_t slot = mode >= 0
                    ? static_cast<std::size_t>(mode)
                    : target->size() - static_cast<std::size_t>(-mode);
                h[slot] = hat_[m];
            } else {
                dropped = std::max(dropped, std::abs(hat_[m]));
            }
        }
        if (dropped > 1e-10 * scale)
            throw resolution_error("resample: dropped spectral mass above 1e-10 of the field");
        return from_spectrum(std::move(target), h);
    }

    /// Band-limited translation q(x) -> q(x-h).
    Field translate(double h) const {
        std::vector<complex> hh(hat_);
        for (std::size_t m = 0; m < hh.size(); ++m)
            hh[m] *= std::polar(1.0, -grid_->freq(m) * h);
        hh[grid_->nyquist_slot()] = 0.0;
        return from_spectrum(grid_, hh);
    }

    Field& operator+=(const Field& o) {
        check_same_grid(o);
        for (std::size_t j = 0; j < samples_.size(); ++j) samples_[j] += o.samples_[j];
        compute_spectrum();
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same_grid(o);
        for (std::size_t j = 0; j < samples_.size(); ++j) samples_[j] -= o.samples_[j];
        compute_spectrum();
        return *this;
    }
    Field& operator*=(double a) {
        for (auto& v : samples_) v *= a;
        for (auto& z : hat_) z *= a;
        return *this;
    }
    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double a, Field f) { return f *= a; }

  private:
    struct ZeroTag {};
    Field(GridPtr grid, std::vector<double>, ZeroTag) : grid_(std::move(grid)) {
        samples_.assign(grid_->size(), 0.0);
        hat_.assign(grid_->size(), complex(0.0, 0.0));
    }

    void check_same_grid(const Field& o) const {
        if (grid_.get() != o.grid_.get() &&
            (grid_->size() != o.grid_->size() || grid_->length() != o.grid_->length()))
            throw invalid_input("Field: grid mismatch");
    }

    void compute_spectrum() {
        const std::size_t m = grid_->size();
        std::vector<complex> v(m);
        for (std::size_t j = 0; j < m; ++j) v[j] = samples_[j];
        grid_->fft(v);
        hat_.resize(m);
        const double scale = grid_->dx() / std::sqrt(2.0 * pi);
        for (std::size_t k = 0; k < m; ++k) {
            // exp(-i xi_k x_j) = (-1)^{mode} exp(-2 pi i j k / M) on this box
            const double sign = (grid_->mode(k) % 2 == 0) ? 1.0 : -1.0;
            hat_[k] = v[k] * sign * scale;
        }
    }

    GridPtr grid_;
    std::vector<double> samples_;
    std::vector<complex> hat_;
};

/// Forward transform as a standalone operation (copy of the cached spectrum).
inline std::vector<complex> transform(const Field& f) { return f.spectrum(); }

inline double norm(const Field& f, const SobolevSpec& spec) { return f.sobolev_norm(spec); }

enum class BandMode { at, below, above };

namespace detail {
inline bool is_dyadic(double n) {
    if (!(n > 0.0) || !std::isfinite(n)) return false;
    const double l = std::log2(n);
    return std::abs(l - std::round(l)) < 1e-12;
}
}  // namespace detail

/// Sharp-cutoff Littlewood-Paley projection.  mode::at keeps the dyadic
/// shell N/2 < |xi| <= N, mode::below keeps |xi| <= N (including the mean),
/// mode::above keeps |xi| > N.  Sharp cutoffs make P_{<=N} + P_{>N} = id
/// exact on the grid; the Nyquist mode is always zeroed.
inline Field lp_project(const Field& f, double band, BandMode mode) {
    const auto& g = *f.grid();
    if (!detail::is_dyadic(band)) throw out_of_band("lp_project: band must be dyadic");
    if (band < g.dxi() / 2.0 || band / 2.0 > g.max_freq())
        throw out_of_band("lp_project: band outside the grid's resolved range");
    std::vector<complex> h = f.spectrum();
    for (std::size_t m = 0; m < h.size(); ++m) {
        const double a = std::abs(g.freq(m));
        bool keep = false;
        switch (mode) {
            case BandMode::at: keep = (a > band / 2.0 && a <= band); break;
            case BandMode::below: keep = (a <= band); break;
            case BandMode::above: keep = (a > band); break;
        }
        if (!keep) h[m] = 0.0;
    }
    h[g.nyquist_slot()] = 0.0;
    return Field::from_spectrum(f.grid(), h);
}

/// All dyadic band centers N with at least one grid frequency in their
/// shell, ascending.
inline std::vector<double> dyadic_bands(const Grid& g) {
    std::vector<double> bands;
    const double lo = g.dxi(), hi = g.max_freq();
    double n = std::exp2(std::ceil(std::log2(lo)));
    for (; n / 2.0 <= hi; n *= 2.0) bands.push_back(n);
    return bands;
}

}  // namespace kdvlab

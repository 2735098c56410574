#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "contrakt/error.hpp"
#include "contrakt/matrix.hpp"
#include "contrakt/measures.hpp"
#include "contrakt/model.hpp"
#include "contrakt/parallel.hpp"

namespace contrakt {

/// Per-mode outcome of a certification run. `rate` is c_i, the negated
/// worst matrix measure of the mode Jacobian over the sampled closure of
/// its region; the margin below zero equals the rate.
struct ModeRate {
    std::string mode;
    double rate = 0.0;
    double worst_mu = 0.0;
    std::vector<double> worst_x;
    double worst_t = 0.0;
    long samples = 0;
};

struct SamplingMeta {
    std::vector<int> grid;
    long time_samples = 0;
    unsigned long seed = 42;
    double boundary_tol = 1e-6;
    long boundary_points = 0;
};

/// Contraction certificate: a common matrix measure together with
/// per-mode rate bounds. VALID means every mode satisfied
/// mu(Jacobian) <= -c_i < 0 on the sampled set, with the overall rate
/// c = min_i c_i. Unless `exact` is set the certificate is sampled
/// evidence, not a proof: it reports the worst grid point, not a bound
/// over the continuum.
struct ContractionCertificate {
    std::string system;
    std::string kind;
    MeasureKind measure = MeasureKind::two();
    std::vector<ModeRate> per_mode;
    double rate = 0.0;
    bool valid = false;
    bool exact = false;
    std::optional<SamplingMeta> meta;

    const ModeRate& binding_mode() const {
        const ModeRate* worst = &per_mode.front();
        for (const auto& m : per_mode)
            if (m.rate < worst->rate) worst = &m;
        return *worst;
    }
};

namespace certdet {

inline void finalize(ContractionCertificate& cert) {
    double c = std::numeric_limits<double>::infinity();
    for (const auto& m : cert.per_mode) c = std::min(c, m.rate);
    cert.rate = c;
    cert.valid = c > 0.0;
}

inline std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> out;
    if (count <= 1) {
        out.push_back(0.5 * (lo + hi));
        return out;
    }
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    return out;
}

inline std::vector<std::vector<double>> grid_points(const Box& box, std::span<const int> counts) {
    if (counts.size() != box.dim()) throw Error("grid size must match state dimension");
    std::vector<std::vector<double>> axes;
    for (std::size_t i = 0; i < box.dim(); ++i)
        axes.push_back(linspace(box.lo[i], box.hi[i], counts[i]));
    std::vector<std::vector<double>> pts;
    std::vector<std::size_t> idx(box.dim(), 0);
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.size();
    pts.reserve(total);
    for (std::size_t k = 0; k < total; ++k) {
        std::vector<double> x(box.dim());
        std::size_t rem = k;
        for (std::size_t i = 0; i < box.dim(); ++i) {
            x[i] = axes[i][rem % axes[i].size()];
            rem /= axes[i].size();
        }
        pts.push_back(std::move(x));
    }
    return pts;
}

// Extra sample points on the guard zero sets of a mode, found by
// bisection along random chords and nudged just inside the region, to
// honor the continuous extension of the Jacobian onto the boundary.
inline std::vector<std::vector<double>> boundary_points(const SwitchedSystemModel& sys,
                                                        const ModeDef& mode, long per_guard,
                                                        double nudge, unsigned long seed) {
    std::vector<std::vector<double>> pts;
    std::mt19937_64 rng(seed);
    std::vector<double> env;
    const std::size_t n = sys.dim();
    for (const auto& guard : mode.region) {
        long found = 0;
        long attempts = 0;
        while (found < per_guard && attempts < per_guard * 64) {
            ++attempts;
            auto a = sys.domain.sample(rng);
            auto b = sys.domain.sample(rng);
            sys.fill_env(a, 0.0, env);
            double ga = guard.boundary_value(env);
            sys.fill_env(b, 0.0, env);
            const double gb = guard.boundary_value(env);
            if (ga == 0.0 || gb == 0.0 || (ga > 0) == (gb > 0)) continue;
            std::vector<double> mid(n);
            for (int it = 0; it < 80; ++it) {
                for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (a[i] + b[i]);
                sys.fill_env(mid, 0.0, env);
                const double gm = guard.boundary_value(env);
                if (gm == 0.0) break;
                if ((gm > 0) == (ga > 0)) {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            // nudge towards the side where the whole region holds
            for (const double dir : {-1.0, +1.0}) {
                std::vector<double> p(n);
                for (std::size_t i = 0; i < n; ++i)
                    p[i] = mid[i] + dir * nudge * (b[i] - a[i]);
                sys.fill_env(p, 0.0, env);
                bool inside = sys.domain.contains(p);
                for (const auto& g : mode.region)
                    if (!g.satisfied(env, nudge)) inside = false;
                if (inside) pts.push_back(std::move(p));
            }
            ++found;
        }
    }
    return pts;
}

struct WorstSample {
    double mu_value = -std::numeric_limits<double>::infinity();
    std::size_t index = 0;
};

}  // namespace certdet

/// Jacobian of one mode of the system at (x, t): the analytic
/// derivatives of the mode field, evaluated entrywise.
inline DenseMatrix jacobian(const SwitchedSystemModel& sys, int mode, std::span<const double> x,
                            double t) {
    const std::size_t n = sys.dim();
    std::vector<double> env;
    sys.fill_env(x, t, env);
    DenseMatrix j(n, n);
    const auto& jac = sys.modes[static_cast<std::size_t>(mode)].jacobian;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < n; ++c) j(i, c) = eval(jac[i][c], env);
    j.require_finite("jacobian");
    return j;
}

namespace certdet {

// Worst measure value over the cartesian product of points and times,
// evaluated in parallel with a deterministic serial reduction.
inline ModeRate rate_over_samples(const SwitchedSystemModel& sys, int mode_index,
                                  const std::vector<std::vector<double>>& points,
                                  std::span<const double> t_samples,
                                  const MeasureKind& measure) {
    const auto& mode = sys.modes[static_cast<std::size_t>(mode_index)];
    if (points.empty())
        throw Error("mode '" + mode.name + "' has an empty sample set");
    const std::size_t total = points.size() * t_samples.size();
    std::vector<double> values(total);
    parallel_for(points.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            for (std::size_t q = 0; q < t_samples.size(); ++q) {
                const DenseMatrix j = jacobian(sys, mode_index, points[p], t_samples[q]);
                values[p * t_samples.size() + q] = mu(j, measure);
            }
        }
    });
    WorstSample worst;
    for (std::size_t k = 0; k < total; ++k)
        if (values[k] > worst.mu_value) {
            worst.mu_value = values[k];
            worst.index = k;
        }
    ModeRate r;
    r.mode = mode.name;
    r.worst_mu = worst.mu_value;
    r.rate = -worst.mu_value;
    r.worst_x = points[worst.index / t_samples.size()];
    r.worst_t = t_samples[worst.index % t_samples.size()];
    r.samples = static_cast<long>(total);
    return r;
}

inline bool all_modes_constant(const SwitchedSystemModel& sys) {
    for (std::size_t m = 0; m < sys.modes.size(); ++m)
        if (!sys.constant_mode_matrix(static_cast<int>(m))) return false;
    return true;
}

inline std::vector<double> default_time_samples(const SwitchedSystemModel& sys, int count) {
    return linspace(0.0, sys.period.value_or(10.0), count);
}

}  // namespace certdet

struct CertifyOptions {
    std::vector<int> grid;             // per-dimension counts; empty = 33 each
    std::vector<double> t_samples;     // empty = 65 over one period (or [0,10])
    long boundary_samples_per_guard = 32;
    double boundary_tol = 1e-6;
    unsigned long seed = 42;
};

namespace certdet {

inline std::vector<int> effective_grid(const SwitchedSystemModel& sys,
                                       const CertifyOptions& opt, int fallback) {
    if (!opt.grid.empty()) {
        if (opt.grid.size() == 1)
            return std::vector<int>(sys.dim(), opt.grid[0]);
        if (opt.grid.size() != sys.dim())
            throw Error("grid must give one count per state dimension");
        return opt.grid;
    }
    return std::vector<int>(sys.dim(), fallback);
}

inline std::vector<double> effective_times(const SwitchedSystemModel& sys,
                                           const CertifyOptions& opt, int fallback) {
    return opt.t_samples.empty() ? default_time_samples(sys, fallback) : opt.t_samples;
}

}  // namespace certdet

/// Certify a PWSC model: for each mode, sample the closure of its region
/// intersected with the domain (grid points satisfying the region within
/// boundary_tol plus bisected points on the guard zero sets) across the
/// time grid, and bound mu of the mode Jacobian. Linear time-invariant
/// modes collapse to a single exact evaluation.
inline ContractionCertificate certify_pwsc(const SwitchedSystemModel& sys,
                                           const MeasureKind& measure,
                                           const CertifyOptions& opt = {}) {
    if (sys.kind != SystemKind::Pwsc) throw Error("certify_pwsc requires a PWSC model");
    ContractionCertificate cert;
    cert.system = sys.name;
    cert.kind = "pwsc";
    cert.measure = measure;
    cert.exact = certdet::all_modes_constant(sys);

    if (cert.exact) {
        for (std::size_t m = 0; m < sys.modes.size(); ++m) {
            const DenseMatrix a = *sys.constant_mode_matrix(static_cast<int>(m));
            ModeRate r;
            r.mode = sys.modes[m].name;
            r.worst_mu = mu(a, measure);
            r.rate = -r.worst_mu;
            r.samples = 1;
            cert.per_mode.push_back(std::move(r));
        }
        certdet::finalize(cert);
        return cert;
    }

    const auto grid = certdet::effective_grid(sys, opt, 33);
    const auto times = certdet::effective_times(sys, opt, 65);
    const auto all_points = certdet::grid_points(sys.domain, grid);

    SamplingMeta meta;
    meta.grid = grid;
    meta.time_samples = static_cast<long>(times.size());
    meta.seed = opt.seed;
    meta.boundary_tol = opt.boundary_tol;

    std::vector<double> env;
    for (std::size_t m = 0; m < sys.modes.size(); ++m) {
        const auto& mode = sys.modes[m];
        std::vector<std::vector<double>> points;
        for (const auto& x : all_points) {
            sys.fill_env(x, times.front(), env);
            bool inside = true;
            for (const auto& g : mode.region)
                if (!g.satisfied(env, opt.boundary_tol)) {
                    inside = false;
                    break;
                }
            if (inside) points.push_back(x);
        }
        auto extra = certdet::boundary_points(sys, mode, opt.boundary_samples_per_guard,
                                              opt.boundary_tol, opt.seed);
        meta.boundary_points += static_cast<long>(extra.size());
        for (auto& p : extra) points.push_back(std::move(p));
        cert.per_mode.push_back(
            certdet::rate_over_samples(sys, static_cast<int>(m), points, times, measure));
    }
    cert.meta = std::move(meta);
    certdet::finalize(cert);
    return cert;
}

/// Certify a TSS model: regions are time-selected, so every mode is
/// sampled over the whole domain box.
inline ContractionCertificate certify_tss(const SwitchedSystemModel& sys,
                                          const MeasureKind& measure,
                                          const CertifyOptions& opt = {}) {
    if (sys.kind != SystemKind::Tss) throw Error("certify_tss requires a TSS model");
    ContractionCertificate cert;
    cert.system = sys.name;
    cert.kind = "tss";
    cert.measure = measure;
    cert.exact = certdet::all_modes_constant(sys);

    if (cert.exact) {
        for (std::size_t m = 0; m < sys.modes.size(); ++m) {
            const DenseMatrix a = *sys.constant_mode_matrix(static_cast<int>(m));
            ModeRate r;
            r.mode = sys.modes[m].name;
            r.worst_mu = mu(a, measure);
            r.rate = -r.worst_mu;
            r.samples = 1;
            cert.per_mode.push_back(std::move(r));
        }
        certdet::finalize(cert);
        return cert;
    }

    const auto grid = certdet::effective_grid(sys, opt, 33);
    const auto times = certdet::effective_times(sys, opt, 65);
    const auto points = certdet::grid_points(sys.domain, grid);

    SamplingMeta meta;
    meta.grid = grid;
    meta.time_samples = static_cast<long>(times.size());
    meta.seed = opt.seed;
    meta.boundary_tol = opt.boundary_tol;

    for (std::size_t m = 0; m < sys.modes.size(); ++m)
        cert.per_mode.push_back(
            certdet::rate_over_samples(sys, static_cast<int>(m), points, times, measure));
    cert.meta = std::move(meta);
    certdet::finalize(cert);
    return cert;
}

/// Exact certificate for a family of constant matrices (switched linear
/// system under arbitrary switching): c_i = -mu(A_i), no sampling. VALID
/// means max_i mu(A_i) < 0, which by the switched-linear corollary sends
/// every solution to the origin regardless of the switching sequence.
inline ContractionCertificate certify_pwl_exact(std::span<const DenseMatrix> matrices,
                                                const MeasureKind& measure) {
    if (matrices.empty()) throw Error("certify_pwl_exact requires at least one matrix");
    const std::size_t n = matrices.front().rows();
    ContractionCertificate cert;
    cert.system = "pwl";
    cert.kind = "pwl";
    cert.measure = measure;
    cert.exact = true;
    for (std::size_t i = 0; i < matrices.size(); ++i) {
        matrices[i].require_square("mode matrix");
        if (matrices[i].rows() != n) throw Error("mode matrices must share one size");
        ModeRate r;
        r.mode = "A(" + std::to_string(i + 1) + ")";
        r.worst_mu = mu(matrices[i], measure);
        r.rate = -r.worst_mu;
        r.samples = 1;
        cert.per_mode.push_back(std::move(r));
    }
    certdet::finalize(cert);
    return cert;
}

/// Certify the virtual system dy = v(y, x, t) attached to a model, with
/// the real state x and time treated as exogenous sample inputs. First
/// verifies the embedding v(x, x, t) = f(x, t) on sampled points, then
/// bounds mu(∂v/∂y) across a (y, x, t) product grid. A VALID certificate
/// makes the real system partially contracting: all its solutions
/// converge to the single trajectory of the virtual system.
inline ContractionCertificate certify_virtual(const SwitchedSystemModel& sys,
                                              const MeasureKind& measure,
                                              const CertifyOptions& opt = {},
                                              long embedding_samples = 256) {
    if (!sys.virtual_field) throw Error("model has no [virtual] section");
    const auto& vf = *sys.virtual_field;
    const std::size_t n = sys.dim();

    // embedding check: substituting y = x must reproduce the real field
    {
        std::mt19937_64 rng(opt.seed);
        std::vector<double> venv(2 * n + 1);
        std::vector<double> f(n);
        const auto times = certdet::effective_times(sys, opt, 17);
        for (long s = 0; s < embedding_samples; ++s) {
            const auto x = sys.domain.sample(rng);
            const double t = times[static_cast<std::size_t>(s) % times.size()];
            std::copy(x.begin(), x.end(), venv.begin());
            std::copy(x.begin(), x.end(), venv.begin() + static_cast<long>(n));
            venv[2 * n] = t;
            sys.eval_field(sys.mode_at(x, t), x, t, f);
            for (std::size_t i = 0; i < n; ++i) {
                const double v = eval(vf.field[i], venv);
                if (std::abs(v - f[i]) > 1e-9 * (1.0 + std::abs(f[i])))
                    throw Error("virtual field does not embed the real system: v(x,x,t) - f = " +
                                std::to_string(v - f[i]) + " at component " + std::to_string(i));
            }
        }
    }

    ContractionCertificate cert;
    cert.system = sys.name;
    cert.kind = "virtual";
    cert.measure = measure;

    bool constant = true;
    for (const auto& row : vf.jacobian)
        for (const auto& e : row)
            if (!expr_is_constant(e)) constant = false;
    cert.exact = constant;

    std::vector<double> venv(2 * n + 1);
    auto eval_jacobian = [&](std::span<const double> y, std::span<const double> x, double t) {
        std::copy(y.begin(), y.end(), venv.begin());
        std::copy(x.begin(), x.end(), venv.begin() + static_cast<long>(n));
        venv[2 * n] = t;
        DenseMatrix j(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < n; ++c) j(i, c) = eval(vf.jacobian[i][c], venv);
        j.require_finite("virtual jacobian");
        return j;
    };

    if (cert.exact) {
        const std::vector<double> zero(n, 0.0);
        ModeRate r;
        r.mode = "virtual";
        r.worst_mu = mu(eval_jacobian(zero, zero, 0.0), measure);
        r.rate = -r.worst_mu;
        r.samples = 1;
        cert.per_mode.push_back(std::move(r));
        certdet::finalize(cert);
        return cert;
    }

    const auto grid = certdet::effective_grid(sys, opt, 9);
    const auto times = certdet::effective_times(sys, opt, 17);
    const auto pts = certdet::grid_points(sys.domain, grid);

    ModeRate r;
    r.mode = "virtual";
    r.worst_mu = -std::numeric_limits<double>::infinity();
    for (const auto& y : pts)
        for (const auto& x : pts)
            for (const double t : times) {
                const double v = mu(eval_jacobian(y, x, t), measure);
                ++r.samples;
                if (v > r.worst_mu) {
                    r.worst_mu = v;
                    r.worst_x = x;
                    r.worst_t = t;
                }
            }
    r.rate = -r.worst_mu;
    cert.per_mode.push_back(std::move(r));

    SamplingMeta meta;
    meta.grid = grid;
    meta.time_samples = static_cast<long>(times.size());
    meta.seed = opt.seed;
    cert.meta = std::move(meta);
    certdet::finalize(cert);
    return cert;
}

/// Search a diagonal weight Θ = diag(θ1..θn) over a log grid (default
/// 10^-2..10^2, 9 points per axis) maximizing the common rate
/// min_i -mu(Θ A_i Θ⁻¹). Returns the best kind with its certificate,
/// which may still be INVALID.
struct WeightSearchResult {
    MeasureKind kind = MeasureKind::two();
    ContractionCertificate certificate;
};

inline WeightSearchResult search_weight(std::span<const DenseMatrix> matrices, MeasureTag tag,
                                        int points_per_axis = 9, double log10_min = -2.0,
                                        double log10_max = 2.0) {
    if (matrices.empty()) throw Error("search_weight requires at least one matrix");
    const std::size_t n = matrices.front().rows();
    if (n > 4) throw Error("diagonal weight search supports n <= 4");

    WeightSearchResult best;
    best.kind = MeasureKind::from_tag(tag);
    best.certificate = certify_pwl_exact(matrices, best.kind);

    const auto exponents = certdet::linspace(log10_min, log10_max, points_per_axis);
    const std::size_t total = [&] {
        std::size_t c = 1;
        for (std::size_t i = 0; i < n; ++i) c *= exponents.size();
        return c;
    }();
    std::vector<double> theta(n);
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t rem = k;
        for (std::size_t i = 0; i < n; ++i) {
            theta[i] = std::pow(10.0, exponents[rem % exponents.size()]);
            rem /= exponents.size();
        }
        const MeasureKind kind = MeasureKind::weighted(tag, DenseMatrix::diagonal(theta));
        auto cert = certify_pwl_exact(matrices, kind);
        if (cert.rate > best.certificate.rate) {
            best.kind = kind;
            best.certificate = std::move(cert);
        }
    }
    return best;
}

/// Same search over a caller-supplied candidate list (weights need not be
/// diagonal).
inline WeightSearchResult search_weight(std::span<const DenseMatrix> matrices, MeasureTag tag,
                                        std::span<const DenseMatrix> candidates) {
    if (matrices.empty()) throw Error("search_weight requires at least one matrix");
    WeightSearchResult best;
    best.kind = MeasureKind::from_tag(tag);
    best.certificate = certify_pwl_exact(matrices, best.kind);
    for (const auto& theta : candidates) {
        const MeasureKind kind = MeasureKind::weighted(tag, theta);
        auto cert = certify_pwl_exact(matrices, kind);
        if (cert.rate > best.certificate.rate) {
            best.kind = kind;
            best.certificate = std::move(cert);
        }
    }
    return best;
}

// --- certificate serialization -------------------------------------------

namespace certdet {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace certdet

/// Human-readable report.
inline void write_certificate_report(std::ostream& out, const ContractionCertificate& cert) {
    out << "contraction certificate\n";
    out << "  system  = " << cert.system << "\n";
    out << "  kind    = " << cert.kind << "\n";
    out << "  measure = " << cert.measure.name() << "\n";
    out << "  exact   = " << (cert.exact ? "true" : "false") << "\n";
    if (cert.meta) {
        out << "  grid    =";
        for (int g : cert.meta->grid) out << " " << g;
        out << "\n";
        out << "  t_samples = " << cert.meta->time_samples << "\n";
        out << "  seed      = " << cert.meta->seed << "\n";
        out << "  boundary_tol = " << certdet::fmt17(cert.meta->boundary_tol) << "\n";
        out << "  boundary_points = " << cert.meta->boundary_points << "\n";
    }
    for (const auto& m : cert.per_mode) {
        out << "  mode " << m.mode << ": rate = " << certdet::fmt17(m.rate)
            << "  worst_mu = " << certdet::fmt17(m.worst_mu);
        if (!m.worst_x.empty()) {
            out << "  worst_x =";
            for (double v : m.worst_x) out << " " << certdet::fmt17(v);
            out << "  worst_t = " << certdet::fmt17(m.worst_t);
        }
        out << "  samples = " << m.samples << "\n";
    }
    out << "  rate  = " << certdet::fmt17(cert.rate) << "\n";
    out << "  valid = " << (cert.valid ? "true" : "false") << "\n";
    if (!cert.exact)
        out << "  note  = sampled evidence over the stated grid, not a proof\n";
}

/// Machine-readable key = value form.
inline void write_certificate_kv(std::ostream& out, const ContractionCertificate& cert) {
    out << "system = " << cert.system << "\n";
    out << "kind = " << cert.kind << "\n";
    out << "measure = " << cert.measure.name() << "\n";
    out << "exact = " << (cert.exact ? "true" : "false") << "\n";
    out << "valid = " << (cert.valid ? "true" : "false") << "\n";
    out << "rate = " << certdet::fmt17(cert.rate) << "\n";
    out << "modes = " << cert.per_mode.size() << "\n";
    for (std::size_t i = 0; i < cert.per_mode.size(); ++i) {
        const auto& m = cert.per_mode[i];
        const std::string p = "mode." + std::to_string(i) + ".";
        out << p << "name = " << m.mode << "\n";
        out << p << "rate = " << certdet::fmt17(m.rate) << "\n";
        out << p << "worst_mu = " << certdet::fmt17(m.worst_mu) << "\n";
        out << p << "samples = " << m.samples << "\n";
        if (!m.worst_x.empty()) {
            out << p << "worst_x =";
            for (double v : m.worst_x) out << " " << certdet::fmt17(v);
            out << "\n";
            out << p << "worst_t = " << certdet::fmt17(m.worst_t) << "\n";
        }
    }
    if (cert.meta) {
        out << "grid =";
        for (int g : cert.meta->grid) out << " " << g;
        out << "\n";
        out << "t_samples = " << cert.meta->time_samples << "\n";
        out << "seed = " << cert.meta->seed << "\n";
        out << "boundary_tol = " << certdet::fmt17(cert.meta->boundary_tol) << "\n";
    }
}

}  // namespace contrakt

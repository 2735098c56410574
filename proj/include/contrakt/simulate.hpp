#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "contrakt/certify.hpp"
#include "contrakt/error.hpp"
#include "contrakt/measures.hpp"
#include "contrakt/model.hpp"

namespace contrakt {

struct SwitchEvent {
    double time = 0.0;
    int from_mode = 0;
    int to_mode = 0;
    std::vector<double> state;  // crossing point
};

/// Sampled solution: states at the uniform output grid plus every
/// switching instant (integration restarts there, so the crossing state
/// is part of the record). `modes[k]` governs [times[k], times[k+1]).
class Trajectory {
public:
    std::vector<double> times;
    std::vector<int> modes;
    std::vector<SwitchEvent> events;

    Trajectory() = default;
    explicit Trajectory(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return times.size(); }

    std::span<const double> state(std::size_t k) const {
        return {flat_.data() + k * dim_, dim_};
    }

    void append(double t, std::span<const double> x, int mode) {
        times.push_back(t);
        flat_.insert(flat_.end(), x.begin(), x.end());
        modes.push_back(mode);
    }

    void replace_last(double t, std::span<const double> x, int mode) {
        times.back() = t;
        std::copy(x.begin(), x.end(), flat_.end() - static_cast<long>(dim_));
        modes.back() = mode;
    }

    /// Index of the sample at time t (within tol); throws if absent.
    std::size_t index_at(double t, double tol = 1e-9) const {
        auto it = std::lower_bound(times.begin(), times.end(), t - tol);
        if (it == times.end() || std::abs(*it - t) > tol)
            throw Error("no trajectory sample at t = " + std::to_string(t));
        return static_cast<std::size_t>(it - times.begin());
    }

    std::span<const double> state_at(double t, double tol = 1e-9) const {
        return state(index_at(t, tol));
    }

    /// Mode governing time t (right-continuous across events).
    int mode_at(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return modes.front();
        return modes[static_cast<std::size_t>(it - times.begin()) - 1];
    }

private:
    std::size_t dim_ = 0;
    std::vector<double> flat_;
};

namespace simdet {

// Integration driver interface: the three system flavors (plain model,
// model + virtual co-state, network) all reduce to a vector field with
// either state-driven or time-driven mode selection.

struct ModelDriver {
    const SwitchedSystemModel& sys;

    std::size_t dim() const { return sys.dim(); }
    bool time_driven() const { return sys.kind == SystemKind::Tss; }
    int initial_mode(std::span<const double> x, double t) const { return sys.mode_at(x, t); }
    int mode_query(std::span<const double> x, double t) const { return sys.mode_at(x, t); }
    std::optional<double> next_breakpoint(double t) const {
        return sys.signal->next_breakpoint(t);
    }
    int signal_mode(double t) const { return sys.signal->mode_at(t); }
    void field(int mode, std::span<const double> x, double t, std::span<double> out) const {
        sys.eval_field(mode, x, t, out);
    }
    void check_domain(std::span<const double> x, double t) const {
        if (!sys.domain.contains(x, 1e-9))
            throw Error("state escaped the domain box at t = " + std::to_string(t));
    }
};

// Real system co-integrated with its virtual copy: z = (x, y),
// dx = f(x,t), dy = v(y, x, t). Mode selection follows the x half.
struct VirtualDriver {
    const SwitchedSystemModel& sys;

    std::size_t dim() const { return 2 * sys.dim(); }
    bool time_driven() const { return sys.kind == SystemKind::Tss; }
    int initial_mode(std::span<const double> z, double t) const {
        return sys.mode_at(z.subspan(0, sys.dim()), t);
    }
    int mode_query(std::span<const double> z, double t) const {
        return sys.mode_at(z.subspan(0, sys.dim()), t);
    }
    std::optional<double> next_breakpoint(double t) const {
        return sys.signal->next_breakpoint(t);
    }
    int signal_mode(double t) const { return sys.signal->mode_at(t); }
    void field(int mode, std::span<const double> z, double t, std::span<double> out) const {
        const std::size_t n = sys.dim();
        const auto x = z.subspan(0, n);
        sys.eval_field(mode, x, t, out.subspan(0, n));
        thread_local std::vector<double> venv;
        venv.resize(2 * n + 1);
        std::copy(z.begin() + static_cast<long>(n), z.end(), venv.begin());  // y
        std::copy(x.begin(), x.end(), venv.begin() + static_cast<long>(n));  // x
        venv[2 * n] = t;
        const auto& vf = *sys.virtual_field;
        for (std::size_t i = 0; i < n; ++i) out[n + i] = eval(vf.field[i], venv);
    }
    void check_domain(std::span<const double> z, double t) const {
        if (!sys.domain.contains(z.subspan(0, sys.dim()), 1e-9))
            throw Error("state escaped the domain box at t = " + std::to_string(t));
    }
};

template <class Driver>
class Rk4Stepper {
public:
    explicit Rk4Stepper(const Driver& driver)
        : driver_(driver),
          n_(driver.dim()),
          k1_(n_), k2_(n_), k3_(n_), k4_(n_), tmp_(n_), f_end_(n_) {}

    // One classical RK4 step from (t, x) over h; fills x_out and the end
    // derivative used by the cubic Hermite dense output.
    void step(int mode, double t, double h, std::span<const double> x, std::span<double> x_out) {
        driver_.field(mode, x, t, k1_);
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
        driver_.field(mode, tmp_, t + 0.5 * h, k2_);
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
        driver_.field(mode, tmp_, t + 0.5 * h, k3_);
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * k3_[i];
        driver_.field(mode, tmp_, t + h, k4_);
        for (std::size_t i = 0; i < n_; ++i)
            x_out[i] = x[i] + h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
        driver_.field(mode, x_out, t + h, f_end_);
    }

    // Cubic Hermite interpolant on the last step, theta in [0, 1].
    void interpolate(std::span<const double> x0, std::span<const double> x1, double h,
                     double theta, std::span<double> out) const {
        const double t2 = theta * theta;
        const double t3 = t2 * theta;
        const double h00 = 2 * t3 - 3 * t2 + 1;
        const double h10 = t3 - 2 * t2 + theta;
        const double h01 = -2 * t3 + 3 * t2;
        const double h11 = t3 - t2;
        for (std::size_t i = 0; i < n_; ++i)
            out[i] = h00 * x0[i] + h10 * h * k1_[i] + h01 * x1[i] + h11 * h * f_end_[i];
    }

private:
    const Driver& driver_;
    std::size_t n_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_, f_end_;
};

template <class Driver>
Trajectory integrate_core(const Driver& driver, std::span<const double> x0, double t0, double t1,
                          double dt) {
    if (!(dt > 0.0)) throw Error("integration step must be positive");
    if (!(t1 > t0)) throw Error("integration horizon must be forward in time");
    const std::size_t n = driver.dim();
    if (x0.size() != n) throw Error("initial state dimension mismatch");

    Trajectory traj(n);
    driver.check_domain(x0, t0);
    int mode = driver.initial_mode(x0, t0);
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> x_next(n), x_probe(n);
    Rk4Stepper<Driver> stepper(driver);

    const long n_steps = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-12));
    const long max_events =
        static_cast<long>(1e4 * std::max(1.0, t1 - t0));

    traj.append(t0, x, mode);

    double t = t0;
    for (long k = 1; k <= n_steps; ++k) {
        const double t_goal = (k == n_steps) ? t1 : t0 + static_cast<double>(k) * dt;
        // advance from t to t_goal, splitting at breakpoints/crossings
        while (t < t_goal - 1e-13 * std::max(1.0, std::abs(t_goal))) {
            double t_stop = t_goal;
            bool breakpoint_stop = false;
            if (driver.time_driven()) {
                if (const auto bp = driver.next_breakpoint(t); bp && *bp <= t_goal + 1e-15) {
                    t_stop = *bp;
                    breakpoint_stop = true;
                }
            }
            const double h = t_stop - t;
            stepper.step(mode, t, h, x, x_next);

            if (!driver.time_driven()) {
                const int after = driver.mode_query(x_next, t_stop);
                if (after != mode) {
                    // locate the crossing on the dense output by bisection
                    if (static_cast<long>(traj.events.size()) >= max_events)
                        throw Error("guard chatter: more than 1e4 events per unit time near t = " +
                                    std::to_string(t));
                    double lo = 0.0, hi = 1.0;
                    while ((hi - lo) * h > 1e-10) {
                        const double mid = 0.5 * (lo + hi);
                        stepper.interpolate(x, x_next, h, mid, x_probe);
                        if (driver.mode_query(x_probe, t + mid * h) == mode)
                            lo = mid;
                        else
                            hi = mid;
                    }
                    stepper.interpolate(x, x_next, h, hi, x_probe);
                    const double tau = t + hi * h;
                    const int new_mode = driver.mode_query(x_probe, tau);
                    traj.events.push_back({tau, mode, new_mode,
                                           std::vector<double>(x_probe.begin(), x_probe.end())});
                    x.assign(x_probe.begin(), x_probe.end());
                    mode = new_mode;
                    t = tau;
                    driver.check_domain(x, t);
                    traj.append(tau, x, mode);
                    continue;
                }
            }

            x.swap(x_next);
            t = t_stop;
            driver.check_domain(x, t);
            if (breakpoint_stop) {
                const int new_mode = driver.signal_mode(t_stop);
                if (new_mode != mode) {
                    traj.events.push_back(
                        {t_stop, mode, new_mode, std::vector<double>(x.begin(), x.end())});
                    mode = new_mode;
                }
                traj.append(t, x, mode);
            } else {
                traj.append(t, x, mode);
            }
        }
        t = t_goal;
    }
    return traj;
}

}  // namespace simdet

/// Integrate a Caratheodory solution with classical fixed-step RK4.
/// TSS models split steps exactly at the signal breakpoints; PWSC models
/// monitor the active region each step and locate guard crossings on the
/// cubic Hermite dense output by bisection to |dt| <= 1e-10, restarting
/// in the new mode. Leaving the domain box or exceeding 1e4 events per
/// unit time raises an error.
inline Trajectory integrate(const SwitchedSystemModel& sys, std::span<const double> x0, double t0,
                            double t1, double dt) {
    simdet::ModelDriver driver{sys};
    return simdet::integrate_core(driver, x0, t0, t1, dt);
}

/// Distance history of a trajectory pair in the certificate's norm,
/// with the fitted decay slope and the exponential envelope check
/// |x(t)-y(t)| <= K e^{-c (t-t0)} |x0-y0| (K = 1 on a convex box).
struct DivergenceReport {
    double t0 = 0.0;
    double t1 = 0.0;
    double initial_distance = 0.0;
    std::vector<double> sample_times;
    std::vector<double> distances;
    double fitted_slope = 0.0;
    double theoretical_rate = 0.0;
    bool certificate_valid = false;
    bool bound_violation = false;
    bool identically_zero = false;
    double worst_envelope_ratio = 0.0;
    double transient_fraction = 0.1;

    /// First sample time with distance below `threshold`, if any.
    std::optional<double> first_time_below(double threshold) const {
        for (std::size_t k = 0; k < distances.size(); ++k)
            if (distances[k] < threshold) return sample_times[k];
        return std::nullopt;
    }
};

namespace simdet {

// Least-squares slope of log-distance after the transient window.
inline double fit_log_slope(std::span<const double> ts, std::span<const double> ds,
                            double t_begin) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long n = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        if (ts[k] < t_begin || ds[k] <= 1e-280) continue;
        const double y = std::log(ds[k]);
        sx += ts[k];
        sy += y;
        sxx += ts[k] * ts[k];
        sxy += ts[k] * y;
        ++n;
    }
    if (n < 2) return 0.0;
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) return 0.0;
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

}  // namespace simdet

/// Integrate two solutions from x0 and y0 and measure their distance in
/// the certificate's norm at the shared output grid. Samples within 1e-9
/// of a switching instant of either trajectory are excluded from the
/// envelope check (the bound is an almost-everywhere statement and the
/// crossing states are recorded separately).
inline DivergenceReport divergence(const SwitchedSystemModel& sys, std::span<const double> x0,
                                   std::span<const double> y0, double t0, double t1, double dt,
                                   const ContractionCertificate& certificate) {
    const Trajectory tx = integrate(sys, x0, t0, t1, dt);
    const Trajectory ty = integrate(sys, y0, t0, t1, dt);

    DivergenceReport rep;
    rep.t0 = t0;
    rep.t1 = t1;
    rep.theoretical_rate = certificate.rate;
    rep.certificate_valid = certificate.valid;

    std::vector<double> diff(sys.dim());
    auto distance_at = [&](double t) {
        const auto xs = tx.state_at(t);
        const auto ys = ty.state_at(t);
        for (std::size_t i = 0; i < sys.dim(); ++i) diff[i] = xs[i] - ys[i];
        return vector_norm(diff, certificate.measure);
    };

    rep.initial_distance = distance_at(t0);

    auto near_event = [&](double t) {
        for (const auto& e : tx.events)
            if (std::abs(e.time - t) < 1e-9) return true;
        for (const auto& e : ty.events)
            if (std::abs(e.time - t) < 1e-9) return true;
        return false;
    };

    const long n_steps = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-12));
    double max_distance = 0.0;
    for (long k = 0; k <= n_steps; ++k) {
        const double t = (k == n_steps) ? t1 : t0 + static_cast<double>(k) * dt;
        const double d = distance_at(t);
        rep.sample_times.push_back(t);
        rep.distances.push_back(d);
        max_distance = std::max(max_distance, d);
        if (rep.certificate_valid && !near_event(t)) {
            const double envelope =
                rep.initial_distance * std::exp(-certificate.rate * (t - t0));
            if (envelope > 0.0)
                rep.worst_envelope_ratio = std::max(rep.worst_envelope_ratio, d / envelope);
            if (d > envelope * (1.0 + 1e-6)) rep.bound_violation = true;
        }
    }

    rep.identically_zero = max_distance <= 1e-15 * (1.0 + rep.initial_distance);
    rep.fitted_slope = rep.identically_zero
                           ? 0.0
                           : simdet::fit_log_slope(rep.sample_times, rep.distances,
                                                   t0 + rep.transient_fraction * (t1 - t0));
    return rep;
}

/// Co-integrate the real system with its virtual system (the virtual
/// state driven by the real trajectory) and report the decay of
/// |x(t) - y(t)|.
struct VirtualRunReport {
    std::vector<double> sample_times;
    std::vector<double> distances;
    double fitted_slope = 0.0;
    double final_distance = 0.0;
    bool converged = false;  // distance decreased below 1e-8
};

inline std::pair<Trajectory, Trajectory> split_stacked(const Trajectory& stacked, std::size_t n) {
    Trajectory tx(n), ty(n);
    for (std::size_t k = 0; k < stacked.size(); ++k) {
        const auto z = stacked.state(k);
        tx.append(stacked.times[k], z.subspan(0, n), stacked.modes[k]);
        ty.append(stacked.times[k], z.subspan(n, n), stacked.modes[k]);
    }
    tx.events = stacked.events;
    return {std::move(tx), std::move(ty)};
}

inline std::tuple<Trajectory, Trajectory, VirtualRunReport> simulate_virtual(
    const SwitchedSystemModel& sys, std::span<const double> x0, std::span<const double> y0,
    double t0, double t1, double dt, const MeasureKind& norm_kind = MeasureKind::two()) {
    if (!sys.virtual_field) throw Error("model has no [virtual] section");
    const std::size_t n = sys.dim();
    if (x0.size() != n || y0.size() != n) throw Error("initial state dimension mismatch");
    std::vector<double> z0(2 * n);
    std::copy(x0.begin(), x0.end(), z0.begin());
    std::copy(y0.begin(), y0.end(), z0.begin() + static_cast<long>(n));

    simdet::VirtualDriver driver{sys};
    const Trajectory stacked = simdet::integrate_core(driver, z0, t0, t1, dt);
    auto [tx, ty] = split_stacked(stacked, n);

    VirtualRunReport rep;
    std::vector<double> diff(n);
    for (std::size_t k = 0; k < stacked.size(); ++k) {
        const auto z = stacked.state(k);
        for (std::size_t i = 0; i < n; ++i) diff[i] = z[i] - z[n + i];
        rep.sample_times.push_back(stacked.times[k]);
        rep.distances.push_back(vector_norm(diff, norm_kind));
    }
    rep.final_distance = rep.distances.back();
    rep.converged = rep.final_distance < 1e-8;
    rep.fitted_slope =
        simdet::fit_log_slope(rep.sample_times, rep.distances, t0 + 0.1 * (t1 - t0));
    return {std::move(tx), std::move(ty), std::move(rep)};
}

// --- CSV output ------------------------------------------------------------

/// Trajectory CSV: header `t,<states...>,mode`, one row per sample.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                                 std::span<const std::string> state_names) {
    out << "t";
    for (const auto& s : state_names) out << "," << s;
    out << ",mode\n";
    char buf[40];
    for (std::size_t k = 0; k < traj.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.times[k]);
        out << buf;
        for (const double v : traj.state(k)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << "," << buf;
        }
        out << "," << traj.modes[k] << "\n";
    }
}

/// Event sidecar CSV: `t,from,to`.
inline void write_events_csv(std::ostream& out, const Trajectory& traj) {
    out << "t,from,to\n";
    char buf[40];
    for (const auto& e : traj.events) {
        std::snprintf(buf, sizeof buf, "%.17g", e.time);
        out << buf << "," << e.from_mode << "," << e.to_mode << "\n";
    }
}

}  // namespace contrakt

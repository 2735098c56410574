#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "contrakt/error.hpp"
#include "contrakt/expr.hpp"
#include "contrakt/matrix.hpp"
#include "contrakt/measures.hpp"
#include "contrakt/textfile.hpp"

namespace contrakt {

/// Axis-aligned box domain. Convex, hence 1-reachable: any two points are
/// joined by the straight segment, so the contraction bounds hold with
/// prefactor K = 1.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const { return lo.size(); }

    void validate() const {
        if (lo.size() != hi.size() || lo.empty()) throw Error("malformed domain box");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] <= hi[i])) throw Error("domain box has lo > hi");
    }

    bool contains(std::span<const double> x, double tol = 0.0) const {
        for (std::size_t i = 0; i < lo.size(); ++i) {
            const double slack = tol * (1.0 + hi[i] - lo[i]);
            if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
        }
        return true;
    }

    std::vector<double> sample(std::mt19937_64& rng) const {
        std::vector<double> x(dim());
        for (std::size_t i = 0; i < dim(); ++i) {
            std::uniform_real_distribution<double> dist(lo[i], hi[i]);
            x[i] = dist(rng);
        }
        return x;
    }
};

enum class GuardRelation { Le, Lt, Ge, Gt };

/// One inequality of a mode region. The scalar boundary function is
/// lhs - rhs; its zero set is the switching boundary shared with the
/// neighboring mode.
struct GuardExpr {
    ExprPtr lhs;
    ExprPtr rhs;
    GuardRelation relation = GuardRelation::Le;

    double boundary_value(std::span<const double> env) const {
        return eval(lhs, env) - eval(rhs, env);
    }

    /// Closed-relation membership with an optional outward slack. Strict
    /// relations are treated as closed here: points exactly on the zero
    /// set belong to every adjacent closure and the tie-break in mode_at
    /// picks the lowest index.
    bool satisfied(std::span<const double> env, double slack = 0.0) const {
        const double b = boundary_value(env);
        switch (relation) {
            case GuardRelation::Le:
            case GuardRelation::Lt:
                return b <= slack;
            case GuardRelation::Ge:
            case GuardRelation::Gt:
                return b >= -slack;
        }
        return false;
    }
};

struct ModeDef {
    std::string name;
    std::vector<ExprPtr> field;                 // one component per state
    std::vector<GuardExpr> region;              // conjunction; empty = everywhere
    std::vector<std::vector<ExprPtr>> jacobian; // jacobian[row][col], built at load
};

/// Piecewise-constant, right-continuous mode selector for TSS models.
/// Breakpoint gaps must respect the minimum dwell time, which rules out
/// Zeno switching sequences by construction.
struct SwitchingSignal {
    std::vector<double> times;
    std::vector<int> modes;
    double min_dwell = 0.0;

    void validate(int mode_count) const {
        if (times.empty() || times.size() != modes.size())
            throw Error("switching signal must list at least one breakpoint");
        if (!(min_dwell > 0.0)) throw Error("switching signal dwell must be positive");
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (modes[i] < 0 || modes[i] >= mode_count)
                throw Error("switching signal references an unknown mode");
            if (i > 0) {
                if (!(times[i] > times[i - 1]))
                    throw Error("switching signal times must be strictly increasing");
                if (times[i] - times[i - 1] < min_dwell - 1e-12)
                    throw Error("switching signal violates the minimum dwell time");
            }
        }
    }

    /// Right-continuous lookup; before the first breakpoint the first
    /// mode applies.
    int mode_at(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return modes.front();
        return modes[static_cast<std::size_t>(it - times.begin()) - 1];
    }

    /// Earliest breakpoint strictly after t, if any.
    std::optional<double> next_breakpoint(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.end()) return std::nullopt;
        return *it;
    }
};

enum class SystemKind { Pwsc, Tss };

/// Virtual (auxiliary) system attached to a model: a field over fresh
/// variables y with the real states and t as exogenous inputs. Slot
/// layout of its expressions: [y..., states..., t].
struct VirtualField {
    std::vector<std::string> names;
    std::vector<ExprPtr> field;
    std::vector<std::vector<ExprPtr>> jacobian;  // wrt the y slots
};

class SwitchedSystemModel {
public:
    SystemKind kind = SystemKind::Pwsc;
    std::string name;
    std::vector<std::string> states;
    std::map<std::string, double> parameters;
    std::vector<ModeDef> modes;
    std::optional<SwitchingSignal> signal;
    Box domain;
    std::optional<double> period;  // of any time-dependent input, for sampling
    std::optional<VirtualField> virtual_field;

    std::size_t dim() const { return states.size(); }
    int time_slot() const { return static_cast<int>(states.size()); }

    /// Fill env = [x..., t] for guard/field evaluation.
    void fill_env(std::span<const double> x, double t, std::vector<double>& env) const {
        env.resize(dim() + 1);
        std::copy(x.begin(), x.end(), env.begin());
        env[dim()] = t;
    }

    /// Active mode at (x, t). PWSC: the lowest-index mode whose region
    /// holds (continuity of the field makes the tie-break on boundaries
    /// dynamically irrelevant). TSS: the signal value, right-continuous.
    int mode_at(std::span<const double> x, double t) const {
        if (kind == SystemKind::Tss) return signal->mode_at(t);
        thread_local std::vector<double> env;
        fill_env(x, t, env);
        for (std::size_t i = 0; i < modes.size(); ++i) {
            bool ok = true;
            for (const auto& g : modes[i].region)
                if (!g.satisfied(env)) {
                    ok = false;
                    break;
                }
            if (ok) return static_cast<int>(i);
        }
        throw Error("no mode region holds at the queried point (invalid partition)");
    }

    void eval_field(int mode, std::span<const double> x, double t,
                    std::span<double> out) const {
        thread_local std::vector<double> env;
        fill_env(x, t, env);
        const auto& m = modes[static_cast<std::size_t>(mode)];
        for (std::size_t i = 0; i < dim(); ++i) out[i] = eval(m.field[i], env);
    }

    /// Constant Jacobian of a mode, when the mode is linear
    /// time-invariant in x (all Jacobian entries literal).
    std::optional<DenseMatrix> constant_mode_matrix(int mode) const {
        const auto& jac = modes[static_cast<std::size_t>(mode)].jacobian;
        const std::size_t n = dim();
        DenseMatrix a(n, n);
        const std::vector<double> empty_env;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (!expr_is_constant(jac[i][j])) return std::nullopt;
                a(i, j) = eval(jac[i][j], empty_env);
            }
        return a;
    }

    /// Copy of the model with a different switching signal (TSS only).
    SwitchedSystemModel with_signal(SwitchingSignal s) const {
        if (kind != SystemKind::Tss) throw Error("with_signal requires a TSS model");
        SwitchedSystemModel copy = *this;
        s.validate(static_cast<int>(modes.size()));
        copy.signal = std::move(s);
        return copy;
    }
};

// --- well-posedness sampling checks --------------------------------------

struct PartitionReport {
    long interior_samples = 0;
    long boundary_samples = 0;
    long uncovered = 0;
    long overlapping = 0;
    bool ok() const { return uncovered == 0 && overlapping == 0; }
};

/// Sample the domain and verify that away from guard zero sets exactly
/// one mode region holds. Points within tolerance of any boundary are
/// counted separately and not held against the partition.
inline PartitionReport check_partition(const SwitchedSystemModel& sys, long samples = 2000,
                                       unsigned long seed = 42) {
    if (sys.kind != SystemKind::Pwsc) throw Error("partition check applies to PWSC models");
    std::mt19937_64 rng(seed);
    PartitionReport rep;
    std::vector<double> env;
    const double t_probe = 0.0;
    for (long s = 0; s < samples; ++s) {
        const auto x = sys.domain.sample(rng);
        sys.fill_env(x, t_probe, env);
        bool near_boundary = false;
        int holds = 0;
        for (const auto& mode : sys.modes) {
            bool ok = true;
            for (const auto& g : mode.region) {
                const double b = g.boundary_value(env);
                if (std::abs(b) <= 1e-9 * (1.0 + std::abs(b))) near_boundary = true;
                if (!g.satisfied(env)) ok = false;
            }
            if (ok) ++holds;
        }
        if (near_boundary) {
            ++rep.boundary_samples;
            continue;
        }
        ++rep.interior_samples;
        if (holds == 0) ++rep.uncovered;
        if (holds > 1) ++rep.overlapping;
    }
    return rep;
}

struct ContinuityReport {
    double max_mismatch = 0.0;
    double field_scale = 0.0;
    long boundary_points = 0;
    bool pass = true;

    double tolerance() const { return 1e-8 * (1.0 + field_scale); }
};

/// Sample points on guard zero sets (located by bisection along random
/// domain chords) and compare the fields of every mode whose closure
/// contains the point. Report-only: PASS means the sampled evidence is
/// consistent with a continuous vector field.
inline ContinuityReport check_continuity(const SwitchedSystemModel& sys,
                                         long samples_per_boundary = 64,
                                         unsigned long seed = 42) {
    if (sys.kind != SystemKind::Pwsc) throw Error("continuity check applies to PWSC models");
    ContinuityReport rep;
    std::mt19937_64 rng(seed);
    std::vector<double> env;
    const std::size_t n = sys.dim();
    const std::vector<double> t_probes = {0.0, 0.37, 1.41};

    std::vector<double> fa(n), fb(n);
    for (const auto& mode : sys.modes) {
        for (const auto& guard : mode.region) {
            long found = 0;
            long attempts = 0;
            while (found < samples_per_boundary && attempts < samples_per_boundary * 64) {
                ++attempts;
                auto a = sys.domain.sample(rng);
                auto b = sys.domain.sample(rng);
                const double t = t_probes[static_cast<std::size_t>(attempts) % t_probes.size()];
                sys.fill_env(a, t, env);
                double ga = guard.boundary_value(env);
                sys.fill_env(b, t, env);
                double gb = guard.boundary_value(env);
                if (ga == 0.0 || gb == 0.0 || (ga > 0) == (gb > 0)) continue;
                // bisect the chord for the zero of the boundary function
                std::vector<double> mid(n);
                for (int it = 0; it < 80; ++it) {
                    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (a[i] + b[i]);
                    sys.fill_env(mid, t, env);
                    const double gm = guard.boundary_value(env);
                    if (gm == 0.0) break;
                    if ((gm > 0) == (ga > 0)) {
                        a = mid;
                        ga = gm;
                    } else {
                        b = mid;
                    }
                }
                ++found;
                ++rep.boundary_points;
                // fields of every mode whose closure contains the point
                sys.fill_env(mid, t, env);
                std::vector<int> adjacent;
                for (std::size_t mi = 0; mi < sys.modes.size(); ++mi) {
                    bool ok = true;
                    for (const auto& g : sys.modes[mi].region)
                        if (!g.satisfied(env, 1e-7)) {
                            ok = false;
                            break;
                        }
                    if (ok) adjacent.push_back(static_cast<int>(mi));
                }
                for (std::size_t p = 0; p < adjacent.size(); ++p) {
                    sys.eval_field(adjacent[p], mid, t, fa);
                    for (double v : fa) rep.field_scale = std::max(rep.field_scale, std::abs(v));
                    for (std::size_t q = p + 1; q < adjacent.size(); ++q) {
                        sys.eval_field(adjacent[q], mid, t, fb);
                        double mismatch = 0.0;
                        for (std::size_t i = 0; i < n; ++i)
                            mismatch = std::max(mismatch, std::abs(fa[i] - fb[i]));
                        rep.max_mismatch = std::max(rep.max_mismatch, mismatch);
                    }
                }
            }
        }
    }
    rep.pass = rep.max_mismatch <= rep.tolerance();
    return rep;
}

/// Monte-Carlo upper estimate of the one-sided Lipschitz constant
///   (x-y)ᵀ(f(x,t)-f(y,t)) ≤ l (x-y)ᵀ(x-y)
/// over the domain. Evidence for the uniqueness condition of
/// Caratheodory solutions, never a proof.
inline double check_one_sided_lipschitz(const SwitchedSystemModel& sys, long pair_samples = 2000,
                                        long time_samples = 16, unsigned long seed = 42) {
    std::mt19937_64 rng(seed);
    const std::size_t n = sys.dim();
    const double horizon = sys.period.value_or(10.0);
    double worst = -std::numeric_limits<double>::infinity();
    std::vector<double> fx(n), fy(n);
    for (long s = 0; s < pair_samples; ++s) {
        const auto x = sys.domain.sample(rng);
        const auto y = sys.domain.sample(rng);
        double dist2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) dist2 += (x[i] - y[i]) * (x[i] - y[i]);
        if (dist2 < 1e-20) continue;
        for (long ts = 0; ts < time_samples; ++ts) {
            const double t = horizon * static_cast<double>(ts) /
                             static_cast<double>(std::max<long>(1, time_samples - 1));
            sys.eval_field(sys.mode_at(x, t), x, t, fx);
            sys.eval_field(sys.mode_at(y, t), y, t, fy);
            double inner = 0.0;
            for (std::size_t i = 0; i < n; ++i) inner += (x[i] - y[i]) * (fx[i] - fy[i]);
            worst = std::max(worst, inner / dist2);
        }
    }
    return worst;
}

// --- system file loader ---------------------------------------------------
//
// Format (see docs/file-formats.md):
//   [system]   name, kind = pwsc|tss, states = <names...>,
//              domain <state> = <lo> <hi>, optional period = <T>
//   [params]   name = value
//   [mode.X]   d<state> = "<expr>" per state,
//              guard = "<expr> <rel> <expr>" (repeatable, conjunction)
//   [signal]   dwell = <v>, then lines t = <time> mode = <name>
//   [virtual]  d<name> = "<expr>" (expressions over virtual names,
//              states and t)

namespace modeldet {

inline GuardRelation parse_relation(const std::string& s, int line) {
    if (s == "<=") return GuardRelation::Le;
    if (s == "<") return GuardRelation::Lt;
    if (s == ">=") return GuardRelation::Ge;
    if (s == ">") return GuardRelation::Gt;
    throw ParseError("unknown guard relation '" + s + "'", line, 1);
}

// Split "lhs REL rhs" at the top-level relation token.
inline GuardExpr parse_guard(const std::string& text, std::span<const std::string> vars,
                             const std::vector<std::pair<std::string, double>>& consts,
                             int line) {
    static const char* rels[] = {"<=", ">=", "<", ">"};
    for (const char* rel : rels) {
        const auto pos = text.find(rel);
        if (pos == std::string::npos) continue;
        GuardExpr g;
        g.relation = parse_relation(rel, line);
        try {
            g.lhs = parse_expr(text.substr(0, pos), vars, &consts);
            g.rhs = parse_expr(text.substr(pos + std::strlen(rel)), vars, &consts);
        } catch (const ParseError& e) {
            throw ParseError(std::string("in guard: ") + e.what(), line, 1);
        }
        return g;
    }
    throw ParseError("guard must contain one of <=, <, >=, >", line, 1);
}

inline void reject_reserved_name(const std::string& name, int line) {
    if (name == "t")
        throw ParseError("'t' is reserved for time", line, 1);
    if (is_function_name(name))
        throw ParseError("'" + name + "' is a function name", line, 1);
}

}  // namespace modeldet

inline SwitchedSystemModel load_system(std::istream& in) {
    const auto sections = read_sections(in);
    SwitchedSystemModel sys;
    std::vector<std::pair<std::string, double>> consts;
    std::map<std::string, std::pair<double, double>> domain_by_state;
    bool have_kind = false;

    auto find_section = [&](const std::string& name) -> const FileSection* {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    };

    const FileSection* system_sec = find_section("system");
    if (!system_sec) throw Error("system file lacks a [system] section");

    for (const auto& line : system_sec->lines) {
        const auto& t = line.tokens;
        if (t.size() >= 3 && t[0].text == "name" && t[1].text == "=") {
            sys.name = t[2].text;
        } else if (t.size() >= 3 && t[0].text == "kind" && t[1].text == "=") {
            if (t[2].text == "pwsc")
                sys.kind = SystemKind::Pwsc;
            else if (t[2].text == "tss")
                sys.kind = SystemKind::Tss;
            else
                throw ParseError("kind must be pwsc or tss", line.number, 1);
            have_kind = true;
        } else if (t.size() >= 3 && t[0].text == "states" && t[1].text == "=") {
            for (std::size_t i = 2; i < t.size(); ++i) {
                modeldet::reject_reserved_name(t[i].text, line.number);
                sys.states.push_back(t[i].text);
            }
        } else if (t.size() >= 5 && t[0].text == "domain" && t[2].text == "=") {
            domain_by_state[t[1].text] = {parse_number(t[3], line.number),
                                          parse_number(t[4], line.number)};
        } else if (t.size() >= 3 && t[0].text == "period" && t[1].text == "=") {
            sys.period = parse_number(t[2], line.number);
        } else {
            throw ParseError("unrecognized [system] line", line.number, 1);
        }
    }
    if (!have_kind) throw Error("[system] must declare kind = pwsc|tss");
    if (sys.states.empty()) throw Error("[system] must declare states");
    if (sys.name.empty()) sys.name = "unnamed";

    sys.domain.lo.resize(sys.dim());
    sys.domain.hi.resize(sys.dim());
    for (std::size_t i = 0; i < sys.states.size(); ++i) {
        auto it = domain_by_state.find(sys.states[i]);
        if (it == domain_by_state.end())
            throw Error("missing domain for state '" + sys.states[i] + "'");
        sys.domain.lo[i] = it->second.first;
        sys.domain.hi[i] = it->second.second;
    }
    sys.domain.validate();
    if (domain_by_state.size() != sys.states.size())
        throw Error("domain declared for an unknown state");

    if (const FileSection* params = find_section("params")) {
        for (const auto& line : params->lines) {
            const auto& t = line.tokens;
            if (t.size() != 3 || t[1].text != "=")
                throw ParseError("[params] lines must be 'name = value'", line.number, 1);
            modeldet::reject_reserved_name(t[0].text, line.number);
            for (const auto& s : sys.states)
                if (s == t[0].text)
                    throw ParseError("parameter '" + t[0].text + "' collides with a state",
                                     line.number, 1);
            consts.emplace_back(t[0].text, parse_number(t[2], line.number));
            sys.parameters[t[0].text] = consts.back().second;
        }
    }

    std::vector<std::string> vars = sys.states;
    vars.push_back("t");

    std::map<std::string, int> mode_index;
    for (const auto& sec : sections) {
        if (sec.name.rfind("mode.", 0) != 0) continue;
        ModeDef mode;
        mode.name = sec.name.substr(5);
        if (mode.name.empty()) throw ParseError("mode name missing", sec.line, 1);
        if (mode_index.count(mode.name))
            throw ParseError("duplicate mode '" + mode.name + "'", sec.line, 1);
        mode.field.resize(sys.dim());
        for (const auto& line : sec.lines) {
            const auto& t = line.tokens;
            if (t.size() >= 3 && t[0].text == "guard" && t[1].text == "=") {
                if (!t[2].quoted)
                    throw ParseError("guard must be a quoted string", line.number, 1);
                mode.region.push_back(modeldet::parse_guard(t[2].text, vars, consts, line.number));
                continue;
            }
            if (t.size() >= 3 && t[1].text == "=" && t[0].text.size() > 1 &&
                t[0].text[0] == 'd') {
                const std::string state = t[0].text.substr(1);
                auto it = std::find(sys.states.begin(), sys.states.end(), state);
                if (it == sys.states.end())
                    throw ParseError("'" + t[0].text + "' does not name a declared state",
                                     line.number, 1);
                if (!t[2].quoted)
                    throw ParseError("field expressions must be quoted strings", line.number, 1);
                const auto idx = static_cast<std::size_t>(it - sys.states.begin());
                if (mode.field[idx])
                    throw ParseError("duplicate field for state '" + state + "'", line.number, 1);
                try {
                    mode.field[idx] = parse_expr(t[2].text, vars, &consts);
                } catch (const ParseError& e) {
                    throw ParseError(std::string("in d") + state + ": " + e.what(), line.number, 1);
                }
                continue;
            }
            throw ParseError("unrecognized mode line", line.number, 1);
        }
        for (std::size_t i = 0; i < sys.dim(); ++i)
            if (!mode.field[i])
                throw Error("mode '" + mode.name + "' lacks d" + sys.states[i]);
        // analytic Jacobian, fixed at load time
        mode.jacobian.resize(sys.dim());
        for (std::size_t i = 0; i < sys.dim(); ++i) {
            mode.jacobian[i].resize(sys.dim());
            for (std::size_t j = 0; j < sys.dim(); ++j)
                mode.jacobian[i][j] = diff(mode.field[i], static_cast<int>(j));
        }
        mode_index[mode.name] = static_cast<int>(sys.modes.size());
        sys.modes.push_back(std::move(mode));
    }
    if (sys.modes.empty()) throw Error("system declares no modes");

    if (const FileSection* sig = find_section("signal")) {
        if (sys.kind != SystemKind::Tss)
            throw Error("[signal] section only applies to TSS models");
        SwitchingSignal signal;
        for (const auto& line : sig->lines) {
            const auto& t = line.tokens;
            if (t.size() >= 3 && t[0].text == "dwell" && t[1].text == "=") {
                signal.min_dwell = parse_number(t[2], line.number);
                continue;
            }
            if (t.size() >= 6 && t[0].text == "t" && t[1].text == "=" && t[3].text == "mode" &&
                t[4].text == "=") {
                auto it = mode_index.find(t[5].text);
                if (it == mode_index.end())
                    throw ParseError("signal references unknown mode '" + t[5].text + "'",
                                     line.number, 1);
                signal.times.push_back(parse_number(t[2], line.number));
                signal.modes.push_back(it->second);
                continue;
            }
            throw ParseError("unrecognized [signal] line", line.number, 1);
        }
        signal.validate(static_cast<int>(sys.modes.size()));
        sys.signal = std::move(signal);
    }
    if (sys.kind == SystemKind::Tss && !sys.signal)
        throw Error("TSS model requires a [signal] section");
    if (sys.kind == SystemKind::Pwsc) {
        for (const auto& m : sys.modes)
            if (m.region.empty() && sys.modes.size() > 1)
                throw Error("PWSC mode '" + m.name + "' lacks guards but is not the only mode");
        const auto partition = check_partition(sys);
        if (partition.uncovered > 0)
            throw Error("PWSC regions leave part of the domain uncovered (" +
                        std::to_string(partition.uncovered) + " of " +
                        std::to_string(partition.interior_samples) + " samples)");
        if (partition.overlapping > 0)
            throw Error("PWSC regions overlap away from their boundaries (" +
                        std::to_string(partition.overlapping) + " of " +
                        std::to_string(partition.interior_samples) + " samples)");
    } else {
        for (const auto& m : sys.modes)
            if (!m.region.empty())
                throw Error("TSS modes are signal-selected and take no guards");
    }

    if (const FileSection* virt = find_section("virtual")) {
        VirtualField vf;
        for (const auto& line : virt->lines) {
            const auto& t = line.tokens;
            if (t.size() < 3 || t[1].text != "=" || t[0].text.size() < 2 || t[0].text[0] != 'd')
                throw ParseError("[virtual] lines must be 'd<name> = \"<expr>\"'", line.number, 1);
            if (!t[2].quoted)
                throw ParseError("virtual field expressions must be quoted", line.number, 1);
            const std::string vname = t[0].text.substr(1);
            modeldet::reject_reserved_name(vname, line.number);
            for (const auto& s : sys.states)
                if (s == vname)
                    throw ParseError("virtual variable '" + vname + "' collides with a state",
                                     line.number, 1);
            vf.names.push_back(vname);
        }
        if (vf.names.size() != sys.dim())
            throw Error("virtual field must have one component per state");
        std::vector<std::string> vvars = vf.names;
        for (const auto& s : sys.states) vvars.push_back(s);
        vvars.push_back("t");
        std::size_t k = 0;
        for (const auto& line : virt->lines) {
            try {
                vf.field.push_back(parse_expr(line.tokens[2].text, vvars, &consts));
            } catch (const ParseError& e) {
                throw ParseError(std::string("in d") + vf.names[k] + ": " + e.what(), line.number,
                                 1);
            }
            ++k;
        }
        vf.jacobian.resize(sys.dim());
        for (std::size_t i = 0; i < sys.dim(); ++i) {
            vf.jacobian[i].resize(sys.dim());
            for (std::size_t j = 0; j < sys.dim(); ++j)
                vf.jacobian[i][j] = diff(vf.field[i], static_cast<int>(j));
        }
        sys.virtual_field = std::move(vf);
    }

    return sys;
}

inline SwitchedSystemModel load_system(const std::string& text) {
    std::istringstream in(text);
    return load_system(in);
}

inline SwitchedSystemModel load_system_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open system file: " + path);
    try {
        return load_system(in);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

}  // namespace contrakt

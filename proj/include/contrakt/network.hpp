#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "contrakt/eigen.hpp"
#include "contrakt/error.hpp"
#include "contrakt/matrix.hpp"
#include "contrakt/measures.hpp"
#include "contrakt/model.hpp"
#include "contrakt/simulate.hpp"
#include "contrakt/textfile.hpp"

namespace contrakt {

/// One mode of the shared node dynamics A(σ). Entries may be expressions
/// in t alone (slot 0 = t), so matrices like [[0, sin t], [-1, 0]] fit.
struct NetworkMode {
    std::string name;
    std::vector<std::vector<ExprPtr>> entries;  // n x n

    bool constant() const {
        for (const auto& row : entries)
            for (const auto& e : row)
                if (!expr_is_constant(e)) return false;
        return true;
    }

    DenseMatrix at(double t) const {
        const std::size_t n = entries.size();
        DenseMatrix a(n, n);
        const double env[1] = {t};
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) a(i, j) = eval(entries[i][j], env);
        a.require_finite("network mode matrix");
        return a;
    }
};

/// Diffusively coupled network of identical switched linear nodes:
///   dx_i = A(σ(t)) x_i + Γ Σ_{j∈N_i} (x_j − x_i),
/// with a symmetric nonnegative adjacency, its Laplacian L and a shared
/// switching signal.
class NetworkModel {
public:
    std::string name;
    int node_count = 0;
    int node_dim = 0;
    DenseMatrix adjacency;
    DenseMatrix laplacian;
    DenseMatrix gamma;
    std::vector<NetworkMode> modes;
    SwitchingSignal signal;
    std::optional<double> period;

    const LaplacianSpectrum& spectrum() const {
        if (!spectrum_) spectrum_ = laplacian_spectrum(laplacian);
        return *spectrum_;
    }

    bool connected() const { return spectrum().values[1] > 1e-10; }

    /// Copy with Γ scaled by k (used by the coupling-gain search).
    NetworkModel with_gamma_scale(double k) const {
        NetworkModel copy = *this;
        copy.gamma = gamma * k;
        copy.spectrum_.reset();
        return copy;
    }

    void validate() const {
        if (node_count < 1) throw Error("network needs at least one node");
        if (static_cast<int>(gamma.rows()) != node_dim)
            throw Error("gamma dimension does not match node dimension");
        for (const auto& m : modes)
            if (static_cast<int>(m.entries.size()) != node_dim)
                throw Error("mode matrix dimension does not match node dimension");
        for (int i = 0; i < node_count; ++i)
            for (int j = 0; j < node_count; ++j) {
                if (adjacency(i, j) < 0.0) throw Error("adjacency weights must be nonnegative");
                if (std::abs(adjacency(i, j) - adjacency(j, i)) > 1e-12)
                    throw Error("adjacency must be symmetric");
            }
        signal.validate(static_cast<int>(modes.size()));
    }

private:
    mutable std::optional<LaplacianSpectrum> spectrum_;
};

/// Transversal blocks A(σ) − λ_i Γ at time t, ordered by ascending
/// Laplacian eigenvalue. Block 1 (λ1 = 0) is the synchronous dynamics.
inline std::vector<DenseMatrix> transversal_decompose(const NetworkModel& net, int mode,
                                                      double t = 0.0) {
    const DenseMatrix a = net.modes[static_cast<std::size_t>(mode)].at(t);
    std::vector<DenseMatrix> blocks;
    for (double lambda : net.spectrum().values) blocks.push_back(a - net.gamma * lambda);
    return blocks;
}

/// Synchronization certificate from the λ2 criterion. The binding block
/// is A(σ) − λ2 Γ; all transversal blocks (i >= 2) are checked. Two
/// rates are reported for time-varying modes: `rate` from a sampled time
/// grid, and for μ1/μ∞ a worst-case rate from the entrywise envelope of
/// A(σ(t)) − λΓ over the grid (a rigorous upper bound on mu for those
/// measures).
struct SyncCertificate {
    std::string network;
    MeasureKind measure = MeasureKind::one();
    std::vector<double> lambdas;
    double lambda2 = 0.0;

    struct BlockRate {
        int block = 0;        // index into lambdas (>= 1 are transversal)
        double lambda = 0.0;
        std::string mode;
        double rate = 0.0;       // sampled path
        double worst_t = 0.0;
    };
    std::vector<BlockRate> blocks;

    double rate = 0.0;  // min over transversal blocks and modes, sampled path
    bool valid = false;
    bool lambda2_binding = false;
    std::optional<double> worst_case_rate;  // envelope path (mu_1 / mu_inf only)
    long time_samples = 0;
};

inline SyncCertificate certify_sync(const NetworkModel& net, const MeasureKind& measure,
                                    std::vector<double> t_samples = {}) {
    if (net.node_count < 2) throw Error("synchronization needs at least two nodes");
    if (!net.connected()) throw Error("network topology is not connected (lambda2 = 0)");

    SyncCertificate cert;
    cert.network = net.name;
    cert.measure = measure;
    cert.lambdas = net.spectrum().values;
    cert.lambda2 = cert.lambdas[1];

    if (t_samples.empty()) {
        bool constant = true;
        for (const auto& m : net.modes) constant = constant && m.constant();
        t_samples = constant ? std::vector<double>{0.0}
                             : certdet::linspace(0.0, net.period.value_or(10.0), 129);
    }
    cert.time_samples = static_cast<long>(t_samples.size());

    double best = std::numeric_limits<double>::infinity();
    int best_block = 1;
    const bool envelope_possible = measure.tag() != MeasureTag::Two && !measure.has_weight();
    double worst_case = std::numeric_limits<double>::infinity();

    for (std::size_t b = 1; b < cert.lambdas.size(); ++b) {
        const double lambda = cert.lambdas[b];
        for (std::size_t m = 0; m < net.modes.size(); ++m) {
            SyncCertificate::BlockRate block;
            block.block = static_cast<int>(b);
            block.lambda = lambda;
            block.mode = net.modes[m].name;
            double worst_mu = -std::numeric_limits<double>::infinity();
            const std::size_t n = static_cast<std::size_t>(net.node_dim);
            DenseMatrix envelope(n, n);
            bool envelope_init = false;
            for (double t : t_samples) {
                const DenseMatrix blk = net.modes[m].at(t) - net.gamma * lambda;
                const double v = mu(blk, measure);
                if (v > worst_mu) {
                    worst_mu = v;
                    block.worst_t = t;
                }
                if (envelope_possible) {
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < n; ++j) {
                            const double e = (i == j) ? blk(i, j) : std::abs(blk(i, j));
                            envelope(i, j) =
                                envelope_init ? std::max(envelope(i, j), e) : e;
                        }
                    envelope_init = true;
                }
            }
            block.rate = -worst_mu;
            if (envelope_possible)
                worst_case = std::min(worst_case, -mu(envelope, measure));
            if (block.rate < best) {
                best = block.rate;
                best_block = static_cast<int>(b);
            }
            cert.blocks.push_back(std::move(block));
        }
    }
    cert.rate = best;
    cert.valid = best > 0.0;
    cert.lambda2_binding =
        std::abs(cert.lambdas[static_cast<std::size_t>(best_block)] - cert.lambda2) < 1e-12;
    if (envelope_possible) cert.worst_case_rate = worst_case;
    return cert;
}

/// Bisect for the smallest coupling gain k (Γ = k Γ0) with a VALID
/// synchronization certificate. Monotonicity of the rate in k over the
/// range is spot-checked first.
inline double threshold_k(const NetworkModel& net_template, const MeasureKind& measure,
                          double k_lo, double k_hi, double tol = 1e-7) {
    if (!(k_lo < k_hi)) throw Error("threshold search needs k_lo < k_hi");
    auto rate_at = [&](double k) {
        return certify_sync(net_template.with_gamma_scale(k), measure).rate;
    };
    double previous = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 4; ++i) {
        const double k = k_lo + (k_hi - k_lo) * static_cast<double>(i) / 4.0;
        const double r = rate_at(k);
        if (r < previous - 1e-9)
            throw Error("certificate rate is not monotone in k over the search range");
        previous = r;
    }
    if (rate_at(k_lo) > 0.0) return k_lo;  // already valid at the lower end
    if (rate_at(k_hi) <= 0.0)
        throw Error("no valid coupling gain in the search range");
    double lo = k_lo, hi = k_hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (rate_at(mid) > 0.0 ? hi : lo) = mid;
    }
    return hi;
}

// --- stacked simulation -----------------------------------------------------

namespace netdet {

// Time-driven driver for the stacked dynamics
//   dX = (I_N ⊗ A(σ(t)) − L ⊗ Γ) X.
struct NetworkDriver {
    const NetworkModel& net;

    std::size_t dim() const {
        return static_cast<std::size_t>(net.node_count) * static_cast<std::size_t>(net.node_dim);
    }
    bool time_driven() const { return true; }
    int initial_mode(std::span<const double>, double t) const { return net.signal.mode_at(t); }
    int mode_query(std::span<const double>, double t) const { return net.signal.mode_at(t); }
    std::optional<double> next_breakpoint(double t) const {
        return net.signal.next_breakpoint(t);
    }
    int signal_mode(double t) const { return net.signal.mode_at(t); }
    void field(int mode, std::span<const double> x, double t, std::span<double> out) const {
        const auto n = static_cast<std::size_t>(net.node_dim);
        const auto N = static_cast<std::size_t>(net.node_count);
        const DenseMatrix a = net.modes[static_cast<std::size_t>(mode)].at(t);
        // (I ⊗ A) X: per-node A x_i ; (L ⊗ Γ) X: Γ applied to L-mixed nodes
        thread_local std::vector<double> mixed;
        mixed.assign(N * n, 0.0);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                const double lij = net.laplacian(i, j);
                if (lij == 0.0) continue;
                for (std::size_t c = 0; c < n; ++c) mixed[i * n + c] += lij * x[j * n + c];
            }
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t r = 0; r < n; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < n; ++c) {
                    acc += a(r, c) * x[i * n + c];
                    acc -= net.gamma(r, c) * mixed[i * n + c];
                }
                out[i * n + r] = acc;
            }
    }
    void check_domain(std::span<const double> x, double t) const {
        for (double v : x)
            if (!std::isfinite(v))
                throw Error("network state diverged at t = " + std::to_string(t));
    }
};

}  // namespace netdet

/// Distance of the stacked state to the synchronization subspace
/// {x_1 = ... = x_N}, sampled along a run, with the fitted decay slope.
struct CoordinationReport {
    std::vector<double> sample_times;
    std::vector<double> errors;  // ‖X − 1_N ⊗ x̄‖_2
    double fitted_slope = 0.0;
    double final_error = 0.0;
    bool identically_zero = false;
};

struct NetworkRun {
    Trajectory stacked;
    std::vector<Trajectory> nodes;
    CoordinationReport coordination;
};

inline NetworkRun simulate_network(const NetworkModel& net, std::span<const double> x0, double t0,
                                   double t1, double dt) {
    netdet::NetworkDriver driver{net};
    if (x0.size() != driver.dim()) throw Error("stacked initial state dimension mismatch");
    NetworkRun run;
    run.stacked = simdet::integrate_core(driver, x0, t0, t1, dt);

    const auto n = static_cast<std::size_t>(net.node_dim);
    const auto N = static_cast<std::size_t>(net.node_count);
    for (std::size_t i = 0; i < N; ++i) run.nodes.emplace_back(n);

    double max_error = 0.0;
    for (std::size_t k = 0; k < run.stacked.size(); ++k) {
        const auto X = run.stacked.state(k);
        for (std::size_t i = 0; i < N; ++i)
            run.nodes[i].append(run.stacked.times[k], X.subspan(i * n, n), run.stacked.modes[k]);
        double err2 = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            double mean = 0.0;
            for (std::size_t i = 0; i < N; ++i) mean += X[i * n + c];
            mean /= static_cast<double>(N);
            for (std::size_t i = 0; i < N; ++i) {
                const double d = X[i * n + c] - mean;
                err2 += d * d;
            }
        }
        const double err = std::sqrt(err2);
        max_error = std::max(max_error, err);
        run.coordination.sample_times.push_back(run.stacked.times[k]);
        run.coordination.errors.push_back(err);
    }
    for (std::size_t i = 0; i < N; ++i) run.nodes[i].events = run.stacked.events;
    run.coordination.final_error = run.coordination.errors.back();
    run.coordination.identically_zero = max_error <= 1e-14;
    run.coordination.fitted_slope =
        run.coordination.identically_zero
            ? 0.0
            : simdet::fit_log_slope(run.coordination.sample_times, run.coordination.errors,
                                    t0 + 0.1 * (t1 - t0));
    return run;
}

// --- network file loader -----------------------------------------------------
//
//   [network]  name, nodes = N, optional period = T
//   [graph]    edge lines: i j [weight]   (0-based, undirected)
//   [gamma]    node_dim rows of node_dim numbers
//   [mode.X]   node_dim rows; entries are numbers or quoted expressions
//              in t
//   [signal]   dwell = v, then t = <time> mode = <name> lines

inline NetworkModel load_network(std::istream& in) {
    const auto sections = read_sections(in);
    NetworkModel net;

    auto find_section = [&](const std::string& name) -> const FileSection* {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    };

    const FileSection* head = find_section("network");
    if (!head) throw Error("network file lacks a [network] section");
    for (const auto& line : head->lines) {
        const auto& t = line.tokens;
        if (t.size() >= 3 && t[0].text == "name" && t[1].text == "=")
            net.name = t[2].text;
        else if (t.size() >= 3 && t[0].text == "nodes" && t[1].text == "=")
            net.node_count = static_cast<int>(parse_number(t[2], line.number));
        else if (t.size() >= 3 && t[0].text == "period" && t[1].text == "=")
            net.period = parse_number(t[2], line.number);
        else
            throw ParseError("unrecognized [network] line", line.number, 1);
    }
    if (net.node_count < 1) throw Error("[network] must declare nodes >= 1");
    if (net.name.empty()) net.name = "unnamed";

    const FileSection* gamma_sec = find_section("gamma");
    if (!gamma_sec || gamma_sec->lines.empty()) throw Error("network file lacks a [gamma] block");
    net.node_dim = static_cast<int>(gamma_sec->lines.size());
    net.gamma = DenseMatrix(gamma_sec->lines.size(), gamma_sec->lines.size());
    for (std::size_t i = 0; i < gamma_sec->lines.size(); ++i) {
        const auto& line = gamma_sec->lines[i];
        if (line.tokens.size() != static_cast<std::size_t>(net.node_dim))
            throw ParseError("[gamma] must be a square block", line.number, 1);
        for (std::size_t j = 0; j < line.tokens.size(); ++j)
            net.gamma(i, j) = parse_number(line.tokens[j], line.number);
    }

    const FileSection* graph = find_section("graph");
    if (!graph) throw Error("network file lacks a [graph] section");
    net.adjacency = DenseMatrix(static_cast<std::size_t>(net.node_count),
                                static_cast<std::size_t>(net.node_count));
    for (const auto& line : graph->lines) {
        const auto& t = line.tokens;
        if (t.size() != 2 && t.size() != 3)
            throw ParseError("[graph] lines are 'i j [weight]'", line.number, 1);
        const int i = static_cast<int>(parse_number(t[0], line.number));
        const int j = static_cast<int>(parse_number(t[1], line.number));
        const double w = t.size() == 3 ? parse_number(t[2], line.number) : 1.0;
        if (i < 0 || j < 0 || i >= net.node_count || j >= net.node_count || i == j)
            throw ParseError("edge endpoints must be distinct node indices", line.number, 1);
        if (w < 0.0) throw ParseError("edge weights must be nonnegative", line.number, 1);
        net.adjacency(i, j) = w;
        net.adjacency(j, i) = w;
    }
    net.laplacian = DenseMatrix(static_cast<std::size_t>(net.node_count),
                                static_cast<std::size_t>(net.node_count));
    for (int i = 0; i < net.node_count; ++i) {
        double degree = 0.0;
        for (int j = 0; j < net.node_count; ++j) {
            if (i == j) continue;
            degree += net.adjacency(i, j);
            net.laplacian(i, j) = -net.adjacency(i, j);
        }
        net.laplacian(i, i) = degree;
    }

    const std::vector<std::string> time_var = {"t"};
    std::map<std::string, int> mode_index;
    for (const auto& sec : sections) {
        if (sec.name.rfind("mode.", 0) != 0) continue;
        NetworkMode mode;
        mode.name = sec.name.substr(5);
        if (mode_index.count(mode.name))
            throw ParseError("duplicate mode '" + mode.name + "'", sec.line, 1);
        if (sec.lines.size() != static_cast<std::size_t>(net.node_dim))
            throw ParseError("mode block must have node_dim rows", sec.line, 1);
        for (const auto& line : sec.lines) {
            std::vector<ExprPtr> row;
            if (line.tokens.size() != static_cast<std::size_t>(net.node_dim))
                throw ParseError("mode row must have node_dim entries", line.number, 1);
            for (const auto& tok : line.tokens) {
                if (tok.quoted) {
                    try {
                        row.push_back(parse_expr(tok.text, time_var));
                    } catch (const ParseError& e) {
                        throw ParseError(std::string("in mode entry: ") + e.what(), line.number, 1);
                    }
                } else {
                    row.push_back(make_constant(parse_number(tok, line.number)));
                }
            }
            mode.entries.push_back(std::move(row));
        }
        mode_index[mode.name] = static_cast<int>(net.modes.size());
        net.modes.push_back(std::move(mode));
    }
    if (net.modes.empty()) throw Error("network declares no modes");

    if (const FileSection* sig = find_section("signal")) {
        for (const auto& line : sig->lines) {
            const auto& t = line.tokens;
            if (t.size() >= 3 && t[0].text == "dwell" && t[1].text == "=") {
                net.signal.min_dwell = parse_number(t[2], line.number);
                continue;
            }
            if (t.size() >= 6 && t[0].text == "t" && t[1].text == "=" && t[3].text == "mode" &&
                t[4].text == "=") {
                auto it = mode_index.find(t[5].text);
                if (it == mode_index.end())
                    throw ParseError("signal references unknown mode '" + t[5].text + "'",
                                     line.number, 1);
                net.signal.times.push_back(parse_number(t[2], line.number));
                net.signal.modes.push_back(it->second);
                continue;
            }
            throw ParseError("unrecognized [signal] line", line.number, 1);
        }
    } else if (net.modes.size() == 1) {
        net.signal.times = {0.0};
        net.signal.modes = {0};
        net.signal.min_dwell = 1.0;
    } else {
        throw Error("network with several modes requires a [signal] section");
    }

    net.validate();
    return net;
}

inline NetworkModel load_network(const std::string& text) {
    std::istringstream in(text);
    return load_network(in);
}

inline NetworkModel load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open network file: " + path);
    try {
        return load_network(in);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

/// Coordination-error CSV: `t,error`.
inline void write_coordination_csv(std::ostream& out, const CoordinationReport& rep) {
    out << "t,error\n";
    char buf[40];
    for (std::size_t k = 0; k < rep.sample_times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", rep.sample_times[k]);
        out << buf << ",";
        std::snprintf(buf, sizeof buf, "%.17g", rep.errors[k]);
        out << buf << "\n";
    }
}

}  // namespace contrakt

#include "penergy/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

#include <Eigen/Sparse>

namespace penergy {

int effective_threads(const SolverConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    if (const char* env = std::getenv("PENERGY_THREADS")) {
        int t = std::atoi(env);
        if (t > 0) return t;
    }
    return 1;
}

void parallel_for_ordered(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::future<void>> futs;
    futs.reserve(threads);
    std::atomic<int> next{0};
    for (int t = 0; t < threads; ++t)
        futs.push_back(std::async(std::launch::async, [&]() {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        }));
    for (auto& f : futs) f.get();
}

namespace {

double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// Minimizes phi(t) = sum_j c_j |t - a_j|^p by safeguarded Newton on the
// derivative with bisection fallback (robust near ties for 1 < p < 2).
double minimize_1d(double p, const double* a, const double* c, int m, double t0) {
    double lo = a[0], hi = a[0];
    for (int j = 1; j < m; ++j) {
        lo = std::min(lo, a[j]);
        hi = std::max(hi, a[j]);
    }
    if (!(hi > lo)) return lo;
    if (p == 2.0) {
        double num = 0.0, den = 0.0;
        for (int j = 0; j < m; ++j) {
            num += c[j] * a[j];
            den += c[j];
        }
        return den > 0 ? num / den : 0.5 * (lo + hi);
    }
    double t = std::min(hi, std::max(lo, t0));
    const double span = hi - lo;
    for (int iter = 0; iter < 60; ++iter) {
        double d1 = 0.0, d2 = 0.0;
        bool d2_ok = true;
        for (int j = 0; j < m; ++j) {
            const double d = t - a[j];
            const double ad = std::fabs(d);
            d1 += c[j] * std::pow(ad, p - 1.0) * sgn(d);
            if (ad > 1e-300) {
                d2 += c[j] * std::pow(ad, p - 2.0);
            } else if (p < 2.0) {
                d2_ok = false;  // second derivative blows up at a tie
            }
        }
        if (d1 > 0)
            hi = t;
        else
            lo = t;
        if (hi - lo <= 1e-16 * (std::fabs(lo) + std::fabs(hi) + 1e-12)) break;
        double tn;
        if (d2_ok && d2 > 0) {
            // d1 lacks the factor p and d2 lacks p(p-1), so the Newton step
            // phi'/phi'' reduces to d1 / ((p-1) d2)
            tn = t - d1 / ((p - 1.0) * d2);
            if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
        } else {
            tn = 0.5 * (lo + hi);
        }
        if (std::fabs(tn - t) <= 1e-16 * (1.0 + std::fabs(t)) && iter > 2) {
            t = tn;
            break;
        }
        t = tn;
        if (hi - lo < 1e-15 * span && iter > 4) break;
    }
    t = std::min(hi, std::max(lo, t));
    if (p < 2.0) {
        // a result within rounding distance of a neighbor value is a tie; snap
        // it so the kink carries no phantom gradient (energy change O(eps^p))
        double nearest = a[0];
        for (int j = 1; j < m; ++j)
            if (std::fabs(t - a[j]) < std::fabs(t - nearest)) nearest = a[j];
        if (std::fabs(t - nearest) <= 1e-12 * span) t = nearest;
    }
    return t;
}

struct Workspace {
    const StandardForm* form = nullptr;
    std::vector<char> fixed;
    std::vector<int> active;
    std::vector<double> f;
};

// Interior stationarity residual, dimensionless and invariant under scaling
// of both the form and the data.
//
// For p >= 2: max over active vertices of |dE/dx| / (c_x Osc(f)^{p-1}) with
// c_x the local coefficient mass.
//
// For 1 < p < 2 the gradient is useless as a certificate: a tie that is off by
// one ulp contributes |d|^{p-1} ~ eps^{p-1}, far above any sensible tolerance,
// while its energy influence is eps^p. The residual is instead the largest
// distance of a coordinate from its own 1-D optimum, relative to Osc(f).
double normalized_residual(const Workspace& w) {
    const auto& off = w.form->adj_offsets();
    const auto& tgt = w.form->adj_targets();
    const auto& cf = w.form->adj_coeffs();
    const double p = w.form->p();
    const double osc = oscillation(w.f);
    if (!(osc > 0.0)) return 0.0;
    double worst = 0.0;
    if (p >= 2.0) {
        const double osc_pow = std::pow(osc, p - 1.0);
        const double deadband = 1e-13 * osc;  // below double resolution, sgn(d) is noise
        for (int x : w.active) {
            double d1 = 0.0, mass = 0.0;
            for (int k = off[x]; k < off[x + 1]; ++k) {
                const double d = w.f[x] - w.f[tgt[k]];
                if (std::fabs(d) > deadband)
                    d1 += cf[k] * std::pow(std::fabs(d), p - 1.0) * sgn(d);
                mass += cf[k];
            }
            if (mass > 0) worst = std::max(worst, std::fabs(d1) / (mass * osc_pow));
        }
    } else {
        std::vector<double> a, c;
        for (int x : w.active) {
            const int deg = off[x + 1] - off[x];
            if (deg == 0) continue;
            a.resize(deg);
            c.resize(deg);
            for (int k = 0; k < deg; ++k) {
                a[k] = w.f[tgt[off[x] + k]];
                c[k] = cf[off[x] + k];
            }
            const double opt = minimize_1d(p, a.data(), c.data(), deg, w.f[x]);
            worst = std::max(worst, std::fabs(w.f[x] - opt) / osc);
        }
    }
    return worst;
}

void coordinate_sweep(Workspace& w) {
    const auto& off = w.form->adj_offsets();
    const auto& tgt = w.form->adj_targets();
    const auto& cf = w.form->adj_coeffs();
    const double p = w.form->p();
    std::vector<double> a, c;
    for (int x : w.active) {
        const int deg = off[x + 1] - off[x];
        if (deg == 0) continue;
        a.resize(deg);
        c.resize(deg);
        for (int k = 0; k < deg; ++k) {
            a[k] = w.f[tgt[off[x] + k]];
            c[k] = cf[off[x] + k];
        }
        w.f[x] = minimize_1d(p, a.data(), c.data(), deg, w.f[x]);
    }
}

// Joint shift of near-tied clusters of active vertices. For 1 < p < 2 single
// coordinate moves stall on tied pairs (the |f_u - f_v|^{p-2} curvature pins
// each endpoint); shifting a whole cluster by a common delta keeps the
// intra-cluster terms fixed and reduces the boundary terms exactly.
bool cluster_moves(Workspace& w, double tie_scale) {
    const int n = static_cast<int>(w.f.size());
    const auto& off = w.form->adj_offsets();
    const auto& tgt = w.form->adj_targets();
    const auto& cf = w.form->adj_coeffs();
    const double p = w.form->p();
    const double osc = oscillation(w.f);
    if (!(osc > 0.0)) return false;
    const double tie = tie_scale * osc;

    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<char> active_mask(n, 0);
    for (int x : w.active) active_mask[x] = 1;
    for (const Edge& e : w.form->edges())
        if (active_mask[e.u] && active_mask[e.v] && std::fabs(w.f[e.u] - w.f[e.v]) <= tie) {
            int ru = find(e.u), rv = find(e.v);
            if (ru != rv) parent[std::max(ru, rv)] = std::min(ru, rv);
        }
    std::vector<std::vector<int>> clusters(n);
    for (int x : w.active) clusters[find(x)].push_back(x);

    bool improved = false;
    std::vector<double> a, c;
    for (int root = 0; root < n; ++root) {
        const auto& cl = clusters[root];
        if (cl.size() < 2) continue;
        a.clear();
        c.clear();
        for (int u : cl)
            for (int k = off[u]; k < off[u + 1]; ++k) {
                const int v = tgt[k];
                if (find(v) == root && active_mask[v]) continue;  // intra-cluster
                a.push_back(w.f[v] - w.f[u]);
                c.push_back(cf[k]);
            }
        if (a.empty()) continue;
        const double shift =
            minimize_1d(p, a.data(), c.data(), static_cast<int>(a.size()), 0.0);
        if (shift == 0.0) continue;
        double gain = 0.0;
        for (size_t k = 0; k < a.size(); ++k)
            gain += c[k] * (std::pow(std::fabs(a[k]), p) - std::pow(std::fabs(shift - a[k]), p));
        if (gain > 0.0) {
            for (int u : cl) w.f[u] += shift;
            improved = true;
        }
    }
    return improved;
}

// Damped Newton accelerator with exact gradients. For p >= 2 the Hessian is
// used directly; for 1 < p < 2 the |d|^{p-2} curvature is floored at an
// annealed epsilon (IRLS-style smoothing), since the raw Hessian blows up at
// ties and plain coordinate descent crawls across plateaus. Either way the
// final stationarity certification is left to coordinate descent.
void newton_phase(Workspace& w, const SolverConfig& cfg) {
    const double p = w.form->p();
    const int na = static_cast<int>(w.active.size());
    if (na == 0) return;
    std::vector<int> pos(w.f.size(), -1);
    for (int i = 0; i < na; ++i) pos[w.active[i]] = i;

    double mu = 0.0;
    double energy = w.form->eval(w.f);
    double eps_floor = p < 2.0 ? 1e-2 * std::max(oscillation(w.f), 1e-12) : 0.0;
    const double eps_min = 1e-12 * std::max(oscillation(w.f), 1e-12);
    for (int outer = 0; outer < 80; ++outer) {
        const double res = normalized_residual(w);
        if (res < 0.1 * cfg.grad_inf_tol) return;

        std::vector<Eigen::Triplet<double>> trips;
        Eigen::VectorXd g = Eigen::VectorXd::Zero(na);
        std::vector<double> diag(na, 0.0);
        for (const Edge& e : w.form->edges()) {
            const int iu = pos[e.u], iv = pos[e.v];
            if (iu < 0 && iv < 0) continue;
            const double d = w.f[e.u] - w.f[e.v];
            const double ad = std::fabs(d);
            const double g1 = p * e.c * std::pow(ad, p - 1.0) * sgn(d);
            // p >= 2: true Hessian p(p-1)|d|^{p-2}. p < 2: the reweighted
            // least-squares scaling p|d|^{p-2}, whose step lands exactly on a
            // tie instead of overshooting it by 1/(p-1).
            const double ad_eff = p < 2.0 ? std::max(ad, eps_floor) : ad;
            const double curv = p < 2.0 ? p : p * (p - 1.0);
            const double h =
                curv * e.c *
                (ad_eff > 0 ? std::pow(ad_eff, p - 2.0) : (p == 2.0 ? 1.0 : 0.0));
            if (iu >= 0) {
                g[iu] += g1;
                diag[iu] += h;
            }
            if (iv >= 0) {
                g[iv] -= g1;
                diag[iv] += h;
            }
            if (iu >= 0 && iv >= 0) {
                trips.emplace_back(iu, iv, -h);
                trips.emplace_back(iv, iu, -h);
            }
        }
        double base = 0.0;
        for (int i = 0; i < na; ++i) base = std::max(base, diag[i]);
        if (base <= 0) return;
        for (int i = 0; i < na; ++i)
            trips.emplace_back(i, i, diag[i] + mu * base + 1e-14 * base);

        Eigen::SparseMatrix<double> H(na, na);
        H.setFromTriplets(trips.begin(), trips.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(H);
        if (ldlt.info() != Eigen::Success) {
            mu = mu == 0.0 ? 1e-6 : mu * 10;
            if (mu > 1e6) return;
            continue;
        }
        Eigen::VectorXd s = ldlt.solve(-g);

        double alpha = 1.0;
        bool accepted = false;
        std::vector<double> trial = w.f;
        for (int ls = 0; ls < 10; ++ls) {
            for (int i = 0; i < na; ++i) trial[w.active[i]] = w.f[w.active[i]] + alpha * s[i];
            const double e_try = w.form->eval(trial);
            if (e_try < energy) {
                w.f = trial;
                energy = e_try;
                accepted = true;
                break;
            }
            if (e_try <= energy * (1.0 + 5e-15)) {
                // the energy has saturated in double precision; keep moving as
                // long as the stationarity residual still improves
                std::swap(w.f, trial);
                const double res_try = normalized_residual(w);
                if (res_try < 0.98 * res) {
                    energy = std::min(energy, e_try);
                    accepted = true;
                    break;
                }
                std::swap(w.f, trial);
            }
            alpha *= 0.5;
        }
        if (accepted) {
            mu = std::max(mu / 3.0, 0.0);
            if (mu < 1e-12) mu = 0.0;
            if (p < 2.0) eps_floor = std::max(eps_floor / 8.0, eps_min);
        } else {
            if (p < 2.0 && eps_floor > eps_min) {
                eps_floor = std::max(eps_floor / 8.0, eps_min);
                continue;
            }
            mu = mu == 0.0 ? 1e-6 : mu * 10;
            if (mu > 1e6) return;
        }
    }
}

std::vector<char> reachable_from(const StandardForm& form, const std::vector<int>& sources) {
    const int n = form.vertices().size();
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    for (int s : sources)
        if (!seen[s]) {
            seen[s] = 1;
            stack.push_back(s);
        }
    const auto& off = form.adj_offsets();
    const auto& tgt = form.adj_targets();
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int k = off[v]; k < off[v + 1]; ++k)
            if (!seen[tgt[k]]) {
                seen[tgt[k]] = 1;
                stack.push_back(tgt[k]);
            }
    }
    return seen;
}

}  // namespace

MinimizeResult minimize(const StandardForm& form, const std::vector<int>& fixed_idx,
                        const std::vector<double>& fixed_val, const SolverConfig& cfg,
                        const std::vector<double>* init) {
    const int n = form.vertices().size();
    if (fixed_idx.size() != fixed_val.size())
        throw DomainError("minimize: fixed index/value size mismatch");
    if (fixed_idx.empty()) throw DomainError("minimize: nothing is fixed");
    for (double v : fixed_val)
        if (!std::isfinite(v)) throw DomainError("minimize: non-finite fixed value");

    Workspace w;
    w.form = &form;
    w.fixed.assign(n, 0);
    w.f.assign(n, 0.0);
    double mean = 0.0;
    for (size_t i = 0; i < fixed_idx.size(); ++i) {
        const int x = fixed_idx[i];
        if (x < 0 || x >= n) throw DomainError("minimize: fixed index out of range");
        w.fixed[x] = 1;
        mean += fixed_val[i];
    }
    mean /= static_cast<double>(fixed_idx.size());
    if (init) {
        if (static_cast<int>(init->size()) != n)
            throw DomainError("minimize: init size mismatch");
        w.f = *init;
        for (double v : w.f)
            if (!std::isfinite(v)) throw DomainError("minimize: non-finite init value");
    } else {
        std::fill(w.f.begin(), w.f.end(), mean);
    }
    for (size_t i = 0; i < fixed_idx.size(); ++i) w.f[fixed_idx[i]] = fixed_val[i];
    // gauge fix by the invariance under constants: working relative to the
    // mean keeps full double precision in the differences when the data is
    // nearly constant in absolute terms
    for (double& v : w.f) v -= mean;

    MinimizeResult out;
    std::vector<char> reach = reachable_from(form, fixed_idx);
    for (int x = 0; x < n; ++x) {
        if (w.fixed[x]) continue;
        if (!reach[x]) {
            if (cfg.strict_uniqueness)
                throw DegeneracyError(
                    "minimize: interior component disconnected from the fixed set");
            w.f[x] = 0.0;  // pinned; the minimum value is unaffected
            out.degenerate_components = true;
        } else {
            w.active.push_back(x);
        }
    }

    if (cfg.use_newton && !w.active.empty()) newton_phase(w, cfg);

    double energy = form.eval(w.f);
    const double initial_energy = energy;
    bool converged = w.active.empty();
    int sweep = 0;
    for (; sweep < cfg.max_iters && !converged; ++sweep) {
        const double prev = energy;
        coordinate_sweep(w);
        energy = form.eval(w.f);
        if (energy <= 1e-30 * initial_energy) {
            // the constrained minimum is zero for all practical purposes
            out.residual = normalized_residual(w);
            converged = true;
            break;
        }
        const double rel_drop = (prev - energy) / std::max(energy, 1e-300);
        if (rel_drop < cfg.rel_energy_tol) {
            out.residual = normalized_residual(w);
            if (out.residual < cfg.grad_inf_tol) {
                converged = true;
                break;
            }
            // stalled short of stationarity: tied clusters need joint moves
            // (each accepted shift is verified exact descent, so coarse tie
            // scales are safe to try)
            bool moved = false;
            for (double scale : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-7, 1e-9})
                moved = cluster_moves(w, scale) || moved;
            if (moved) energy = form.eval(w.f);
        } else if ((sweep & 15) == 15 && form.p() < 2.0) {
            bool moved = false;
            for (double scale : {1e-2, 1e-4, 1e-7})
                moved = cluster_moves(w, scale) || moved;
            if (moved) energy = form.eval(w.f);
        }
    }
    if (!converged) {
        out.residual = normalized_residual(w);
        throw SolverError("minimize: iteration budget exhausted (residual " +
                              std::to_string(out.residual) + ")",
                          out.residual);
    }
    for (double& v : w.f) v += mean;  // undo the gauge shift
    out.f = std::move(w.f);
    out.energy = energy;
    out.sweeps = sweep + 1;
    return out;
}

FormValue eval_trace(const TraceForm& form, const std::vector<double>& f,
                     const SolverConfig& cfg, const std::vector<double>* init) {
    if (static_cast<int>(f.size()) != form.boundary().size())
        throw DomainError("eval_trace: boundary data size mismatch");
    MinimizeResult r = minimize(form.ambient(), form.ambient_indices(), f, cfg, init);
    FormValue v;
    v.energy = r.energy;
    v.minimizer = std::move(r.f);
    return v;
}

std::vector<double> p_harmonic_extend(const TraceForm& form, const std::vector<double>& f,
                                      const SolverConfig& cfg,
                                      const std::vector<double>* init) {
    FormValue v = eval_trace(form, f, cfg, init);
    return std::move(*v.minimizer);
}

namespace {

double resistance_impl(const StandardForm& form, int x, int y, const SolverConfig& cfg) {
    const int n = form.vertices().size();
    if (x < 0 || y < 0 || x >= n || y >= n) throw DomainError("resistance: index out of range");
    if (x == y) return 0.0;
    std::vector<char> reach = reachable_from(form, {x});
    if (!reach[y]) return kInf;
    SolverConfig local = cfg;
    local.strict_uniqueness = false;  // components missing both poles sit at constants
    MinimizeResult r = minimize(form, {x, y}, {0.0, 1.0}, local);
    if (r.energy < 1.0 / kResistanceCutoff) return kInf;
    return 1.0 / r.energy;
}

}  // namespace

double resistance(const StandardForm& form, int x, int y, const SolverConfig& cfg) {
    return resistance_impl(form, x, y, cfg);
}

double resistance(const TraceForm& form, int x, int y, const SolverConfig& cfg) {
    const int b = form.boundary().size();
    if (x < 0 || y < 0 || x >= b || y >= b) throw DomainError("resistance: index out of range");
    if (x == y) return 0.0;
    return resistance_impl(form.ambient(), form.ambient_index(x), form.ambient_index(y), cfg);
}

namespace {

template <typename FormT>
ResistanceMatrix resistance_matrix_impl(const FormT& form, VertexSetPtr verts,
                                        const SolverConfig& cfg) {
    const int n = verts->size();
    ResistanceMatrix m;
    m.vertices = verts;
    m.R.assign(n, std::vector<double>(n, 0.0));
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<double> vals(pairs.size());
    parallel_for_ordered(static_cast<int>(pairs.size()), effective_threads(cfg),
                         [&](int k) { vals[k] = resistance(form, pairs[k].first, pairs[k].second, cfg); });
    for (size_t k = 0; k < pairs.size(); ++k) {
        auto [i, j] = pairs[k];
        m.R[i][j] = m.R[j][i] = vals[k];
        if (std::isinf(vals[k])) m.has_infinite = true;
    }
    return m;
}

}  // namespace

ResistanceMatrix resistance_matrix(const StandardForm& form, const SolverConfig& cfg) {
    return resistance_matrix_impl(form, form.vertices_ptr(), cfg);
}

ResistanceMatrix resistance_matrix(const TraceForm& form, const SolverConfig& cfg) {
    return resistance_matrix_impl(form, form.boundary_ptr(), cfg);
}

double ResistanceMatrix::max_offdiag() const {
    double best = 0.0;
    const int n = static_cast<int>(R.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) best = std::max(best, R[i][j]);
    return best;
}

double ResistanceMatrix::min_offdiag() const {
    double best = kInf;
    const int n = static_cast<int>(R.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) best = std::min(best, R[i][j]);
    return best;
}

double ResistanceMatrix::triangle_violation(double p) const {
    const int n = static_cast<int>(R.size());
    double worst = -kInf;
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z) {
                if (x == y || y == z || x == z) continue;
                if (std::isinf(R[x][y]) || std::isinf(R[x][z]) || std::isinf(R[z][y])) continue;
                worst = std::max(worst, std::pow(R[x][y], 1.0 / p) - std::pow(R[x][z], 1.0 / p) -
                                            std::pow(R[z][y], 1.0 / p));
            }
    return worst;
}

DeltaValue delta(const ResistanceMatrix& m) {
    DeltaValue d;
    if (m.has_infinite) {
        d.value = 0.0;
        d.degenerate = true;
        return d;
    }
    const double mx = m.max_offdiag();
    d.value = mx > 0 ? m.min_offdiag() / mx : 0.0;
    d.degenerate = !(d.value > 0);
    return d;
}

DeltaValue delta(const StandardForm& form, const SolverConfig& cfg) {
    return delta(resistance_matrix(form, cfg));
}

DeltaValue delta(const TraceForm& form, const SolverConfig& cfg) {
    return delta(resistance_matrix(form, cfg));
}

namespace {

struct RatioEval {
    double v1 = 0.0, v2 = 0.0;
    double ratio() const { return v1 / v2; }
};

// One gradient step loop improving E1/E2 (direction = +1) or its negative.
// The ratio is invariant under shifts and scalings of f, so the iterate is
// renormalized onto M only to keep the numbers well conditioned.
std::vector<double> local_ratio_opt(const FormRef& e1, const FormRef& e2,
                                    std::vector<double> f, double direction, int iters) {
    double v1 = e1.eval(f), v2 = e2.eval(f);
    if (!(v2 > 0.0)) return f;
    double best = v1 / v2;
    for (int it = 0; it < iters; ++it) {
        std::vector<double> g1 = e1.grad(f), g2 = e2.grad(f);
        const double rho = v1 / v2;
        std::vector<double> dir(f.size());
        double mean = 0.0;
        for (size_t i = 0; i < f.size(); ++i) {
            dir[i] = direction * (g1[i] - rho * g2[i]) / v2;
            mean += dir[i];
        }
        mean /= static_cast<double>(f.size());
        double norm = 0.0;
        for (double& d : dir) {
            d -= mean;
            norm = std::max(norm, std::fabs(d));
        }
        if (!(norm > 1e-14)) break;
        double step = 0.25 / norm;
        bool improved = false;
        for (int ls = 0; ls < 12; ++ls) {
            std::vector<double> trial = f;
            for (size_t i = 0; i < f.size(); ++i) trial[i] += step * dir[i];
            if (!project_to_oscillation_sphere(trial)) {
                step *= 0.5;
                continue;
            }
            const double t1 = e1.eval(trial), t2 = e2.eval(trial);
            if (t2 > 0.0 && direction * (t1 / t2 - best) > 1e-15 * std::fabs(best)) {
                f = std::move(trial);
                v1 = t1;
                v2 = t2;
                best = t1 / t2;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    return f;
}

}  // namespace

RatioBounds ratio_bounds(const FormRef& e1, const FormRef& e2, const SolverConfig& cfg) {
    const int n = e1.size();
    if (n != e2.size()) throw DomainError("ratio_bounds: vertex count mismatch");
    auto starts = probe_functions(n, cfg.ratio_starts, cfg.seed);

    std::vector<std::pair<double, double>> vals(starts.size());
    double scale2 = 0.0;
    for (size_t i = 0; i < starts.size(); ++i) {
        vals[i] = {e1.eval(starts[i]), e2.eval(starts[i])};
        scale2 = std::max(scale2, vals[i].second);
    }
    for (size_t i = 0; i < starts.size(); ++i)
        if (!(vals[i].second > 1e-12 * scale2) || !(scale2 > 0.0))
            throw DegeneracyError("ratio_bounds: denominator form vanishes on a probe");

    RatioBounds rb;
    rb.heuristic = n > 2;
    bool first = true;
    auto consider = [&](const std::vector<double>& f, double a, double b) {
        if (!(b > 0.0)) return;
        const double r = a / b;
        if (first || r > rb.sup_ratio) {
            rb.sup_ratio = r;
            rb.argmax_f = f;
        }
        if (first || r < rb.inf_ratio) {
            rb.inf_ratio = r;
            rb.argmin_f = f;
        }
        first = false;
    };
    for (size_t i = 0; i < starts.size(); ++i) {
        consider(starts[i], vals[i].first, vals[i].second);
        if (n > 2) {
            auto fmax = local_ratio_opt(e1, e2, starts[i], +1.0, 60);
            consider(fmax, e1.eval(fmax), e2.eval(fmax));
            auto fmin = local_ratio_opt(e1, e2, starts[i], -1.0, 60);
            consider(fmin, e1.eval(fmin), e2.eval(fmin));
        }
    }
    return rb;
}

RatioScan ratio_scan_degenerate(const FormRef& e1, const FormRef& e2,
                                const SolverConfig& cfg) {
    const int n = e1.size();
    auto starts = probe_functions(n, cfg.ratio_starts, cfg.seed);
    // two passes: first establish the scale of E1 + E2 over the probes
    std::vector<std::pair<double, double>> vals(starts.size());
    double scale = 0.0;
    for (size_t i = 0; i < starts.size(); ++i) {
        vals[i] = {e1.eval(starts[i]), e2.eval(starts[i])};
        scale = std::max(scale, vals[i].first + vals[i].second);
    }
    RatioScan out;
    if (!(scale > 0.0)) return out;
    const double floor = 1e-12 * scale;
    bool first = true;
    auto consider = [&](double v1, double v2) {
        if (v1 + v2 <= floor) return;  // outside the E1 + E2 > 0 clause
        double r;
        if (v2 <= 1e-12 * v1) {
            out.saw_infinite = true;
            r = 1e18;
        } else {
            r = v1 / v2;
        }
        if (first) {
            out.sup = out.inf = r;
            first = false;
        } else {
            out.sup = std::max(out.sup, r);
            out.inf = std::min(out.inf, r);
        }
        out.any = true;
    };
    for (size_t i = 0; i < starts.size(); ++i) {
        consider(vals[i].first, vals[i].second);
        if (vals[i].second > floor && n > 2) {
            auto fmax = local_ratio_opt(e1, e2, starts[i], +1.0, 40);
            consider(e1.eval(fmax), e2.eval(fmax));
            auto fmin = local_ratio_opt(e1, e2, starts[i], -1.0, 40);
            consider(e1.eval(fmin), e2.eval(fmin));
        }
    }
    return out;
}

}  // namespace penergy

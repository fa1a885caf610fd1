#include "penergy/renorm.hpp"

#include <algorithm>
#include <cmath>

namespace penergy {

RenormContext::RenormContext(const PcfStructure& s, SolverConfig cfg)
    : hierarchy_(s), cfg_(cfg) {}

int RenormContext::horizon(int vertex_guard) {
    int n = 0;
    for (;;) {
        const LevelGraph& next = hierarchy_.level(n + 1);
        if (next.vertices->size() > vertex_guard) return n;
        ++n;
        if (n >= 30) return n;
    }
}

StandardForm RenormContext::refine_to(const StandardForm& e0, int n) {
    return refine_form_iter(e0, hierarchy_, 0, n);
}

std::vector<double> RenormContext::cascadic_extend(const StandardForm& e0, int n,
                                                   const std::vector<int>& fixed_idx,
                                                   const std::vector<double>& fixed_val) {
    const int n0 = structure().boundary->size();
    double mean = 0.0;
    for (double v : fixed_val) mean += v;
    mean /= std::max<size_t>(1, fixed_val.size());
    std::vector<double> vals(n0, mean);
    for (size_t i = 0; i < fixed_idx.size(); ++i) vals[fixed_idx[i]] = fixed_val[i];
    if (n == 0) return vals;

    // the V1 subproblem form (Lambda E0); per-cell weights r_w^{-1} factor out
    StandardForm lvl1 = refine_form(e0, hierarchy_, 0);
    const LevelGraph& g1 = hierarchy_.level(1);
    SolverConfig sub = cfg_;
    sub.strict_uniqueness = false;
    sub.use_newton = false;  // subproblems are tiny

    // maps_m[w]: V1 id -> V_{m+1} id for each word w of length m
    std::vector<std::vector<int>> maps(1);
    maps[0].resize(g1.vertices->size());
    for (size_t v = 0; v < maps[0].size(); ++v) maps[0][v] = static_cast<int>(v);

    for (int m = 0; m < n; ++m) {
        const LevelGraph& gm = hierarchy_.level(m);
        const LevelGraph& gm1 = hierarchy_.level(m + 1);
        std::vector<double> next(gm1.vertices->size(),
                                 std::numeric_limits<double>::quiet_NaN());
        for (size_t v = 0; v < vals.size(); ++v) next[gm1.prev_embed[v]] = vals[v];

        std::vector<double> bdata(n0);
        for (size_t w = 0; w < gm.cells.size(); ++w) {
            for (int b = 0; b < n0; ++b) bdata[b] = vals[gm.cells[w][b]];
            MinimizeResult r = minimize(lvl1, g1.boundary_ids, bdata, sub);
            for (size_t v = 0; v < r.f.size(); ++v) {
                const int target = maps[w][static_cast<int>(v)];
                if (std::isnan(next[target])) next[target] = r.f[v];
            }
        }
        vals = std::move(next);
        // grow the word maps one letter: maps'[i·w] = cell_copy_{m+2} [i] o maps[w]
        if (m + 1 < n) {
            const LevelGraph& gm2 = hierarchy_.level(m + 2);
            std::vector<std::vector<int>> grown;
            grown.reserve(maps.size() * structure().num_cells());
            for (int i = 0; i < structure().num_cells(); ++i)
                for (const auto& mp : maps) {
                    std::vector<int> comp(mp.size());
                    for (size_t v = 0; v < mp.size(); ++v) comp[v] = gm2.cell_copy[i][mp[v]];
                    grown.push_back(std::move(comp));
                }
            maps = std::move(grown);
        }
    }
    for (double& v : vals)
        if (std::isnan(v)) v = mean;
    return vals;
}

namespace {

TraceForm make_boundary_trace(StandardForm ambient, const LevelGraph& g) {
    // TraceForm resolves boundary labels against the ambient labels, so the
    // boundary carries the canonical level-n names of the V0 vertices
    auto amb = std::make_shared<const StandardForm>(std::move(ambient));
    std::vector<std::string> blabels;
    blabels.reserve(g.boundary_ids.size());
    for (int id : g.boundary_ids) blabels.push_back(amb->vertices().label(id));
    return TraceForm(amb, make_vertex_set(std::move(blabels)));
}

}  // namespace

RenormForm renorm_step(const StandardForm& e0, RenormContext& ctx) {
    if (!(e0.vertices() == *ctx.hierarchy().level(0).vertices))
        throw DomainError("renorm_step: form must live on V0");
    StandardForm refined = refine_form(e0, ctx.hierarchy(), 0);
    return {make_boundary_trace(std::move(refined), ctx.hierarchy().level(1)), 1};
}

RenormForm renorm_step(const RenormForm& e, RenormContext& ctx) {
    StandardForm refined = refine_form(e.form.ambient(), ctx.hierarchy(), e.level);
    return {make_boundary_trace(std::move(refined), ctx.hierarchy().level(e.level + 1)),
            e.level + 1};
}

ResistanceMatrix boundary_resistance(const StandardForm& e0, RenormContext& ctx, int n) {
    StandardForm ambient = ctx.refine_to(e0, n);
    return boundary_resistance_of(ambient, e0, ctx, n);
}

ResistanceMatrix boundary_resistance_of(const StandardForm& ambient, const StandardForm& e0,
                                        RenormContext& ctx, int n) {
    const LevelGraph& g = ctx.hierarchy().level(n);
    const int n0 = ctx.structure().boundary->size();
    ResistanceMatrix m;
    m.vertices = ctx.structure().boundary;
    m.R.assign(n0, std::vector<double>(n0, 0.0));
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n0; ++i)
        for (int j = i + 1; j < n0; ++j) pairs.emplace_back(i, j);
    std::vector<double> vals(pairs.size());
    SolverConfig cfg = ctx.config();
    cfg.strict_uniqueness = false;
    parallel_for_ordered(
        static_cast<int>(pairs.size()), effective_threads(cfg), [&](int k) {
            const auto [i, j] = pairs[k];
            std::vector<double> init = ctx.cascadic_extend(e0, n, {i, j}, {0.0, 1.0});
            MinimizeResult r =
                minimize(ambient, {g.boundary_ids[i], g.boundary_ids[j]}, {0.0, 1.0}, cfg, &init);
            vals[k] = r.energy < 1.0 / kResistanceCutoff ? kInf : 1.0 / r.energy;
        });
    for (size_t k = 0; k < pairs.size(); ++k) {
        const auto [i, j] = pairs[k];
        m.R[i][j] = m.R[j][i] = vals[k];
        if (std::isinf(vals[k])) m.has_infinite = true;
    }
    return m;
}

std::vector<RenormState> iterate(const StandardForm& e0, RenormContext& ctx, int n_max) {
    if (!e0.nondegenerate()) throw DomainError("iterate: E0 must be nondegenerate");
    const int guard = ctx.horizon();
    if (n_max > guard)
        throw GuardError("iterate: n_max " + std::to_string(n_max) +
                         " exceeds the vertex guard (horizon " + std::to_string(guard) + ")");
    std::vector<RenormState> states;
    StandardForm current = e0;  // Lambda^n E0
    ResistanceMatrix r0;
    for (int n = 0; n <= n_max; ++n) {
        if (n > 0) current = refine_form(current, ctx.hierarchy(), n - 1);
        RenormState st;
        st.n = n;
        st.resistance = boundary_resistance_of(current, e0, ctx, n);
        if (n == 0) r0 = st.resistance;
        double mn = 0.0;
        const int n0 = ctx.structure().boundary->size();
        for (int i = 0; i < n0; ++i)
            for (int j = i + 1; j < n0; ++j) {
                const double a = r0.R[i][j], b = st.resistance.R[i][j];
                if (std::isinf(a) && std::isinf(b)) continue;  // infinity/infinity not counted
                if (std::isinf(b)) continue;                   // ratio 0
                mn = std::max(mn, a / b);
            }
        st.M_n = n == 0 ? 1.0 : mn;
        DeltaValue dv = delta(st.resistance);
        st.delta = dv.value;
        st.degenerate = dv.degenerate || st.delta < 1e-12;
        st.lambda_hat = n >= 1 ? std::pow(st.M_n, 1.0 / n) : 0.0;
        auto amb = std::make_shared<const StandardForm>(current);
        const LevelGraph& g = ctx.hierarchy().level(n);
        std::vector<std::string> blabels;
        for (int id : g.boundary_ids) blabels.push_back(amb->vertices().label(id));
        st.trace_form = std::make_shared<const TraceForm>(amb, make_vertex_set(blabels));
        states.push_back(std::move(st));
    }
    return states;
}

RenormForm kz_average(const StandardForm& e0, RenormContext& ctx, double lambda, int n) {
    if (!(lambda > 0.0)) throw DomainError("kz_average: lambda must be positive");
    if (n < 0) throw DomainError("kz_average: negative level");
    const LevelGraph& g = ctx.hierarchy().level(n);
    std::vector<Edge> edges;
    StandardForm current = e0;
    for (int m = 0; m <= n; ++m) {
        if (m > 0) current = refine_form(current, ctx.hierarchy(), m - 1);
        const double scale = std::pow(lambda, -m) / static_cast<double>(n + 1);
        std::vector<int> emb = ctx.hierarchy().embed(m, n);
        for (const Edge& e : current.edges())
            edges.push_back({emb[e.u], emb[e.v], scale * e.c});
    }
    StandardForm ambient(g.vertices, e0.p(), std::move(edges));
    return {make_boundary_trace(std::move(ambient), g), n};
}

namespace {

// probe set for the eigen iteration: one-hot indicators of V0 plus fixed
// quasi-random samples on M
std::vector<std::vector<double>> eigen_probes(int n0, int extra, std::uint64_t seed) {
    std::vector<std::vector<double>> probes;
    for (int i = 0; i < n0; ++i) {
        std::vector<double> f(n0, 0.0);
        f[i] = 1.0;
        probes.push_back(std::move(f));
    }
    QuasiRandom qr(n0, seed);
    std::uint64_t k = 0;
    int added = 0;
    while (added < extra) {
        std::vector<double> f = qr.point(k++);
        if (!project_to_oscillation_sphere(f)) continue;
        probes.push_back(std::move(f));
        ++added;
    }
    return probes;
}

std::vector<double> evaluate_on_probes(const StandardForm& ambient, const LevelGraph& g,
                                       const StandardForm& e0, RenormContext& ctx, int level,
                                       const std::vector<std::vector<double>>& probes) {
    std::vector<double> out(probes.size());
    SolverConfig cfg = ctx.config();
    cfg.strict_uniqueness = false;
    parallel_for_ordered(
        static_cast<int>(probes.size()), effective_threads(cfg), [&](int k) {
            std::vector<int> all(probes[k].size());
            for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
            std::vector<double> init = ctx.cascadic_extend(e0, level, all, probes[k]);
            MinimizeResult r = minimize(ambient, g.boundary_ids, probes[k], cfg, &init);
            out[k] = r.energy;
        });
    return out;
}

}  // namespace

EigenReport eigen_solve(const StandardForm& e0, RenormContext& ctx, int n_max,
                        int probe_count) {
    EigenReport rep;
    rep.states = iterate(e0, ctx, n_max);
    for (const auto& st : rep.states) rep.delta_history.push_back({st.n, st.delta});

    // lambda from the resistance scaling ratios (certified two-point problems)
    double lambda = 1.0;
    if (n_max >= 1) {
        lambda = rep.states[n_max].M_n / rep.states[n_max - 1].M_n;
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            lambda = rep.states[n_max].lambda_hat > 0 ? rep.states[n_max].lambda_hat : 1.0;
    }
    rep.lambda = lambda;

    const int horizon = std::min(ctx.horizon(), std::max(n_max, 2));
    const int n_kz = std::max(1, std::min(n_max - 1, 4));
    auto probes = eigen_probes(ctx.structure().boundary->size(), probe_count,
                               ctx.config().seed);

    // averaged energy, then the monotone orbit lambda^{-k} T^k: the ambient is
    // refined in place and rescaled, one trace per probe per step
    RenormForm avg = kz_average(e0, ctx, lambda, n_kz);
    StandardForm ambient = avg.form.ambient();
    int level = avg.level;
    std::vector<double> prev = evaluate_on_probes(ambient, ctx.hierarchy().level(level), e0,
                                                  ctx, level, probes);
    double residual = kInf;
    bool converged = false;
    while (level < horizon) {
        ambient = scale_form(refine_form(ambient, ctx.hierarchy(), level), 1.0 / lambda);
        ++level;
        std::vector<double> cur = evaluate_on_probes(ambient, ctx.hierarchy().level(level), e0,
                                                     ctx, level, probes);
        double worst = 0.0;
        for (size_t k = 0; k < probes.size(); ++k)
            if (prev[k] > 0) worst = std::max(worst, std::fabs(cur[k] - prev[k]) / prev[k]);
        residual = lambda * worst;  // |T E(f) - lambda E(f)| / E(f) on probes
        prev = std::move(cur);
        if (residual < 1e-9) {
            converged = true;
            break;
        }
    }
    rep.residual = residual;
    rep.converged = converged || residual < 1e-6;
    auto amb = std::make_shared<const StandardForm>(std::move(ambient));
    const LevelGraph& g = ctx.hierarchy().level(level);
    std::vector<std::string> blabels;
    for (int id : g.boundary_ids) blabels.push_back(amb->vertices().label(id));
    rep.eigenform = std::make_shared<const TraceForm>(amb, make_vertex_set(blabels));
    rep.eigenform_level = level;

    double min_delta = kInf;
    bool any_degenerate = false;
    for (const auto& st : rep.states) {
        min_delta = std::min(min_delta, st.delta);
        any_degenerate = any_degenerate || st.degenerate;
    }
    rep.condition_A = rep.converged && !any_degenerate && min_delta > 1e-6;
    return rep;
}

OscillationReport oscillation_decay(RenormContext& ctx, const RenormForm& eigenform, int m,
                                    const std::vector<std::vector<double>>& samples) {
    const LevelGraph& gm = ctx.hierarchy().level(m);
    const int n0 = ctx.structure().boundary->size();
    for (size_t w = 0; w < gm.cells.size(); ++w) {
        int hits = 0;
        for (int b = 0; b < n0; ++b)
            for (int id : gm.boundary_ids)
                if (gm.cells[w][b] == id) ++hits;
        if (hits > 1)
            throw DomainError("oscillation_decay: cell " + std::to_string(w) +
                              " meets V0 in more than one point (increase m)");
    }

    // ambient for the extension: Lambda^m applied to the eigenform's ambient
    StandardForm ambient = eigenform.form.ambient();
    for (int k = 0; k < m; ++k)
        ambient = refine_form(ambient, ctx.hierarchy(), eigenform.level + k);
    const int top = eigenform.level + m;
    const LevelGraph& gtop = ctx.hierarchy().level(top);
    std::vector<int> emb = ctx.hierarchy().embed(m, top);

    SolverConfig cfg = ctx.config();
    cfg.strict_uniqueness = false;
    OscillationReport rep;
    rep.per_sample.resize(samples.size());
    std::vector<int> all(n0);
    for (int i = 0; i < n0; ++i) all[i] = i;
    // warm starts come from the uniform complete-graph form; only the final
    // minimization uses the true ambient
    StandardForm uniform = [&]() {
        std::vector<Edge> edges;
        for (int i = 0; i < n0; ++i)
            for (int j = i + 1; j < n0; ++j) edges.push_back({i, j, 1.0});
        return StandardForm(ctx.structure().boundary, ambient.p(), std::move(edges));
    }();
    parallel_for_ordered(
        static_cast<int>(samples.size()), effective_threads(cfg), [&](int s) {
            const auto& f = samples[s];
            const double osc_f = oscillation(f);
            if (!(osc_f > 0)) {
                rep.per_sample[s] = 0.0;
                return;
            }
            std::vector<double> init = ctx.cascadic_extend(uniform, top, all, f);
            MinimizeResult r = minimize(ambient, gtop.boundary_ids, f, cfg, &init);
            double worst = 0.0;
            for (size_t w = 0; w < gm.cells.size(); ++w) {
                double lo = kInf, hi = -kInf;
                for (int b = 0; b < n0; ++b) {
                    const double v = r.f[emb[gm.cells[w][b]]];
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
                worst = std::max(worst, hi - lo);
            }
            rep.per_sample[s] = worst / osc_f;
        });
    for (double v : rep.per_sample) rep.eta = std::max(rep.eta, v);
    return rep;
}

std::vector<FixedWordVerdict> fixed_word_weight_check(const PcfStructure& s, double lambda) {
    std::vector<FixedWordVerdict> out;
    if (s.fixed_words.empty()) return out;
    LevelHierarchy h(s);
    for (const auto& [label, word] : s.fixed_words) {
        FixedWordVerdict v;
        v.boundary_label = label;
        v.word = word;
        const int b = s.boundary->require_index(label);
        const int len = static_cast<int>(word.size());
        // verify the word really fixes the boundary point
        const LevelGraph& g = h.level(len);
        int word_index = 0;
        for (int c : word) word_index = word_index * s.num_cells() + c;
        if (g.cells[word_index][b] != g.boundary_ids[b])
            throw StructureError("fixed word for '" + label + "' does not fix the point");
        double rw = 1.0;
        for (int c : word) rw *= s.r[c];
        v.r_w = std::pow(lambda, len) * rw;
        v.ok = v.r_w < 1.0;
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace penergy

#include "penergy/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace penergy {

namespace {

std::vector<std::vector<int>> canonical_blocks(int n, const std::vector<int>& block_of) {
    std::vector<std::vector<int>> blocks;
    std::vector<int> remap(n, -1);
    for (int v = 0; v < n; ++v) {
        int b = block_of[v];
        if (remap[b] < 0) {
            remap[b] = static_cast<int>(blocks.size());
            blocks.emplace_back();
        }
        blocks[remap[b]].push_back(v);
    }
    return blocks;
}

}  // namespace

EquivRelation::EquivRelation(VertexSetPtr base, std::vector<std::vector<int>> blocks)
    : base_(std::move(base)) {
    const int n = base_->size();
    block_of_.assign(n, -1);
    for (size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].empty()) throw DomainError("EquivRelation: empty block");
        for (int v : blocks[b]) {
            if (v < 0 || v >= n || block_of_[v] >= 0)
                throw DomainError("EquivRelation: blocks must partition the base set");
            block_of_[v] = static_cast<int>(b);
        }
    }
    for (int v = 0; v < n; ++v)
        if (block_of_[v] < 0) throw DomainError("EquivRelation: blocks must cover the base set");
    blocks_ = canonical_blocks(n, block_of_);
    for (auto& b : blocks_) std::sort(b.begin(), b.end());
    block_of_.assign(n, -1);
    for (size_t b = 0; b < blocks_.size(); ++b)
        for (int v : blocks_[b]) block_of_[v] = static_cast<int>(b);
}

EquivRelation EquivRelation::identity(VertexSetPtr base) {
    std::vector<std::vector<int>> blocks;
    for (int i = 0; i < base->size(); ++i) blocks.push_back({i});
    return EquivRelation(std::move(base), std::move(blocks));
}

EquivRelation EquivRelation::full(VertexSetPtr base) {
    std::vector<int> all(base->size());
    std::iota(all.begin(), all.end(), 0);
    return EquivRelation(std::move(base), {all});
}

EquivRelation EquivRelation::from_pairs(VertexSetPtr base,
                                        const std::vector<std::pair<int, int>>& pairs) {
    const int n = base->size();
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (auto [a, b] : pairs) {
        int ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
    std::vector<int> block_of(n);
    for (int v = 0; v < n; ++v) block_of[v] = find(v);
    return EquivRelation(std::move(base), canonical_blocks(n, block_of));
}

bool EquivRelation::trivial() const {
    return num_blocks() == 1 || num_blocks() == base_->size();
}

bool EquivRelation::contained_in(const EquivRelation& other) const {
    for (const auto& block : blocks_)
        for (size_t k = 1; k < block.size(); ++k)
            if (!other.related(block[0], block[k])) return false;
    return true;
}

std::string EquivRelation::to_string() const {
    std::string out;
    for (const auto& block : blocks_) {
        out += "{";
        for (size_t k = 0; k < block.size(); ++k) {
            if (k) out += " ";
            out += base_->label(block[k]);
        }
        out += "}";
    }
    return out;
}

std::vector<EquivRelation> enumerate_relations(VertexSetPtr v0) {
    const int n = v0->size();
    if (n > 8) throw GuardError("enumerate_relations: |V0| > 8");
    std::vector<EquivRelation> out;
    // restricted growth strings a[0..n-1]: a[0] = 0, a[i] <= 1 + max(a[0..i-1])
    std::vector<int> a(n, 0);
    for (;;) {
        int max_used = 0;
        for (int v : a) max_used = std::max(max_used, v);
        std::vector<std::vector<int>> blocks(max_used + 1);
        for (int i = 0; i < n; ++i) blocks[a[i]].push_back(i);
        out.emplace_back(v0, std::move(blocks));
        int i = n - 1;
        for (; i > 0; --i) {
            int cap = 0;
            for (int k = 0; k < i; ++k) cap = std::max(cap, a[k]);
            if (a[i] <= cap) {
                ++a[i];
                std::fill(a.begin() + i + 1, a.end(), 0);
                break;
            }
        }
        if (i == 0) break;
    }
    return out;
}

EquivRelation push_relation(const EquivRelation& j, LevelHierarchy& h) {
    const LevelGraph& g1 = h.level(1);
    const int n1 = g1.vertices->size();
    std::vector<int> parent(n1);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto unite = [&](int a, int b) {
        int ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    };
    const int cells = static_cast<int>(g1.cells.size());
    for (int i = 0; i < cells; ++i)
        for (const auto& block : j.blocks())
            for (size_t k = 1; k < block.size(); ++k)
                unite(g1.cells[i][block[0]], g1.cells[i][block[k]]);
    // restrict J^{(1)} to V0
    std::vector<std::pair<int, int>> pairs;
    const int n0 = j.base().size();
    for (int x = 0; x < n0; ++x)
        for (int y = x + 1; y < n0; ++y)
            if (find(g1.boundary_ids[x]) == find(g1.boundary_ids[y])) pairs.push_back({x, y});
    return EquivRelation::from_pairs(j.base_ptr(), pairs);
}

bool is_preserved(const EquivRelation& j, LevelHierarchy& h) {
    return push_relation(j, h) == j;
}

bool is_g_relation(const EquivRelation& j, const std::vector<SymmetryGenerator>& group) {
    for (const auto& gen : group)
        for (const auto& block : j.blocks())
            for (size_t k = 1; k < block.size(); ++k)
                if (!j.related(gen.sigma[block[0]], gen.sigma[block[k]])) return false;
    return true;
}

double delta_of_relation(const ResistanceMatrix& R, const EquivRelation& j) {
    return delta_of_pair(R, j, j);
}

double delta_of_pair(const ResistanceMatrix& R, const EquivRelation& j,
                     const EquivRelation& jp) {
    if (!j.contained_in(jp)) throw DomainError("delta_of_pair: J must be contained in J'");
    const int n = j.base().size();
    double num = 0.0, den = kInf;
    bool any_rel = false, any_unrel = false;
    for (int x = 0; x < n; ++x)
        for (int y = x + 1; y < n; ++y) {
            if (j.related(x, y)) {
                num = std::max(num, R.R[x][y]);
                any_rel = true;
            }
            if (!jp.related(x, y)) {
                den = std::min(den, R.R[x][y]);
                any_unrel = true;
            }
        }
    if (!any_rel || !any_unrel)
        throw DomainError("delta_of_pair: relation pair admits no comparable pairs");
    return num / den;
}

std::vector<RelationDiagnostics> diagnose_relations(
    const ResistanceMatrix& R, const std::vector<EquivRelation>& relations,
    LevelHierarchy& h, const std::vector<SymmetryGenerator>& group) {
    std::vector<RelationDiagnostics> out;
    for (const auto& j : relations) {
        if (j.trivial()) throw DomainError("diagnose_relations: relation must be nontrivial");
        RelationDiagnostics d{j, delta_of_relation(R, j), {}, is_preserved(j, h),
                              is_g_relation(j, group)};
        for (const auto& jp : relations)
            if (!(j == jp) && j.contained_in(jp))
                d.delta_pairs.push_back({jp.to_string(), delta_of_pair(R, j, jp)});
        out.push_back(std::move(d));
    }
    return out;
}

DegeneracyChain detect_degeneracy(const ResistanceMatrix& R, double delta) {
    if (R.has_infinite) throw DegeneracyError("detect_degeneracy: infinite resistance entry");
    const int n = static_cast<int>(R.R.size());
    if (!(delta > 0.0) || !(delta < 1.0))
        throw DomainError("detect_degeneracy: delta must lie in (0,1)");
    std::vector<double> values;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) values.push_back(R.R[i][j]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end(),
                             [](double a, double b) { return std::fabs(a - b) <= 1e-12 * b; }),
                 values.end());

    DegeneracyChain out;
    if (values.size() < 2) return out;
    const double threshold = std::pow(delta, -2.0 / (n * (n - 1)));
    for (size_t k = 0; k + 1 < values.size(); ++k) {
        const double gap = values[k + 1] / values[k];
        if (gap <= threshold) continue;
        const double cut = values[k] * std::sqrt(gap);
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (R.R[i][j] < cut) pairs.push_back({i, j});
        EquivRelation rel = EquivRelation::from_pairs(R.vertices, pairs);
        if (rel.trivial()) continue;
        out.chain.push_back(rel);
        out.delta_values.push_back(delta_of_relation(R, rel));
        out.gap_ratios.push_back(gap);
    }
    // cuts at increasing thresholds give nested relations by construction
    for (size_t k = 0; k + 1 < out.chain.size(); ++k)
        if (!out.chain[k].contained_in(out.chain[k + 1]))
            throw std::logic_error("detect_degeneracy: chain is not nested");
    return out;
}

VertexSetPtr quotient_vertex_set(const EquivRelation& j) {
    std::vector<std::string> labels;
    for (const auto& block : j.blocks()) labels.push_back(j.base().label(block[0]));
    return make_vertex_set(std::move(labels));
}

StandardForm quotient_form(const StandardForm& e, const EquivRelation& j) {
    VertexSetPtr q = quotient_vertex_set(j);
    std::vector<Edge> edges;
    for (const Edge& ed : e.edges()) {
        const int bu = j.block_of(ed.u), bv = j.block_of(ed.v);
        if (bu == bv) continue;
        edges.push_back({std::min(bu, bv), std::max(bu, bv), ed.c});
    }
    return StandardForm(q, e.p(), std::move(edges));
}

double quotient_eval_trace(const TraceForm& e, const EquivRelation& j,
                           const std::vector<double>& u, const SolverConfig& cfg) {
    if (static_cast<int>(u.size()) != j.num_blocks())
        throw DomainError("quotient_eval_trace: data size mismatch");
    std::vector<double> lifted(j.base().size());
    for (int v = 0; v < j.base().size(); ++v) lifted[v] = u[j.block_of(v)];
    return eval_trace(e, lifted, cfg).energy;
}

namespace {

// classes of J^{(1)} on V1, reusing the push_relation union-find
std::vector<int> level1_classes(const EquivRelation& j, LevelHierarchy& h) {
    const LevelGraph& g1 = h.level(1);
    const int n1 = g1.vertices->size();
    std::vector<int> parent(n1);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto unite = [&](int a, int b) {
        int ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    };
    for (size_t i = 0; i < g1.cells.size(); ++i)
        for (const auto& block : j.blocks())
            for (size_t k = 1; k < block.size(); ++k)
                unite(g1.cells[i][block[0]], g1.cells[i][block[k]]);
    std::vector<int> cls(n1);
    for (int v = 0; v < n1; ++v) cls[v] = find(v);
    return cls;
}

}  // namespace

TraceForm quotient_renorm(const StandardForm& e_quot, const EquivRelation& j,
                          LevelHierarchy& h) {
    if (j.trivial()) throw DomainError("quotient_renorm: relation must be nontrivial");
    if (!is_preserved(j, h)) throw DomainError("quotient_renorm: relation is not preserved");
    VertexSetPtr q0 = quotient_vertex_set(j);
    if (!(e_quot.vertices() == *q0))
        throw DomainError("quotient_renorm: form does not live on V0/J");

    const LevelGraph& g1 = h.level(1);
    std::vector<int> cls = level1_classes(j, h);

    // compress classes to ids; classes containing a boundary image take the
    // quotient V0 label so the trace boundary resolves against the ambient
    std::vector<int> class_id(g1.vertices->size(), -1);
    std::vector<std::string> labels;
    for (int b = 0; b < j.num_blocks(); ++b) {
        const int v0 = j.blocks()[b][0];
        const int root = cls[g1.boundary_ids[v0]];
        if (class_id[root] < 0) {
            class_id[root] = static_cast<int>(labels.size());
            labels.push_back(q0->label(b));
        } else {
            throw StructureError("quotient_renorm: V0/J does not embed into V1/J^(1)");
        }
    }
    for (int v = 0; v < g1.vertices->size(); ++v) {
        const int root = cls[v];
        if (class_id[root] < 0) {
            class_id[root] = static_cast<int>(labels.size());
            labels.push_back(g1.vertices->label(v));
        }
    }
    VertexSetPtr q1 = make_vertex_set(labels);

    const auto& r = h.structure().r;
    std::vector<Edge> edges;
    for (size_t i = 0; i < g1.cells.size(); ++i) {
        const double w = 1.0 / r[i];
        for (const Edge& e : e_quot.edges()) {
            const int ru = j.blocks()[e.u][0], rv = j.blocks()[e.v][0];
            int cu = class_id[cls[g1.cells[i][ru]]];
            int cv = class_id[cls[g1.cells[i][rv]]];
            if (cu == cv) continue;  // the edge collapses inside a class
            edges.push_back({std::min(cu, cv), std::max(cu, cv), w * e.c});
        }
    }
    auto ambient = std::make_shared<const StandardForm>(q1, e_quot.p(), std::move(edges));
    return TraceForm(ambient, q0);
}

namespace {

struct RayScanResult {
    bool proportional = false;
    double value = 0.0;
    double sup = 0.0, inf = 0.0;
};

RayScanResult scan_ratio(const FormRef& top, const FormRef& bottom, const SolverConfig& cfg) {
    RayScanResult out;
    RatioScan sc = ratio_scan_degenerate(top, bottom, cfg);
    if (!sc.any) return out;
    out.sup = sc.sup;
    out.inf = sc.inf;
    const double mid = 0.5 * (sc.sup + sc.inf);
    if (!sc.saw_infinite && mid > 0 && (sc.sup - sc.inf) <= 1e-9 * mid) {
        out.proportional = true;
        out.value = mid;
    }
    return out;
}

// direct-sum forms sum_I E_I with complete positive graphs inside each block
StandardForm direct_sum_form(const EquivRelation& j, double p,
                             const std::vector<double>& coeffs) {
    std::vector<Edge> edges;
    size_t k = 0;
    for (const auto& block : j.blocks())
        for (size_t a = 0; a < block.size(); ++a)
            for (size_t b = a + 1; b < block.size(); ++b)
                edges.push_back({block[a], block[b], coeffs[k++]});
    return StandardForm(j.base_ptr(), p, std::move(edges));
}

int intra_block_pairs(const EquivRelation& j) {
    int count = 0;
    for (const auto& block : j.blocks())
        count += static_cast<int>(block.size() * (block.size() - 1) / 2);
    return count;
}

StandardForm complete_quotient_form(const EquivRelation& j, double p,
                                    const std::vector<double>& coeffs) {
    VertexSetPtr q = quotient_vertex_set(j);
    std::vector<Edge> edges;
    size_t k = 0;
    for (int a = 0; a < q->size(); ++a)
        for (int b = a + 1; b < q->size(); ++b) edges.push_back({a, b, coeffs[k++]});
    return StandardForm(q, p, std::move(edges));
}

}  // namespace

SabotReport sabot_test(RenormContext& ctx, double p) {
    if (!(p > 1.0)) throw DomainError("sabot_test: p must exceed 1");
    const PcfStructure& s = ctx.structure();
    SolverConfig cfg = ctx.config();
    cfg.strict_uniqueness = false;

    // generators incompatible with r break the G-symmetric machinery; keep the
    // subgroup that preserves r
    std::vector<SymmetryGenerator> effective;
    for (const auto& g : s.group)
        if (s.r_symmetric_under(g)) effective.push_back(g);

    SabotReport report;
    auto relations = enumerate_relations(s.boundary);
    std::vector<EquivRelation> targets;
    for (const auto& j : relations) {
        if (j.trivial()) continue;
        if (!is_g_relation(j, effective)) continue;
        if (!is_preserved(j, ctx.hierarchy())) continue;
        targets.push_back(j);
    }
    if (targets.empty()) {
        report.verdict = SabotVerdict::EXISTS;
        report.note = "no nontrivial preserved G-relations; condition (A) holds";
        return report;
    }

    for (const auto& j : targets) {
        SabotRelationRecord rec{j};
        const int pairs = intra_block_pairs(j);
        bool ray = pairs == 1;

        if (ray) {
            std::vector<double> coeff{1.0};
            StandardForm ej = direct_sum_form(j, p, coeff);
            RenormForm tej = renorm_step(ej, ctx);
            RayScanResult sc = scan_ratio(FormRef(tej.form, cfg), FormRef(ej), cfg);
            if (sc.proportional) {
                rec.rho_bar = rec.rho_under = sc.value;
                rec.exact = true;
            } else {
                rec.rho_bar = sc.sup;
                rec.rho_under = sc.inf;
                rec.exact = false;
                rec.spread = sc.sup - sc.inf;
            }
        } else {
            // heuristic optimization over the coefficient space
            const int samples = 24;
            QuasiRandom qr(pairs, cfg.seed ^ 0x5ab07ULL);
            double best_sup = kInf, best_inf = 0.0, second_sup = kInf, second_inf = 0.0;
            for (int t = 0; t < samples; ++t) {
                std::vector<double> coeff = qr.point(t);
                for (double& c : coeff) c = 0.1 + 0.9 * c;
                StandardForm ej = direct_sum_form(j, p, coeff);
                RenormForm tej = renorm_step(ej, ctx);
                RatioScan sc = ratio_scan_degenerate(FormRef(tej.form, cfg), FormRef(ej), cfg);
                if (!sc.any) continue;
                if (sc.sup < best_sup) {
                    second_sup = best_sup;
                    best_sup = sc.sup;
                } else {
                    second_sup = std::min(second_sup, sc.sup);
                }
                if (sc.inf > best_inf) {
                    second_inf = best_inf;
                    best_inf = sc.inf;
                } else {
                    second_inf = std::max(second_inf, sc.inf);
                }
            }
            rec.rho_bar = best_sup;
            rec.rho_under = best_inf;
            rec.exact = false;
            rec.spread = std::fabs(second_sup - best_sup) + std::fabs(best_inf - second_inf);
            if (!std::isfinite(rec.spread)) rec.spread = std::fabs(rec.rho_bar) * 0.1;
        }

        // quotient side
        const int qn = j.num_blocks();
        if (qn == 2) {
            StandardForm eq = complete_quotient_form(j, p, {1.0});
            TraceForm teq = quotient_renorm(eq, j, ctx.hierarchy());
            RayScanResult sc = scan_ratio(FormRef(teq, cfg), FormRef(eq), cfg);
            rec.rho_under_quotient = sc.proportional ? sc.value : sc.inf;
            rec.exact = rec.exact && sc.proportional;
        } else {
            const int qpairs = qn * (qn - 1) / 2;
            QuasiRandom qr(qpairs, cfg.seed ^ 0x9d07eULL);
            double best = 0.0, second = 0.0;
            for (int t = 0; t < 24; ++t) {
                std::vector<double> coeff = qr.point(t);
                for (double& c : coeff) c = 0.1 + 0.9 * c;
                StandardForm eq = complete_quotient_form(j, p, coeff);
                TraceForm teq = quotient_renorm(eq, j, ctx.hierarchy());
                RatioScan sc = ratio_scan_degenerate(FormRef(teq, cfg), FormRef(eq), cfg);
                if (!sc.any) continue;
                if (sc.inf > best) {
                    second = best;
                    best = sc.inf;
                } else {
                    second = std::max(second, sc.inf);
                }
            }
            rec.rho_under_quotient = best;
            rec.exact = false;
            rec.spread += std::fabs(best - second);
        }
        report.records.push_back(std::move(rec));
    }

    // decision rule with safety margins on heuristic values: non-existence
    // needs some rho_under_J above a quotient rho, existence needs every
    // rho_bar_J strictly below its own quotient rho. Exact values still get a
    // small relative tie tolerance so a knife-edge case cannot flip on
    // rounding noise; ties land in INCONCLUSIVE.
    auto tie_margin = [](double x, double y) { return 1e-9 * (std::fabs(x) + std::fabs(y)); };
    bool not_exists = false, exists_all = true;
    for (const auto& a : report.records) {
        for (const auto& b : report.records) {
            const double margin = (a.exact && b.exact)
                                      ? tie_margin(a.rho_under, b.rho_under_quotient)
                                      : 10.0 * (a.spread + b.spread);
            if (a.rho_under - b.rho_under_quotient > margin) not_exists = true;
        }
        const double margin = a.exact ? tie_margin(a.rho_bar, a.rho_under_quotient)
                                      : 10.0 * a.spread;
        if (!(a.rho_under_quotient - a.rho_bar > margin)) exists_all = false;
    }
    if (not_exists && exists_all) {
        report.verdict = SabotVerdict::INCONCLUSIVE;
        report.note = "conflicting heuristic signals";
    } else if (not_exists) {
        report.verdict = SabotVerdict::NOT_EXISTS;
    } else if (exists_all) {
        report.verdict = SabotVerdict::EXISTS;
    } else {
        report.verdict = SabotVerdict::INCONCLUSIVE;
        report.note = "inequalities not strict within the heuristic margin";
    }
    return report;
}

SgClosedForms sg_closed_forms(double p, const std::array<double, 3>& r) {
    if (!(p > 1.0)) throw DomainError("sg_closed_forms: p must exceed 1");
    for (double v : r)
        if (!(v > 0.0)) throw DomainError("sg_closed_forms: weights must be positive");
    SgClosedForms out;
    const double a = 1.0 / (p - 1.0);
    for (int i = 0; i < 3; ++i) {
        const int jdx = (i + 1) % 3, kdx = (i + 2) % 3;
        const double rj = r[jdx], rk = r[kdx], ri = r[i];
        out.rho_bar[i] = std::pow(std::pow(rj, a) + std::pow(rk, a), 1.0 - p);
        out.rho_quotient[i] =
            std::pow(std::pow(1.0 / rj + 1.0 / rk, -a) + std::pow(ri, a), 1.0 - p);
    }
    // order r_i >= r_j >= r_k; the decision reduces to the top-weight index
    int top = 0;
    for (int i = 1; i < 3; ++i)
        if (r[i] > r[top]) top = i;
    const int jdx = (top + 1) % 3, kdx = (top + 2) % 3;
    const double s1 = std::pow(r[jdx], a) + std::pow(r[kdx], a);
    const double s2 = std::pow(1.0 / r[jdx] + 1.0 / r[kdx], -a) + std::pow(r[top], a);
    if (std::fabs(s1 - s2) <= 1e-12 * (s1 + s2)) {
        out.boundary = true;
        out.classification = SabotVerdict::INCONCLUSIVE;
    } else if (s1 > s2) {
        out.classification = SabotVerdict::EXISTS;
    } else {
        out.classification = SabotVerdict::NOT_EXISTS;
    }
    return out;
}

ThetaValue theta(const StandardForm& e, RenormContext& ctx) {
    if (!e.nondegenerate()) throw DomainError("theta: form must be nondegenerate");
    RenormForm te = renorm_step(e, ctx);
    SolverConfig cfg = ctx.config();
    RatioBounds rb = ratio_bounds(FormRef(te.form, cfg), FormRef(e), cfg);
    ThetaValue out;
    out.value = rb.sup_ratio / rb.inf_ratio;
    out.heuristic = rb.heuristic;
    return out;
}

}  // namespace penergy

#include "penergy/forms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "penergy/solver.hpp"

namespace penergy {

VertexSet::VertexSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    index_.reserve(labels_.size());
    for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
        auto [it, inserted] = index_.emplace(labels_[i], i);
        if (!inserted) throw DomainError("VertexSet: duplicate label '" + labels_[i] + "'");
    }
}

int VertexSet::index_of(const std::string& label) const {
    auto it = index_.find(label);
    return it == index_.end() ? -1 : it->second;
}

int VertexSet::require_index(const std::string& label) const {
    int i = index_of(label);
    if (i < 0) throw DomainError("VertexSet: unknown label '" + label + "'");
    return i;
}

VertexSetPtr make_vertex_set(std::vector<std::string> labels) {
    return std::make_shared<const VertexSet>(std::move(labels));
}

namespace {

std::vector<Edge> normalize_edges(int n, std::vector<Edge> edges) {
    std::map<std::pair<int, int>, double> acc;
    for (const Edge& e : edges) {
        if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n)
            throw DomainError("StandardForm: edge endpoint out of range");
        if (e.u == e.v) {
            if (e.c != 0.0) throw DomainError("StandardForm: nonzero diagonal coefficient");
            continue;
        }
        if (e.c < 0.0) throw DomainError("StandardForm: negative coefficient");
        if (e.c == 0.0) continue;
        auto key = std::minmax(e.u, e.v);
        acc[key] += e.c;
    }
    std::vector<Edge> out;
    out.reserve(acc.size());
    for (const auto& [key, c] : acc) out.push_back({key.first, key.second, c});
    return out;
}

bool connected_by_edges(int n, const std::vector<Edge>& edges) {
    if (n <= 1) return true;
    std::vector<std::vector<int>> adj(n);
    for (const Edge& e : edges) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w : adj[v])
            if (!seen[w]) {
                seen[w] = 1;
                ++count;
                stack.push_back(w);
            }
    }
    return count == n;
}

}  // namespace

StandardForm::StandardForm(VertexSetPtr vertices, double p, std::vector<Edge> edges)
    : vertices_(std::move(vertices)), p_(p) {
    if (!vertices_) throw DomainError("StandardForm: null vertex set");
    if (vertices_->size() < 2) throw DomainError("StandardForm: need at least 2 vertices");
    if (!(p_ > 1.0) || !std::isfinite(p_))
        throw DomainError("StandardForm: exponent must satisfy p > 1");
    edges_ = normalize_edges(vertices_->size(), std::move(edges));
    nondegenerate_ = connected_by_edges(vertices_->size(), edges_);

    const int n = vertices_->size();
    std::vector<int> degree(n, 0);
    for (const Edge& e : edges_) {
        ++degree[e.u];
        ++degree[e.v];
    }
    adj_offsets_.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) adj_offsets_[i + 1] = adj_offsets_[i] + degree[i];
    adj_targets_.assign(adj_offsets_[n], 0);
    adj_coeffs_.assign(adj_offsets_[n], 0.0);
    std::vector<int> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
    for (const Edge& e : edges_) {
        adj_targets_[cursor[e.u]] = e.v;
        adj_coeffs_[cursor[e.u]++] = e.c;
        adj_targets_[cursor[e.v]] = e.u;
        adj_coeffs_[cursor[e.v]++] = e.c;
    }
}

double StandardForm::coeff(int x, int y) const {
    for (int k = adj_offsets_[x]; k < adj_offsets_[x + 1]; ++k)
        if (adj_targets_[k] == y) return adj_coeffs_[k];
    return 0.0;
}

double StandardForm::eval(const std::vector<double>& f) const {
    if (static_cast<int>(f.size()) != vertices_->size())
        throw DomainError("eval: function size does not match the vertex set");
    double total = 0.0;
    for (const Edge& e : edges_) {
        const double d = f[e.u] - f[e.v];
        total += e.c * std::pow(std::fabs(d), p_);
    }
    return total;
}

std::vector<double> StandardForm::grad(const std::vector<double>& f) const {
    std::vector<double> g(f.size(), 0.0);
    for (const Edge& e : edges_) {
        const double d = f[e.u] - f[e.v];
        const double t = p_ * e.c * std::pow(std::fabs(d), p_ - 1.0) * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
        g[e.u] += t;
        g[e.v] -= t;
    }
    return g;
}

TraceForm::TraceForm(StandardFormPtr ambient, VertexSetPtr boundary)
    : ambient_(std::move(ambient)), boundary_(std::move(boundary)) {
    if (!ambient_ || !boundary_) throw DomainError("TraceForm: null component");
    if (boundary_->size() < 2) throw DomainError("TraceForm: boundary needs >= 2 vertices");
    boundary_idx_.reserve(boundary_->size());
    for (const std::string& label : boundary_->labels())
        boundary_idx_.push_back(ambient_->vertices().require_index(label));
}

double eval_standard(const StandardForm& form, const std::vector<double>& f) {
    return form.eval(f);
}

StandardForm sum_forms(const std::vector<const StandardForm*>& forms) {
    if (forms.empty()) throw DomainError("sum_forms: empty list");
    const StandardForm& first = *forms.front();
    std::vector<Edge> edges;
    for (const StandardForm* f : forms) {
        if (!(f->vertices() == first.vertices()))
            throw DomainError("sum_forms: vertex sets differ");
        if (f->p() != first.p()) throw DomainError("sum_forms: exponents differ");
        edges.insert(edges.end(), f->edges().begin(), f->edges().end());
    }
    return StandardForm(first.vertices_ptr(), first.p(), std::move(edges));
}

StandardForm sum_forms(const StandardForm& a, const StandardForm& b) {
    return sum_forms(std::vector<const StandardForm*>{&a, &b});
}

StandardForm scale_form(const StandardForm& form, double s) {
    if (!(s > 0.0)) throw DomainError("scale_form: scale must be positive");
    std::vector<Edge> edges = form.edges();
    for (Edge& e : edges) e.c *= s;
    return StandardForm(form.vertices_ptr(), form.p(), std::move(edges));
}

TraceForm scale_form(const TraceForm& form, double s) {
    auto ambient = std::make_shared<const StandardForm>(scale_form(form.ambient(), s));
    return TraceForm(ambient, form.boundary_ptr());
}

std::vector<double> markov_clamp(const std::vector<double>& f) {
    std::vector<double> g(f.size());
    for (size_t i = 0; i < f.size(); ++i) g[i] = std::min(1.0, std::max(0.0, f[i]));
    return g;
}

std::vector<std::vector<int>> permutation_group_closure(
    const std::vector<std::vector<int>>& generators, int size, int guard) {
    auto check = [size](const std::vector<int>& perm) {
        if (static_cast<int>(perm.size()) != size)
            throw DomainError("permutation has wrong size");
        std::vector<char> seen(size, 0);
        for (int v : perm) {
            if (v < 0 || v >= size || seen[v])
                throw DomainError("not a permutation of the vertex set");
            seen[v] = 1;
        }
    };
    std::vector<int> id(size);
    for (int i = 0; i < size; ++i) id[i] = i;
    std::set<std::vector<int>> group{id};
    for (const auto& g : generators) {
        check(g);
        group.insert(g);
    }
    bool grew = true;
    while (grew) {
        grew = false;
        std::vector<std::vector<int>> snapshot(group.begin(), group.end());
        for (const auto& a : snapshot)
            for (const auto& b : snapshot) {
                std::vector<int> ab(size);
                for (int i = 0; i < size; ++i) ab[i] = a[b[i]];
                if (group.insert(ab).second) {
                    grew = true;
                    if (static_cast<int>(group.size()) > guard)
                        throw GuardError("permutation group closure exceeds guard");
                }
            }
    }
    return {group.begin(), group.end()};
}

StandardForm symmetrize(const StandardForm& form,
                        const std::vector<std::vector<int>>& generators) {
    const int n = form.vertices().size();
    auto group = permutation_group_closure(generators, n);
    std::vector<Edge> edges;
    const double w = 1.0 / static_cast<double>(group.size());
    // E(f o sigma) moves the coefficient of (x,y) to (sigma^{-1}x, sigma^{-1}y);
    // averaging over the whole group makes inverses irrelevant.
    for (const auto& sigma : group)
        for (const Edge& e : form.edges())
            edges.push_back({sigma[e.u], sigma[e.v], w * e.c});
    for (Edge& e : edges)
        if (e.u > e.v) std::swap(e.u, e.v);
    return StandardForm(form.vertices_ptr(), form.p(), std::move(edges));
}

int FormRef::size() const {
    return standard_ ? standard_->vertices().size() : trace_->boundary().size();
}

double FormRef::p() const { return standard_ ? standard_->p() : trace_->p(); }

double FormRef::eval(const std::vector<double>& f) const {
    if (standard_) return standard_->eval(f);
    return eval_trace(*trace_, f, *cfg_).energy;
}

std::vector<double> FormRef::grad(const std::vector<double>& f) const {
    if (standard_) return standard_->grad(f);
    // envelope theorem: d/df_b [A]_B(f) equals the ambient partial derivative
    // at the minimizing extension
    FormValue v = eval_trace(*trace_, f, *cfg_);
    std::vector<double> ag = trace_->ambient().grad(*v.minimizer);
    std::vector<double> g(trace_->boundary().size());
    for (int i = 0; i < trace_->boundary().size(); ++i) g[i] = ag[trace_->ambient_index(i)];
    return g;
}

double norm_surrogate(const FormRef& a, const FormRef& b,
                      const std::vector<std::vector<double>>& probes) {
    if (probes.empty()) throw DomainError("norm_surrogate: empty probe set");
    if (a.size() != b.size()) throw DomainError("norm_surrogate: size mismatch");
    double best = 0.0;
    for (const auto& f : probes) {
        const double osc = oscillation(f);
        if (!(osc > 0.0)) continue;
        const double num = std::fabs(a.eval(f) - b.eval(f));
        best = std::max(best, num / std::pow(osc, a.p()));
    }
    return best;
}

std::vector<std::vector<double>> default_probes(int n) {
    return probe_functions(n, 256, 0x9e3779b9ULL);
}

double norm_surrogate(const FormRef& a, const FormRef& b) {
    return norm_surrogate(a, b, default_probes(a.size()));
}

}  // namespace penergy

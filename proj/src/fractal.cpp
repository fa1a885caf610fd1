#include "penergy/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include <Eigen/Dense>

namespace penergy {

namespace {

class UnionFind {
public:
    explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(int x, int y) {
        x = find(x);
        y = find(y);
        if (x == y) return;
        if (y < x) std::swap(x, y);  // keep the smallest slot as representative
        parent_[y] = x;
    }

private:
    std::vector<int> parent_;
};

}  // namespace

void PcfStructure::validate() const {
    if (!boundary || boundary->size() < 2)
        throw StructureError("structure: boundary needs at least 2 labels");
    const int n0 = boundary->size();
    const int n = num_cells();
    if (n < 2) throw StructureError("structure: need at least 2 cells");
    if (static_cast<int>(r.size()) != n)
        throw StructureError("structure: weight vector size differs from cell count");
    for (double w : r)
        if (!(w > 0.0) || !std::isfinite(w))
            throw StructureError("structure: weights must be positive and finite");

    std::set<std::string> all_images;
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(cell_images[i].size()) != n0)
            throw StructureError("structure: cell " + std::to_string(i + 1) +
                                 " must map every boundary label");
        std::set<std::string> in_cell;
        for (const std::string& lbl : cell_images[i]) {
            if (lbl.empty()) throw StructureError("structure: empty image label");
            if (!in_cell.insert(lbl).second)
                throw StructureError("structure: cell " + std::to_string(i + 1) +
                                     " image map is not injective");
            all_images.insert(lbl);
        }
    }
    for (const std::string& b : boundary->labels())
        if (!all_images.count(b))
            throw StructureError("structure: boundary label '" + b +
                                 "' never appears as a cell image (V0 must embed in V1)");

    // connectivity of the level-1 identification graph (K connected)
    {
        std::map<std::string, int> id;
        for (const std::string& lbl : all_images) id.emplace(lbl, static_cast<int>(id.size()));
        UnionFind uf(static_cast<int>(id.size()));
        for (int i = 0; i < n; ++i)
            for (int x = 1; x < n0; ++x)
                uf.unite(id[cell_images[i][0]], id[cell_images[i][x]]);
        const int root = uf.find(0);
        for (int v = 1; v < static_cast<int>(id.size()); ++v)
            if (uf.find(v) != root)
                throw StructureError("structure: level-1 graph is disconnected");
    }

    for (const SymmetryGenerator& g : group) {
        auto check_perm = [](const std::vector<int>& perm, int size, const char* what) {
            if (static_cast<int>(perm.size()) != size)
                throw StructureError(std::string("structure: ") + what + " has wrong size");
            std::vector<char> seen(size, 0);
            for (int v : perm) {
                if (v < 0 || v >= size || seen[v])
                    throw StructureError(std::string("structure: ") + what +
                                         " is not a permutation");
                seen[v] = 1;
            }
        };
        check_perm(g.sigma, n0, "group sigma");
        check_perm(g.cell_perm, n, "group cell_perm");
        // level-1 compatibility: sigma(F_i x) = F_{cell_perm(i)}(sigma x)
        std::map<std::string, std::string> induced;
        for (int i = 0; i < n; ++i)
            for (int x = 0; x < n0; ++x) {
                const std::string& from = cell_images[i][x];
                const std::string& to = cell_images[g.cell_perm[i]][g.sigma[x]];
                auto [it, inserted] = induced.emplace(from, to);
                if (!inserted && it->second != to)
                    throw StructureError("structure: generator incompatible at cell " +
                                         std::to_string(i + 1) + " (image '" + from + "')");
            }
        // the induced V1 map must restrict to sigma on V0
        for (int x = 0; x < n0; ++x) {
            auto it = induced.find(boundary->label(x));
            if (it != induced.end() && it->second != boundary->label(g.sigma[x]))
                throw StructureError(
                    "structure: generator does not restrict to sigma on the boundary");
        }
    }

    for (const auto& [label, coords] : geometry) {
        (void)label;
        if (coords.empty() || (!geometry.empty() && coords.size() != geometry.begin()->second.size()))
            throw StructureError("structure: inconsistent geometry dimensions");
    }
    for (const auto& [label, word] : fixed_words) {
        if (boundary->index_of(label) < 0)
            throw StructureError("structure: fixed word for unknown boundary label '" + label + "'");
        if (word.empty()) throw StructureError("structure: empty fixed word");
        for (int c : word)
            if (c < 0 || c >= n) throw StructureError("structure: fixed word cell out of range");
    }
}

bool PcfStructure::r_symmetric_under(const SymmetryGenerator& g) const {
    for (int i = 0; i < num_cells(); ++i)
        if (std::fabs(r[i] - r[g.cell_perm[i]]) > 1e-14 * std::max(r[i], r[g.cell_perm[i]]))
            return false;
    return true;
}

namespace {

LevelGraph build_level0(const PcfStructure& s) {
    LevelGraph g;
    g.level = 0;
    g.vertices = s.boundary;
    g.boundary_ids.resize(s.boundary->size());
    std::iota(g.boundary_ids.begin(), g.boundary_ids.end(), 0);
    g.cells.push_back(g.boundary_ids);  // the empty word
    g.word_weights.push_back(1.0);
    return g;
}

LevelGraph build_next_level(const PcfStructure& s, const LevelGraph& prev) {
    const int N = s.num_cells();
    const int n0 = s.boundary->size();
    const int P = prev.vertices->size();
    LevelGraph g;
    g.level = prev.level + 1;

    // shared level-1 labels glue the cell copies along embedded V0 images
    UnionFind uf(N * P);
    {
        std::map<std::string, std::vector<std::pair<int, int>>> by_label;
        for (int i = 0; i < N; ++i)
            for (int x = 0; x < n0; ++x) by_label[s.cell_images[i][x]].push_back({i, x});
        for (const auto& [label, slots] : by_label) {
            (void)label;
            for (size_t k = 1; k < slots.size(); ++k)
                uf.unite(slots[0].first * P + prev.boundary_ids[slots[0].second],
                         slots[k].first * P + prev.boundary_ids[slots[k].second]);
        }
    }

    std::vector<int> id_of_root(N * P, -1);
    std::vector<std::string> labels;
    g.cell_copy.assign(N, std::vector<int>(P, -1));
    for (int i = 0; i < N; ++i)
        for (int u = 0; u < P; ++u) {
            const int root = uf.find(i * P + u);
            if (id_of_root[root] < 0) {
                id_of_root[root] = static_cast<int>(labels.size());
                const std::string prev_label = prev.vertices->label(u);
                std::string lbl = std::to_string(i + 1);
                if (prev.level == 0)
                    lbl += ":" + prev_label;
                else
                    lbl += "." + prev_label;
                labels.push_back(std::move(lbl));
                g.origin.push_back({i, u});
            }
            g.cell_copy[i][u] = id_of_root[root];
        }
    g.vertices = make_vertex_set(std::move(labels));

    // embedding V_{prev} -> V_n
    g.prev_embed.resize(P);
    if (prev.level == 0) {
        // boundary labels are their own level-1 images
        std::map<std::string, int> image_to_id;
        for (int i = 0; i < N; ++i)
            for (int x = 0; x < n0; ++x)
                image_to_id.emplace(s.cell_images[i][x], g.cell_copy[i][prev.boundary_ids[x]]);
        for (int b = 0; b < n0; ++b) {
            auto it = image_to_id.find(s.boundary->label(b));
            if (it == image_to_id.end())
                throw StructureError("structure: boundary label missing from V1");
            g.prev_embed[b] = it->second;
        }
        g.level1_user_labels.resize(g.vertices->size());
        for (const auto& [lbl, vid] : image_to_id) g.level1_user_labels[vid] = lbl;
    } else {
        for (int v = 0; v < P; ++v) {
            const auto [ci, cu] = prev.origin[v];
            g.prev_embed[v] = g.cell_copy[ci][prev.prev_embed[cu]];
        }
    }

    g.boundary_ids.resize(n0);
    for (int b = 0; b < n0; ++b) g.boundary_ids[b] = g.prev_embed[prev.boundary_ids[b]];
    {
        std::set<int> distinct(g.boundary_ids.begin(), g.boundary_ids.end());
        if (static_cast<int>(distinct.size()) != n0)
            throw StructureError(
                "structure: gluing forces distinct boundary labels to merge");
    }

    g.cells.reserve(static_cast<size_t>(N) * prev.cells.size());
    g.word_weights.reserve(g.cells.capacity());
    for (int i = 0; i < N; ++i)
        for (size_t w = 0; w < prev.cells.size(); ++w) {
            std::vector<int> cell(n0);
            for (int b = 0; b < n0; ++b) cell[b] = g.cell_copy[i][prev.cells[w][b]];
            g.cells.push_back(std::move(cell));
            g.word_weights.push_back(s.r[i] * prev.word_weights[w]);
        }
    return g;
}

}  // namespace

LevelHierarchy::LevelHierarchy(const PcfStructure& s) : structure_(s) {
    structure_.validate();
    levels_.push_back(build_level0(structure_));
}

void LevelHierarchy::build_next() {
    levels_.push_back(build_next_level(structure_, levels_.back()));
}

const LevelGraph& LevelHierarchy::level(int n) {
    if (n < 0) throw DomainError("level: negative level");
    while (max_built() < n) build_next();
    return levels_[n];
}

const LevelGraph& LevelHierarchy::built_level(int n) const {
    if (n < 0 || n > max_built()) throw DomainError("built_level: level not built");
    return levels_[n];
}

std::vector<int> LevelHierarchy::embed(int m, int n) {
    if (m > n) throw DomainError("embed: m > n");
    level(n);
    std::vector<int> map(levels_[m].vertices->size());
    std::iota(map.begin(), map.end(), 0);
    for (int k = m + 1; k <= n; ++k)
        for (int& v : map) v = levels_[k].prev_embed[v];
    return map;
}

LevelGraph build_level(const PcfStructure& s, int n) {
    LevelHierarchy h(s);
    return h.level(n);
}

StandardForm refine_form(const StandardForm& coarse, LevelHierarchy& h, int n) {
    const LevelGraph& cur = h.level(n);
    const LevelGraph& next = h.level(n + 1);
    if (!(coarse.vertices() == *cur.vertices))
        throw DomainError("refine_form: form does not live on level " + std::to_string(n));
    const auto& r = h.structure().r;
    std::vector<Edge> edges;
    edges.reserve(coarse.edges().size() * r.size());
    for (size_t i = 0; i < r.size(); ++i) {
        const double w = 1.0 / r[i];
        for (const Edge& e : coarse.edges())
            edges.push_back({next.cell_copy[i][e.u], next.cell_copy[i][e.v], w * e.c});
    }
    return StandardForm(next.vertices, coarse.p(), std::move(edges));
}

StandardForm refine_form_iter(const StandardForm& coarse, LevelHierarchy& h, int n, int m) {
    if (m < 0) throw DomainError("refine_form_iter: negative iteration count");
    StandardForm out = coarse;
    for (int k = 0; k < m; ++k) out = refine_form(out, h, n + k);
    return out;
}

SymmetryReport check_symmetry(const PcfStructure& s, LevelHierarchy& h, int n) {
    SymmetryReport rep;
    if (s.group.empty()) {
        rep.valid = true;
        rep.message = "trivial group";
        return rep;
    }
    try {
        s.validate();  // includes the level-1 compatibility of every generator
    } catch (const StructureError& e) {
        rep.valid = false;
        rep.message = e.what();
        return rep;
    }
    h.level(n);
    for (const SymmetryGenerator& gen : s.group) {
        std::vector<int> perm = gen.sigma;  // permutation of V_0
        for (int k = 1; k <= n; ++k) {
            const LevelGraph& g = h.built_level(k);
            std::vector<int> next(g.vertices->size(), -1);
            for (int i = 0; i < s.num_cells(); ++i)
                for (int u = 0; u < static_cast<int>(perm.size()); ++u) {
                    const int from = g.cell_copy[i][u];
                    const int to = g.cell_copy[gen.cell_perm[i]][perm[u]];
                    if (next[from] >= 0 && next[from] != to) {
                        rep.valid = false;
                        rep.message = "generator breaks at level " + std::to_string(k) +
                                      ", cell " + std::to_string(i + 1);
                        return rep;
                    }
                    next[from] = to;
                }
            perm = std::move(next);
        }
        rep.vertex_perms.push_back(std::move(perm));
    }
    rep.valid = true;
    rep.message = "ok";
    return rep;
}

ZeroWalkReport strict_zero_walk(const PcfStructure& s) {
    const int n0 = s.boundary->size();
    std::vector<std::vector<double>> coords(n0);
    for (int i = 0; i < n0; ++i) {
        auto it = s.geometry.find(s.boundary->label(i));
        if (it == s.geometry.end())
            throw DomainError("strict_zero_walk: missing coordinates for boundary label '" +
                              s.boundary->label(i) + "'");
        coords[i] = it->second;
    }
    auto dist = [&](int a, int b) {
        double acc = 0.0;
        for (size_t d = 0; d < coords[a].size(); ++d) {
            const double t = coords[a][d] - coords[b][d];
            acc += t * t;
        }
        return std::sqrt(acc);
    };
    ZeroWalkReport rep;
    rep.l0 = kInf;
    for (int i = 0; i < n0; ++i)
        for (int j = i + 1; j < n0; ++j) rep.l0 = std::min(rep.l0, dist(i, j));
    std::vector<std::vector<int>> adj(n0);
    for (int i = 0; i < n0; ++i)
        for (int j = 0; j < n0; ++j)
            if (i != j && std::fabs(dist(i, j) - rep.l0) <= 1e-9 * rep.l0) adj[i].push_back(j);

    rep.walks.assign(n0, std::vector<std::vector<int>>(n0));
    rep.all_connected = true;
    for (int src = 0; src < n0; ++src) {
        std::vector<int> from(n0, -2);
        std::queue<int> q;
        q.push(src);
        from[src] = -1;
        while (!q.empty()) {
            int v = q.front();
            q.pop();
            for (int w : adj[v])
                if (from[w] == -2) {
                    from[w] = v;
                    q.push(w);
                }
        }
        for (int dst = 0; dst < n0; ++dst) {
            if (dst == src) continue;
            if (from[dst] == -2) {
                rep.all_connected = false;
                continue;
            }
            std::vector<int> path;
            for (int v = dst; v != -1; v = from[v]) path.push_back(v);
            std::reverse(path.begin(), path.end());
            rep.walks[src][dst] = std::move(path);
        }
    }
    return rep;
}

PcfStructure preset_interval(double p) {
    PcfStructure s;
    s.boundary = make_vertex_set({"0", "1"});
    s.cell_images = {{"0", "m"}, {"m", "1"}};
    const double w = std::pow(2.0, 1.0 - p);
    s.r = {w, w};
    s.group.push_back({{1, 0}, {1, 0}});
    s.geometry = {{"0", {0.0}}, {"1", {1.0}}, {"m", {0.5}}};
    s.fixed_words = {{"0", {0}}, {"1", {1}}};
    return s;
}

PcfStructure preset_sg(bool with_group) {
    PcfStructure s;
    s.boundary = make_vertex_set({"q1", "q2", "q3"});
    s.cell_images = {{"q1", "a12", "a13"}, {"a12", "q2", "a23"}, {"a13", "a23", "q3"}};
    s.r = {1.0, 1.0, 1.0};
    if (with_group) {
        s.group.push_back({{1, 0, 2}, {1, 0, 2}});  // reflection swapping q1, q2
        s.group.push_back({{0, 2, 1}, {0, 2, 1}});  // reflection swapping q2, q3
    }
    const double h = std::sqrt(3.0) / 2.0;
    s.geometry = {{"q1", {0.0, 0.0}},  {"q2", {1.0, 0.0}},  {"q3", {0.5, h}},
                  {"a12", {0.5, 0.0}}, {"a13", {0.25, h / 2}}, {"a23", {0.75, h / 2}}};
    s.fixed_words = {{"q1", {0}}, {"q2", {1}}, {"q3", {2}}};
    return s;
}

PcfStructure preset_path3() {
    PcfStructure s;
    s.boundary = make_vertex_set({"0", "1"});
    s.cell_images = {{"0", "a"}, {"a", "b"}, {"b", "1"}};
    s.r = {1.0, 1.0, 1.0};
    s.geometry = {{"0", {0.0}}, {"1", {1.0}}, {"a", {1.0 / 3}}, {"b", {2.0 / 3}}};
    s.fixed_words = {{"0", {0}}, {"1", {2}}};
    return s;
}

std::vector<std::vector<double>> level_coordinates(const PcfStructure& s, LevelHierarchy& h,
                                                   int n) {
    const int n0 = s.boundary->size();
    std::vector<std::vector<double>> v0(n0);
    for (int i = 0; i < n0; ++i) {
        auto it = s.geometry.find(s.boundary->label(i));
        if (it == s.geometry.end()) return {};
        v0[i] = it->second;
    }
    const int dim = static_cast<int>(v0[0].size());

    // per-cell affine fit T_i with T_i(coord(b)) = coord(image_i(b))
    std::vector<Eigen::MatrixXd> A(s.num_cells());
    std::vector<Eigen::VectorXd> t(s.num_cells());
    for (int i = 0; i < s.num_cells(); ++i) {
        Eigen::MatrixXd X(n0, dim + 1);
        Eigen::MatrixXd Y(n0, dim);
        for (int b = 0; b < n0; ++b) {
            auto it = s.geometry.find(s.cell_images[i][b]);
            if (it == s.geometry.end()) return {};  // geometry does not cover V1
            for (int d = 0; d < dim; ++d) {
                X(b, d) = v0[b][d];
                Y(b, d) = it->second[d];
            }
            X(b, dim) = 1.0;
        }
        Eigen::MatrixXd sol = X.colPivHouseholderQr().solve(Y);  // (dim+1) x dim
        A[i] = sol.topRows(dim).transpose();
        t[i] = sol.row(dim).transpose();
    }

    std::vector<std::vector<double>> coords(h.level(0).vertices->size());
    for (int b = 0; b < n0; ++b) coords[b] = v0[b];
    for (int k = 1; k <= n; ++k) {
        const LevelGraph& g = h.level(k);
        std::vector<std::vector<double>> next(g.vertices->size());
        for (int i = 0; i < s.num_cells(); ++i)
            for (size_t u = 0; u < coords.size(); ++u) {
                const int v = g.cell_copy[i][u];
                if (!next[v].empty()) continue;
                Eigen::VectorXd x(dim);
                for (int d = 0; d < dim; ++d) x[d] = coords[u][d];
                Eigen::VectorXd y = A[i] * x + t[i];
                next[v].assign(y.data(), y.data() + dim);
            }
        coords = std::move(next);
    }
    // strip least-squares noise relative to the geometry scale
    double scale = 0.0;
    for (const auto& c : coords)
        for (double v : c) scale = std::max(scale, std::fabs(v));
    for (auto& c : coords)
        for (double& v : c)
            if (std::fabs(v) < 1e-13 * scale) v = 0.0;
    return coords;
}

}  // namespace penergy

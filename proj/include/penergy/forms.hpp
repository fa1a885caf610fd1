#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "penergy/common.hpp"

namespace penergy {

// Finite ordered vertex set with unique labels. The ordering is fixed at
// construction and used everywhere for reproducible iteration.
class VertexSet {
public:
    explicit VertexSet(std::vector<std::string> labels);

    int size() const { return static_cast<int>(labels_.size()); }
    const std::string& label(int i) const { return labels_[i]; }
    const std::vector<std::string>& labels() const { return labels_; }

    int index_of(const std::string& label) const;      // -1 if absent
    int require_index(const std::string& label) const; // throws DomainError

    bool operator==(const VertexSet& other) const { return labels_ == other.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, int> index_;
};

using VertexSetPtr = std::shared_ptr<const VertexSet>;

VertexSetPtr make_vertex_set(std::vector<std::string> labels);

struct Edge {
    int u = 0;
    int v = 0;        // u < v always
    double c = 0.0;   // nonnegative coefficient
};

// Discrete p-energy of the shape sum_{unordered pairs} c_{x,y} |f(x)-f(y)|^p.
// Each unordered pair is counted exactly once; the classical half-sum over
// ordered pairs corresponds to storing the half coefficients here.
// Immutable after construction.
class StandardForm {
public:
    StandardForm(VertexSetPtr vertices, double p, std::vector<Edge> edges);

    const VertexSet& vertices() const { return *vertices_; }
    VertexSetPtr vertices_ptr() const { return vertices_; }
    double p() const { return p_; }
    const std::vector<Edge>& edges() const { return edges_; }

    // coefficient of the unordered pair (x,y); zero when no edge is stored
    double coeff(int x, int y) const;

    // true when the positive-coefficient graph is connected (class S_p rather
    // than just the degenerate cone M~_p)
    bool nondegenerate() const { return nondegenerate_; }

    double eval(const std::vector<double>& f) const;

    // gradient of eval at f (well defined for every p > 1)
    std::vector<double> grad(const std::vector<double>& f) const;

    // adjacency in CSR layout, built once
    const std::vector<int>& adj_offsets() const { return adj_offsets_; }
    const std::vector<int>& adj_targets() const { return adj_targets_; }
    const std::vector<double>& adj_coeffs() const { return adj_coeffs_; }

private:
    VertexSetPtr vertices_;
    double p_;
    std::vector<Edge> edges_;
    bool nondegenerate_ = false;
    std::vector<int> adj_offsets_, adj_targets_;
    std::vector<double> adj_coeffs_;
};

using StandardFormPtr = std::shared_ptr<const StandardForm>;

// A standard form on an ambient set together with a boundary subset; its value
// at boundary data is the constrained minimum over interior extensions (the
// trace). Evaluation is delegated to the solver module.
class TraceForm {
public:
    TraceForm(StandardFormPtr ambient, VertexSetPtr boundary);

    const StandardForm& ambient() const { return *ambient_; }
    StandardFormPtr ambient_ptr() const { return ambient_; }
    const VertexSet& boundary() const { return *boundary_; }
    VertexSetPtr boundary_ptr() const { return boundary_; }
    double p() const { return ambient_->p(); }

    // ambient index of boundary vertex i
    int ambient_index(int i) const { return boundary_idx_[i]; }
    const std::vector<int>& ambient_indices() const { return boundary_idx_; }

private:
    StandardFormPtr ambient_;
    VertexSetPtr boundary_;
    std::vector<int> boundary_idx_;
};

struct FormValue {
    double energy = 0.0;
    std::optional<std::vector<double>> minimizer;  // on the ambient set when present
};

double eval_standard(const StandardForm& form, const std::vector<double>& f);

StandardForm sum_forms(const std::vector<const StandardForm*>& forms);
StandardForm sum_forms(const StandardForm& a, const StandardForm& b);

StandardForm scale_form(const StandardForm& form, double s);
TraceForm scale_form(const TraceForm& form, double s);

// pointwise (f v 0) ^ 1
std::vector<double> markov_clamp(const std::vector<double>& f);

// Averages E over the group generated by the given vertex permutations
// (permutation[i] = image index of vertex i). The result satisfies
// E(f o sigma) = E(f) for every generator.
StandardForm symmetrize(const StandardForm& form,
                        const std::vector<std::vector<int>>& generators);

// Closure of a permutation list under composition; guard limits the group size.
std::vector<std::vector<int>> permutation_group_closure(
    const std::vector<std::vector<int>>& generators, int size, int guard = 40320);

// Probe-set surrogate for the M~ norm distance: max over probes of
// |E1(f) - E2(f)| / Osc(f)^p. A lower bound for the true sup by construction.
// Both evaluators take a full function on the common vertex set. The default
// probe set is the 0/1 indicators plus 256 fixed low-discrepancy samples on M.
class FormRef;
double norm_surrogate(const FormRef& a, const FormRef& b,
                      const std::vector<std::vector<double>>& probes);
double norm_surrogate(const FormRef& a, const FormRef& b);
std::vector<std::vector<double>> default_probes(int n);

// Uniform evaluation handle over standard and trace forms (used by the ratio
// machinery and the surrogate norm). Holds non-owning pointers.
class FormRef {
public:
    explicit FormRef(const StandardForm& s) : standard_(&s) {}
    FormRef(const TraceForm& t, const struct SolverConfig& cfg)
        : trace_(&t), cfg_(&cfg) {}

    int size() const;
    double p() const;
    double eval(const std::vector<double>& f) const;
    std::vector<double> grad(const std::vector<double>& f) const;

    const StandardForm* standard() const { return standard_; }
    const TraceForm* trace() const { return trace_; }

private:
    const StandardForm* standard_ = nullptr;
    const TraceForm* trace_ = nullptr;
    const struct SolverConfig* cfg_ = nullptr;
};

}  // namespace penergy

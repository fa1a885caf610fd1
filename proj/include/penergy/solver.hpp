#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "penergy/forms.hpp"

namespace penergy {

struct SolverConfig {
    int max_iters = 20000;        // coordinate-descent sweep budget
    double rel_energy_tol = 1e-12;
    double grad_inf_tol = 1e-10;  // normalized interior stationarity residual
    int ratio_starts = 64;
    std::uint64_t seed = 1;
    int threads = 0;              // 0 = library default (PENERGY_THREADS or 1)
    bool use_newton = true;       // damped-Newton accelerator, active only for p >= 2
    bool strict_uniqueness = true;  // error out on floating interior components
};

struct MinimizeResult {
    std::vector<double> f;       // full function on the form's vertex set
    double energy = 0.0;
    double residual = 0.0;       // normalized stationarity residual
    int sweeps = 0;
    bool degenerate_components = false;  // some free vertices see no boundary
};

// Minimizes form over the non-fixed vertices. fixed[i] >= 0 marks fixed
// vertices whose value is fixed_values[fixed[i]]... see overload below for the
// practical interface: `fixed_idx` lists vertex indices held at `fixed_val`.
MinimizeResult minimize(const StandardForm& form,
                        const std::vector<int>& fixed_idx,
                        const std::vector<double>& fixed_val,
                        const SolverConfig& cfg,
                        const std::vector<double>* init = nullptr);

FormValue eval_trace(const TraceForm& form, const std::vector<double>& f,
                     const SolverConfig& cfg,
                     const std::vector<double>* init = nullptr);

// Unique minimizer extending the boundary data (values on the ambient set).
std::vector<double> p_harmonic_extend(const TraceForm& form,
                                      const std::vector<double>& f,
                                      const SolverConfig& cfg,
                                      const std::vector<double>* init = nullptr);

struct ResistanceMatrix {
    VertexSetPtr vertices;
    std::vector<std::vector<double>> R;  // symmetric, zero diagonal, may hold +inf
    bool has_infinite = false;

    double max_offdiag() const;
    double min_offdiag() const;
    // max over triples of (R(x,y)^{1/p} - R(x,z)^{1/p} - R(z,y)^{1/p}); <= 0
    // within tolerance for a genuine p-resistance (finite entries only)
    double triangle_violation(double p) const;
};

// 1 / min{ E(f) : f(x)=0, f(y)=1 }; +inf when x and y are disconnected.
// For a TraceForm the minimization runs over the ambient set with only the two
// boundary vertices pinned.
double resistance(const StandardForm& form, int x, int y, const SolverConfig& cfg);
double resistance(const TraceForm& form, int x, int y, const SolverConfig& cfg);

ResistanceMatrix resistance_matrix(const StandardForm& form, const SolverConfig& cfg);
ResistanceMatrix resistance_matrix(const TraceForm& form, const SolverConfig& cfg);

// min/max ratio of off-diagonal resistances; 0 with the degenerate flag when
// some entry is infinite.
struct DeltaValue {
    double value = 0.0;
    bool degenerate = false;
};
DeltaValue delta(const ResistanceMatrix& R);
DeltaValue delta(const StandardForm& form, const SolverConfig& cfg);
DeltaValue delta(const TraceForm& form, const SolverConfig& cfg);

struct RatioBounds {
    double sup_ratio = 0.0;
    double inf_ratio = 0.0;
    std::vector<double> argmax_f, argmin_f;
    bool heuristic = true;
};

// Multi-start local optimization of f -> E1(f)/E2(f) over M = {Osc=1, sum=0}.
// sup_ratio is a certified lower bound on the true sup, inf_ratio a certified
// upper bound on the true inf. Exact (heuristic=false) only when the vertex
// set has at most 2 points. Throws DegeneracyError when E2 vanishes on a
// nonconstant probe.
RatioBounds ratio_bounds(const FormRef& e1, const FormRef& e2, const SolverConfig& cfg);

// Def 3.3 variant used by the criteria module: ratios range over the subspace
// where E1(f) + E2(f) > 0, so infinite ratios are admitted (capped).
struct RatioScan {
    double sup = 0.0;
    double inf = 0.0;
    bool saw_infinite = false;
    bool any = false;
};
RatioScan ratio_scan_degenerate(const FormRef& e1, const FormRef& e2,
                                const SolverConfig& cfg);

// Deterministic fan-out helper: runs fn(i) for i in [0,n) on up to
// cfg-requested threads and returns results in index order.
int effective_threads(const SolverConfig& cfg);
void parallel_for_ordered(int n, int threads, const std::function<void(int)>& fn);

}  // namespace penergy

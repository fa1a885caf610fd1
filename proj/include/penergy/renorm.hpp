#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "penergy/fractal.hpp"
#include "penergy/solver.hpp"

namespace penergy {

// T^n E_0 represented as one trace from V_n (never nested traces): the ambient
// carries Lambda^n E_0 and the boundary is V_0. `level` is the ambient level.
struct RenormForm {
    TraceForm form;
    int level = 0;
};

struct RenormState {
    int n = 0;
    std::shared_ptr<const TraceForm> trace_form;  // [Lambda^n E0]_{V0}
    ResistanceMatrix resistance;                  // on V0
    double delta = 0.0;
    double M_n = 0.0;        // max_{x!=y} R_0(x,y) / R_n(x,y)
    double lambda_hat = 0.0; // M_n^{1/n}, 0 for n = 0
    bool degenerate = false;
};

struct EigenReport {
    double lambda = 0.0;
    double residual = 0.0;   // max over probes of |TE(f) - lambda E(f)| / E(f)
    std::shared_ptr<const TraceForm> eigenform;
    int eigenform_level = 0;
    std::vector<std::pair<int, double>> delta_history;
    bool condition_A = false;
    bool converged = false;
    std::vector<RenormState> states;
};

class RenormContext {
public:
    RenormContext(const PcfStructure& s, SolverConfig cfg);

    LevelHierarchy& hierarchy() { return hierarchy_; }
    const PcfStructure& structure() const { return hierarchy_.structure(); }
    const SolverConfig& config() const { return cfg_; }

    // largest n with |V_n| <= vertex_guard
    int horizon(int vertex_guard = 20000);

    // Piecewise p-harmonic initial guess: extends boundary data level by level
    // with small per-cell minimizations; exact for eigenforms, a good warm
    // start otherwise. `fixed` lists (V0 index, value); unconstrained boundary
    // vertices start at the mean of the fixed values.
    std::vector<double> cascadic_extend(const StandardForm& e0, int n,
                                        const std::vector<int>& fixed_idx,
                                        const std::vector<double>& fixed_val);

    // Lambda^n E0 on V_n; memoized per (form identity dropped: caller keeps results).
    StandardForm refine_to(const StandardForm& e0, int n);

private:
    LevelHierarchy hierarchy_;
    SolverConfig cfg_;
};

// T E as a trace form. When E is already a RenormForm the ambient is refined
// one level (the composed trace through intermediate levels collapses to a
// single minimization); evaluation stays lazy.
RenormForm renorm_step(const StandardForm& e0, RenormContext& ctx);
RenormForm renorm_step(const RenormForm& e, RenormContext& ctx);

// Resistance matrix of T^n E0 on V0 computed through the level-n ambient,
// using cascadic warm starts. Exposed for tests and the CLI.
ResistanceMatrix boundary_resistance(const StandardForm& e0, RenormContext& ctx, int n);
// variant reusing an already refined ambient Lambda^n E0
ResistanceMatrix boundary_resistance_of(const StandardForm& ambient, const StandardForm& e0,
                                        RenormContext& ctx, int n);

std::vector<RenormState> iterate(const StandardForm& e0, RenormContext& ctx, int n_max);

// Averaged energy [ (1/(n+1)) sum_m lambda^{-m} Lambda^m E0 ]_{V0}.
RenormForm kz_average(const StandardForm& e0, RenormContext& ctx, double lambda, int n);

EigenReport eigen_solve(const StandardForm& e0, RenormContext& ctx, int n_max,
                        int probe_count = 128);

struct OscillationReport {
    double eta = 0.0;                 // max over samples of max cell oscillation
    std::vector<double> per_sample;   // per-sample max cell oscillation
};

// Empirical oscillation contraction of the p-harmonic extension w.r.t.
// Lambda^m applied to the supplied (eigen)form: for each sample f on V0 with
// Osc(f) = 1, the max over level-m cells of the oscillation on the cell.
// Requires every level-m cell to meet V0 in at most one point.
OscillationReport oscillation_decay(RenormContext& ctx, const RenormForm& eigenform,
                                    int m, const std::vector<std::vector<double>>& samples);

struct FixedWordVerdict {
    std::string boundary_label;
    std::vector<int> word;
    double r_w = 0.0;        // lambda^{|w|} r_w, i.e. normalized so lambda = 1
    bool ok = false;         // r_w < 1
};

// Sanity gate for annotated boundary fixed words w: checks the normalized
// weight lambda^{|w|} r_w < 1. Unannotated structures yield an empty list.
std::vector<FixedWordVerdict> fixed_word_weight_check(const PcfStructure& s,
                                                      double lambda);

}  // namespace penergy

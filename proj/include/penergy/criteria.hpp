#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "penergy/renorm.hpp"

namespace penergy {

// Partition of a vertex set into disjoint nonempty blocks. Trivial when all
// blocks are singletons (J = 0) or there is a single block (J = 1).
class EquivRelation {
public:
    EquivRelation(VertexSetPtr base, std::vector<std::vector<int>> blocks);

    static EquivRelation identity(VertexSetPtr base);  // J = 0
    static EquivRelation full(VertexSetPtr base);      // J = 1
    static EquivRelation from_pairs(VertexSetPtr base,
                                    const std::vector<std::pair<int, int>>& pairs);

    const VertexSet& base() const { return *base_; }
    VertexSetPtr base_ptr() const { return base_; }
    const std::vector<std::vector<int>>& blocks() const { return blocks_; }
    int block_of(int v) const { return block_of_[v]; }
    int num_blocks() const { return static_cast<int>(blocks_.size()); }

    bool related(int x, int y) const { return block_of_[x] == block_of_[y]; }
    bool trivial() const;
    bool contained_in(const EquivRelation& other) const;  // J subset J'
    bool operator==(const EquivRelation& other) const { return block_of_ == other.block_of_; }

    std::string to_string() const;  // e.g. "{q1}{q2 q3}"

private:
    VertexSetPtr base_;
    std::vector<std::vector<int>> blocks_;   // canonical: sorted, ordered by least element
    std::vector<int> block_of_;
};

// All partitions of V0 (Bell enumeration); guarded at |V0| <= 8.
std::vector<EquivRelation> enumerate_relations(VertexSetPtr v0);

// T J = J^{(1)}|_{V0}: minimal relation on V1 generated by the cell images of
// J, restricted back to V0. J is preserved iff push_relation(J) == J.
EquivRelation push_relation(const EquivRelation& j, LevelHierarchy& h);
bool is_preserved(const EquivRelation& j, LevelHierarchy& h);

bool is_g_relation(const EquivRelation& j, const std::vector<SymmetryGenerator>& group);

struct RelationDiagnostics {
    EquivRelation relation;
    double delta_J = 0.0;   // max_{xJy} R / min_{not xJy} R
    // delta_{J,J'} against the other supplied relations containing this one
    std::vector<std::pair<std::string, double>> delta_pairs;
    bool preserved = false;
    bool g_relation = false;
};

double delta_of_relation(const ResistanceMatrix& R, const EquivRelation& j);
// delta_{J,J'} for J subset J': max_{xJy} R / min_{x J-bar' y} R
double delta_of_pair(const ResistanceMatrix& R, const EquivRelation& j,
                     const EquivRelation& jp);

// Per-relation diagnostics for a family of nontrivial relations (typically a
// detected chain): near-degeneracy levels, pairwise levels along containments,
// preservation and symmetry-invariance flags.
std::vector<RelationDiagnostics> diagnose_relations(
    const ResistanceMatrix& R, const std::vector<EquivRelation>& relations,
    LevelHierarchy& h, const std::vector<SymmetryGenerator>& group);

struct DegeneracyChain {
    std::vector<EquivRelation> chain;   // J_1 subsetneq ... subsetneq J_M
    std::vector<double> delta_values;   // delta_{J_m}
    std::vector<double> gap_ratios;     // multiplicative gaps that were cut
};

// Sorts the distinct off-diagonal resistances and cuts at every multiplicative
// gap exceeding delta^{-2/(n(n-1))} (n = #V0); each cut yields the union-find
// relation of below-gap pairs. The resulting relations are nested.
DegeneracyChain detect_degeneracy(const ResistanceMatrix& R, double delta);

// [[E]]_{V0/J}: precompose with the block-constant lift. The quotient vertex
// set uses block representative labels.
StandardForm quotient_form(const StandardForm& e, const EquivRelation& j);
VertexSetPtr quotient_vertex_set(const EquivRelation& j);
double quotient_eval_trace(const TraceForm& e, const EquivRelation& j,
                           const std::vector<double>& u, const SolverConfig& cfg);

// T_{V0/J} E for a preserved nontrivial J: lift to block-constant functions,
// refine with weights r_i^{-1}, minimize over the interior classes of
// V1/J^{(1)}, restrict to V0/J.
TraceForm quotient_renorm(const StandardForm& e_quot, const EquivRelation& j,
                          LevelHierarchy& h);

enum class SabotVerdict { EXISTS, NOT_EXISTS, INCONCLUSIVE };

struct SabotRelationRecord {
    EquivRelation relation;
    double rho_bar = 0.0;          // inf over degenerate direct-sum forms of sup(TE|E)
    double rho_under = 0.0;        // sup over the same class of inf(TE|E)
    double rho_under_quotient = 0.0;  // sup over quotient forms of inf(T_q E|E)
    bool exact = false;
    double spread = 0.0;           // observed heuristic spread (0 when exact)
};

struct SabotReport {
    std::vector<SabotRelationRecord> records;
    SabotVerdict verdict = SabotVerdict::INCONCLUSIVE;
    std::string note;
};

// Existence decision over the nontrivial preserved G-relations.
// Generators incompatible with r (r_i != r_{sigma^(1)(i)}) are dropped before
// the G-relation filter. Heuristic (non-ray) values demand a 10x-spread safety
// margin before a verdict is issued.
SabotReport sabot_test(RenormContext& ctx, double p);

struct SgClosedForms {
    std::array<double, 3> rho_bar{};        // (r_j^{1/(p-1)} + r_k^{1/(p-1)})^{1-p}
    std::array<double, 3> rho_quotient{};   // ((1/r_j + 1/r_k)^{1/(1-p)} + r_i^{1/(p-1)})^{1-p}
    SabotVerdict classification = SabotVerdict::INCONCLUSIVE;
    bool boundary = false;                  // equality case of the test inequality
};

// Closed forms for the 3-cell gasket and the classification of the associated
// inequality with r sorted decreasingly (the BOUNDARY case reports
// INCONCLUSIVE with boundary = true).
SgClosedForms sg_closed_forms(double p, const std::array<double, 3>& r);

struct ThetaValue {
    double value = 1.0;
    bool heuristic = true;
};

// theta(E) = sup(TE|E) / inf(TE|E).
ThetaValue theta(const StandardForm& e, RenormContext& ctx);

}  // namespace penergy

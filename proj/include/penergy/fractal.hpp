#pragma once

#include <array>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "penergy/forms.hpp"

namespace penergy {

// One symmetry generator: a permutation sigma of V0 together with the induced
// permutation of cells (sigma o F_i = F_{cell_perm[i]} o sigma on V0-images).
struct SymmetryGenerator {
    std::vector<int> sigma;      // V0 index -> V0 index
    std::vector<int> cell_perm;  // cell -> cell
};

// Combinatorial p.c.f. data: boundary labels, N cell maps V0 -> V1 given by
// image labels (shared labels encode the gluing F_iK n F_jK), weights r, and
// optional symmetry group / geometry / fixed-word annotations.
struct PcfStructure {
    VertexSetPtr boundary;                                  // V0
    std::vector<std::vector<std::string>> cell_images;      // [cell][V0 index] -> V1 label
    std::vector<double> r;                                  // positive weights, one per cell
    std::vector<SymmetryGenerator> group;                   // may be empty
    std::map<std::string, std::vector<double>> geometry;    // label -> coords (V0, optionally V1)
    std::map<std::string, std::vector<int>> fixed_words;    // boundary label -> word fixing it

    int num_cells() const { return static_cast<int>(cell_images.size()); }

    // throws StructureError on malformed data
    void validate() const;

    // true when r_i = r_{cell_perm(i)} for the given generator
    bool r_symmetric_under(const SymmetryGenerator& g) const;
};

// Level-n approximation graph V_n with canonical labels ("w1..wn:b", picked
// lexicographically by word then boundary index; level 0 uses the bare
// boundary labels).
struct LevelGraph {
    int level = 0;
    VertexSetPtr vertices;
    std::vector<std::vector<int>> cell_copy;  // [cell][V_{n-1} id] -> V_n id (level >= 1)
    std::vector<int> prev_embed;              // V_{n-1} id -> V_n id     (level >= 1)
    std::vector<int> boundary_ids;            // V0 index -> V_n id
    std::vector<std::vector<int>> cells;      // word (lex order) -> the |V0| ids of F_w(V0)
    std::vector<double> word_weights;         // r_w, same order as cells
    std::vector<std::pair<int, int>> origin;  // id -> canonical (cell, V_{n-1} id) preimage
    std::vector<std::string> level1_user_labels;  // level 1 only: id -> user label

    int num_words() const { return static_cast<int>(cells.size()); }
};

// V_0, V_1, ..., built on demand; immutable once built.
class LevelHierarchy {
public:
    explicit LevelHierarchy(const PcfStructure& s);

    const PcfStructure& structure() const { return structure_; }
    const LevelGraph& level(int n);                 // builds up to n as needed
    const LevelGraph& built_level(int n) const;     // must already exist
    int max_built() const { return static_cast<int>(levels_.size()) - 1; }

    // composed embedding V_m -> V_n ids, m <= n
    std::vector<int> embed(int m, int n);

private:
    PcfStructure structure_;
    std::deque<LevelGraph> levels_;  // deque: references stay valid as levels grow
    void build_next();
};

LevelGraph build_level(const PcfStructure& s, int n);

// Lambda E: refine a form on V_n to V_{n+1} with weights r_i^{-1}; coefficients
// on glued pairs accumulate. `coarse` must live on hierarchy level n.
StandardForm refine_form(const StandardForm& coarse, LevelHierarchy& h, int n);
StandardForm refine_form_iter(const StandardForm& coarse, LevelHierarchy& h, int n, int m);

struct SymmetryReport {
    bool valid = false;
    std::string message;
    // per generator: induced vertex permutation of V_n (empty when invalid)
    std::vector<std::vector<int>> vertex_perms;
};

// Verifies level-1 compatibility of every generator and, by induction, builds
// the induced permutations of V_n.
SymmetryReport check_symmetry(const PcfStructure& s, LevelHierarchy& h, int n);

struct ZeroWalkReport {
    double l0 = 0.0;                                     // minimal pairwise distance in V0
    std::vector<std::vector<std::vector<int>>> walks;    // [x][y] path of V0 ids, empty if none
    bool all_connected = false;
};

// Strict 0-walks between boundary points (paths using only distance-l0 steps);
// requires V0 coordinates in the structure's geometry.
ZeroWalkReport strict_zero_walk(const PcfStructure& s);

// Built-in structures.
PcfStructure preset_interval(double p);  // N=2, r = (2^{1-p}, 2^{1-p})
PcfStructure preset_sg(bool with_group = true);  // N=3, r = (1,1,1), S3 generators
PcfStructure preset_path3();             // 3-cell path subdivision, r = (1,1,1)

// Affine per-cell coordinate propagation: available when the geometry covers
// all V1 image labels. Returns coordinates per V_n vertex id (empty on
// insufficient geometry).
std::vector<std::vector<double>> level_coordinates(const PcfStructure& s,
                                                   LevelHierarchy& h, int n);

}  // namespace penergy

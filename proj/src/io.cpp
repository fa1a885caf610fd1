#include "penergy/io.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

namespace penergy {

using nlohmann::json;

json form_to_json(const StandardForm& form) {
    json j;
    j["vertices"] = form.vertices().labels();
    j["p"] = form.p();
    json coeffs = json::array();
    for (const Edge& e : form.edges())
        coeffs.push_back({form.vertices().label(e.u), form.vertices().label(e.v), e.c});
    j["coeffs"] = coeffs;
    return j;
}

StandardForm form_from_json(const json& j) {
    if (!j.contains("vertices") || !j.contains("p") || !j.contains("coeffs"))
        throw DomainError("form: document needs 'vertices', 'p' and 'coeffs'");
    VertexSetPtr verts = make_vertex_set(j.at("vertices").get<std::vector<std::string>>());
    const double p = j.at("p").get<double>();
    std::vector<Edge> edges;
    for (const auto& row : j.at("coeffs")) {
        if (!row.is_array() || row.size() != 3)
            throw DomainError("form: each coeff entry must be [x, y, c]");
        edges.push_back({verts->require_index(row[0].get<std::string>()),
                         verts->require_index(row[1].get<std::string>()),
                         row[2].get<double>()});
    }
    for (Edge& e : edges)
        if (e.u > e.v) std::swap(e.u, e.v);
    return StandardForm(verts, p, std::move(edges));
}

json structure_to_json(const PcfStructure& s) {
    json j;
    j["boundary"] = s.boundary->labels();
    json cells = json::array();
    for (const auto& images : s.cell_images) {
        json imap;
        for (int b = 0; b < s.boundary->size(); ++b) imap[s.boundary->label(b)] = images[b];
        cells.push_back({{"images", imap}});
    }
    j["cells"] = cells;
    j["r"] = s.r;
    if (!s.group.empty()) {
        json group = json::array();
        for (const auto& g : s.group) {
            json sigma;
            for (int b = 0; b < s.boundary->size(); ++b)
                sigma[s.boundary->label(b)] = s.boundary->label(g.sigma[b]);
            group.push_back({{"sigma", sigma}, {"cell_perm", g.cell_perm}});
        }
        j["group"] = group;
    }
    if (!s.geometry.empty()) {
        json geo;
        for (const auto& [label, xy] : s.geometry) geo[label] = xy;
        j["geometry"] = geo;
    }
    if (!s.fixed_words.empty()) {
        json fw;
        for (const auto& [label, word] : s.fixed_words) fw[label] = word;
        j["fixed_words"] = fw;
    }
    return j;
}

PcfStructure structure_from_json(const json& j) {
    PcfStructure s;
    if (!j.contains("boundary") || !j.contains("cells") || !j.contains("r"))
        throw DomainError("fractal spec: needs 'boundary', 'cells' and 'r'");
    s.boundary = make_vertex_set(j.at("boundary").get<std::vector<std::string>>());
    for (const auto& cell : j.at("cells")) {
        if (!cell.contains("images")) throw DomainError("fractal spec: cell without 'images'");
        std::vector<std::string> images(s.boundary->size());
        for (const auto& [from, to] : cell.at("images").items())
            images[s.boundary->require_index(from)] = to.get<std::string>();
        for (const std::string& lbl : images)
            if (lbl.empty())
                throw DomainError("fractal spec: cell images must cover every boundary label");
        s.cell_images.push_back(std::move(images));
    }
    s.r = j.at("r").get<std::vector<double>>();
    if (j.contains("group")) {
        for (const auto& g : j.at("group")) {
            SymmetryGenerator gen;
            gen.sigma.resize(s.boundary->size());
            for (const auto& [from, to] : g.at("sigma").items())
                gen.sigma[s.boundary->require_index(from)] =
                    s.boundary->require_index(to.get<std::string>());
            gen.cell_perm = g.at("cell_perm").get<std::vector<int>>();
            s.group.push_back(std::move(gen));
        }
    }
    if (j.contains("geometry"))
        for (const auto& [label, xy] : j.at("geometry").items())
            s.geometry[label] = xy.get<std::vector<double>>();
    if (j.contains("fixed_words"))
        for (const auto& [label, word] : j.at("fixed_words").items())
            s.fixed_words[label] = word.get<std::vector<int>>();
    s.validate();
    return s;
}

PcfStructure load_structure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open fractal spec '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DomainError("fractal spec '" + path + "': " + e.what());
    }
    return structure_from_json(j);
}

SolverConfig solver_config_from_json(const json& j, SolverConfig base) {
    if (!j.contains("solver")) return base;
    const json& s = j.at("solver");
    if (s.contains("max_iters")) base.max_iters = s.at("max_iters").get<int>();
    if (s.contains("rel_energy_tol")) base.rel_energy_tol = s.at("rel_energy_tol").get<double>();
    if (s.contains("grad_inf_tol")) base.grad_inf_tol = s.at("grad_inf_tol").get<double>();
    if (s.contains("ratio_starts")) base.ratio_starts = s.at("ratio_starts").get<int>();
    if (s.contains("seed")) base.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("threads")) base.threads = s.at("threads").get<int>();
    if (s.contains("use_newton")) base.use_newton = s.at("use_newton").get<bool>();
    return base;
}

RunManifest make_manifest(const std::string& command, const std::string& input_path,
                          const SolverConfig& cfg) {
    RunManifest m;
    m.command = command;
    m.input_path = input_path;
    m.cfg = cfg;
    m.seed = cfg.seed;
    m.tool_version = "0.1.0";
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    m.timestamp = buf;
    return m;
}

json manifest_to_json(const RunManifest& m) {
    json cfg;
    cfg["max_iters"] = m.cfg.max_iters;
    cfg["rel_energy_tol"] = m.cfg.rel_energy_tol;
    cfg["grad_inf_tol"] = m.cfg.grad_inf_tol;
    cfg["ratio_starts"] = m.cfg.ratio_starts;
    cfg["seed"] = m.cfg.seed;
    cfg["threads"] = m.cfg.threads;
    cfg["use_newton"] = m.cfg.use_newton;
    json j;
    j["command"] = m.command;
    j["input_path"] = m.input_path;
    j["cfg"] = cfg;
    j["seed"] = m.seed;
    j["tool_version"] = m.tool_version;
    j["timestamp"] = m.timestamp;
    return j;
}

const char* sabot_verdict_name(SabotVerdict v) {
    switch (v) {
        case SabotVerdict::EXISTS: return "EXISTS";
        case SabotVerdict::NOT_EXISTS: return "NOT_EXISTS";
        default: return "INCONCLUSIVE";
    }
}

json sabot_report_to_json(const SabotReport& report) {
    json j;
    json recs = json::array();
    for (const auto& r : report.records) {
        json rec;
        rec["relation"] = r.relation.to_string();
        rec["rho_bar"] = r.rho_bar;
        rec["rho_under"] = r.rho_under;
        rec["rho_under_quotient"] = r.rho_under_quotient;
        rec["exact"] = r.exact;
        rec["spread"] = r.spread;
        recs.push_back(rec);
    }
    j["relations"] = recs;
    j["verdict"] = sabot_verdict_name(report.verdict);
    if (!report.note.empty()) j["note"] = report.note;
    return j;
}

json renorm_states_to_json(const std::vector<RenormState>& states) {
    json arr = json::array();
    for (const auto& st : states) {
        json s;
        s["n"] = st.n;
        s["delta"] = st.delta;
        s["M_n"] = st.M_n;
        s["lambda_hat"] = st.lambda_hat;
        json res = json::array();
        const auto& verts = *st.resistance.vertices;
        for (int i = 0; i < verts.size(); ++i)
            for (int k = i + 1; k < verts.size(); ++k) {
                json row = {verts.label(i), verts.label(k)};
                if (std::isinf(st.resistance.R[i][k]))
                    row.push_back("inf");
                else
                    row.push_back(st.resistance.R[i][k]);
                res.push_back(row);
            }
        s["resistances"] = res;
        if (st.degenerate) s["degenerate"] = true;
        arr.push_back(s);
    }
    return arr;
}

json eigen_report_to_json(const EigenReport& report) {
    json j;
    j["lambda"] = report.lambda;
    j["residual"] = report.residual;
    j["converged"] = report.converged;
    j["condition_A"] = report.condition_A;
    j["eigenform_level"] = report.eigenform_level;
    json hist = json::array();
    for (const auto& [n, d] : report.delta_history) hist.push_back({n, d});
    j["delta_history"] = hist;
    j["states"] = renorm_states_to_json(report.states);
    return j;
}

}  // namespace penergy

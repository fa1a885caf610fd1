#include "penergy/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "penergy/io.hpp"

namespace penergy {

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

struct CommonOpts {
    std::string spec_path;
    std::string preset;
    std::string form_path;
    std::string r_list;
    double p = 2.0;
    bool p_given = false;
    std::string format = "json";
    SolverConfig cfg;
    std::string command_line;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--spec", o.spec_path, "fractal spec JSON file");
    cmd->add_option("--preset", o.preset, "built-in structure: interval, sg, path3")
        ->check(CLI::IsMember({"interval", "sg", "path3"}));
    cmd->add_option("--p", o.p, "energy exponent, p > 1");
    cmd->add_option("--r", o.r_list, "comma-separated cell weights (overrides the spec)");
    cmd->add_option("--form", o.form_path, "boundary form JSON (default: unit complete graph)");
    cmd->add_option("--format", o.format, "output format")
        ->check(CLI::IsMember({"json", "csv", "table", "jsonl"}));
    cmd->add_option("--tol", o.cfg.rel_energy_tol, "relative energy tolerance");
    cmd->add_option("--grad-tol", o.cfg.grad_inf_tol, "stationarity residual tolerance");
    cmd->add_option("--max-iters", o.cfg.max_iters, "sweep budget for the minimizer");
    cmd->add_option("--seed", o.cfg.seed, "seed for the deterministic probe sequences");
    cmd->add_option("--starts", o.cfg.ratio_starts, "multi-start count for ratio bounds");
    cmd->add_option("--threads", o.cfg.threads, "worker cap (0 = PENERGY_THREADS or 1)");
}

struct Problem {
    PcfStructure structure;
    StandardForm e0;
    SolverConfig cfg;
    std::string input_name;
};

Problem resolve_problem(const CLI::App* cmd, CommonOpts& o) {
    if (!(o.p > 1.0)) throw DomainError("--p must exceed 1");
    Problem pb{PcfStructure{}, StandardForm(make_vertex_set({"a", "b"}), 2.0, {{0, 1, 1.0}}),
               o.cfg, ""};
    nlohmann::json spec_json;
    if (!o.spec_path.empty()) {
        std::ifstream in(o.spec_path);
        if (!in) throw DomainError("cannot open fractal spec '" + o.spec_path + "'");
        try {
            in >> spec_json;
        } catch (const nlohmann::json::exception& e) {
            throw DomainError("fractal spec '" + o.spec_path + "': " + e.what());
        }
        pb.structure = structure_from_json(spec_json);
        pb.input_name = o.spec_path;
    } else if (o.preset == "interval") {
        pb.structure = preset_interval(o.p);
        pb.input_name = "preset:interval";
    } else if (o.preset == "sg") {
        pb.structure = preset_sg(true);
        pb.input_name = "preset:sg";
    } else if (o.preset == "path3") {
        pb.structure = preset_path3();
        pb.input_name = "preset:path3";
    } else {
        throw DomainError("either --spec or --preset is required");
    }

    // config precedence: flag > spec file > default
    if (!spec_json.is_null()) {
        SolverConfig from_spec = solver_config_from_json(spec_json, SolverConfig{});
        SolverConfig merged = from_spec;
        if (cmd->count("--tol")) merged.rel_energy_tol = o.cfg.rel_energy_tol;
        if (cmd->count("--grad-tol")) merged.grad_inf_tol = o.cfg.grad_inf_tol;
        if (cmd->count("--max-iters")) merged.max_iters = o.cfg.max_iters;
        if (cmd->count("--seed")) merged.seed = o.cfg.seed;
        if (cmd->count("--starts")) merged.ratio_starts = o.cfg.ratio_starts;
        if (cmd->count("--threads")) merged.threads = o.cfg.threads;
        pb.cfg = merged;
    }

    if (!o.r_list.empty()) {
        std::vector<double> r = parse_number_list(o.r_list);
        if (r.size() != pb.structure.cell_images.size())
            throw DomainError("--r needs exactly one weight per cell");
        pb.structure.r = std::move(r);
        pb.structure.validate();
    }

    if (!o.form_path.empty()) {
        std::ifstream in(o.form_path);
        if (!in) throw DomainError("cannot open form '" + o.form_path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DomainError("form '" + o.form_path + "': " + e.what());
        }
        pb.e0 = form_from_json(j);
        if (!(pb.e0.vertices() == *pb.structure.boundary))
            throw DomainError("form vertices must match the structure boundary");
        if (cmd->count("--p") && pb.e0.p() != o.p)
            throw DomainError("--p conflicts with the form document");
    } else {
        std::vector<Edge> edges;
        const int n0 = pb.structure.boundary->size();
        for (int i = 0; i < n0; ++i)
            for (int j = i + 1; j < n0; ++j) edges.push_back({i, j, 1.0});
        pb.e0 = StandardForm(pb.structure.boundary, o.p, std::move(edges));
    }
    return pb;
}

void emit_resist(std::ostream& out, const Problem& pb, const CommonOpts& o,
                 const std::vector<RenormState>& states) {
    RunManifest man = make_manifest(o.command_line, pb.input_name, pb.cfg);
    const RenormState& last = states.back();
    if (o.format == "json") {
        nlohmann::json j;
        j["manifest"] = manifest_to_json(man);
        j["states"] = renorm_states_to_json(states);
        out << j.dump(2) << "\n";
    } else if (o.format == "jsonl") {
        nlohmann::json mj;
        mj["manifest"] = manifest_to_json(man);
        out << mj.dump() << "\n";
        for (const auto& line : renorm_states_to_json(states)) out << line.dump() << "\n";
    } else if (o.format == "csv") {
        out << "# manifest: " << manifest_to_json(man).dump() << "\n";
        out << "x,y,R\n";
        const auto& verts = *last.resistance.vertices;
        for (int i = 0; i < verts.size(); ++i)
            for (int k = i + 1; k < verts.size(); ++k)
                out << verts.label(i) << "," << verts.label(k) << ","
                    << fmt(last.resistance.R[i][k]) << "\n";
        out << "delta," << fmt(last.delta) << "\n";
        out << "M_n," << fmt(last.M_n) << "\n";
    } else {
        out << "resistances of T^" << last.n << " E0 on V0 (" << pb.input_name << ")\n";
        const auto& verts = *last.resistance.vertices;
        for (int i = 0; i < verts.size(); ++i)
            for (int k = i + 1; k < verts.size(); ++k)
                out << "  R(" << verts.label(i) << ", " << verts.label(k)
                    << ") = " << fmt(last.resistance.R[i][k]) << "\n";
        out << "  delta = " << fmt(last.delta) << ", M_n = " << fmt(last.M_n)
            << ", lambda_hat = " << fmt(last.lambda_hat) << "\n";
    }
}

void emit_sabot_table(std::ostream& out, const SabotReport& report) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s %-14s %-14s %-14s %s\n", "relation", "rho_bar",
                  "rho_under", "rho_quotient", "exact");
    out << line;
    for (const auto& r : report.records) {
        std::snprintf(line, sizeof(line), "%-22s %-14.8g %-14.8g %-14.8g %s\n",
                      r.relation.to_string().c_str(), r.rho_bar, r.rho_under,
                      r.rho_under_quotient, r.exact ? "yes" : "no");
        out << line;
    }
    out << "verdict: " << sabot_verdict_name(report.verdict);
    if (!report.note.empty()) out << "  (" << report.note << ")";
    out << "\n";
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"discrete p-energies, p-resistances and renormalization on p.c.f. structures"};
    app.require_subcommand(1);

    CommonOpts o;
    {
        std::string joined = "penergy";
        for (const auto& a : args) joined += " " + a;
        o.command_line = joined;
    }

    int level = 1;
    int n_max = -1;
    int probe_count = 128;
    std::string values_text;
    bool no_osc = false;

    CLI::App* resist = app.add_subcommand("resist", "boundary resistance table of T^n E0");
    add_common(resist, o);
    resist->add_option("--level", level, "renormalization depth n");

    CLI::App* eigen = app.add_subcommand("eigen", "eigenvalue and eigenform estimation");
    add_common(eigen, o);
    eigen->add_option("--n-max", n_max, "iteration horizon (default: the vertex-guard horizon)");
    eigen->add_option("--probes", probe_count, "quasi-random probe count for the residual");

    CLI::App* sabot = app.add_subcommand("sabot", "existence / non-existence decision");
    add_common(sabot, o);

    CLI::App* harmonic = app.add_subcommand("harmonic", "p-harmonic extension to level m");
    add_common(harmonic, o);
    harmonic->add_option("--level", level, "target level m");
    harmonic->add_option("--values", values_text, "boundary values, comma list in boundary order");
    harmonic->add_flag("--no-osc", no_osc, "skip the per-cell oscillation block");

    try {
        std::vector<std::string> argv_rev(args.rbegin(), args.rend());
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        std::stringstream dummy_out;
        int code = app.exit(e, dummy_out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        CLI::App* active = app.get_subcommands().front();
        Problem pb = resolve_problem(active, o);
        RunManifest man = make_manifest(o.command_line, pb.input_name, pb.cfg);
        RenormContext ctx(pb.structure, pb.cfg);

        if (active == resist) {
            if (level < 0) throw DomainError("--level must be nonnegative");
            auto states = iterate(pb.e0, ctx, level);
            emit_resist(out, pb, o, states);
        } else if (active == eigen) {
            if (n_max < 0) n_max = ctx.horizon();
            EigenReport rep = eigen_solve(pb.e0, ctx, n_max, probe_count);
            nlohmann::json j;
            j["manifest"] = manifest_to_json(man);
            nlohmann::json body = eigen_report_to_json(rep);
            auto words = fixed_word_weight_check(pb.structure, rep.lambda);
            if (!words.empty()) {
                nlohmann::json fw = nlohmann::json::array();
                for (const auto& w : words)
                    fw.push_back({{"label", w.boundary_label},
                                  {"r_w_normalized", w.r_w},
                                  {"ok", w.ok}});
                body["fixed_word_check"] = fw;
            }
            j["report"] = body;
            if (o.format == "table") {
                out << "lambda = " << fmt(rep.lambda) << "  residual = " << fmt(rep.residual)
                    << "  condition_A = " << (rep.condition_A ? "true" : "false") << "\n";
                for (const auto& [n, d] : rep.delta_history)
                    out << "  n=" << n << "  delta=" << fmt(d) << "\n";
            } else {
                out << j.dump(2) << "\n";
            }
        } else if (active == sabot) {
            SabotReport rep = sabot_test(ctx, pb.e0.p());
            // default emission is the JSON report followed by the table;
            // --format narrows to one of them
            const bool explicit_format = active->count("--format") > 0;
            if (explicit_format && o.format == "table") {
                emit_sabot_table(out, rep);
            } else {
                nlohmann::json j;
                j["manifest"] = manifest_to_json(man);
                j["report"] = sabot_report_to_json(rep);
                out << j.dump(2) << "\n";
                if (!explicit_format) {
                    out << "\n";
                    emit_sabot_table(out, rep);
                }
            }
        } else if (active == harmonic) {
            if (level < 0) throw DomainError("--level must be nonnegative");
            const int n0 = pb.structure.boundary->size();
            std::vector<double> values;
            if (values_text.empty()) throw DomainError("--values is required");
            values = parse_number_list(values_text);
            if (static_cast<int>(values.size()) != n0)
                throw DomainError("--values needs one entry per boundary vertex");

            StandardForm ambient = ctx.refine_to(pb.e0, level);
            const LevelGraph& g = ctx.hierarchy().level(level);
            std::vector<int> all(n0);
            for (int i = 0; i < n0; ++i) all[i] = i;
            SolverConfig cfg = pb.cfg;
            cfg.strict_uniqueness = false;
            std::vector<double> init = ctx.cascadic_extend(pb.e0, level, all, values);
            MinimizeResult r = minimize(ambient, g.boundary_ids, values, cfg, &init);

            auto coords = level_coordinates(pb.structure, ctx.hierarchy(), level);
            const double osc_f = oscillation(values);
            double eta = 0.0;
            std::vector<double> cell_osc(g.cells.size(), 0.0);
            for (size_t w = 0; w < g.cells.size(); ++w) {
                double lo = kInf, hi = -kInf;
                for (int b = 0; b < n0; ++b) {
                    lo = std::min(lo, r.f[g.cells[w][b]]);
                    hi = std::max(hi, r.f[g.cells[w][b]]);
                }
                cell_osc[w] = hi - lo;
                eta = std::max(eta, osc_f > 0 ? (hi - lo) / osc_f : 0.0);
            }

            if (o.format == "json") {
                nlohmann::json j;
                j["manifest"] = manifest_to_json(man);
                nlohmann::json verts = nlohmann::json::array();
                for (int v = 0; v < g.vertices->size(); ++v) {
                    nlohmann::json row;
                    row["label"] = g.vertices->label(v);
                    row["value"] = r.f[v];
                    if (!coords.empty()) row["coords"] = coords[v];
                    verts.push_back(row);
                }
                j["vertices"] = verts;
                if (!no_osc) {
                    nlohmann::json cells = nlohmann::json::array();
                    for (size_t w = 0; w < g.cells.size(); ++w)
                        cells.push_back({{"word", w}, {"osc", cell_osc[w]}});
                    j["cells"] = cells;
                    j["eta"] = eta;
                }
                j["energy"] = r.energy;
                out << j.dump(2) << "\n";
            } else {
                out << "# manifest: " << manifest_to_json(man).dump() << "\n";
                out << "label,value";
                if (!coords.empty()) out << ",coords";
                out << "\n";
                for (int v = 0; v < g.vertices->size(); ++v) {
                    out << g.vertices->label(v) << "," << fmt(r.f[v]);
                    if (!coords.empty()) {
                        out << ",\"";
                        for (size_t d = 0; d < coords[v].size(); ++d)
                            out << (d ? " " : "") << fmt(coords[v][d]);
                        out << "\"";
                    }
                    out << "\n";
                }
                if (!no_osc) {
                    out << "word,osc\n";
                    for (size_t w = 0; w < g.cells.size(); ++w)
                        out << w << "," << fmt(cell_osc[w]) << "\n";
                    out << "eta," << fmt(eta) << "\n";
                }
            }
        }
        return 0;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const GuardError& e) {
        err << "guard exceeded: " << e.what() << "\n";
        return 4;
    } catch (const DegeneracyError& e) {
        err << "degeneracy: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace penergy

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "uhfz2/selftest.hpp"

using namespace uhfz2;
using io::json;

namespace {

struct Globals {
    std::string config, out;
    std::uint64_t seed = 42;
    std::int64_t budget = 0;
    double tol = -1.0;
    unsigned threads = 0;
    bool schema = false;
};

[[noreturn]] void bad(const std::string& what) { fail(ErrorKind::InvalidArgument, what); }

Config make_config(const Globals& g) {
    Config cfg = g.config.empty() ? Config{} : io::config_from_json(io::load(g.config));
    if (g.tol > 0.0) cfg.lattice_tol = g.tol;
    cfg.threads = g.threads > 0 ? g.threads : std::max(1u, std::thread::hardware_concurrency());
    return cfg;
}

// "2:1,3:1,5:inf" or a supernatural JSON object
SupernaturalNumber parse_sn(const std::string& text) {
    const json j = io::load(text);
    if (!j.is_string()) return io::sn_from_json(j);
    json e = json::object();
    std::stringstream ss(j.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) bad("supernatural entries look like p:exponent, got \"" + item + "\"");
        const std::string exp = item.substr(colon + 1);
        if (exp == "inf")
            e[item.substr(0, colon)] = "inf";
        else
            e[item.substr(0, colon)] = std::stoll(exp);
    }
    return io::sn_from_json({{"exponents", e}});
}

// "2=1,3=2"
std::map<std::uint64_t, std::int64_t> parse_f(const std::string& text) {
    std::map<std::uint64_t, std::int64_t> f;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) bad("f entries look like p=value, got \"" + item + "\"");
        f[std::stoull(item.substr(0, eq))] = std::stoll(item.substr(eq + 1));
    }
    return f;
}

template <class T>
std::vector<T> parse_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::stringstream is(item);
        T x{};
        if (!(is >> x)) bad("cannot read list entry \"" + item + "\"");
        out.push_back(x);
    }
    return out;
}

struct Loaded {
    ProductAction action;
    std::optional<SupernaturalNumber> sn;
};

Loaded load_action(const std::string& text, const Globals& g, const std::string& sn_text) {
    Loaded l;
    SupernaturalNumber sn;
    const json j = io::load(text);
    l.action = io::action_or_model_from_json(j, g.budget, &sn);
    if (j.is_object() && j.contains("sn")) l.sn = sn;
    if (!sn_text.empty()) l.sn = parse_sn(sn_text);
    return l;
}

const SupernaturalNumber& need_sn(const Loaded& l) {
    if (!l.sn) bad("no supernatural number: pass --sn or use a model file with \"sn\"");
    return *l.sn;
}

json matrix_or_defect(const CMatrix& m, bool with_matrices) {
    if (with_matrices) return io::matrix_to_json(m);
    return {{"dim", m.rows()}, {"unitarity_defect", unitarity_defect(m)}};
}

void emit(const json& j, const Globals& g) {
    const std::string text = j.dump(2) + "\n";
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(g.out);
    if (!f) bad("cannot write " + g.out);
    f << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Z^2-actions on UHF algebras at finite stage"};
    app.set_help_all_flag("--help-all");
    Globals g;
    app.add_option("--config", g.config, "JSON file of Config overrides");
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--budget", g.budget, "truncation budget for model inputs");
    app.add_option("--tol", g.tol, "lattice rounding tolerance");
    app.add_option("--out", g.out, "write the JSON result here instead of stdout");
    app.add_option("--threads", g.threads, "worker threads (default: all cores)");
    app.add_flag("--schema", g.schema, "print the JSON schemas and exit");
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string v, w, action, alpha, beta, u1, u2, cocycle, sn, f, F, path, protect, n_text, eps_text, only, timings,
        spec;
    double tower_eps = 1e-9, vanish_eps = 0.25, shrink_eps = 0.2, match_eps = 1e-6, C = 0.0;
    int M = 0, rounds = 3;
    bool matrices = false, dense = false, times = false;

    auto* bott_cmd = app.add_subcommand("bott", "Bott index of two almost commuting unitaries");
    bott_cmd->add_option("--v", v, "matrix")->required();
    bott_cmd->add_option("--w", w, "matrix")->required();

    auto* kappa_cmd = app.add_subcommand("kappa", "kappa of an almost cocycle");
    kappa_cmd->add_option("--action", action, "action or model")->required();
    kappa_cmd->add_option("--u1", u1, "element (default 1)");
    kappa_cmd->add_option("--u2", u2, "element (default 1)");
    kappa_cmd->add_option("--cocycle", cocycle, "{\"u1\", \"u2\"} instead of --u1/--u2");

    auto* inv_cmd = app.add_subcommand("invariant", "[alpha](p) for every p, or [beta, alpha](p) with --beta");
    inv_cmd->add_option("--action", action, "action or model")->required();
    inv_cmd->add_option("--beta", beta, "second action on the same truncation");
    inv_cmd->add_option("--sn", sn, "supernatural number, e.g. 2:1,3:1,5:inf");

    auto* model_cmd = app.add_subcommand("model", "the model action gamma^f");
    model_cmd->add_option("--spec", spec, "model file or JSON with \"sn\"");
    model_cmd->add_option("--sn", sn, "supernatural number, e.g. 2:1,3:1,5:inf");
    model_cmd->add_option("--f", f, "values of f, e.g. 2=1,3=2");

    auto* towers_cmd = app.add_subcommand("towers", "Rohlin grid tower and its relation defects");
    towers_cmd->add_option("--action", action, "action or model")->required();
    towers_cmd->add_option("--protect", protect, "factor indices to leave alone, e.g. 0,1");
    towers_cmd->add_option("--M", M, "minimal side length; 0 uses every free factor");
    towers_cmd->add_option("--F", F, "elements to check commutation with");
    towers_cmd->add_option("--eps", tower_eps, "verification tolerance")->default_val(1e-9);
    towers_cmd->add_flag("--dense", dense, "include dense projections");

    auto* vanish_cmd = app.add_subcommand("vanish", "v with u_i ~ v alpha_i(v*) and [v, F] ~ 0");
    vanish_cmd->add_option("--action", action, "action or model")->required();
    vanish_cmd->add_option("--cocycle", cocycle, "{\"u1\", \"u2\"}")->required();
    vanish_cmd->add_option("--F", F, "elements v must almost commute with");
    vanish_cmd->add_option("--eps", vanish_eps, "target")->default_val(0.25);
    vanish_cmd->add_option("--protect", protect, "factors F lives on (default: its support)");
    vanish_cmd->add_flag("--matrices", matrices, "include v");

    auto* shrink_cmd = app.add_subcommand("shrink", "shrink a loop through exponentials");
    shrink_cmd->add_option("--path", path, "{\"t\", \"u\"} loop at 1")->required();
    shrink_cmd->add_option("--C", C, "Lipschitz constant (default: 1.01 times the measured one)");
    shrink_cmd->add_option("--eps", shrink_eps, "approximation target")->default_val(0.2);
    shrink_cmd->add_flag("--matrices", matrices, "include h");

    auto* extend_cmd = app.add_subcommand("extend", "u_n of a cocycle along the staircase");
    extend_cmd->add_option("--action", action, "action or model")->required();
    extend_cmd->add_option("--cocycle", cocycle, "{\"u1\", \"u2\"}")->required();
    extend_cmd->add_option("--n", n_text, "n1,n2")->required();

    auto* match_cmd = app.add_subcommand("match", "alpha-cocycle matching beta on F");
    match_cmd->add_option("--alpha", alpha, "action or model")->required();
    match_cmd->add_option("--beta", beta, "action or model")->required();
    match_cmd->add_option("--sn", sn, "supernatural number");
    match_cmd->add_option("--F", F, "elements");
    match_cmd->add_option("--eps", match_eps, "target")->default_val(1e-6);
    match_cmd->add_flag("--matrices", matrices, "include u1 and u2");

    auto* ek_cmd = app.add_subcommand("ek", "alternate matching and vanishing");
    ek_cmd->add_option("--alpha", alpha, "action or model")->required();
    ek_cmd->add_option("--beta", beta, "action or model")->required();
    ek_cmd->add_option("--sn", sn, "supernatural number");
    ek_cmd->add_option("--rounds", rounds, "number of rounds")->default_val(3);
    ek_cmd->add_option("--F", F, "list of element lists, one per round")->required();
    ek_cmd->add_option("--eps", eps_text, "non-increasing targets, e.g. 0.25,0.2,0.15")->default_val("0.25");
    ek_cmd->add_flag("--times", times, "include wall times (not reproducible)");

    auto* self_cmd = app.add_subcommand("selftest", "run the acceptance corpus");
    self_cmd->add_option("--only", only, "case ids, e.g. 1,4");
    self_cmd->add_option("--timings", timings, "write wall times to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cout << json{{"error", e.what()}, {"kind", "Usage"}}.dump(2) << "\n";
        return 1;
    }

    try {
        if (g.schema) {
            emit(io::schemas(), g);
            return 0;
        }
        if (app.get_subcommands().empty()) bad("a subcommand is required; see --help");
        const Config cfg = make_config(g);

        if (*bott_cmd) {
            const Unitary a(io::matrix_from_json(io::load(v)), cfg.unitarity_tol);
            const Unitary b(io::matrix_from_json(io::load(w)), cfg.unitarity_tol);
            emit(io::bott_to_json(bott(a, b, cfg)), g);
        } else if (*kappa_cmd) {
            const Loaded l = load_action(action, g, "");
            const TruncatedUHF& t = l.action.trunc();
            const CMatrix one = CMatrix::Identity(t.dim(), t.dim());
            Cocycle c;
            if (!cocycle.empty()) {
                c = io::cocycle_from_json(io::load(cocycle), l.action);
            } else {
                c = make_cocycle(u1.empty() ? one : io::element_from_json(io::load(u1), t),
                                 u2.empty() ? one : io::element_from_json(io::load(u2), t), l.action);
            }
            json out = io::kappa_to_json(kappa_fast(c.u1, c.u2, l.action, cfg));
            out["admissible"] = out["integer"] == 0;
            emit(out, g);
        } else if (*inv_cmd) {
            const Loaded l = load_action(action, g, sn);
            const SupernaturalNumber& s = need_sn(l);
            const ProductAction b =
                beta.empty() ? ProductAction::identity(l.action.trunc()) : load_action(beta, g, "").action;
            json out = json::object(), details = json::object();
            for (std::uint64_t p : prime_set(s)) {
                const PairInvariant pi = pair_invariant(b, l.action, s, p, cfg);
                out[std::to_string(p)] = pi.residue.value;
                details[std::to_string(p)] = {{"modulus", pi.residue.modulus},
                                              {"winding", pi.winding.str()},
                                              {"commutation", pi.commutation},
                                              {"defect", pi.defect},
                                              {"factorized", pi.factorized}};
            }
            out["details"] = details;
            out["trunc"] = io::trunc_to_json(l.action.trunc());
            emit(out, g);
        } else if (*model_cmd) {
            json j = spec.empty() ? json::object() : io::load(spec);
            if (!f.empty()) {
                json fj = json::object();
                for (const auto& [p, x] : parse_f(f)) fj[std::to_string(p)] = x;
                j["f"] = fj;
            }
            if (!sn.empty()) j["sn"] = io::sn_to_json(parse_sn(sn));
            if (!j.contains("f") && !(j.contains("model") && j.at("model").contains("f"))) j["f"] = json::object();
            SupernaturalNumber s;
            const ProductAction a = io::action_or_model_from_json(j, g.budget, &s);
            const ModelSpec ms = io::model_spec_from_json(j.contains("model") ? j.at("model") : j);
            const ModelPartition part = model_partition(ms, a.trunc(), s);
            // loadable again as a model file
            emit({{"sn", io::sn_to_json(s)},
                  {"model", io::model_spec_to_json(ms)},
                  {"trunc", io::trunc_to_json(a.trunc())},
                  {"partition", {{"Lf", part.Lf}, {"L1", part.L1}, {"L2", part.L2}}},
                  {"action", io::action_to_json(a)},
                  {"invariant", io::residues_to_json(action_invariant(a, s, cfg))}},
                 g);
        } else if (*towers_cmd) {
            const Loaded l = load_action(action, g, "");
            const auto prot = parse_list<std::size_t>(protect);
            const RohlinTower tower = build_tower(l.action, prot, M);
            const auto elems = F.empty() ? std::vector<CMatrix>{} : io::elements_from_json(io::load(F), l.action.trunc());
            emit({{"tower", io::tower_to_json(tower, dense)},
                  {"report", io::tower_report_to_json(verify_tower(tower, l.action, elems, tower_eps))}},
                 g);
        } else if (*vanish_cmd) {
            const Loaded l = load_action(action, g, "");
            const Cocycle c = io::cocycle_from_json(io::load(cocycle), l.action);
            const auto elems = F.empty() ? std::vector<CMatrix>{} : io::elements_from_json(io::load(F), l.action.trunc());
            VanishOptions opts;
            opts.protected_factors = parse_list<std::size_t>(protect);
            VanishReport rep;
            const Unitary vv = vanish_cocycle(l.action, c, elems, vanish_eps, cfg, &rep, opts);
            emit({{"v", matrix_or_defect(vv.m(), matrices)}, {"report", io::vanish_report_to_json(rep)}}, g);
        } else if (*shrink_cmd) {
            const UnitaryPath u = io::path_from_json(io::load(path));
            const double c = C > 0.0 ? C : 1.01 * u.lip_estimate;
            ShrinkReport rep;
            const SelfAdjointPath h = lip_shrink_loop(u, c, shrink_eps, cfg, &rep);
            emit({{"h", io::sa_path_to_json(h, matrices)}, {"report", io::shrink_report_to_json(rep)}}, g);
        } else if (*extend_cmd) {
            const Loaded l = load_action(action, g, "");
            const Cocycle c = io::cocycle_from_json(io::load(cocycle), l.action);
            const auto n = parse_list<int>(n_text);
            if (n.size() != 2) bad("--n takes two integers");
            const Unitary u = extend_cocycle(c, l.action, n[0], n[1]);
            emit({{"n", n}, {"u", io::matrix_to_json(u.m())}, {"defect", c.defect}}, g);
        } else if (*match_cmd) {
            const Loaded a = load_action(alpha, g, sn);
            const Loaded b = load_action(beta, g, "");
            const auto elems = F.empty() ? std::vector<CMatrix>{} : io::elements_from_json(io::load(F), a.action.trunc());
            MatchReport rep;
            const Cocycle c = approximate_match(a.action, b.action, need_sn(a), elems, match_eps, cfg, &rep);
            emit({{"cocycle",
                   {{"u1", matrix_or_defect(c.u1, matrices)}, {"u2", matrix_or_defect(c.u2, matrices)}, {"defect", c.defect}}},
                  {"report", io::match_report_to_json(rep)}},
                 g);
        } else if (*ek_cmd) {
            const Loaded a = load_action(alpha, g, sn);
            const Loaded b = load_action(beta, g, "");
            const json fj = io::load(F);
            if (!fj.is_array()) bad("--F takes a list of element lists");
            std::vector<std::vector<CMatrix>> schedule;
            for (const auto& x : fj) schedule.push_back(io::elements_from_json(x, a.action.trunc()));
            const EkTranscript tr =
                ek_rounds(a.action, b.action, need_sn(a), rounds, schedule, parse_list<double>(eps_text), cfg);
            emit(io::transcript_to_json(tr, times), g);
        } else if (*self_cmd) {
            SelftestOptions opts;
            opts.seed = g.seed;
            opts.only = parse_list<int>(only);
            opts.cfg = cfg;
            const auto cases = run_selftest(opts);
            const json report = selftest_to_json(cases, g.seed);
            emit(report, g);
            if (!timings.empty()) {
                std::ofstream tf(timings);
                if (!tf) bad("cannot write " + timings);
                tf << selftest_to_json(cases, g.seed, true).dump(2) << "\n";
            }
            return report.at("pass").get<bool>() ? 0 : 1;
        }
        return 0;
    } catch (const Error& e) {
        std::cout << json{{"error", e.what()}, {"kind", to_string(e.kind())}}.dump(2) << "\n";
        return is_obstruction(e.kind()) ? 2 : 1;
    } catch (const json::exception& e) {
        std::cout << json{{"error", e.what()}, {"kind", "InvalidArgument"}}.dump(2) << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cout << json{{"error", e.what()}, {"kind", "InvalidArgument"}}.dump(2) << "\n";
        return 1;
    }
}

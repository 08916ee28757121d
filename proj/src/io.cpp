#include "uhfz2/io.hpp"

#include <fstream>
#include <sstream>

namespace uhfz2::io {

namespace {

[[noreturn]] void bad(const std::string& what) { fail(ErrorKind::InvalidArgument, what); }

const json& field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) bad(std::string("missing field \"") + key + "\"");
    return j.at(key);
}

std::vector<std::size_t> index_list(const json& j) {
    std::vector<std::size_t> out;
    for (const auto& x : j) out.push_back(x.get<std::size_t>());
    return out;
}

json local_gen_to_json(const LocalGen& g) {
    switch (g.kind) {
        case LocalGen::Kind::Id: return {{"kind", "id"}};
        case LocalGen::Kind::Clock: return {{"kind", "clock"}, {"power", g.power}};
        case LocalGen::Kind::Shift: return {{"kind", "shift"}, {"power", g.power}};
        case LocalGen::Kind::Dense: return {{"kind", "dense"}, {"matrix", matrix_to_json(g.matrix)}};
    }
    return {};
}

LocalGen local_gen_from_json(const json& j) {
    const std::string kind = field(j, "kind").get<std::string>();
    const int power = j.value("power", 1);
    if (kind == "id") return LocalGen::id();
    if (kind == "clock") return LocalGen::clock_power(power);
    if (kind == "shift") return LocalGen::shift_power(power);
    if (kind == "dense") return LocalGen::dense(matrix_from_json(field(j, "matrix")));
    bad("unknown generator kind \"" + kind + "\"");
}

json k0_to_json(const K0Value& v) { return v.str(); }

}  // namespace

json load(const std::string& text_or_path) {
    const auto first = text_or_path.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text_or_path[first] == '{' || text_or_path[first] == '[' ||
                                       text_or_path[first] == '"')) {
        try {
            return json::parse(text_or_path);
        } catch (const json::parse_error& e) {
            bad(std::string("invalid JSON: ") + e.what());
        }
    }
    std::ifstream in(text_or_path);
    if (!in) {
        // bare scalars and shorthand strings pass through
        if (text_or_path.find(':') != std::string::npos) return json(text_or_path);
        bad("cannot read \"" + text_or_path + "\"");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        bad("invalid JSON in " + text_or_path + ": " + e.what());
    }
}

json matrix_to_json(const CMatrix& m) {
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array(), c = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            r.push_back(m(i, k).real());
            c.push_back(m(i, k).imag());
        }
        re.push_back(std::move(r));
        im.push_back(std::move(c));
    }
    return {{"dim", m.rows()}, {"re", re}, {"im", im}};
}

CMatrix matrix_from_json(const json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        std::vector<std::string> parts;
        std::stringstream ss(s);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() < 2 || parts.size() > 3) bad("matrix shorthand must be kind:q[:power], got \"" + s + "\"");
        int q = 0, power = 1;
        try {
            q = std::stoi(parts[1]);
            if (parts.size() == 3) power = std::stoi(parts[2]);
        } catch (const std::exception&) {
            bad("matrix shorthand must be kind:q[:power], got \"" + s + "\"");
        }
        if (q < 1) bad("matrix size must be positive");
        LocalGen g;
        if (parts[0] == "clock")
            g = LocalGen::clock_power(power);
        else if (parts[0] == "shift")
            g = LocalGen::shift_power(power);
        else if (parts[0] == "id")
            g = LocalGen::id();
        else
            bad("unknown matrix shorthand \"" + parts[0] + "\"");
        return g.unitary(q);
    }
    if (j.is_object() && j.contains("file") && !j.contains("re")) return matrix_from_json(load(j.at("file").get<std::string>()));
    const auto d = field(j, "dim").get<Eigen::Index>();
    const json& re = field(j, "re");
    const json* im = j.contains("im") ? &j.at("im") : nullptr;
    if (d < 0 || static_cast<Eigen::Index>(re.size()) != d || (im && static_cast<Eigen::Index>(im->size()) != d))
        bad("matrix rows do not match dim");
    CMatrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (static_cast<Eigen::Index>(re[i].size()) != d || (im && static_cast<Eigen::Index>((*im)[i].size()) != d))
            bad("matrix row " + std::to_string(i) + " has the wrong length");
        for (Eigen::Index k = 0; k < d; ++k)
            m(i, k) = cplx(re[i][k].get<double>(), im ? (*im)[i][k].get<double>() : 0.0);
    }
    return m;
}

CMatrix element_from_json(const json& j, const TruncatedUHF& t) {
    if (j.is_object() && j.contains("factor")) {
        const auto k = j.at("factor").get<std::size_t>();
        if (k >= t.size()) bad("factor index " + std::to_string(k) + " out of range");
        const CMatrix local = matrix_from_json(field(j, "local"));
        if (local.rows() != t.factor(k)) bad("local matrix does not fit factor " + std::to_string(k));
        return embed_factor(local, t, k);
    }
    const CMatrix m = matrix_from_json(j);
    if (m.rows() != t.dim()) bad("element has dimension " + std::to_string(m.rows()) + ", expected " + std::to_string(t.dim()));
    return m;
}

std::vector<CMatrix> elements_from_json(const json& j, const TruncatedUHF& t) {
    std::vector<CMatrix> out;
    if (j.is_null()) return out;
    if (!j.is_array()) bad("expected a list of elements");
    for (const auto& x : j) out.push_back(element_from_json(x, t));
    return out;
}

json sn_to_json(const SupernaturalNumber& sn) {
    json e = json::object();
    for (const auto& [p, x] : sn.exponents) {
        if (x.infinite)
            e[std::to_string(p)] = "inf";
        else
            e[std::to_string(p)] = x.value;
    }
    return {{"exponents", e}};
}

SupernaturalNumber sn_from_json(const json& j) {
    SupernaturalNumber sn;
    for (const auto& [key, val] : field(j, "exponents").items()) {
        std::uint64_t p = 0;
        try {
            p = std::stoull(key);
        } catch (const std::exception&) {
            bad("prime key \"" + key + "\" is not a number");
        }
        if (!is_prime(p)) fail(ErrorKind::NotPrime, key + " is not prime");
        if (val.is_string()) {
            if (val.get<std::string>() != "inf") bad("exponent must be a number or \"inf\"");
            sn.exponents[p] = Exponent::inf();
        } else {
            const auto v = val.get<std::int64_t>();
            if (v < 0) bad("exponent must be non-negative");
            if (v > 0) sn.exponents[p] = Exponent::finite(static_cast<std::uint32_t>(v));
        }
    }
    return sn;
}

json trunc_to_json(const TruncatedUHF& t) { return {{"factors", t.factors()}}; }

TruncatedUHF trunc_from_json(const json& j) { return TruncatedUHF(field(j, "factors").get<std::vector<int>>()); }

json action_to_json(const ProductAction& a) {
    json out = {{"trunc", trunc_to_json(a.trunc())}};
    for (int i = 0; i < 2; ++i) {
        json g = json::array();
        for (const auto& x : a.gen(i)) g.push_back(local_gen_to_json(x));
        out[i == 0 ? "gen1" : "gen2"] = g;
        if (a.left(i)) out[i == 0 ? "left1" : "left2"] = matrix_to_json(*a.left(i));
    }
    return out;
}

ProductAction action_from_json(const json& j) {
    const TruncatedUHF t = trunc_from_json(field(j, "trunc"));
    std::vector<LocalGen> g[2];
    for (int i = 0; i < 2; ++i)
        for (const auto& x : field(j, i == 0 ? "gen1" : "gen2")) g[i].push_back(local_gen_from_json(x));
    ProductAction a(t, g[0], g[1]);
    if (j.contains("left1") || j.contains("left2")) {
        const CMatrix one = CMatrix::Identity(t.dim(), t.dim());
        const CMatrix l1 = j.contains("left1") ? matrix_from_json(j.at("left1")) : one;
        const CMatrix l2 = j.contains("left2") ? matrix_from_json(j.at("left2")) : one;
        if (l1.rows() != t.dim() || l2.rows() != t.dim()) bad("left factors must match the truncation");
        static_cast<void>(Unitary(l1));
        static_cast<void>(Unitary(l2));
        a = a.with_left(l1, l2);
    }
    return a;
}

json model_spec_to_json(const ModelSpec& spec) {
    json f = json::object();
    for (const auto& [p, v] : spec.f) f[std::to_string(p)] = v;
    json out = {{"f", f}};
    if (!spec.L1.empty()) out["L1"] = spec.L1;
    if (!spec.L2.empty()) out["L2"] = spec.L2;
    return out;
}

ModelSpec model_spec_from_json(const json& j) {
    ModelSpec spec;
    for (const auto& [key, val] : field(j, "f").items()) {
        try {
            spec.f[std::stoull(key)] = val.get<std::int64_t>();
        } catch (const std::invalid_argument&) {
            bad("prime key \"" + key + "\" is not a number");
        }
    }
    if (j.contains("L1")) spec.L1 = index_list(j.at("L1"));
    if (j.contains("L2")) spec.L2 = index_list(j.at("L2"));
    return spec;
}

ProductAction action_or_model_from_json(const json& j, std::int64_t budget, SupernaturalNumber* sn) {
    if (j.is_object() && j.contains("sn") && sn) *sn = sn_from_json(j.at("sn"));
    if (j.is_object() && j.contains("gen1")) return action_from_json(j);
    const json& spec_json = j.is_object() && j.contains("model") ? j.at("model") : j;
    const ModelSpec spec = model_spec_from_json(spec_json);
    if (!j.contains("sn")) bad("a model needs \"sn\" next to its spec");
    const SupernaturalNumber s = sn_from_json(j.at("sn"));
    TruncatedUHF t;
    if (j.contains("trunc"))
        t = trunc_from_json(j.at("trunc"));
    else if (j.contains("budget"))
        t = truncate(s, j.at("budget").get<std::int64_t>());
    else if (budget > 0)
        t = truncate(s, budget);
    else
        bad("a model needs \"trunc\", \"budget\" or --budget");
    return make_model_action(spec, t, s);
}

json cocycle_to_json(const Cocycle& c) {
    return {{"u1", matrix_to_json(c.u1)}, {"u2", matrix_to_json(c.u2)}, {"defect", c.defect}};
}

Cocycle cocycle_from_json(const json& j, const ProductAction& action) {
    return make_cocycle(element_from_json(field(j, "u1"), action.trunc()), element_from_json(field(j, "u2"), action.trunc()),
                        action);
}

json kappa_to_json(const KappaResult& k) {
    return {{"integer", k.integer_form},
            {"tau_value", k.value.str()},
            {"residual", k.residual},
            {"defect", k.defect},
            {"tau_raw", k.tau_raw}};
}

json bott_to_json(const BottResult& b) {
    return {{"bott", b.value}, {"commutator_norm", b.commutator_norm}, {"residual", b.residual}};
}

json residues_to_json(const std::map<std::uint64_t, K0Residue>& r) {
    json out = json::object();
    for (const auto& [p, x] : r) out[std::to_string(p)] = x.value;
    return out;
}

json path_to_json(const UnitaryPath& p, bool with_matrices) {
    json out = {{"samples", p.size()}, {"closed", p.closed}, {"lip_estimate", p.lip_estimate}, {"t", p.t}};
    if (with_matrices) {
        json u = json::array();
        for (const auto& m : p.u) u.push_back(matrix_to_json(m));
        out["u"] = u;
    }
    return out;
}

UnitaryPath path_from_json(const json& j) {
    const auto t = field(j, "t").get<std::vector<double>>();
    const json& u = field(j, "u");
    if (!u.is_array() || u.size() != t.size()) bad("a path needs one matrix per time");
    std::vector<CMatrix> m;
    for (const auto& x : u) m.push_back(matrix_from_json(x));
    for (const auto& x : m)
        if (x.rows() != m.front().rows()) bad("path matrices differ in size");
    return make_path(t, std::move(m));
}

json sa_path_to_json(const SelfAdjointPath& p, bool with_matrices) {
    json out = {{"samples", p.t.size()}, {"lip_estimate", p.lip_estimate}, {"t", p.t}};
    if (with_matrices) {
        json h = json::array();
        for (const auto& m : p.h) h.push_back(matrix_to_json(m));
        out["h"] = h;
    }
    return out;
}

json shrink_report_to_json(const ShrinkReport& r) {
    return {{"L", r.L},
            {"C", r.C},
            {"C_prime", r.C_prime},
            {"delta", r.delta},
            {"eps_achieved", r.max_error},
            {"lip_h", r.lip_h},
            {"max_commutator", r.max_commutator}};
}

json tower_to_json(const RohlinTower& t, bool dense_projections) {
    json axes = json::array();
    for (const auto& a : t.axes)
        axes.push_back({{"factors", a.factors}, {"orders", a.orders}, {"height", a.height}});
    json out = {{"shape", t.shape},
                {"axes", axes},
                {"factors_used", t.factors_used()},
                {"protected_factors", t.protected_factors},
                {"trunc", trunc_to_json(t.trunc)}};
    if (dense_projections) {
        json e = json::array();
        for (int g1 = 0; g1 < t.shape[0]; ++g1)
            for (int g2 = 0; g2 < t.shape[1]; ++g2)
                e.push_back({{"g", {g1, g2}}, {"projection", matrix_to_json(t.projection(g1, g2))}});
        out["projections"] = e;
    }
    return out;
}

json tower_report_to_json(const TowerReport& r) {
    return {{"partition_defect", r.partition_defect},
            {"orthogonality_defect", r.orthogonality_defect},
            {"shift_defect", r.shift_defect},
            {"commutator_defect", r.commutator_defect},
            {"max_defect", r.max_defect},
            {"pass", r.pass}};
}

json vanish_report_to_json(const VanishReport& r) {
    const VanishBudget& b = r.budget;
    return {{"eps_target", r.eps_target},
            {"eps_achieved", r.eps_achieved},
            {"commutator_max", r.commutator_max},
            {"shape", r.shape},
            {"working_factors", r.working},
            {"tower_factors", r.tower_factors},
            {"budget",
             {{"boundary", b.boundary},
              {"grid_step", b.grid_step},
              {"tower", b.tower},
              {"cocycle", b.cocycle},
              {"total", b.total},
              {"lip_disk", b.lip_disk},
              {"C_prime", b.C_prime},
              {"guard", b.guard}}}};
}

json comparison_to_json(const InvariantComparison& c) {
    json primes = json::array();
    for (const auto& p : c.primes)
        primes.push_back({{"prime", p.prime},
                          {"modulus", p.alpha.modulus},
                          {"alpha", p.alpha.value},
                          {"beta", p.beta.value},
                          {"equal", p.equal}});
    return {{"primes", primes}, {"mismatches", c.mismatches}, {"all_equal", c.all_equal}};
}

json match_report_to_json(const MatchReport& r) {
    json out = {{"defect", r.defect},
                {"cocycle_defect", r.cocycle_defect},
                {"kappa_raw", k0_to_json(r.kappa_raw)},
                {"kappa_final", k0_to_json(r.kappa_final)},
                {"kappa_corrections", r.kappa_corrections}};
    if (r.correction)
        out["correction"] = {{"m", r.correction->m},
                             {"l", r.correction->l},
                             {"generator", r.correction->generator + 1},
                             {"height", r.correction->height},
                             {"factors", r.correction->factors}};
    return out;
}

json transcript_to_json(const EkTranscript& t, bool with_times) {
    json rounds = json::array();
    for (const auto& r : t.rounds) {
        json x = {{"round", r.round},
                  {"matcher_defect", r.matcher_defect},
                  {"cocycle_size", r.cocycle_size},
                  {"vanish_eps", r.vanish_eps},
                  {"commutator", r.commutator},
                  {"defect", r.defect},
                  {"kappa_corrections", r.kappa_corrections}};
        if (with_times) x["wall_time"] = r.wall_time;
        rounds.push_back(std::move(x));
    }
    json out = {{"invariants", comparison_to_json(t.invariants)},
                {"initial_defect", t.initial_defect},
                {"rounds", rounds},
                {"monotone", t.monotone}};
    out["stalled_round"] = t.stalled_round ? json(*t.stalled_round) : json(nullptr);
    return out;
}

#define UHFZ2_CONFIG_FIELDS(X)                                                                             \
    X(unitarity_tol) X(branch_guard) X(cluster_tol) X(lattice_tol) X(singular_tol) X(delta0)               \
        X(homotopy_delta_ratio) X(matching_tol) X(boundary_samples) X(path_samples) X(disk_grid)           \
            X(invariant_orientation) X(kappa_loop_orientation) X(threads)

json config_to_json(const Config& c) {
    json out = json::object();
#define X(name) out[#name] = c.name;
    UHFZ2_CONFIG_FIELDS(X)
#undef X
    return out;
}

Config config_from_json(const json& j) {
    if (!j.is_object()) bad("config must be an object");
    Config c;
    for (const auto& [key, val] : j.items()) {
        bool known = false;
#define X(name)                                            \
    if (key == #name) {                                    \
        c.name = val.get<decltype(c.name)>();              \
        known = true;                                      \
    }
        UHFZ2_CONFIG_FIELDS(X)
#undef X
        if (!known) bad("unknown config key \"" + key + "\"");
    }
    return c;
}

json schemas() {
    json out = json::parse(R"JSON({
  "matrix": {"oneOf": [
    {"type": "object", "required": ["dim", "re"],
     "properties": {"dim": {"type": "integer"},
                    "re": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                    "im": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}}},
    {"type": "object", "required": ["file"], "properties": {"file": {"type": "string"}}},
    {"type": "string", "pattern": "^(clock|shift|id):[0-9]+(:-?[0-9]+)?$"}]},
  "element": {"oneOf": [
    {"$ref": "#/matrix"},
    {"type": "object", "required": ["factor", "local"],
     "properties": {"factor": {"type": "integer"}, "local": {"$ref": "#/matrix"}}}]},
  "generator": {"type": "object", "required": ["kind"],
    "properties": {"kind": {"enum": ["id", "clock", "shift", "dense"]}, "power": {"type": "integer"},
                   "matrix": {"$ref": "#/matrix"}}},
  "truncation": {"type": "object", "required": ["factors"],
    "properties": {"factors": {"type": "array", "items": {"type": "integer"}}}},
  "supernatural": {"type": "object", "required": ["exponents"],
    "properties": {"exponents": {"type": "object",
      "additionalProperties": {"oneOf": [{"type": "integer"}, {"const": "inf"}]}}}},
  "action": {"type": "object", "required": ["trunc", "gen1", "gen2"],
    "properties": {"trunc": {"$ref": "#/truncation"},
                   "gen1": {"type": "array", "items": {"$ref": "#/generator"}},
                   "gen2": {"type": "array", "items": {"$ref": "#/generator"}},
                   "left1": {"$ref": "#/matrix"}, "left2": {"$ref": "#/matrix"}}},
  "model_spec": {"type": "object", "required": ["f"],
    "properties": {"f": {"type": "object", "additionalProperties": {"type": "integer"}},
                   "L1": {"type": "array", "items": {"type": "integer"}},
                   "L2": {"type": "array", "items": {"type": "integer"}}}},
  "model_file": {"type": "object", "required": ["model", "sn"],
    "properties": {"model": {"$ref": "#/model_spec"}, "sn": {"$ref": "#/supernatural"},
                   "trunc": {"$ref": "#/truncation"}, "budget": {"type": "integer"}}},
  "cocycle": {"type": "object", "required": ["u1", "u2"],
    "properties": {"u1": {"$ref": "#/matrix"}, "u2": {"$ref": "#/matrix"}, "defect": {"type": "number"}}},
  "kappa": {"type": "object",
    "properties": {"integer": {"type": "integer"}, "tau_value": {"type": "string"},
                   "residual": {"type": "number"}, "defect": {"type": "number"}, "tau_raw": {"type": "number"}}},
  "report": {"type": "object",
    "properties": {"kappa": {"$ref": "#/kappa"}, "bott": {"type": "integer"},
                   "invariant": {"type": "object", "additionalProperties": {"type": "integer"}},
                   "defect": {"type": "number"}}},
  "path": {"type": "object", "required": ["t", "lip_estimate"],
    "properties": {"t": {"type": "array", "items": {"type": "number"}},
                   "u": {"type": "array", "items": {"$ref": "#/matrix"}},
                   "h": {"type": "array", "items": {"$ref": "#/matrix"}},
                   "lip_estimate": {"type": "number"}, "closed": {"type": "boolean"}}},
  "path_input": {"type": "object", "required": ["t", "u"],
    "properties": {"t": {"type": "array", "items": {"type": "number"}},
                   "u": {"type": "array", "items": {"$ref": "#/matrix"}}}},
  "shrink": {"type": "object", "required": ["L", "C", "C_prime", "eps_achieved", "lip_h"],
    "properties": {"L": {"type": "integer"}, "C": {"type": "number"}, "C_prime": {"type": "number"},
                   "delta": {"type": "number"}, "eps_achieved": {"type": "number"},
                   "lip_h": {"type": "number"}, "max_commutator": {"type": "number"}}},
  "tower": {"type": "object", "required": ["shape", "axes", "factors_used"],
    "properties": {"shape": {"type": "array", "items": {"type": "integer"}},
                   "axes": {"type": "array", "items": {"type": "object",
                     "properties": {"factors": {"type": "array", "items": {"type": "integer"}},
                                    "orders": {"type": "array", "items": {"type": "integer"}},
                                    "height": {"type": "integer"}}}},
                   "factors_used": {"type": "array", "items": {"type": "integer"}},
                   "protected_factors": {"type": "array", "items": {"type": "integer"}},
                   "projections": {"type": "array", "items": {"type": "object",
                     "properties": {"g": {"type": "array", "items": {"type": "integer"}},
                                    "projection": {"$ref": "#/matrix"}}}}}},
  "vanish_report": {"type": "object", "required": ["eps_target", "eps_achieved", "commutator_max", "budget"],
    "properties": {"eps_target": {"type": "number"},
                   "eps_achieved": {"type": "array", "items": {"type": "number"}},
                   "commutator_max": {"type": "number"},
                   "shape": {"type": "array", "items": {"type": "integer"}},
                   "budget": {"type": "object", "additionalProperties": {"type": "number"}}}},
  "transcript": {"type": "object", "required": ["rounds"],
    "properties": {"initial_defect": {"type": "number"}, "monotone": {"type": "boolean"},
                   "rounds": {"type": "array", "items": {"type": "object",
                     "required": ["round", "matcher_defect", "vanish_eps", "kappa_corrections"],
                     "properties": {"round": {"type": "integer"}, "matcher_defect": {"type": "number"},
                                    "cocycle_size": {"type": "number"}, "vanish_eps": {"type": "number"},
                                    "commutator": {"type": "number"}, "defect": {"type": "number"},
                                    "kappa_corrections": {"type": "integer"}, "wall_time": {"type": "number"}}}}}},
  "error": {"type": "object", "required": ["error"],
    "properties": {"error": {"type": "string"}, "kind": {"type": "string"}}}
})JSON");
    json props = json::object();
    const json defaults = config_to_json(Config{});
    for (const auto& [k, v] : defaults.items())
        props[k] = json{{"type", v.is_number_integer() ? "integer" : "number"}};
    out["config"] = json{{"type", "object"}, {"additionalProperties", false}, {"properties", props}};
    return out;
}

}  // namespace uhfz2::io

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "uhfz2/classify.hpp"

namespace uhfz2::io {

using json = nlohmann::json;

/// Inline JSON text, or the path of a file holding it.
json load(const std::string& text_or_path);

/// {"dim": d, "re": [[...]], "im": [[...]]}. Reading also accepts
/// {"file": path}, and the strings "clock:q", "shift:q", "id:q" with an
/// optional ":power".
json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const json& j);

/// {"factor": k, "local": matrix} places a local matrix on factor k of t;
/// anything else is read as a full matrix.
CMatrix element_from_json(const json& j, const TruncatedUHF& t);
std::vector<CMatrix> elements_from_json(const json& j, const TruncatedUHF& t);

/// {"exponents": {"2": 1, "5": "inf"}}
json sn_to_json(const SupernaturalNumber& sn);
SupernaturalNumber sn_from_json(const json& j);

/// {"factors": [2, 3, 5]}
json trunc_to_json(const TruncatedUHF& t);
TruncatedUHF trunc_from_json(const json& j);

/// {"trunc": ..., "gen1": [...], "gen2": [...]} with optional dense left
/// factors "left1", "left2" for perturbed actions.
json action_to_json(const ProductAction& a);
ProductAction action_from_json(const json& j);

/// {"f": {"2": 1}, "L1": [...], "L2": [...]}
json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const json& j);

/// An action spec, or a ModelSpec together with "sn" and either "trunc" or
/// a budget. `sn` receives the supernatural number when one is present.
ProductAction action_or_model_from_json(const json& j, std::int64_t budget, SupernaturalNumber* sn = nullptr);

json cocycle_to_json(const Cocycle& c);
/// {"u1": element, "u2": element}; the defect is recomputed.
Cocycle cocycle_from_json(const json& j, const ProductAction& action);

json kappa_to_json(const KappaResult& k);
json bott_to_json(const BottResult& b);
json residues_to_json(const std::map<std::uint64_t, K0Residue>& r);

json path_to_json(const UnitaryPath& p, bool with_matrices);
/// {"t": [...], "u": [matrix, ...]}
UnitaryPath path_from_json(const json& j);
json sa_path_to_json(const SelfAdjointPath& p, bool with_matrices);
json shrink_report_to_json(const ShrinkReport& r);

json tower_to_json(const RohlinTower& t, bool dense_projections);
json tower_report_to_json(const TowerReport& r);
json vanish_report_to_json(const VanishReport& r);

json comparison_to_json(const InvariantComparison& c);
json match_report_to_json(const MatchReport& r);
/// wall_time is left out when `with_times` is false.
json transcript_to_json(const EkTranscript& t, bool with_times);

json config_to_json(const Config& c);
/// Missing keys keep their defaults; unknown keys are an error.
Config config_from_json(const json& j);

/// Every format above as a JSON Schema, keyed by name.
json schemas();

}  // namespace uhfz2::io

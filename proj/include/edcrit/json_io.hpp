#pragma once

#include <string>

#include <json.hpp>

#include "edcrit/approx.hpp"
#include "edcrit/experiments.hpp"
#include "edcrit/finite_field.hpp"
#include "edcrit/kruskal.hpp"
#include "edcrit/sym_decomp.hpp"
#include "edcrit/variety.hpp"

namespace edcrit {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "edcrit/1";

/// Non-finite numbers become null.
Json number(double x);

Json to_json(const Eigen::VectorXd& v);
Json to_json(const DenseTensor& t);
/// {m, d, coeffs: {"1,2,2": value, ...}} with 1-based sorted indices.
Json to_json(const SymTensor& s);
Json to_json(const RankOneTerm& t);
Json to_json(const CriticalReport& r);
Json to_json(const KruskalCertificate& c);
Json to_json(const SymCombination& c);
Json to_json(const RationalSymTensor& s);
Json to_json(const PowerBasis& b);
Json to_json(const GFTensor& t);
Json to_json(const SrankResult& r);
Json to_json(const RankResult& r);
Json to_json(const Prop61Result& r);
Json to_json(const CPModel& m);
Json to_json(const SymmetryVerdict& v);
Json to_json(const ExperimentSummary& s);

/// {"shape": [...], "data": [...]} (row-major).
DenseTensor dense_from_json(const Json& j);
GFTensor gf_from_json(const Json& j);
SymTensor sym_from_json(const Json& j);
RationalVector rational_vector_from_json(const Json& j);

/// One row per trial: seed,objective,symmetric,gap,escape[,match_angle].
std::string to_csv(const ExperimentSummary& s);

}  // namespace edcrit

#include "edcrit/json_io.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace edcrit {

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

Json to_json(const DenseTensor& t) {
  Json data = Json::array();
  for (double x : t.data()) data.push_back(number(x));
  return {{"shape", t.shape()}, {"data", std::move(data)}};
}

Json to_json(const SymTensor& s) {
  Json coeffs = Json::object();
  const auto idx = sorted_indices(s.m(), s.d());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::string key;
    for (std::size_t l = 0; l < idx[r].size(); ++l) key += (l ? "," : "") + std::to_string(idx[r][l] + 1);
    coeffs[key] = number(s.coeffs()[r]);
  }
  return {{"m", s.m()}, {"d", s.d()}, {"coeffs", std::move(coeffs)}};
}

SymTensor sym_from_json(const Json& j) {
  SymTensor s(j.at("m").get<std::size_t>(), j.at("d").get<std::size_t>());
  for (auto it = j.at("coeffs").begin(); it != j.at("coeffs").end(); ++it) {
    MultiIndex idx;
    std::istringstream is(it.key());
    std::string part;
    while (std::getline(is, part, ',')) {
      const long v = std::stol(part);
      if (v < 1) throw std::invalid_argument("SymTensor JSON: indices are 1-based");
      idx.push_back(static_cast<std::size_t>(v - 1));
    }
    s.at(idx) = it.value().get<double>();
  }
  return s;
}

Json to_json(const RankOneTerm& t) {
  Json f = Json::array();
  for (const auto& u : t.factors()) f.push_back(to_json(u));
  return {{"weight", number(t.weight())}, {"factors", std::move(f)}};
}

Json to_json(const CriticalReport& r) {
  Json pts = Json::array();
  for (const auto& p : r.points) {
    Json j{{"y", to_json(p.y)},
           {"distance", number(p.distance)},
           {"stratum", p.stratum},
           {"stratum_label", p.stratum < r.strata.size() ? r.strata[p.stratum] : std::string()},
           {"residual", number(p.residual)}};
    pts.push_back(std::move(j));
  }
  return {{"variety", r.variety},
          {"query", to_json(r.query)},
          {"strata", r.strata},
          {"points", std::move(pts)},
          {"point_count", r.points.size()},
          {"delta_estimate", r.delta_estimate},
          {"distance", number(r.points.empty() ? NAN : r.distance())},
          {"uniqueness_gap", number(r.uniqueness_gap)},
          {"starts", r.starts},
          {"seed", r.seed},
          {"notes", r.notes}};
}

Json to_json(const KruskalCertificate& c) {
  Json j{{"kappas", c.kappas},
         {"r", c.r},
         {"kappa_sum", c.kappas[0] + c.kappas[1] + c.kappas[2]},
         {"required", 2 * c.r + 2},
         {"condition_met", c.condition_met},
         {"rank_certified", c.rank_certified ? Json(*c.rank_certified) : Json(nullptr)},
         {"uniqueness_certified", c.uniqueness_certified},
         {"verdict", c.verdict}};
  j["bound"] = c.bound ? Json(to_string(*c.bound)) : Json(nullptr);
  j["generic"] = c.generic ? Json(*c.generic) : Json(nullptr);
  return j;
}

namespace {
Json rationals(const std::vector<Rational>& v) {
  Json a = Json::array();
  for (const auto& q : v) a.push_back(to_string(q));
  return a;
}
}  // namespace

Json to_json(const SymCombination& c) {
  Json terms = Json::array();
  for (const auto& [coeff, v] : c.terms) terms.push_back({{"coefficient", to_string(coeff)}, {"vector", rationals(v)}});
  return {{"d", c.d}, {"terms", std::move(terms)}};
}

Json to_json(const RationalSymTensor& s) {
  Json idx = Json::array();
  for (const auto& i : sorted_indices(s.m(), s.d())) idx.push_back(i);
  return {{"m", s.m()}, {"d", s.d()}, {"indices", std::move(idx)}, {"coeffs", rationals(s.coeffs())}};
}

Json to_json(const PowerBasis& b) {
  Json vecs = Json::array();
  for (const auto& v : b.vectors) vecs.push_back(rationals(v));
  return {{"size", b.vectors.size()}, {"vectors", std::move(vecs)}, {"determinant", to_string(b.determinant)}};
}

Json to_json(const GFTensor& t) { return {{"p", t.p}, {"shape", t.shape}, {"entries", t.entries}}; }

Json to_json(const SrankResult& r) {
  Json w = Json::array();
  for (const auto& t : r.witness) w.push_back({{"weight", t.weight}, {"u", t.u}});
  return {{"srank", r.srank ? Json(*r.srank) : Json(nullptr)}, {"witness", std::move(w)}};
}

Json to_json(const RankResult& r) {
  Json w = Json::array();
  for (const auto& f : r.witness) w.push_back(f);
  return {{"rank", r.rank ? Json(*r.rank) : Json(nullptr)}, {"witness", std::move(w)}};
}

Json to_json(const Prop61Result& r) {
  return {{"inequality_holds", r.inequality_holds},
          {"sym_dim", r.sym_dim},
          {"span_dim", r.span_dim},
          {"witness", r.witness ? to_json(*r.witness) : Json(nullptr)},
          {"witness_coords", r.witness ? Json(r.witness_coords) : Json(nullptr)}};
}

Json to_json(const CPModel& m) {
  Json terms = Json::array();
  for (const auto& t : m.terms) terms.push_back(to_json(t));
  Json hist = Json::array();
  for (double h : m.history) hist.push_back(number(h));
  return {{"terms", std::move(terms)},
          {"objective", number(m.objective)},
          {"iterations", m.iterations},
          {"converged", m.converged},
          {"stationarity", number(m.stationarity)},
          {"uniqueness_gap", number(m.uniqueness_gap)},
          {"border_escape", m.border_escape},
          {"start_index", m.start_index},
          {"distinct_candidates", m.distinct_candidates},
          {"history", std::move(hist)}};
}

Json to_json(const SymmetryVerdict& v) {
  return {{"is_symmetric", v.is_symmetric}, {"max_factor_angle", number(v.max_factor_angle)}, {"orbit_collapsed", v.orbit_collapsed}};
}

Json to_json(const ExperimentSummary& s) {
  return {{"experiment", s.name},
          {"m", s.m},
          {"d", s.d},
          {"k", s.k},
          {"noise", number(s.noise)},
          {"trials", s.trials},
          {"starts", s.starts},
          {"seed", s.seed},
          {"fraction_symmetric", number(s.fraction_symmetric)},
          {"fraction_unique", number(s.fraction_unique)},
          {"fraction_matched", number(s.fraction_matched)},
          {"min_gap", number(s.min_gap)},
          {"max_objective", number(s.max_objective)},
          {"escapes", s.escapes}};
}

DenseTensor dense_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data"))
    throw std::invalid_argument("tensor JSON must be an object with \"shape\" and \"data\"");
  return DenseTensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

GFTensor gf_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("p") || !j.contains("shape") || !j.contains("entries"))
    throw std::invalid_argument("GF tensor JSON must have \"p\", \"shape\" and \"entries\"");
  return GFTensor(j.at("p").get<std::uint32_t>(), j.at("shape").get<Shape>(), j.at("entries").get<std::vector<std::int64_t>>());
}

RationalVector rational_vector_from_json(const Json& j) {
  RationalVector v;
  for (const auto& x : j) v.push_back(parse_rational(x.is_string() ? x.get<std::string>() : x.dump()));
  return v;
}

std::string to_csv(const ExperimentSummary& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  const bool match = s.name == "thm72";
  os << "seed,objective,symmetric,gap,escape" << (match ? ",match_angle" : "") << "\n";
  auto num = [&](double x) {
    if (std::isfinite(x)) os << x;
    else os << (std::isnan(x) ? "nan" : x > 0 ? "inf" : "-inf");
  };
  for (const auto& r : s.rows) {
    os << r.seed << ",";
    num(r.objective);
    os << "," << (r.symmetric ? 1 : 0) << ",";
    num(r.gap);
    os << "," << (r.escape ? 1 : 0);
    if (match) {
      os << ",";
      num(r.match_angle);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace edcrit

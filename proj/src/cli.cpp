#include "edcrit/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "edcrit/json_io.hpp"
#include "edcrit/parallel.hpp"

namespace edcrit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Options {
  // shared
  std::uint64_t seed = 0;
  std::size_t starts = 50;
  std::size_t trials = 100;
  std::string out;
  int threads = 0;
  // varieties
  std::string variety;
  std::string basis;
  std::string coeffs;
  std::size_t p = 0, q = 0, k = 1, m = 2, d = 3;
  std::string shape;
  std::string query;
  double dedup_tol = 1e-6;
  double residual_tol = 1e-8;
  // approx
  std::string tensor;
  bool symmetric = false;
  // kruskal
  std::size_t s = 2;
  std::string terms;
  bool general = false;
  // decomp
  std::string u, v, nodes;
  // gf
  std::uint32_t prime = 2;
  std::size_t max_terms = 4;
  // experiments
  double noise = 1e-4;
  bool rank_one_inputs = false;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError("invalid number '" + s + "'");
  return x;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_double(part));
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

Shape parse_shape(const std::string& s) {
  Shape out;
  for (double x : parse_list(s)) {
    if (x < 1 || x != std::floor(x)) throw ConfigError("shape entries must be positive integers");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

/// diag:a,b,... is the tensor of the given shape with a_i at (i,...,i); file:path reads JSON.
DenseTensor parse_tensor(const std::string& literal, const Shape& shape) {
  if (literal.rfind("diag:", 0) == 0) {
    if (shape.empty()) throw ConfigError("diag: literal needs a shape");
    const auto vals = parse_list(literal.substr(5));
    const std::size_t mmin = *std::min_element(shape.begin(), shape.end());
    if (vals.size() > mmin) throw ConfigError("diag: literal has more entries than the smallest mode");
    DenseTensor t(shape);
    for (std::size_t i = 0; i < vals.size(); ++i) t(std::vector<std::size_t>(shape.size(), i)) = vals[i];
    return t;
  }
  if (literal.rfind("file:", 0) == 0) {
    DenseTensor t = dense_from_json(read_json_file(literal.substr(5)));
    if (!shape.empty() && t.shape() != shape) {
      if (t.size() != shape_size(shape))
        throw ConfigError("tensor in file has shape " + shape_string(t.shape()) + ", expected " + shape_string(shape));
      t = DenseTensor(shape, t.data());
    }
    return t;
  }
  throw ConfigError("tensor literal must start with diag: or file:");
}

RationalVector parse_rational_list(const std::string& s) {
  RationalVector v;
  for (const auto& part : split(s, ',')) v.push_back(parse_rational(part));
  if (v.empty()) throw ConfigError("empty vector");
  return v;
}

VarietySpec build_variety(const Options& o, Shape& ambient) {
  if (o.variety == "subspace") {
    if (o.basis.empty()) throw ConfigError("subspace needs --basis");
    DenseTensor b = parse_tensor(o.basis, o.shape.empty() ? Shape{} : parse_shape(o.shape));
    if (b.order() != 2) throw ConfigError("subspace basis must be an n x r matrix");
    ambient = {b.shape()[0]};
    MatrixXd B(static_cast<Index>(b.shape()[0]), static_cast<Index>(b.shape()[1]));
    for (Index i = 0; i < B.rows(); ++i)
      for (Index j = 0; j < B.cols(); ++j) B(i, j) = b({static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
    return VarietySpec::subspace(B);
  }
  if (o.variety == "diag-quadric") {
    const auto a = parse_list(o.coeffs);
    ambient = {a.size()};
    return VarietySpec::diag_quadric(Eigen::Map<const VectorXd>(a.data(), static_cast<Index>(a.size())));
  }
  if (o.variety == "matrix-rank") {
    ambient = {o.p, o.q};
    return VarietySpec::matrix_rank(o.p, o.q, o.k);
  }
  if (o.variety == "tensor-rank1") {
    ambient = parse_shape(o.shape);
    return VarietySpec::tensor_rank_one(ambient);
  }
  if (o.variety == "tensor-rank") {
    ambient = parse_shape(o.shape);
    return VarietySpec::tensor_rank(ambient, o.k);
  }
  throw ConfigError("unknown variety '" + o.variety + "'");
}

std::vector<RankOneTerm> read_terms(const std::string& literal, std::size_t d) {
  if (literal.rfind("file:", 0) != 0) throw ConfigError("--terms must be file:path.json");
  const Json j = read_json_file(literal.substr(5));
  std::vector<RankOneTerm> terms;
  for (const auto& t : j.at("terms")) {
    const double w = t.value("weight", 1.0);
    if (t.contains("u")) {
      const auto u = t.at("u").get<std::vector<double>>();
      terms.push_back(symmetric_term(w, Eigen::Map<const VectorXd>(u.data(), static_cast<Index>(u.size())), d));
    } else {
      std::vector<VectorXd> f;
      for (const auto& x : t.at("factors")) {
        const auto u = x.get<std::vector<double>>();
        f.emplace_back(Eigen::Map<const VectorXd>(u.data(), static_cast<Index>(u.size())));
      }
      terms.emplace_back(w, std::move(f));
    }
  }
  return terms;
}

Json resolved_config(const CLI::App* leaf, const std::vector<std::string>& path) {
  Json cfg;
  cfg["command"] = path;
  Json params = Json::object();
  for (const CLI::App* app = leaf; app; app = app->get_parent()) {
    for (const auto* opt : app->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name() == "-h" || opt->get_name() == "--threads") continue;
      std::string name = opt->get_name();
      while (!name.empty() && name.front() == '-') name.erase(0, 1);
      if (params.contains(name)) continue;
      if (opt->count() > 0) {
        const auto& res = opt->results();
        params[name] = opt->get_type_size() == 0 ? Json(true) : Json(res.size() == 1 ? res.front() : CLI::detail::join(res));
      } else if (opt->get_type_size() == 0) {
        params[name] = false;
      } else {
        params[name] = opt->get_default_str();
      }
    }
  }
  Json ordered = Json::object();
  std::vector<std::string> keys;
  for (auto it = params.begin(); it != params.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  for (const auto& k : keys) ordered[k] = params[k];
  cfg["parameters"] = std::move(ordered);
  return cfg;
}

struct Output {
  Json result;
  std::string csv;
  std::string summary;
};

void emit(const Output& o, const Json& config, const std::string& prefix, std::ostream& out, std::ostream& err) {
  Json doc;
  doc["schema"] = kSchemaVersion;
  doc["config"] = config;
  doc["result"] = o.result;
  const std::string text = doc.dump(2) + "\n";
  if (prefix.empty()) {
    out << text;
    if (!o.csv.empty()) err << "note: CSV output needs --out\n";
    err << o.summary << "\n";
    return;
  }
  auto write = [&](const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    f << body;
  };
  write(prefix + ".json", text);
  if (!o.csv.empty()) write(prefix + ".csv", o.csv);
  out << o.summary << "\n";
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

void add_variety_options(CLI::App* app, Options& o) {
  app->add_option("--variety", o.variety, "subspace | diag-quadric | matrix-rank | tensor-rank1 | tensor-rank")->required();
  app->add_option("--basis", o.basis, "subspace basis (n x r) as diag: or file: literal (diag: needs --shape n,r)");
  app->add_option("--coeffs", o.coeffs, "diagonal quadric coefficients a1,...,an");
  app->add_option("--p", o.p, "matrix rows");
  app->add_option("--q", o.q, "matrix columns");
  app->add_option("--k", o.k, "rank bound")->capture_default_str();
  app->add_option("--shape", o.shape, "tensor shape m1,...,md");
}

Output cmd_critpoints(const Options& o) {
  Shape ambient;
  const VarietySpec v = build_variety(o, ambient);
  if (o.query.empty()) throw ConfigError("critpoints needs --query");
  const DenseTensor x = parse_tensor(o.query, ambient);
  CriticalOptions co;
  co.starts = o.starts;
  co.seed = o.seed;
  co.dedup_tolerance = o.dedup_tol;
  co.residual_tolerance = o.residual_tol;
  const auto report = critical_set(v, x.flat(), co);
  return {to_json(report), "",
          "critpoints: " + std::to_string(report.points.size()) + " points, delta_estimate=" +
              std::to_string(report.delta_estimate) + ", distance=" + fmt(report.distance())};
}

Output cmd_approx(const Options& o) {
  const Shape shape = o.shape.empty() ? Shape{} : parse_shape(o.shape);
  const DenseTensor t = parse_tensor(o.tensor, shape);
  CPModel model;
  if (o.symmetric) {
    if (o.k != 1) throw ConfigError("--symmetric supports k = 1 only");
    if (!t.is_cubical() || !is_symmetric(t, 1e-12 * std::max(1.0, hs_norm(t))))
      throw ConfigError("--symmetric needs a symmetric tensor");
    model = best_rank1_symmetric(symmetrize(t), o.starts, o.seed);
  } else {
    model = best_rank_k(t, o.k, o.starts, o.seed);
  }
  Json r = to_json(model);
  if (t.is_cubical() && t.order() >= 2) r["symmetry"] = to_json(symmetry_verdict(model));
  return {r, "", "approx: objective=" + fmt(model.objective) + (model.border_escape ? " (border-rank escape)" : "")};
}

Output cmd_kruskal_nbound(const Options& o) {
  const Rational b = n_bound(o.m, o.d);
  return {Json{{"m", o.m}, {"d", o.d}, {"n_bound", to_string(b)}, {"n_bound_tensor", to_string(n_bound_tensor(o.m, o.d))}},
          "", "N(" + std::to_string(o.m) + "," + std::to_string(o.d) + ") = " + to_string(b)};
}

Output cmd_kruskal_certify(const Options& o) {
  std::vector<RankOneTerm> terms;
  if (!o.terms.empty()) {
    terms = read_terms(o.terms, o.d);
  } else {
    std::mt19937_64 rng(o.seed);
    for (std::size_t j = 0; j < o.s; ++j)
      terms.push_back(symmetric_term(1.0, gaussian_vector(static_cast<Index>(o.m), rng).normalized(), o.d));
  }
  const KruskalCertificate c = o.general ? certify_tensor_rank(terms, o.m, o.d) : certify_symmetric_rank(terms, o.m, o.d);
  Json r = to_json(c);
  Json tj = Json::array();
  for (const auto& t : terms) tj.push_back(to_json(t));
  r["terms"] = std::move(tj);
  return {r, "", "kruskal: " + c.verdict};
}

Output cmd_decomp(const std::string& sub, const Options& o) {
  if (sub == "dim") return {Json{{"m", o.m}, {"d", o.d}, {"dim", sym_dim(o.m, o.d)}}, "", "dim = " + std::to_string(sym_dim(o.m, o.d))};
  if (sub == "basis") {
    const auto b = power_basis(o.m, o.d);
    return {to_json(b), "", "basis: " + std::to_string(b.vectors.size()) + " vectors, det = " + to_string(b.determinant)};
  }
  const auto u = parse_rational_list(o.u);
  const auto v = parse_rational_list(o.v);
  if (sub == "mixed") {
    const auto s = mixed_power(u, v, o.k, o.d);
    return {to_json(s), "", "mixed_power computed"};
  }
  std::vector<Rational> nodes;
  if (!o.nodes.empty()) nodes = parse_rational_list(o.nodes);
  const auto c = vandermonde_decompose(u, v, o.k, o.d, nodes);
  const bool exact = expand(c, u.size()) == mixed_power(u, v, o.k, o.d);
  Json r = to_json(c);
  r["verified"] = exact;
  return {r, "", std::string("vandermonde: ") + std::to_string(c.terms.size()) + " terms, verified=" + (exact ? "true" : "false")};
}

Output cmd_gf(const std::string& sub, const Options& o) {
  if (sub == "example64") {
    const GFTensor s = example64_tensor();
    const auto r = rank_exhaustive(s, 4);
    const auto sr = srank_exhaustive(s, 4);
    Json j{{"tensor", to_json(s)}, {"rank", r.rank ? Json(*r.rank) : Json(nullptr)}, {"srank", sr.srank ? Json(*sr.srank) : Json(nullptr)}};
    j["rank_witness"] = to_json(r)["witness"];
    j["srank_witness"] = to_json(sr)["witness"];
    return {j, "", "example64: rank=" + j["rank"].dump() + " srank=" + j["srank"].dump()};
  }
  if (sub == "prop61") {
    const auto r = prop61_witness(o.prime, o.m, o.d);
    return {to_json(r), "", std::string("prop61: ") + (r.witness ? "witness found" : "no witness") + ", span_dim=" + std::to_string(r.span_dim)};
  }
  if (o.tensor.rfind("file:", 0) != 0) throw ConfigError("--tensor must be file:path.json with {p, shape, entries}");
  const GFTensor t = gf_from_json(read_json_file(o.tensor.substr(5)));
  if (sub == "srank") {
    const auto r = srank_exhaustive(t, o.max_terms);
    return {to_json(r), "", "srank=" + (r.srank ? std::to_string(*r.srank) : std::string("none"))};
  }
  const auto r = rank_exhaustive(t, o.max_terms);
  return {to_json(r), "", "rank=" + (r.rank ? std::to_string(*r.rank) : std::string("none"))};
}

Output cmd_experiment(const std::string& sub, const Options& o) {
  if (sub == "thm71" || sub == "thm72") {
    const auto s = sub == "thm71" ? experiment_thm71(o.m, o.d, o.trials, o.starts, o.seed, o.rank_one_inputs)
                                  : experiment_thm72(o.m, o.d, o.k, o.noise, o.trials, o.starts, o.seed);
    Json r = to_json(s);
    Json rows = Json::array();
    for (const auto& row : s.rows)
      rows.push_back({{"seed", row.seed},
                      {"objective", number(row.objective)},
                      {"symmetric", row.symmetric},
                      {"gap", number(row.gap)},
                      {"escape", row.escape},
                      {"max_angle", number(row.max_angle)},
                      {"match_angle", number(row.match_angle)}});
    r["rows"] = std::move(rows);
    return {r, to_csv(s),
            sub + ": fraction_symmetric=" + fmt(s.fraction_symmetric) + " fraction_unique=" + fmt(s.fraction_unique) +
                " fraction_matched=" + fmt(s.fraction_matched) + " escapes=" + std::to_string(s.escapes)};
  }
  Shape ambient;
  const VarietySpec v = build_variety(o, ambient);
  if (sub == "lipschitz") {
    const double ratio = lipschitz_probe(v, o.trials, o.seed, o.starts);
    return {Json{{"variety", v.name()}, {"trials", o.trials}, {"max_ratio", number(ratio)}}, "", "lipschitz: max ratio " + fmt(ratio)};
  }
  const double frac = uniqueness_probe(v, o.trials, o.seed, o.starts);
  return {Json{{"variety", v.name()}, {"trials", o.trials}, {"fraction_unique", number(frac)}}, "", "uniqueness: fraction " + fmt(frac)};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Critical points of distance functions, rank certificates and best approximations", "edcrit"};
  app.require_subcommand(1);
  app.add_option("--threads", o.threads, "worker threads (default: EDCRIT_THREADS or all cores)");

  auto common = [&](CLI::App* a, bool with_starts) {
    a->add_option("--seed", o.seed, "random seed")->capture_default_str();
    if (with_starts) a->add_option("--starts", o.starts, "multistart count")->capture_default_str();
    a->add_option("--out", o.out, "output prefix for PREFIX.json / PREFIX.csv");
  };

  auto* crit = app.add_subcommand("critpoints", "critical points of the distance function to a variety");
  add_variety_options(crit, o);
  crit->add_option("--query", o.query, "query point as diag: or file: literal")->required();
  crit->add_option("--dedup-tol", o.dedup_tol, "deduplication radius")->capture_default_str();
  crit->add_option("--residual-tol", o.residual_tol, "critical residual tolerance")->capture_default_str();
  common(crit, true);

  auto* approx = app.add_subcommand("approx", "best rank-k approximation");
  approx->add_option("--tensor", o.tensor, "tensor as diag: or file: literal")->required();
  approx->add_option("--shape", o.shape, "shape for diag: literals");
  approx->add_option("--k", o.k, "rank")->capture_default_str();
  approx->add_flag("--symmetric", o.symmetric, "constrain to a symmetric rank-one term");
  common(approx, true);

  auto* kru = app.add_subcommand("kruskal", "Kruskal rank certificates");
  kru->require_subcommand(1);
  auto* nb = kru->add_subcommand("nbound", "term bound N(m,d)");
  nb->add_option("--m", o.m)->required();
  nb->add_option("--d", o.d)->required();
  common(nb, false);
  auto* cert = kru->add_subcommand("certify", "certify rank of a decomposition (random unit terms unless --terms)");
  cert->add_option("--m", o.m)->required();
  cert->add_option("--d", o.d)->required();
  cert->add_option("--s", o.s, "number of random symmetric terms")->capture_default_str();
  cert->add_option("--terms", o.terms, "file:path.json with {\"terms\": [{\"weight\", \"u\" | \"factors\"}]}");
  cert->add_flag("--general", o.general, "use the bound for general (non-symmetric) decompositions");
  common(cert, false);

  auto* dec = app.add_subcommand("decomp", "exact symmetric decompositions");
  dec->require_subcommand(1);

  for (const char* name : {"mixed", "vandermonde", "basis", "dim"}) {
    auto* s = dec->add_subcommand(name);
    s->add_option("--m", o.m)->capture_default_str();
    s->add_option("--d", o.d)->capture_default_str();
    if (std::string(name) == "mixed" || std::string(name) == "vandermonde") {
      s->add_option("--u", o.u, "rational vector, e.g. 1,0 or 1/2,3")->required();
      s->add_option("--v", o.v, "rational vector")->required();
      s->add_option("--k", o.k, "copies of u")->capture_default_str();
    }
    if (std::string(name) == "vandermonde") s->add_option("--nodes", o.nodes, "d distinct rationals (default 0..d-1)");
    common(s, false);

  }

  auto* gf = app.add_subcommand("gf", "prime-field rank and symmetric rank");
  gf->require_subcommand(1);

  for (const char* name : {"example64", "srank", "rank", "prop61"}) {
    auto* s = gf->add_subcommand(name);
    const std::string n = name;
    if (n == "srank" || n == "rank") {
      s->add_option("--tensor", o.tensor, "file:path.json with {p, shape, entries}")->required();
      s->add_option("--max-terms", o.max_terms)->capture_default_str();
    }
    if (n == "prop61") {
      s->add_option("--p", o.prime)->required();
      s->add_option("--m", o.m)->required();
      s->add_option("--d", o.d)->required();
    }
    common(s, false);

  }

  auto* exp = app.add_subcommand("experiment", "seeded experiments");
  exp->require_subcommand(1);
  auto* t71 = exp->add_subcommand("thm71", "symmetry and uniqueness of best rank-one fits");
  t71->add_option("--m", o.m)->required();
  t71->add_option("--d", o.d)->required();
  t71->add_option("--trials", o.trials)->capture_default_str();
  t71->add_flag("--rank-one-inputs", o.rank_one_inputs, "draw rank-one symmetric inputs");
  common(t71, true);
  auto* t72 = exp->add_subcommand("thm72", "symmetry and recovery of best rank-k fits");
  t72->add_option("--m", o.m)->required();
  t72->add_option("--d", o.d)->required();
  t72->add_option("--k", o.k)->required();
  t72->add_option("--noise", o.noise)->capture_default_str();
  t72->add_option("--trials", o.trials)->capture_default_str();
  common(t72, true);
  auto* lip = exp->add_subcommand("lipschitz", "max |dist(x) - dist(z)| / |x - z| over random pairs");
  add_variety_options(lip, o);
  lip->add_option("--trials", o.trials)->capture_default_str();
  common(lip, true);
  auto* uni = exp->add_subcommand("uniqueness", "fraction of random queries with a unique nearest point");
  add_variety_options(uni, o);
  uni->add_option("--trials", o.trials)->capture_default_str();
  common(uni, true);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    int threads = o.threads;
    if (threads == 0)
      if (const char* env = std::getenv("EDCRIT_THREADS")) threads = static_cast<int>(parse_double(env));
    if (threads < 0) throw ConfigError("--threads must be positive");
    if (threads > 0) set_thread_limit(static_cast<std::size_t>(threads));

    const CLI::App* leaf = &app;
    std::vector<std::string> path;
    while (true) {
      const auto subs = leaf->get_subcommands();
      if (subs.empty()) break;
      leaf = subs.front();
      path.push_back(leaf->get_name());
    }

    Output result;
    const std::string& top = path.front();
    const std::string sub = path.size() > 1 ? path[1] : "";
    if (top == "critpoints") result = cmd_critpoints(o);
    else if (top == "approx") result = cmd_approx(o);
    else if (top == "kruskal") result = sub == "nbound" ? cmd_kruskal_nbound(o) : cmd_kruskal_certify(o);
    else if (top == "decomp") result = cmd_decomp(sub, o);
    else if (top == "gf") result = cmd_gf(sub, o);
    else result = cmd_experiment(sub, o);

    emit(result, resolved_config(leaf, path), o.out, out, err);
    return 0;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "numeric error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace edcrit

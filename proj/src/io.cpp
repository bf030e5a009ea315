#include "nilnet/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nilnet::io {

namespace {

std::string type_name(const json& j) {
  if (j.is_null()) return "null";
  if (j.is_boolean()) return "a boolean";
  if (j.is_string()) return "a string";
  if (j.is_array()) return "an array";
  if (j.is_object()) return "an object";
  if (j.is_number()) return "a number";
  return "an unknown value";
}

[[noreturn]] void schema_error(const std::string& ptr, const std::string& expected,
                               const json& got) {
  throw ValidationError("schema violation at " + (ptr.empty() ? "/" : ptr) + ": expected " +
                        expected + ", got " + type_name(got));
}

json complex_to_json(const std::complex<double>& z) { return json::array({z.real(), z.imag()}); }

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("cannot parse " + path + ": " + e.what());
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << text;
  if (!out) throw ValidationError("write failed: " + path);
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, dump_json(j));
}

std::string content_hash(const json& j) {
  std::uint64_t h = fnv1a64(j.dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const json& require_key(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) schema_error(ptr, "an object", j);
  auto it = j.find(key);
  if (it == j.end())
    throw ValidationError("schema violation at " + (ptr.empty() ? "/" : ptr) +
                          ": missing key \"" + key + "\"");
  return *it;
}

double require_number(const json& j, const std::string& ptr) {
  if (!j.is_number()) schema_error(ptr, "a number", j);
  return j.get<double>();
}

std::size_t require_index(const json& j, const std::string& ptr) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0)
    return static_cast<std::size_t>(j.get<long long>());
  schema_error(ptr, "a nonnegative integer", j);
}

bool require_bool(const json& j, const std::string& ptr) {
  if (!j.is_boolean()) schema_error(ptr, "a boolean", j);
  return j.get<bool>();
}

std::string require_string(const json& j, const std::string& ptr) {
  if (!j.is_string()) schema_error(ptr, "a string", j);
  return j.get<std::string>();
}

const json& require_array(const json& j, const std::string& ptr) {
  if (!j.is_array()) schema_error(ptr, "an array", j);
  return j;
}

const json& require_object(const json& j, const std::string& ptr) {
  if (!j.is_object()) schema_error(ptr, "an object", j);
  return j;
}

json to_json(const Matrix& M) {
  return json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", M.data()}};
}

Matrix matrix_from_json(const json& j, const std::string& ptr) {
  std::size_t r = require_index(require_key(j, "rows", ptr), ptr + "/rows");
  std::size_t c = require_index(require_key(j, "cols", ptr), ptr + "/cols");
  const json& data = require_array(require_key(j, "data", ptr), ptr + "/data");
  if (data.size() != r * c)
    throw ValidationError("schema violation at " + ptr + "/data: expected " +
                          std::to_string(r * c) + " entries, got " + std::to_string(data.size()));
  Matrix M(r, c, 0.0);
  for (std::size_t k = 0; k < data.size(); ++k)
    M.data()[k] = require_number(data[k], ptr + "/data/" + std::to_string(k));
  return M;
}

json vec_to_json(const Vec& v) { return json(v); }

Vec vec_from_json(const json& j, const std::string& ptr) {
  const json& arr = require_array(j, ptr);
  Vec v(arr.size());
  for (std::size_t k = 0; k < arr.size(); ++k)
    v[k] = require_number(arr[k], ptr + "/" + std::to_string(k));
  return v;
}

json to_json(const graphlab::Graph& g) {
  json edges = json::array();
  for (const auto& [i, j] : g.edges) edges.push_back(json::array({i, j}));
  return json{{"n", g.n}, {"edges", edges}};
}

graphlab::Graph graph_from_json(const json& j, const std::string& ptr) {
  std::size_t n = require_index(require_key(j, "n", ptr), ptr + "/n");
  const json& edges = require_array(require_key(j, "edges", ptr), ptr + "/edges");
  std::vector<std::pair<std::size_t, std::size_t>> es;
  es.reserve(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const std::string eptr = ptr + "/edges/" + std::to_string(k);
    const json& e = require_array(edges[k], eptr);
    if (e.size() != 2)
      throw ValidationError("schema violation at " + eptr + ": expected a pair of node indices");
    es.emplace_back(require_index(e[0], eptr + "/0"), require_index(e[1], eptr + "/1"));
  }
  return graphlab::make_graph(n, std::move(es));
}

json to_json(const cmred::PolyField& f) {
  json terms = json::array();
  for (const auto& [e, c] : f.terms()) terms.push_back(json{{"exps", e}, {"coef", c}});
  return json{{"states", f.n()},
              {"params", f.d()},
              {"target", f.target_dim()},
              {"order", f.order()},
              {"terms", terms}};
}

cmred::PolyField polyfield_from_json(const json& j, const std::string& ptr) {
  std::size_t n = require_index(require_key(j, "states", ptr), ptr + "/states");
  std::size_t d = require_index(require_key(j, "params", ptr), ptr + "/params");
  std::size_t target = require_index(require_key(j, "target", ptr), ptr + "/target");
  std::size_t order = require_index(require_key(j, "order", ptr), ptr + "/order");
  cmred::PolyField f(n, d, target, order);
  const json& terms = require_array(require_key(j, "terms", ptr), ptr + "/terms");
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const std::string tptr = ptr + "/terms/" + std::to_string(k);
    const json& exps = require_array(require_key(terms[k], "exps", tptr), tptr + "/exps");
    cmred::MultiIndex e(exps.size());
    for (std::size_t i = 0; i < exps.size(); ++i)
      e[i] = static_cast<unsigned>(require_index(exps[i], tptr + "/exps/" + std::to_string(i)));
    if (cmred::total_degree(e) > order)
      throw ValidationError("schema violation at " + tptr +
                            "/exps: term degree exceeds the order cap");
    Vec c = vec_from_json(require_key(terms[k], "coef", tptr), tptr + "/coef");
    f.set_term(e, c);  // set_term validates lengths against n+d and target
  }
  return f;
}

json spectrum_to_json(const numkit::Spectrum& s) {
  json values = json::array(), classes = json::array();
  for (const auto& z : s.values) values.push_back(complex_to_json(z));
  for (auto c : s.classes) {
    switch (c) {
      case numkit::EigClass::stable: classes.push_back("stable"); break;
      case numkit::EigClass::center: classes.push_back("center"); break;
      case numkit::EigClass::unstable: classes.push_back("unstable"); break;
    }
  }
  return json{{"values", values}, {"classes", classes}};
}

json to_json(const graphlab::VersatilityReport& r) {
  json j{{"rho", r.rho},
         {"eigenvalue", r.eigenvalue},
         {"simple", r.simple},
         {"eigenvector", r.eigenvector},
         {"power_sums", r.power_sums},
         {"verdict", r.verdict},
         {"connected", r.connected},
         {"reason", r.reason}};
  j["failed_ell"] = r.failed_ell ? json(*r.failed_ell) : json(nullptr);
  return j;
}

json to_json(const coupling::SkewnessCertificate& c) {
  return json{{"m", c.m}, {"directions", to_json(c.directions)}, {"rayleigh", c.rayleigh}};
}

json to_json(const coupling::CouplingDesign& d) {
  return json{{"A", to_json(d.A)}, {"D", to_json(d.D)}, {"P", to_json(d.P)},
              {"X", to_json(d.X)}, {"Y", to_json(d.Y)}, {"c", d.c},
              {"m", d.m},          {"kernel_geom", d.kernel_geom}};
}

coupling::CouplingDesign coupling_design_from_json(const json& j, const std::string& ptr) {
  coupling::CouplingDesign d;
  d.A = matrix_from_json(require_key(j, "A", ptr), ptr + "/A");
  d.D = matrix_from_json(require_key(j, "D", ptr), ptr + "/D");
  d.P = matrix_from_json(require_key(j, "P", ptr), ptr + "/P");
  d.X = matrix_from_json(require_key(j, "X", ptr), ptr + "/X");
  d.Y = matrix_from_json(require_key(j, "Y", ptr), ptr + "/Y");
  d.c = require_number(require_key(j, "c", ptr), ptr + "/c");
  d.m = require_index(require_key(j, "m", ptr), ptr + "/m");
  d.kernel_geom = require_index(require_key(j, "kernel_geom", ptr), ptr + "/kernel_geom");
  return d;
}

json to_json(const coupling::BetaSweepResult& r) {
  json tracks = json::array();
  for (const auto& row : r.tracks) {
    json jr = json::array();
    for (const auto& z : row) jr.push_back(complex_to_json(z));
    tracks.push_back(std::move(jr));
  }
  json events = json::array();
  for (const auto& ev : r.events) {
    const char* type = "real_axis_crossing";
    if (ev.type == coupling::SweepEventType::complex_pair_crossing) type = "complex_pair_crossing";
    if (ev.type == coupling::SweepEventType::arrival_at_zero) type = "arrival_at_zero";
    events.push_back(json{{"beta", ev.beta}, {"type", type}, {"track", ev.track}});
  }
  return json{{"betas", r.betas},
              {"tracks", tracks},
              {"events", events},
              {"ambiguous_steps", r.ambiguous_steps}};
}

std::string beta_tracks_csv(const coupling::BetaSweepResult& r) {
  std::ostringstream out;
  std::size_t ntracks = r.tracks.empty() ? 0 : r.tracks.front().size();
  out << "beta";
  for (std::size_t t = 0; t < ntracks; ++t) out << ",re" << t << ",im" << t;
  out << "\n";
  for (std::size_t k = 0; k < r.betas.size(); ++k) {
    out << format_double(r.betas[k]);
    for (std::size_t t = 0; t < ntracks; ++t)
      out << "," << format_double(r.tracks[k][t].real()) << ","
          << format_double(r.tracks[k][t].imag());
    out << "\n";
  }
  return out.str();
}

json to_json(const netlin::NetworkDesign& n) {
  return json{{"graph", to_json(n.graph)}, {"A", to_json(n.A)}, {"D", to_json(n.D)},
              {"alpha_star", n.alpha_star}, {"lambda", n.lambda}, {"v", n.v},
              {"m", n.m}};
}

netlin::NetworkDesign network_design_from_json(const json& j, const std::string& ptr) {
  netlin::NetworkDesign n;
  n.graph = graph_from_json(require_key(j, "graph", ptr), ptr + "/graph");
  n.A = matrix_from_json(require_key(j, "A", ptr), ptr + "/A");
  n.D = matrix_from_json(require_key(j, "D", ptr), ptr + "/D");
  n.alpha_star = require_number(require_key(j, "alpha_star", ptr), ptr + "/alpha_star");
  n.lambda = require_number(require_key(j, "lambda", ptr), ptr + "/lambda");
  n.v = vec_from_json(require_key(j, "v", ptr), ptr + "/v");
  n.m = require_index(require_key(j, "m", ptr), ptr + "/m");
  return n;
}

json blocks_to_json(const std::vector<netlin::BlockSpectrum>& blocks) {
  json out = json::array();
  for (const auto& b : blocks)
    out.push_back(json{{"lambda_p", b.lambda_p}, {"v_p", b.v_p},
                       {"spectrum", spectrum_to_json(b.spec)}});
  return out;
}

json to_json(const netlin::CenterSplit& s) {
  return json{{"Ec_basis", to_json(s.Ec_basis)},
              {"Eh_basis", to_json(s.Eh_basis)},
              {"proj_c", to_json(s.proj_c)},
              {"nilpotent_block", to_json(s.nilpotent_block)}};
}

json to_json(const cmred::CenterModel& m) {
  json channels = json::array();
  for (const auto& ch : m.psi_channels) channels.push_back(to_json(ch));
  return json{{"psi", to_json(m.psi)},
              {"reduced", to_json(m.reduced)},
              {"order", m.order},
              {"residual", m.residual},
              {"psi_channels", channels}};
}

json to_json(const nform::UnfoldingData& u) {
  return json{{"a", u.a},
              {"eps_map", to_json(u.eps_map)},
              {"a1_nonzero", u.a1_nonzero},
              {"eps_invertible", u.eps_invertible},
              {"eps_cond", u.eps_cond},
              {"branch_coef", u.branch_coef}};
}

std::array<double, 6> a_coeffs_from_json(const json& j, const std::string& ptr) {
  const json* arr = &j;
  std::string aptr = ptr;
  if (j.is_object()) {
    arr = &require_key(j, "a", ptr);
    aptr = ptr + "/a";
  }
  require_array(*arr, aptr);
  if (arr->size() != 6)
    throw ValidationError("schema violation at " + aptr +
                          ": expected six quadratic coefficients");
  std::array<double, 6> a{};
  for (std::size_t k = 0; k < 6; ++k)
    a[k] = require_number((*arr)[k], aptr + "/" + std::to_string(k));
  return a;
}

json to_json(const nform::NormalFormResult& r) {
  return json{{"a", r.a},
              {"eps_map", to_json(r.eps_map)},
              {"kappa", r.kappa},
              {"r", r.r},
              {"lambda_nf", r.lambda_nf},
              {"nu_nf", r.nu_nf},
              {"remainder_norm", r.remainder_norm},
              {"field", to_json(r.field)},
              {"state_scale", r.state_scale},
              {"state_offset", r.state_offset},
              {"time_scale", r.time_scale},
              {"eps_source", r.eps_source},
              {"generic", r.generic}};
}

json to_json(const dynsim::Trajectory& t) {
  return json{{"times", t.times},
              {"states", t.states},
              {"truncated", t.truncated},
              {"truncation_time", t.truncation_time},
              {"metadata", t.metadata}};
}

std::string trajectory_csv(const dynsim::Trajectory& t) {
  std::ostringstream out;
  std::size_t dim = t.states.empty() ? 0 : t.states.front().size();
  out << "t";
  for (std::size_t i = 0; i < dim; ++i) out << ",x" << i;
  out << "\n";
  for (std::size_t k = 0; k < t.times.size(); ++k) {
    out << format_double(t.times[k]);
    for (double v : t.states[k]) out << "," << format_double(v);
    out << "\n";
  }
  return out.str();
}

json to_json(const dynsim::LyapunovEstimate& e) {
  return json{{"value", e.value},
              {"trace", e.trace},
              {"first_half", e.first_half},
              {"last_half", e.last_half},
              {"converged", e.converged}};
}

json to_json(const dynsim::SweepResult& r) {
  json entries = json::array();
  for (const auto& e : r.entries)
    entries.push_back(json{{"alpha", e.alpha},
                           {"stable", e.stable},
                           {"margin", e.margin},
                           {"worst_channel", e.worst_channel}});
  return json{{"lambdas", r.lambdas},
              {"entries", entries},
              {"found_crossing", r.found_crossing},
              {"first_crossing", r.first_crossing},
              {"crossing_channel", r.crossing_channel}};
}

json scan_to_json(const dynsim::ScanReport& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    json spectrum = json::array();
    for (const auto& z : p.spectrum) spectrum.push_back(complex_to_json(z));
    points.push_back(json{{"lambda", p.lambda},
                          {"nu", p.nu},
                          {"kappa", p.kappa},
                          {"skipped", p.skipped},
                          {"reason", p.reason},
                          {"spectrum", spectrum},
                          {"saddle_focus", p.saddle_focus},
                          {"ratio_flag", p.ratio_flag},
                          {"returned", p.returned},
                          {"shooting_distance", finite_or_null(p.shooting_distance)},
                          {"lyapunov", p.lyapunov},
                          {"lyap_valid", p.lyap_valid},
                          {"lyap_converged", p.lyap_converged},
                          {"score", finite_or_null(p.score)}});
  }
  return json{{"lambda_grid", r.lambda_grid},
              {"nu_grid", r.nu_grid},
              {"kappa_grid", r.kappa_grid},
              {"points", points},
              {"ranked", r.ranked},
              {"evaluated", r.evaluated},
              {"skipped", r.skipped}};
}

std::string scan_csv(const dynsim::ScanReport& r) {
  std::ostringstream out;
  out << "lambda,nu,kappa,skipped,saddle_focus,ratio_flag,returned,shooting_distance,"
         "lyapunov,lyap_valid,score\n";
  for (const auto& p : r.points) {
    out << format_double(p.lambda) << "," << format_double(p.nu) << ","
        << format_double(p.kappa) << "," << (p.skipped ? 1 : 0) << ","
        << (p.saddle_focus ? 1 : 0) << "," << (p.ratio_flag ? 1 : 0) << ","
        << (p.returned ? 1 : 0) << "," << format_double(p.shooting_distance) << ","
        << format_double(p.lyapunov) << "," << (p.lyap_valid ? 1 : 0) << ","
        << format_double(p.score) << "\n";
  }
  return out.str();
}

}  // namespace nilnet::io

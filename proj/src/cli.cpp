#include "nilnet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "nilnet/coupling.hpp"
#include "nilnet/cmred.hpp"
#include "nilnet/dynsim.hpp"
#include "nilnet/graphlab.hpp"
#include "nilnet/netlin.hpp"
#include "nilnet/nform.hpp"

namespace fs = std::filesystem;

namespace nilnet::cli {

namespace {

using io::json;
using numkit::Matrix;
using numkit::Tolerances;

struct GlobalOpts {
  std::string out = ".";
  std::string format = "json";
  std::uint64_t seed = 0;
  Tolerances tol;
  double tol_ode = 1e-8;

  bool csv() const { return format == "csv"; }
};

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ValidationError("cannot create output directory: " + dir);
  return p;
}

void save(const GlobalOpts& g, const std::string& name, const json& j) {
  io::write_json_file((ensure_dir(g.out) / name).string(), j);
  std::cout << "wrote " << (fs::path(g.out) / name).string() << "\n";
}

void save_text(const GlobalOpts& g, const std::string& name, const std::string& text) {
  io::write_text_file((ensure_dir(g.out) / name).string(), text);
  std::cout << "wrote " << (fs::path(g.out) / name).string() << "\n";
}

Matrix load_matrix_file(const std::string& path) {
  return io::matrix_from_json(io::read_json_file(path));
}

graphlab::Graph load_graph_file(const std::string& path) {
  return io::graph_from_json(io::read_json_file(path));
}

cmred::PolyField load_field_file(const std::string& path) {
  json j = io::read_json_file(path);
  // Accept either a bare field or a container holding one under "reduced".
  if (j.is_object() && !j.contains("terms") && j.contains("reduced"))
    return io::polyfield_from_json(j["reduced"], "/reduced");
  return io::polyfield_from_json(j);
}

Vec linspace(double lo, double hi, std::size_t steps) {
  if (steps == 0) throw ValidationError("grid needs at least one point");
  Vec v;
  if (steps == 1) {
    v.push_back(lo);
    return v;
  }
  for (std::size_t i = 0; i < steps; ++i)
    v.push_back(lo + static_cast<double>(i) * (hi - lo) / static_cast<double>(steps - 1));
  return v;
}

std::array<double, 3> parse_triple(const std::string& text, const std::string& what) {
  std::array<double, 3> out{};
  std::stringstream ss(text);
  std::string item;
  std::size_t k = 0;
  while (std::getline(ss, item, ',')) {
    if (k >= 3) throw ValidationError(what + ": expected three comma-separated values");
    try {
      out[k++] = std::stod(item);
    } catch (const std::exception&) {
      throw ValidationError(what + ": cannot parse \"" + item + "\" as a number");
    }
  }
  if (k != 3) throw ValidationError(what + ": expected three comma-separated values");
  return out;
}

// Prefers coordinate axes with positive diagonal entries (the worked designs
// use them and they give the smallest admissible c); falls back to
// symmetric-part eigenvectors when fewer than m axes qualify or m is unset.
coupling::SkewnessCertificate choose_directions(const Matrix& A, std::optional<std::size_t> m,
                                                const Tolerances& tol) {
  if (m && *m > 0) {
    std::vector<std::pair<double, std::size_t>> pos;
    for (std::size_t i = 0; i < A.rows(); ++i)
      if (A(i, i) > 0.0) pos.emplace_back(-A(i, i), i);
    if (pos.size() >= *m) {
      std::sort(pos.begin(), pos.end());
      Matrix X(A.rows(), *m, 0.0);
      for (std::size_t k = 0; k < *m; ++k) X(pos[k].second, k) = 1.0;
      return coupling::make_certificate(A, X, tol);
    }
  }
  return coupling::find_skew_directions(A, m, tol);
}

// Node field f(x; eps) = A x + h(x; eps) shaped for the integrator.
cmred::PolyField node_field(const Matrix& A, const std::optional<cmred::PolyField>& h) {
  std::size_t d = h ? h->d() : 0;
  std::size_t ord = std::max<std::size_t>(h ? h->order() : 1, 1);
  cmred::PolyField f = cmred::from_linear(A, d, ord);
  if (h) {
    if (h->n() != A.rows() || h->target_dim() != A.rows())
      throw ValidationError("node nonlinearity must act on the same state space as A");
    f = cmred::add(f, *h);
  }
  return f;
}

Vec seeded_x0(std::size_t dim, std::uint64_t seed, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-amp, amp);
  Vec x0(dim);
  for (double& v : x0) v = U(rng);
  return x0;
}

// Random node nonlinearity used by the pipeline when no h input is given:
// three parameter-linear state-linear blocks plus seeded cubics and
// quadratics, all behind the single manifest seed.
cmred::PolyField make_random_h(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  cmred::PolyField h(n, 3, n, 3);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      cmred::MultiIndex e(n + 3, 0u);
      e[i] = 1;
      e[n + j] = 1;
      Vec coef(n);
      for (double& v : coef) v = 0.5 * U(rng);
      h.add_term(e, coef);
    }
  for (const auto& e : cmred::homogeneous_exponents(n, 3)) {
    cmred::MultiIndex full(n + 3, 0u);
    for (std::size_t i = 0; i < n; ++i) full[i] = e[i];
    Vec coef(n);
    for (double& v : coef) v = 0.3 * U(rng);
    h.add_term(full, coef);
  }
  for (const auto& e : cmred::homogeneous_exponents(n, 2)) {
    cmred::MultiIndex full(n + 3, 0u);
    for (std::size_t i = 0; i < n; ++i) full[i] = e[i];
    Vec coef(n);
    for (double& v : coef) v = 0.4 * U(rng);
    h.add_term(full, coef);
  }
  return h;
}

netlin::NetworkDesign design_network(const Matrix& A, const Matrix& D,
                                     const graphlab::Graph& graph, std::int64_t which,
                                     const Tolerances& tol) {
  std::optional<std::size_t> w;
  if (which >= 0) w = static_cast<std::size_t>(which);
  return netlin::choose_alpha_star(A, D, graph, w, tol);
}

netlin::CenterSplit split_network(const netlin::NetworkDesign& net, const Tolerances& tol) {
  Matrix M = net.A;
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j)
      M(i, j) -= net.alpha_star * net.lambda * net.D(i, j);
  return netlin::center_split(M, net.m, tol);
}

// --- option stores for the leaf subcommands ---

struct GraphGenOpts {
  std::string kind;
  std::size_t leaves = 8, nodes = 10, s = 3, t = 5;
  double p = 0.3;
};

struct GraphCheckOpts {
  std::string input;
  std::size_t rho = 3;
  std::int64_t which = -1;
};

struct CoupleSynthOpts {
  std::string a_file, x_file;
  std::int64_t m = -1;
  double c = -1.0;
  bool has_c = false;
  double single_chain = 0.0;
  bool has_single_chain = false;
};

struct CoupleSweepOpts {
  std::string a_file, d_file;
  double beta_min = 0.0, beta_max = 1.0, step = 1e-3;
};

struct NetOpts {
  std::string a_file, d_file, design_file, graph_file;
  double alpha = -1.0;
  bool has_alpha = false;
  std::int64_t which = -1;
};

struct CmOpts {
  std::string a_file, d_file, design_file, graph_file, h_file, target_file;
  std::size_t rho = 3;
  std::int64_t which = -1;
};

struct NfOpts {
  std::string input;
  double kappa = 0.0;
  bool has_kappa = false;
  std::string gamma = "1,-1,1";
};

struct SimOpts {
  std::string a_file, d_file, design_file, graph_file, h_file, x0_file, eps_csv;
  double alpha = 0.0;
  double T = 10.0, dt = 1e-3;
  std::string method = "rk4";
  std::size_t renorm = 10;
  double amp = 1e-2;
};

struct ScanOpts {
  std::string a_file;
  double lambda_min = 0.05, lambda_max = 1.0;
  std::size_t lambda_steps = 8;
  double nu_min = -0.4, nu_max = 0.4;
  std::size_t nu_steps = 5;
  std::vector<double> kappas{0.0};
  double T = 40.0, dt = 1e-3;
};

std::pair<Matrix, Matrix> load_AD(const std::string& a_file, const std::string& d_file,
                                  const std::string& design_file) {
  if (!design_file.empty()) {
    auto d = io::coupling_design_from_json(io::read_json_file(design_file));
    return {d.A, d.D};
  }
  if (a_file.empty() || d_file.empty())
    throw ValidationError("either --design or both --A and --D are required");
  return {load_matrix_file(a_file), load_matrix_file(d_file)};
}

// --- leaf handlers ---

void run_graph_gen(const GlobalOpts& g, const GraphGenOpts& o) {
  graphlab::Graph graph;
  if (o.kind == "star") {
    graph = graphlab::gen_star(o.leaves);
  } else if (o.kind == "er") {
    graph = graphlab::gen_erdos_renyi(o.nodes, o.p, g.seed);
  } else if (o.kind == "two-component") {
    auto path = [](std::size_t k) {
      std::vector<std::pair<std::size_t, std::size_t>> edges;
      for (std::size_t i = 0; i + 1 < k; ++i) edges.emplace_back(i, i + 1);
      return graphlab::make_graph(k, edges);
    };
    auto res = graphlab::gen_two_component_versatile(o.s, o.t, path(o.s), path(o.t), g.tol);
    graph = res.graph;
    std::cout << "two-component design: eigenvalue " << res.eigenvalue << "\n";
  } else {
    throw ValidationError("unknown graph kind: " + o.kind);
  }
  save(g, "graph.json", io::to_json(graph));
  std::cout << "graph: n=" << graph.n << " edges=" << graph.edges.size() << "\n";
}

void run_graph_check(const GlobalOpts& g, const GraphCheckOpts& o) {
  auto graph = load_graph_file(o.input);
  std::optional<std::size_t> which;
  if (o.which >= 0) which = static_cast<std::size_t>(o.which);
  auto rep = graphlab::check_versatile(graph, o.rho, g.tol, which);
  save(g, "versatility.json", io::to_json(rep));
  std::cout << "versatile(rho=" << o.rho << "): " << (rep.verdict ? "yes" : "no")
            << " eigenvalue=" << rep.eigenvalue;
  if (!rep.verdict) std::cout << " reason: " << rep.reason;
  std::cout << "\n";
}

void run_couple_synth(const GlobalOpts& g, const CoupleSynthOpts& o) {
  Matrix A = load_matrix_file(o.a_file);
  coupling::SkewnessCertificate cert;
  if (!o.x_file.empty()) {
    cert = coupling::make_certificate(A, load_matrix_file(o.x_file), g.tol);
  } else {
    std::optional<std::size_t> m;
    if (o.m >= 0) m = static_cast<std::size_t>(o.m);
    cert = choose_directions(A, m, g.tol);
  }
  std::optional<double> c;
  if (o.has_c) c = o.c;
  auto design = coupling::synthesize_D(A, cert, c, g.tol);
  if (o.has_single_chain && design.kernel_geom > 1)
    design = coupling::perturb_for_single_kernel(design, o.single_chain, g.tol);
  json out = io::to_json(design);
  out["certificate"] = io::to_json(cert);
  save(g, "coupling.json", out);
  std::cout << "m=" << design.m << " c=" << format_double(design.c)
            << " kernel_geom=" << design.kernel_geom << "\n";
}

void run_couple_sweep(const GlobalOpts& g, const CoupleSweepOpts& o) {
  Matrix A = load_matrix_file(o.a_file);
  Matrix D = load_matrix_file(o.d_file);
  if (!(o.step > 0.0)) throw ValidationError("sweep step must be positive");
  if (o.beta_max < o.beta_min) throw ValidationError("sweep range is empty");
  // index-based grid so the endpoints land exactly on beta_min and beta_max
  auto nsteps = static_cast<std::size_t>(std::llround((o.beta_max - o.beta_min) / o.step));
  Vec grid;
  for (std::size_t k = 0; k <= nsteps; ++k)
    grid.push_back(k == nsteps ? o.beta_max
                               : o.beta_min + static_cast<double>(k) * o.step);
  auto res = coupling::beta_sweep(A, D, grid, g.tol);
  save(g, "beta_sweep.json", io::to_json(res));
  if (g.csv()) save_text(g, "beta_tracks.csv", io::beta_tracks_csv(res));
  std::cout << "events: " << res.events.size() << "\n";
  for (const auto& ev : res.events) {
    const char* type = ev.type == coupling::SweepEventType::real_axis_crossing
                           ? "real-axis crossing"
                           : ev.type == coupling::SweepEventType::complex_pair_crossing
                                 ? "complex-pair crossing"
                                 : "arrival at zero";
    std::cout << "  beta=" << format_double(ev.beta) << " " << type << " track=" << ev.track
              << "\n";
  }
}

void run_net_spectrum(const GlobalOpts& g, const NetOpts& o) {
  auto [A, D] = load_AD(o.a_file, o.d_file, o.design_file);
  auto graph = load_graph_file(o.graph_file);
  auto net = design_network(A, D, graph, o.which, g.tol);
  double alpha = o.has_alpha ? o.alpha : net.alpha_star;
  auto blocks = netlin::block_spectrum(net, alpha, g.tol);
  json out{{"design", io::to_json(net)}, {"alpha", alpha}, {"blocks", io::blocks_to_json(blocks)}};
  save(g, "network.json", out);
  std::cout << "alpha_star=" << format_double(net.alpha_star) << " lambda=" << net.lambda
            << " m=" << net.m << " blocks=" << blocks.size() << "\n";
}

void run_net_split(const GlobalOpts& g, const NetOpts& o) {
  auto [A, D] = load_AD(o.a_file, o.d_file, o.design_file);
  auto graph = load_graph_file(o.graph_file);
  auto net = design_network(A, D, graph, o.which, g.tol);
  auto split = split_network(net, g.tol);
  json out{{"design", io::to_json(net)}, {"split", io::to_json(split)}};
  save(g, "center_split.json", out);
  std::cout << "m=" << net.m << " Ec=" << split.Ec_basis.rows() << "x" << split.Ec_basis.cols()
            << "\n";
}

void run_cm_reduce(const GlobalOpts& g, const CmOpts& o) {
  auto [A, D] = load_AD(o.a_file, o.d_file, o.design_file);
  auto graph = load_graph_file(o.graph_file);
  auto h = load_field_file(o.h_file);
  auto net = design_network(A, D, graph, o.which, g.tol);
  auto split = split_network(net, g.tol);
  auto model = cmred::reduced_field(net, split, h, o.rho, g.tol);
  json out{{"design", io::to_json(net)}, {"model", io::to_json(model)}};
  save(g, "center_model.json", out);
  std::cout << "order=" << model.order << " residual=" << format_double(model.residual)
            << " terms=" << model.reduced.terms().size() << "\n";
}

void run_cm_design(const GlobalOpts& g, const CmOpts& o) {
  auto [A, D] = load_AD(o.a_file, o.d_file, o.design_file);
  auto graph = load_graph_file(o.graph_file);
  auto target = load_field_file(o.target_file);
  auto net = design_network(A, D, graph, o.which, g.tol);
  auto split = split_network(net, g.tol);
  auto h = cmred::inverse_design(target, net, split, o.rho, g.tol);
  auto model = cmred::reduced_field(net, split, h, o.rho, g.tol);
  double defect = cmred::max_coeff_difference(model.reduced.truncated(o.rho),
                                              target.truncated(o.rho));
  json out{{"h", io::to_json(h)}, {"defect", defect}, {"model", io::to_json(model)}};
  save(g, "designed_h.json", out);
  std::cout << "round-trip defect=" << format_double(defect) << "\n";
}

void run_nf_reduce(const GlobalOpts& g, const NfOpts& o) {
  auto field = load_field_file(o.input);
  auto jet = nform::normalize_frame(field);
  jet = nform::eliminate_lower(jet);
  auto unf = nform::extract_unfolding(jet);
  json stages = json::array();
  for (const auto& tr : jet.frame) stages.push_back(tr.tag);
  json out{{"field", io::to_json(jet.field)},
           {"stages", stages},
           {"unfolding", io::to_json(unf)}};
  save(g, "unfolding.json", out);
  std::cout << "a1=" << format_double(unf.a[0]) << " a1_nonzero=" << unf.a1_nonzero
            << " eps_invertible=" << unf.eps_invertible
            << " eps_cond=" << format_double(unf.eps_cond) << "\n";
  if (o.has_kappa) {
    auto gamma = parse_triple(o.gamma, "--gamma");
    auto res = nform::blow_up_and_scale(jet, unf.a, unf.eps_map, o.kappa, gamma);
    save(g, "normal_form.json", io::to_json(res));
    std::cout << "lambda_nf=" << format_double(res.lambda_nf)
              << " nu_nf=" << format_double(res.nu_nf)
              << " remainder=" << format_double(res.remainder_norm) << "\n";
  }
}

dynsim::SimConfig sim_config(const GlobalOpts& g, const SimOpts& o) {
  dynsim::SimConfig cfg;
  cfg.dt = o.dt;
  cfg.T = o.T;
  cfg.method = o.method;
  cfg.seed = g.seed;
  cfg.renorm_interval = o.renorm;
  cfg.tol = g.tol_ode;
  return cfg;
}

struct SimSetup {
  graphlab::Graph graph;
  Matrix D;
  cmred::PolyField f;
  Vec x0;
  Vec eps;
};

SimSetup sim_setup(const GlobalOpts& g, const SimOpts& o) {
  auto [A, D] = load_AD(o.a_file, o.d_file, o.design_file);
  SimSetup s;
  s.graph = load_graph_file(o.graph_file);
  s.D = D;
  std::optional<cmred::PolyField> h;
  if (!o.h_file.empty()) h = load_field_file(o.h_file);
  s.f = node_field(A, h);
  std::size_t dim = s.graph.n * A.rows();
  s.x0 = o.x0_file.empty() ? seeded_x0(dim, g.seed, o.amp)
                           : io::vec_from_json(io::read_json_file(o.x0_file));
  s.eps.assign(s.f.d(), 0.0);
  if (!o.eps_csv.empty()) {
    std::stringstream ss(o.eps_csv);
    std::string item;
    std::size_t k = 0;
    while (std::getline(ss, item, ',')) {
      if (k >= s.eps.size())
        throw ValidationError("--eps: more values than field parameters");
      s.eps[k++] = std::stod(item);
    }
  }
  return s;
}

void run_sim_run(const GlobalOpts& g, const SimOpts& o) {
  auto s = sim_setup(g, o);
  auto cfg = sim_config(g, o);
  auto traj = dynsim::integrate_network(s.graph, s.D, o.alpha, s.f, s.x0, cfg, s.eps);
  json meta{{"alpha", o.alpha},
            {"samples", traj.times.size()},
            {"truncated", traj.truncated},
            {"truncation_time", traj.truncation_time},
            {"metadata", traj.metadata}};
  save(g, "run.json", meta);
  if (g.csv())
    save_text(g, "trajectory.csv", io::trajectory_csv(traj));
  else
    save(g, "trajectory.json", io::to_json(traj));
  std::cout << "samples=" << traj.times.size() << (traj.truncated ? " (truncated)" : "") << "\n";
}

void run_sim_lyap(const GlobalOpts& g, const SimOpts& o) {
  auto s = sim_setup(g, o);
  auto cfg = sim_config(g, o);
  auto rhs = dynsim::network_rhs(s.graph, s.D, o.alpha, s.f, s.eps);
  auto est = dynsim::largest_lyapunov(rhs, s.x0, cfg);
  save(g, "lyapunov.json", io::to_json(est));
  std::cout << "largest exponent=" << format_double(est.value)
            << " converged=" << est.converged << "\n";
}

void run_sim_scan(const GlobalOpts& g, const ScanOpts& o) {
  std::array<double, 6> a{1.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  if (!o.a_file.empty()) a = io::a_coeffs_from_json(io::read_json_file(o.a_file));
  dynsim::SimConfig cfg;
  cfg.T = o.T;
  cfg.dt = o.dt;
  cfg.seed = g.seed;
  cfg.tol = g.tol_ode;
  Vec lg = linspace(o.lambda_min, o.lambda_max, o.lambda_steps);
  Vec ng = linspace(o.nu_min, o.nu_max, o.nu_steps);
  Vec kg = o.kappas;
  auto rep = dynsim::shilnikov_scan(a, lg, ng, kg, cfg);
  save(g, "scan.json", io::scan_to_json(rep));
  if (g.csv()) save_text(g, "scan.csv", io::scan_csv(rep));
  std::cout << "evaluated=" << rep.evaluated << " skipped=" << rep.skipped
            << " elapsed=" << format_double(rep.elapsed_seconds) << "s\n";
  std::size_t shown = std::min<std::size_t>(5, rep.ranked.size());
  for (std::size_t k = 0; k < shown; ++k) {
    const auto& p = rep.points[rep.ranked[k]];
    if (p.skipped) continue;
    std::cout << "  lambda=" << format_double(p.lambda) << " nu=" << format_double(p.nu)
              << " kappa=" << format_double(p.kappa) << " score=" << format_double(p.score)
              << (p.saddle_focus ? " saddle-focus" : "") << (p.ratio_flag ? " ratio" : "")
              << "\n";
  }
}

void print_summary(const json& summary) {
  std::cout << "pipeline summary:\n";
  std::cout << "  m=" << summary["m"] << " alpha_star=" << summary["alpha_star"]
            << " c=" << summary["c"] << "\n";
  std::cout << "  versatile=" << summary["versatility"]["verdict"]
            << " a1_nonzero=" << summary["a1_nonzero"] << "\n";
  if (summary.contains("lambda_nf") && !summary["lambda_nf"].is_null())
    std::cout << "  lambda_nf=" << summary["lambda_nf"] << " nu_nf=" << summary["nu_nf"] << "\n";
  if (summary.contains("lyapunov_table"))
    std::cout << "  scan rows=" << summary["lyapunov_table"].size() << "\n";
}

}  // namespace

json run_pipeline(const json& manifest, const std::string& out_dir) {
  const json& inputs = io::require_object(io::require_key(manifest, "inputs", ""), "/inputs");
  std::string a_path =
      io::require_string(io::require_key(inputs, "A", "/inputs"), "/inputs/A");
  std::string g_path =
      io::require_string(io::require_key(inputs, "graph", "/inputs"), "/inputs/graph");
  std::string h_path;
  if (inputs.contains("h") && !inputs["h"].is_null())
    h_path = io::require_string(inputs["h"], "/inputs/h");

  std::uint64_t seed = 0;
  if (manifest.contains("seed")) seed = io::require_index(manifest["seed"], "/seed");

  Tolerances tol;
  if (manifest.contains("tolerances")) {
    const json& t = io::require_object(manifest["tolerances"], "/tolerances");
    if (t.contains("zero_eig")) tol.zero_eig = io::require_number(t["zero_eig"], "/tolerances/zero_eig");
    if (t.contains("gap")) tol.gap = io::require_number(t["gap"], "/tolerances/gap");
    if (t.contains("posdef_margin"))
      tol.posdef_margin = io::require_number(t["posdef_margin"], "/tolerances/posdef_margin");
    if (t.contains("iter_eps")) tol.iter_eps = io::require_number(t["iter_eps"], "/tolerances/iter_eps");
  }

  json options = manifest.value("options", json::object());
  io::require_object(options, "/options");
  std::size_t rho = options.contains("rho") ? io::require_index(options["rho"], "/options/rho") : 3;
  std::optional<std::size_t> want_m = 3;
  if (options.contains("m") && !options["m"].is_null())
    want_m = io::require_index(options["m"], "/options/m");
  std::optional<double> c;
  if (options.contains("c") && !options["c"].is_null())
    c = io::require_number(options["c"], "/options/c");
  std::int64_t which = -1;
  if (options.contains("which") && !options["which"].is_null())
    which = static_cast<std::int64_t>(io::require_index(options["which"], "/options/which"));
  double pert_eps = options.contains("pert_eps")
                        ? io::require_number(options["pert_eps"], "/options/pert_eps")
                        : 1e-2;
  double kappa =
      options.contains("kappa") ? io::require_number(options["kappa"], "/options/kappa") : 0.1;
  std::array<double, 3> gamma{1.0, -1.0, 1.0};
  if (options.contains("gamma")) {
    const json& ga = io::require_array(options["gamma"], "/options/gamma");
    if (ga.size() != 3)
      throw ValidationError("schema violation at /options/gamma: expected three ray coefficients");
    for (std::size_t k = 0; k < 3; ++k)
      gamma[k] = io::require_number(ga[k], "/options/gamma/" + std::to_string(k));
  }
  json scan_opts = options.value("scan", json::object());
  io::require_object(scan_opts, "/options/scan");
  auto grid_of = [&](const char* key, double lo, double hi, std::size_t steps) -> Vec {
    if (!scan_opts.contains(key)) return linspace(lo, hi, steps);
    const json& spec = io::require_array(scan_opts[key], std::string("/options/scan/") + key);
    if (spec.size() != 3)
      throw ValidationError(std::string("schema violation at /options/scan/") + key +
                            ": expected [min, max, steps]");
    std::string ptr = std::string("/options/scan/") + key;
    return linspace(io::require_number(spec[0], ptr + "/0"), io::require_number(spec[1], ptr + "/1"),
                    io::require_index(spec[2], ptr + "/2"));
  };
  Vec scan_lambda = grid_of("lambda", 0.1, 1.0, 4);
  Vec scan_nu = grid_of("nu", -0.4, 0.4, 3);
  Vec scan_kappa{0.0, kappa};
  if (scan_opts.contains("kappa"))
    scan_kappa = io::vec_from_json(scan_opts["kappa"], "/options/scan/kappa");
  double scan_T = scan_opts.contains("T") ? io::require_number(scan_opts["T"], "/options/scan/T")
                                          : 40.0;
  double scan_dt =
      scan_opts.contains("dt") ? io::require_number(scan_opts["dt"], "/options/scan/dt") : 1e-3;

  fs::path out = ensure_dir(out_dir);

  json aj = io::read_json_file(a_path);
  Matrix A = io::matrix_from_json(aj);
  json gj = io::read_json_file(g_path);
  graphlab::Graph graph = io::graph_from_json(gj);
  json hj;
  if (!h_path.empty()) hj = io::read_json_file(h_path);
  if (A.rows() < 4)
    throw ValidationError("pipeline: the chaos chain needs at least four node states (n = " +
                          std::to_string(A.rows()) + ")");

  json stages = json::array();
  auto run_stage = [&](const std::string& name, const std::string& file, const json& deps,
                       auto&& compute) -> json {
    json dep_doc{{"stage", name}, {"tool", kToolVersion}, {"deps", deps}};
    std::string ih = io::content_hash(dep_doc);
    fs::path p = out / file;
    if (fs::exists(p)) {
      try {
        json cached = io::read_json_file(p.string());
        if (cached.contains("_stage") && cached["_stage"].value("inputs_hash", "") == ih) {
          stages.push_back(json{{"name", name},
                                {"artifact", file},
                                {"inputs_hash", ih},
                                {"status", "ok"},
                                {"cached", true}});
          return cached;
        }
      } catch (const std::exception&) {
        // stale or unreadable cache entry: recompute below
      }
    }
    json result;
    try {
      result = compute();
    } catch (const ValidationError& e) {
      stages.push_back(json{{"name", name}, {"status", "failed"}, {"error", e.what()}});
      throw ValidationError(name + ": " + e.what());
    } catch (const NumericalError& e) {
      stages.push_back(json{{"name", name}, {"status", "failed"}, {"error", e.what()}});
      throw NumericalError(name + ": " + e.what());
    }
    result["_stage"] = json{{"name", name}, {"inputs_hash", ih}, {"tool", kToolVersion}};
    io::write_json_file(p.string(), result);
    stages.push_back(json{{"name", name},
                          {"artifact", file},
                          {"inputs_hash", ih},
                          {"status", "ok"},
                          {"cached", false}});
    return result;
  };

  json summary{{"seed", seed}};
  json tol_doc{{"zero_eig", tol.zero_eig},
               {"gap", tol.gap},
               {"posdef_margin", tol.posdef_margin},
               {"iter_eps", tol.iter_eps}};

  auto finish = [&](bool ok, const std::string& error) {
    summary["stages"] = stages;
    if (!ok) summary["error"] = error;
    io::write_json_file((out / "summary.json").string(), summary);
    json mout{{"inputs",
               json{{"A", json{{"path", a_path}, {"hash", io::content_hash(aj)}}},
                    {"graph", json{{"path", g_path}, {"hash", io::content_hash(gj)}}},
                    {"h", h_path.empty()
                              ? json(nullptr)
                              : json{{"path", h_path}, {"hash", io::content_hash(hj)}}}}},
              {"seed", seed},
              {"tolerances", tol_doc},
              {"options", options},
              {"versions", json{{"tool", kToolVersion}, {"schema", kSchemaVersion}}},
              {"stages", stages}};
    io::write_json_file((out / "manifest_out.json").string(), mout);
  };

  try {
    // graph versatility
    json graph_art = run_stage("graph", "01_graph.json", json{{"graph", gj}, {"rho", rho}, {"tol", tol_doc}},
                               [&]() -> json {
                                 auto rep = graphlab::check_versatile(graph, rho, tol);
                                 return json{{"graph", io::to_json(graph)},
                                             {"versatility", io::to_json(rep)}};
                               });
    summary["versatility"] = graph_art["versatility"];

    // coupling synthesis
    json couple_deps{{"A", aj},
                     {"m", want_m ? json(*want_m) : json(nullptr)},
                     {"c", c ? json(*c) : json(nullptr)},
                     {"pert_eps", pert_eps},
                     {"tol", tol_doc}};
    json couple_art = run_stage("coupling", "02_coupling.json", couple_deps, [&]() -> json {
      auto cert = choose_directions(A, want_m, tol);
      if (cert.m == 0)
        throw ValidationError("matrix admits no skew directions (m = 0)");
      auto design = coupling::synthesize_D(A, cert, c, tol);
      if (design.kernel_geom > 1)
        design = coupling::perturb_for_single_kernel(design, pert_eps, tol);
      json j = io::to_json(design);
      j["certificate"] = io::to_json(cert);
      return j;
    });
    auto design = io::coupling_design_from_json(couple_art, "");
    summary["m"] = design.m;
    summary["c"] = design.c;
    summary["kernel_geom"] = design.kernel_geom;

    // network design around alpha*
    json net_deps{{"coupling", io::content_hash(couple_art)},
                  {"graph", gj},
                  {"which", which},
                  {"tol", tol_doc}};
    json net_art = run_stage("network", "03_network.json", net_deps, [&]() -> json {
      auto net = design_network(design.A, design.D, graph, which, tol);
      auto blocks = netlin::block_spectrum(net, net.alpha_star, tol);
      auto split = split_network(net, tol);
      return json{{"design", io::to_json(net)},
                  {"blocks", io::blocks_to_json(blocks)},
                  {"split", io::to_json(split)}};
    });
    auto net = io::network_design_from_json(net_art["design"], "/design");
    summary["alpha_star"] = net.alpha_star;
    summary["lambda"] = net.lambda;

    // center-manifold reduction
    bool versatile = summary["versatility"]["verdict"].get<bool>();
    json cm_deps{{"network", io::content_hash(net_art)},
                 {"h", h_path.empty() ? json{{"generated", seed}} : json{{"file", io::content_hash(hj)}}},
                 {"rho", rho}};
    json cm_art = run_stage("center_model", "04_center_model.json", cm_deps, [&]() -> json {
      if (!versatile)
        throw ValidationError(
            "graph fails the versatility check: " +
            summary["versatility"]["reason"].get<std::string>());
      cmred::PolyField h = h_path.empty() ? make_random_h(net.A.rows(), seed)
                                          : io::polyfield_from_json(hj);
      auto split = split_network(net, tol);
      auto model = cmred::reduced_field(net, split, h, rho, tol);
      return json{{"h", io::to_json(h)}, {"model", io::to_json(model)}};
    });
    json reduced_j = cm_art["model"]["reduced"];
    summary["reduction_residual"] = cm_art["model"]["residual"];

    // normal-form chain
    json nf_deps{{"center_model", io::content_hash(cm_art)},
                 {"kappa", kappa},
                 {"gamma", gamma}};
    json nf_art = run_stage("normal_form", "05_normal_form.json", nf_deps, [&]() -> json {
      auto reduced = io::polyfield_from_json(reduced_j, "/model/reduced");
      if (reduced.n() != 3 || reduced.target_dim() != 3)
        throw ValidationError("the chain needs a three-dimensional center block (m = " +
                              std::to_string(reduced.n()) + ")");
      if (reduced.d() != 3)
        throw ValidationError("the reduced jet must carry three unfolding parameters (d = " +
                              std::to_string(reduced.d()) + ")");
      auto jet = nform::normalize_frame(reduced);
      jet = nform::eliminate_lower(jet);
      auto unf = nform::extract_unfolding(jet);
      json j{{"unfolding", io::to_json(unf)}};
      if (unf.a1_nonzero && unf.eps_invertible) {
        auto res = nform::blow_up_and_scale(jet, unf.a, unf.eps_map, kappa, gamma);
        j["normal_form"] = io::to_json(res);
      }
      return j;
    });
    summary["a1"] = nf_art["unfolding"]["a"][0];
    summary["a1_nonzero"] = nf_art["unfolding"]["a1_nonzero"];
    summary["eps_invertible"] = nf_art["unfolding"]["eps_invertible"];
    summary["branch_coef"] = nf_art["unfolding"]["branch_coef"];
    if (nf_art.contains("normal_form")) {
      summary["lambda_nf"] = nf_art["normal_form"]["lambda_nf"];
      summary["nu_nf"] = nf_art["normal_form"]["nu_nf"];
      summary["remainder_norm"] = nf_art["normal_form"]["remainder_norm"];
    } else {
      summary["lambda_nf"] = nullptr;
      summary["nu_nf"] = nullptr;
    }

    // saddle-focus scan over the unfolding family
    bool generic = summary["a1_nonzero"].get<bool>() && summary["eps_invertible"].get<bool>();
    if (!generic)
      throw NumericalError(
          "scan: the unfolding is degenerate (a1 = 0 or parameter map singular)");
    auto a = io::a_coeffs_from_json(nf_art["unfolding"], "/unfolding");
    json scan_deps{{"normal_form", io::content_hash(nf_art)},
                   {"lambda", scan_lambda},
                   {"nu", scan_nu},
                   {"kappa", scan_kappa},
                   {"T", scan_T},
                   {"dt", scan_dt},
                   {"seed", seed}};
    json scan_art = run_stage("scan", "06_scan.json", scan_deps, [&]() -> json {
      dynsim::SimConfig cfg;
      cfg.T = scan_T;
      cfg.dt = scan_dt;
      cfg.seed = seed;
      auto rep = dynsim::shilnikov_scan(a, scan_lambda, scan_nu, scan_kappa, cfg);
      return io::scan_to_json(rep);
    });
    summary["lambda_nf_grid"] = scan_art["lambda_grid"];
    summary["nu_nf_grid"] = scan_art["nu_grid"];
    summary["kappa_grid"] = scan_art["kappa_grid"];
    json table = json::array();
    for (const auto& idx : scan_art["ranked"]) {
      const json& p = scan_art["points"][idx.get<std::size_t>()];
      if (p["skipped"].get<bool>()) continue;
      table.push_back(json{{"lambda", p["lambda"]},
                           {"nu", p["nu"]},
                           {"kappa", p["kappa"]},
                           {"lyapunov", p["lyapunov"]},
                           {"lyap_valid", p["lyap_valid"]},
                           {"saddle_focus", p["saddle_focus"]},
                           {"ratio_flag", p["ratio_flag"]},
                           {"score", p["score"]}});
      if (table.size() >= 10) break;
    }
    summary["lyapunov_table"] = table;
  } catch (const std::exception& e) {
    finish(false, e.what());
    throw;
  }

  finish(true, "");
  return summary;
}

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"coupling synthesis, center-manifold reduction and chaos scan toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--out", g.out, "output directory for artifacts")->capture_default_str();
  app.add_option("--format", g.format, "artifact format: json, or csv to add tables")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app.add_option("--seed", g.seed, "seed for every random choice")->capture_default_str();
  app.add_option("--tol-zero-eig", g.tol.zero_eig, "zero-eigenvalue threshold");
  app.add_option("--tol-gap", g.tol.gap, "simplicity gap threshold");
  app.add_option("--tol-posdef-margin", g.tol.posdef_margin, "positive-definiteness margin");
  app.add_option("--tol-iter-eps", g.tol.iter_eps, "iteration convergence threshold");
  app.add_option("--tol-ode", g.tol_ode, "adaptive integrator error target");

  auto* graph_cmd = app.add_subcommand("graph", "graph generation and versatility checks");
  graph_cmd->require_subcommand(1);
  graph_cmd->fallthrough();
  GraphGenOpts gg;
  auto* graph_gen = graph_cmd->add_subcommand("gen", "generate a graph");
  graph_gen->fallthrough();
  graph_gen->add_option("--kind", gg.kind, "star, er, or two-component")->required();
  graph_gen->add_option("--leaves", gg.leaves, "star leaves")->capture_default_str();
  graph_gen->add_option("--nodes", gg.nodes, "er node count")->capture_default_str();
  graph_gen->add_option("--p", gg.p, "er edge probability")->capture_default_str();
  graph_gen->add_option("--s", gg.s, "first component size")->capture_default_str();
  graph_gen->add_option("--t", gg.t, "second component size")->capture_default_str();
  graph_gen->callback([&]() { run_graph_gen(g, gg); });

  GraphCheckOpts gc;
  auto* graph_check = graph_cmd->add_subcommand("check", "versatility report");
  graph_check->fallthrough();
  graph_check->add_option("--input", gc.input, "graph JSON file")->required();
  graph_check->add_option("--rho", gc.rho, "power sums checked up to rho+1")->required();
  graph_check->add_option("--which", gc.which, "ascending eigenvalue index (default largest)");
  graph_check->callback([&]() { run_graph_check(g, gc); });

  auto* couple_cmd = app.add_subcommand("couple", "coupling matrix synthesis");
  couple_cmd->require_subcommand(1);
  couple_cmd->fallthrough();
  CoupleSynthOpts cs;
  auto* couple_synth = couple_cmd->add_subcommand("synth", "synthesize D from A");
  couple_synth->fallthrough();
  couple_synth->add_option("--A", cs.a_file, "matrix JSON file")->required();
  couple_synth->add_option("--m", cs.m, "number of skew directions");
  couple_synth->add_option("--X", cs.x_file, "orthonormal directions JSON file");
  couple_synth->add_option("--c", cs.c, "complement gain (default: smallest admissible)")
      ->each([&](const std::string&) { cs.has_c = true; });
  couple_synth
      ->add_option("--single-chain", cs.single_chain,
                   "perturbation size collapsing a geometric kernel to one Jordan chain")
      ->each([&](const std::string&) { cs.has_single_chain = true; });
  couple_synth->callback([&]() { run_couple_synth(g, cs); });

  CoupleSweepOpts cw;
  auto* couple_sweep = couple_cmd->add_subcommand("sweep", "eigenvalues of A - beta D");
  couple_sweep->fallthrough();
  couple_sweep->add_option("--A", cw.a_file, "matrix JSON file")->required();
  couple_sweep->add_option("--D", cw.d_file, "coupling JSON file")->required();
  couple_sweep->add_option("--beta-min", cw.beta_min)->capture_default_str();
  couple_sweep->add_option("--beta-max", cw.beta_max)->capture_default_str();
  couple_sweep->add_option("--step", cw.step)->capture_default_str();
  couple_sweep->callback([&]() { run_couple_sweep(g, cw); });

  auto* net_cmd = app.add_subcommand("net", "network linearization");
  net_cmd->require_subcommand(1);
  net_cmd->fallthrough();
  NetOpts ns;
  auto* net_spectrum = net_cmd->add_subcommand("spectrum", "per-channel block spectra");
  net_spectrum->fallthrough();
  net_spectrum->add_option("--A", ns.a_file, "matrix JSON file");
  net_spectrum->add_option("--D", ns.d_file, "coupling matrix JSON file");
  net_spectrum->add_option("--design", ns.design_file, "coupling design JSON file");
  net_spectrum->add_option("--graph", ns.graph_file, "graph JSON file")->required();
  net_spectrum->add_option("--alpha", ns.alpha, "coupling strength (default alpha*)")
      ->each([&](const std::string&) { ns.has_alpha = true; });
  net_spectrum->add_option("--which", ns.which, "distinguished eigenvalue index");
  net_spectrum->callback([&]() { run_net_spectrum(g, ns); });

  NetOpts nl;
  auto* net_split = net_cmd->add_subcommand("split", "center/hyperbolic splitting");
  net_split->fallthrough();
  net_split->add_option("--A", nl.a_file, "matrix JSON file");
  net_split->add_option("--D", nl.d_file, "coupling matrix JSON file");
  net_split->add_option("--design", nl.design_file, "coupling design JSON file");
  net_split->add_option("--graph", nl.graph_file, "graph JSON file")->required();
  net_split->add_option("--which", nl.which, "distinguished eigenvalue index");
  net_split->callback([&]() { run_net_split(g, nl); });

  auto* cm_cmd = app.add_subcommand("cm", "center-manifold reduction");
  cm_cmd->require_subcommand(1);
  cm_cmd->fallthrough();
  CmOpts cr;
  auto* cm_reduce = cm_cmd->add_subcommand("reduce", "reduce a node nonlinearity");
  cm_reduce->fallthrough();
  cm_reduce->add_option("--A", cr.a_file, "matrix JSON file");
  cm_reduce->add_option("--D", cr.d_file, "coupling matrix JSON file");
  cm_reduce->add_option("--design", cr.design_file, "coupling design JSON file");
  cm_reduce->add_option("--graph", cr.graph_file, "graph JSON file")->required();
  cm_reduce->add_option("--nonlin", cr.h_file, "node nonlinearity JSON file")->required();
  cm_reduce->add_option("--rho", cr.rho, "reduction order")->capture_default_str();
  cm_reduce->add_option("--which", cr.which, "distinguished eigenvalue index");
  cm_reduce->callback([&]() { run_cm_reduce(g, cr); });

  CmOpts cd;
  auto* cm_design = cm_cmd->add_subcommand("design", "invert the reduction for a target");
  cm_design->fallthrough();
  cm_design->add_option("--A", cd.a_file, "matrix JSON file");
  cm_design->add_option("--D", cd.d_file, "coupling matrix JSON file");
  cm_design->add_option("--design", cd.design_file, "coupling design JSON file");
  cm_design->add_option("--graph", cd.graph_file, "graph JSON file")->required();
  cm_design->add_option("--target", cd.target_file, "target reduced field JSON file")->required();
  cm_design->add_option("--rho", cd.rho, "matching order")->capture_default_str();
  cm_design->add_option("--which", cd.which, "distinguished eigenvalue index");
  cm_design->callback([&]() { run_cm_design(g, cd); });

  auto* nf_cmd = app.add_subcommand("nf", "normal-form chain");
  nf_cmd->require_subcommand(1);
  nf_cmd->fallthrough();
  NfOpts nf;
  auto* nf_reduce = nf_cmd->add_subcommand("reduce", "frame, shears, unfolding, blow-up");
  nf_reduce->fallthrough();
  nf_reduce->add_option("--input", nf.input, "three-state jet JSON file")->required();
  nf_reduce->add_option("--kappa", nf.kappa, "blow-up parameter (enables the blow-up)")
      ->each([&](const std::string&) { nf.has_kappa = true; });
  nf_reduce->add_option("--gamma", nf.gamma, "ray coefficients g1,g2,g3 (g2 < 0)")
      ->capture_default_str();
  nf_reduce->callback([&]() { run_nf_reduce(g, nf); });

  auto* sim_cmd = app.add_subcommand("sim", "simulation and diagnostics");
  sim_cmd->require_subcommand(1);
  sim_cmd->fallthrough();

  auto add_sim_options = [&](CLI::App* sub, SimOpts& so, bool needs_alpha) {
    sub->fallthrough();
    sub->add_option("--A", so.a_file, "matrix JSON file");
    sub->add_option("--D", so.d_file, "coupling matrix JSON file");
    sub->add_option("--design", so.design_file, "coupling design JSON file");
    sub->add_option("--graph", so.graph_file, "graph JSON file")->required();
    sub->add_option("--nonlin", so.h_file, "node nonlinearity JSON file");
    auto* a = sub->add_option("--alpha", so.alpha, "coupling strength");
    if (needs_alpha) a->required();
    sub->add_option("--x0", so.x0_file, "initial state JSON file (default: seeded random)");
    sub->add_option("--eps", so.eps_csv, "comma-separated parameter values");
    sub->add_option("--T", so.T, "horizon")->capture_default_str();
    sub->add_option("--dt", so.dt, "time step")->capture_default_str();
    sub->add_option("--method", so.method, "rk4 or dp54")->capture_default_str();
    sub->add_option("--renorm", so.renorm, "steps between renormalizations")
        ->capture_default_str();
    sub->add_option("--amp", so.amp, "random initial state amplitude")->capture_default_str();
  };

  SimOpts sr;
  auto* sim_run = sim_cmd->add_subcommand("run", "integrate the coupled network");
  add_sim_options(sim_run, sr, true);
  sim_run->callback([&]() { run_sim_run(g, sr); });

  SimOpts sl;
  auto* sim_lyap = sim_cmd->add_subcommand("lyap", "largest Lyapunov exponent");
  add_sim_options(sim_lyap, sl, true);
  sim_lyap->callback([&]() { run_sim_lyap(g, sl); });

  ScanOpts sc;
  auto* sim_scan = sim_cmd->add_subcommand("scan", "saddle-focus candidate scan");
  sim_scan->fallthrough();
  sim_scan->add_option("--a", sc.a_file, "unfolding coefficients JSON file (default: model)");
  sim_scan->add_option("--lambda-min", sc.lambda_min)->capture_default_str();
  sim_scan->add_option("--lambda-max", sc.lambda_max)->capture_default_str();
  sim_scan->add_option("--lambda-steps", sc.lambda_steps)->capture_default_str();
  sim_scan->add_option("--nu-min", sc.nu_min)->capture_default_str();
  sim_scan->add_option("--nu-max", sc.nu_max)->capture_default_str();
  sim_scan->add_option("--nu-steps", sc.nu_steps)->capture_default_str();
  sim_scan->add_option("--kappa", sc.kappas, "blow-up parameters (repeatable)")
      ->capture_default_str();
  sim_scan->add_option("--T", sc.T, "shot horizon")->capture_default_str();
  sim_scan->add_option("--dt", sc.dt, "time step")->capture_default_str();
  sim_scan->callback([&]() { run_sim_scan(g, sc); });

  auto* pipe_cmd = app.add_subcommand("pipeline", "end-to-end runs");
  pipe_cmd->require_subcommand(1);
  pipe_cmd->fallthrough();
  std::string manifest_path;
  auto* pipe_run = pipe_cmd->add_subcommand("run", "run every stage from a manifest");
  pipe_run->fallthrough();
  pipe_run->add_option("--manifest", manifest_path, "manifest JSON file")->required();
  pipe_run->callback([&]() {
    json manifest = io::read_json_file(manifest_path);
    json summary = run_pipeline(manifest, g.out);
    print_summary(summary);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("nilnet");
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace nilnet::cli

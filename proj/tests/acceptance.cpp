// End-to-end gate for the toolkit: ten checks covering coupling synthesis,
// the beta sweep, graph certificates, block spectra, center-manifold
// reduction, the normal-form chain, integration quality, and the chaos scan.
// One verdict line is printed per check; the exit code is the failure count.

#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nilnet/cli.hpp"
#include "nilnet/cmred.hpp"
#include "nilnet/coupling.hpp"
#include "nilnet/dynsim.hpp"
#include "nilnet/graphlab.hpp"
#include "nilnet/io.hpp"
#include "nilnet/netlin.hpp"
#include "nilnet/nform.hpp"
#include "oracles.hpp"

using namespace nilnet;
using cmred::MultiIndex;
using cmred::PolyField;
using graphlab::Graph;
using numkit::Matrix;

namespace {

struct Gate {
  bool ok = true;
  std::string fail;
  std::string note;

  void require(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (!fail.empty()) fail += "; ";
    fail += what;
  }
};

double now_minus(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(5);
  ss << v;
  return ss.str();
}

Matrix worked_A() {
  return Matrix{{1, 1, 0, 0},
                {-1, 1, 1, 0},
                {0, -1, 1, 16.94},
                {1, -4.24, -4.24, -17.94}};
}

Matrix axes_X() { return Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, 0}}; }

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> g(0.0, s);
  Matrix M(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) M(i, j) = g(rng);
  return M;
}

Vec random_vec(std::size_t n, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> g(0.0, s);
  Vec v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

PolyField random_field(std::size_t n, std::size_t d, std::size_t target, std::size_t lo,
                       std::size_t hi, std::size_t order, std::mt19937_64& rng) {
  PolyField f(n, d, target, order);
  for (std::size_t deg = lo; deg <= hi; ++deg)
    for (const auto& e : cmred::homogeneous_exponents(n + d, deg)) {
      if (f.state_degree(e) == 0) continue;
      f.add_term(e, random_vec(target, rng, 0.5));
    }
  return f;
}

double power_sum(const Vec& v, unsigned p) {
  double s = 0.0;
  for (double x : v) {
    double t = 1.0;
    for (unsigned k = 0; k < p; ++k) t *= x;
    s += t;
  }
  return s;
}

double vec_diff(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class F>
Vec rk4_step(F&& f, const Vec& x, double dt) {
  const std::size_t n = x.size();
  Vec k1 = f(x), y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * dt * k1[i];
  Vec k2 = f(y);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * dt * k2[i];
  Vec k3 = f(y);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + dt * k3[i];
  Vec k4 = f(y);
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

double lsq_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return num / den;
}

// ER graph plus a spanning path so the result is connected.
Graph random_connected(std::size_t n, std::uint64_t seed) {
  Graph g = graphlab::gen_erdos_renyi(n, 0.5, seed);
  auto edges = g.edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return graphlab::make_graph(n, edges);
}

std::vector<double> laplacian_descending(const Graph& g) {
  auto spec = graphlab::laplacian_spectrum(g);
  std::vector<double> vals;
  for (const auto& z : spec.values) vals.push_back(z.real());
  std::sort(vals.rbegin(), vals.rend());
  return vals;
}

// --- criterion 1: coupling synthesis on the 4x4 worked example ---
Gate criterion1() {
  Gate g;
  auto t0 = std::chrono::steady_clock::now();
  Matrix A = worked_A();
  auto cert = coupling::make_certificate(A, axes_X());
  auto design = coupling::synthesize_D(A, cert);

  g.require(design.m == 3, "m != 3");
  g.require(design.P.max_abs() <= 1e-9, "P is not zero");
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      g.require(std::abs(design.D(i, j) - A(i, j)) <= 1e-12,
                "D does not copy the first three columns of A");
  g.require(design.c >= 9.14 && design.c <= 9.34,
            "minimal c = " + fmt(design.c) + " outside [9.14, 9.34]");

  Matrix K = A;
  K -= design.D;
  auto spec = numkit::eigendecompose(K, false);
  int zeros = 0, shifted = 0;
  double want = -17.94 - design.c;
  for (const auto& z : spec.values) {
    if (std::abs(z) <= 1e-6) ++zeros;
    if (std::abs(z - std::complex<double>(want, 0.0)) <= 1e-6) ++shifted;
  }
  g.require(zeros == 3, "kernel of A - D is not triple");
  g.require(shifted == 1, "fourth eigenvalue is not -17.94 - c");

  double dt = now_minus(t0);
  g.require(dt < 1.0, "runtime " + fmt(dt) + " s exceeds 1 s");
  g.note = "c = " + fmt(design.c) + ", " + fmt(dt) + " s";
  return g;
}

// --- criterion 2: beta sweep of the gain-21 design ---
Gate criterion2() {
  Gate g;
  auto t0 = std::chrono::steady_clock::now();
  Matrix A = worked_A();
  auto design = coupling::synthesize_D(A, coupling::make_certificate(A, axes_X()), 21.0);

  Vec grid;
  for (std::size_t k = 0; k <= 1000; ++k)
    grid.push_back(k == 1000 ? 1.0 : static_cast<double>(k) * 1e-3);
  auto sweep = coupling::beta_sweep(A, design.D, grid);

  bool complex_cross = false, real_cross = false;
  for (const auto& ev : sweep.events) {
    if (ev.type == coupling::SweepEventType::complex_pair_crossing && ev.beta > 0.0 &&
        ev.beta < 0.5)
      complex_cross = true;
    if (ev.type == coupling::SweepEventType::real_axis_crossing && ev.beta > 0.0 &&
        ev.beta < 1.0)
      real_cross = true;
  }
  g.require(complex_cross, "no complex-pair crossing in (0, 0.5)");
  g.require(real_cross, "no real-axis crossing in (0, 1)");

  Matrix half = A;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) half(i, j) -= 0.5 * design.D(i, j);
  int unstable = 0;
  for (const auto& z : numkit::eigendecompose(half, false).values)
    if (z.real() > 0.0) ++unstable;
  g.require(unstable == 3, "expected 3 unstable eigenvalues at beta = 0.5, got " +
                               std::to_string(unstable));

  Matrix K = A;
  K -= design.D;
  int zeros = 0;
  for (const auto& z : numkit::eigendecompose(K, false).values)
    if (std::abs(z) <= 1e-6) ++zeros;
  g.require(zeros == 3, "no triple zero at beta = 1");

  double dt = now_minus(t0);
  g.require(dt < 10.0, "runtime " + fmt(dt) + " s exceeds 10 s");
  g.note = std::to_string(sweep.events.size()) + " events, " + fmt(dt) + " s";
  return g;
}

// --- criterion 3: the four small complement graphs and their verdicts ---
Gate criterion3() {
  Gate g;
  using graphlab::complement;
  using graphlab::make_graph;

  struct Example {
    Graph graph;
    std::vector<double> spectrum;
  };
  std::vector<Example> ex;
  ex.push_back({complement(make_graph(3, {{0, 1}})), {3, 1, 0}});
  ex.push_back({complement(make_graph(4, {{0, 1}, {2, 3}})), {4, 2, 2, 0}});
  ex.push_back({complement(make_graph(5, {{0, 1}, {1, 2}, {3, 4}})), {5, 4, 3, 2, 0}});
  ex.push_back({complement(make_graph(6, {{0, 1}, {1, 2}, {3, 4}})), {6, 6, 5, 4, 3, 0}});

  for (std::size_t k = 0; k < ex.size(); ++k) {
    auto vals = laplacian_descending(ex[k].graph);
    for (std::size_t i = 0; i < vals.size(); ++i)
      g.require(std::abs(vals[i] - ex[k].spectrum[i]) <= 1e-8,
                "spectrum mismatch on example " + std::to_string(k + 1));
  }

  auto r1 = graphlab::check_versatile(ex[0].graph, 3);
  g.require(r1.verdict, "3-node example should be versatile");
  auto r2 = graphlab::check_versatile(ex[1].graph, 2);
  g.require(!r2.verdict && r2.simple && r2.failed_ell && *r2.failed_ell == 3,
            "equal components should fail with a vanishing cubic sum");
  auto r3 = graphlab::check_versatile(ex[2].graph, 3);
  g.require(r3.verdict, "5-node example should be versatile");
  auto r4 = graphlab::check_versatile(ex[3].graph, 2);
  g.require(!r4.verdict && !r4.simple,
            "three components should fail with a repeated eigenvalue");

  g.note = "4 spectra, 2 versatile + 2 rejections";
  return g;
}

// --- criterion 4: random two-component designs ---
Gate criterion4() {
  Gate g;
  std::mt19937_64 rng(2024);
  int built = 0;
  while (built < 200 && g.ok) {
    std::size_t s = 1 + rng() % 8, t = 1 + rng() % 8;
    if (s == t) continue;
    auto res = graphlab::gen_two_component_versatile(s, t, random_connected(s, rng()),
                                                     random_connected(t, rng()));
    std::size_t n = s + t;
    auto spec = graphlab::laplacian_spectrum(res.graph);
    double lam = spec.values[n - 1].real();
    g.require(std::abs(lam - static_cast<double>(n)) <= 1e-8, "largest eigenvalue is not s+t");
    if (n >= 2)
      g.require(std::abs(spec.values[n - 2].real() - lam) > 1e-6,
                "largest eigenvalue is not simple");

    // eigenvector pattern: +t on the first block, -s on the second, up to sign
    Vec v = spec.vectors.col(n - 1);
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    double mx = static_cast<double>(std::max(s, t));
    double dplus = 0.0, dminus = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double want = (i < s ? static_cast<double>(t) : -static_cast<double>(s)) / mx;
      dplus = std::max(dplus, std::abs(v[i] / scale - want));
      dminus = std::max(dminus, std::abs(v[i] / scale + want));
    }
    g.require(std::min(dplus, dminus) <= 1e-8, "eigenvector pattern mismatch");

    auto rep = graphlab::check_versatile(res.graph, 10);
    g.require(rep.verdict, "two-component graph fails the order-10 versatility check");
    ++built;
  }
  g.note = std::to_string(built) + " graphs";
  return g;
}

// --- criterion 5: hub graphs and the spectral gap bound ---
Gate criterion5() {
  Gate g;
  struct Config {
    std::size_t N, r, C;
  };
  std::vector<Config> configs{{27, 3, 12}, {27, 3, 14}, {27, 2, 8},  {27, 2, 12}, {8, 1, 8},
                              {8, 1, 4},   {8, 1, 6},   {64, 4, 20}, {64, 4, 24}, {64, 3, 15}};
  int built = 0;
  for (const auto& cfg : configs) {
    for (std::uint64_t seed = 1; seed <= 5 && g.ok; ++seed) {
      Graph graph = graphlab::gen_hub_graph(cfg.N, cfg.r, cfg.C, seed);
      auto spec = graphlab::laplacian_spectrum(graph);
      std::size_t n = graph.n;
      double lam = spec.values[n - 1].real();
      g.require(lam >= static_cast<double>(cfg.C + 1) - 1e-8,
                "largest eigenvalue below C + 1");
      g.require(std::abs(spec.values[n - 2].real() - lam) > 1e-8,
                "largest eigenvalue is not simple");
      auto gb = graphlab::spectral_gap_bound(graph);
      double want =
          std::min((2.0 * cfg.r + 1.0) / (cfg.C + 1.0), 3.0 * cfg.r / static_cast<double>(cfg.C));
      g.require(std::abs(gb.bound - want) <= 1e-12, "bound formula mismatch");
      g.require(gb.ratio <= gb.bound + 1e-12, "gap ratio exceeds the bound");
      ++built;
    }
  }
  g.note = std::to_string(built) + " graphs";
  return g;
}

// --- criterion 6: block spectra against the full linearization ---
Gate criterion6() {
  Gate g;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0.1, 0.6);
  for (int trial = 0; trial < 100 && g.ok; ++trial) {
    std::size_t N = 2 + rng() % 4, n = 2 + rng() % 3;
    netlin::NetworkDesign net;
    net.graph = graphlab::gen_erdos_renyi(N, 0.6, rng());
    net.A = random_matrix(n, n, rng);
    net.D = random_matrix(n, n, rng);
    double alpha = U(rng);

    auto blocks = netlin::block_spectrum(net, alpha);
    std::vector<std::complex<double>> flat;
    for (const auto& b : blocks)
      for (auto z : b.spec.values) flat.push_back(z);
    auto full = numkit::eigendecompose(netlin::assemble_linearization(net, alpha), false);
    double dist = oracles::multiset_distance(flat, full.values);
    g.require(dist <= 1e-8, "block/full spectrum distance " + fmt(dist));
  }
  g.note = "100 random networks";
  return g;
}

// Center coordinate extractor for a full network state (row per center dim).
Matrix center_rows(const netlin::NetworkDesign& net, const netlin::CenterSplit& split) {
  std::size_t nloc = net.A.rows(), m = split.Ec_basis.cols();
  Matrix Z(nloc, nloc);
  for (std::size_t i = 0; i < nloc; ++i) {
    for (std::size_t j = 0; j < m; ++j) Z(i, j) = split.Ec_basis(i, j);
    for (std::size_t j = m; j < nloc; ++j) Z(i, j) = split.Eh_basis(i, j - m);
  }
  Matrix Zinv = numkit::inverse(Z);
  Matrix W(m, nloc * net.graph.n);
  for (std::size_t p = 0; p < net.graph.n; ++p)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < nloc; ++i) W(j, p * nloc + i) = net.v[p] * Zinv(j, i);
  return W;
}

// Full-network vector field J x + blkdiag(h(x_p)) for a parameter-free h.
struct NetField {
  Matrix J;
  std::vector<std::pair<MultiIndex, Vec>> hterms;
  std::size_t nloc = 0, nodes = 0;

  NetField(const netlin::NetworkDesign& net, const PolyField& h)
      : J(netlin::assemble_linearization(net, net.alpha_star)), nloc(h.n()), nodes(net.graph.n) {
    for (const auto& [e, c] : h.terms()) hterms.emplace_back(e, c);
  }

  Vec operator()(const Vec& x) const {
    Vec out = J.apply(x);
    for (std::size_t p = 0; p < nodes; ++p) {
      const double* xp = x.data() + p * nloc;
      for (const auto& [e, c] : hterms) {
        double mono = 1.0;
        for (std::size_t i = 0; i < nloc; ++i)
          for (unsigned k = 0; k < e[i]; ++k) mono *= xp[i];
        for (std::size_t i = 0; i < nloc; ++i) out[p * nloc + i] += mono * c[i];
      }
    }
    return out;
  }
};

// Ambient graph map y -> v (x) Ec y + psi(y).
PolyField graph_map(const netlin::NetworkDesign& net, const netlin::CenterSplit& split,
                    const cmred::CenterModel& model) {
  std::size_t nloc = net.A.rows(), m = split.Ec_basis.cols();
  Matrix Ec_full(nloc * net.graph.n, m);
  for (std::size_t p = 0; p < net.graph.n; ++p)
    for (std::size_t i = 0; i < nloc; ++i)
      for (std::size_t j = 0; j < m; ++j) Ec_full(p * nloc + i, j) = net.v[p] * split.Ec_basis(i, j);
  return cmred::add(cmred::from_linear(Ec_full, model.psi.d(), model.psi.order()), model.psi);
}

// --- criterion 7: center-manifold reduction ---
Gate criterion7() {
  Gate g;
  std::mt19937_64 rng(23);

  // invariance residual on random dense instances
  for (int trial = 0; trial < 3; ++trial) {
    Matrix S = Matrix::identity(3) + 0.3 * random_matrix(3, 3, rng);
    Matrix J = S * Matrix::diagonal({0.0, -1.3, -2.7}) * numkit::inverse(S);
    auto split = netlin::center_split(J, 1);
    PolyField H = random_field(3, 1, 3, 2, 3, 3, rng);
    auto model = cmred::reduce_dense(J, split, H, 3);
    g.require(model.residual <= 1e-9, "dense reduction residual " + fmt(model.residual));
  }

  auto net = netlin::choose_alpha_star(Matrix{{1, 2}, {-2, -3}}, Matrix{{1, 0}, {-2, 2}},
                                       graphlab::make_graph(3, {{0, 1}, {0, 2}}));
  Matrix K = net.A;
  for (std::size_t i = 0; i < K.rows(); ++i)
    for (std::size_t j = 0; j < K.cols(); ++j) K(i, j) -= net.alpha_star * net.lambda * net.D(i, j);
  auto split = netlin::center_split(K, net.m);

  // network reduction keeps the invariance identity as well
  {
    PolyField h = random_field(2, 1, 2, 2, 3, 3, rng);
    auto model = cmred::reduced_field(net, split, h, 3);
    g.require(model.residual <= 1e-9, "network reduction residual " + fmt(model.residual));
  }

  // second-order reduced term in closed form: power sums of the eigenvector
  // weight the quadratic and parameter-linear parts of h
  {
    PolyField h = random_field(2, 1, 2, 2, 2, 3, rng);
    auto model = cmred::reduced_field(net, split, h, 3);
    double s3 = power_sum(net.v, 3), s2 = power_sum(net.v, 2);
    PolyField h_xx(2, 1, 2, 2), h_xe(2, 1, 2, 2);
    for (const auto& [e, c] : h.terms()) {
      if (h.state_degree(e) == 2) h_xx.add_term(e, c);
      if (h.state_degree(e) == 1) h_xe.add_term(e, c);
    }
    Matrix Wc = center_rows(net, split);
    for (int t = 0; t < 10; ++t) {
      Vec y = random_vec(1, rng, 0.5), ep = random_vec(1, rng, 0.5);
      Vec x = split.Ec_basis.apply(y);
      Vec vxx = h_xx.eval(x, ep), vxe = h_xe.eval(x, ep);
      Vec rhs(2);
      for (std::size_t i = 0; i < 2; ++i) rhs[i] = s3 * vxx[i] + s2 * vxe[i];
      double want = 0.0;
      for (std::size_t i = 0; i < 2; ++i) want += Wc(0, i) / net.v[0] * rhs[i];
      double got = model.reduced.part(2).eval(y, ep)[0];
      g.require(std::abs(got - want) <= 1e-9, "second-order closed form mismatch");
    }
  }

  // inverse design round trip
  {
    PolyField target(1, 1, 1, 3);
    target.add_term({2, 0}, {0.8});
    target.add_term({1, 1}, {-0.6});
    target.add_term({3, 0}, {0.4});
    target.add_term({2, 1}, {0.25});
    PolyField h = cmred::inverse_design(target, net, split, 3);
    auto model = cmred::reduced_field(net, split, h, 3);
    double defect = cmred::max_coeff_difference(model.reduced, target);
    g.require(defect <= 1e-8, "inverse design defect " + fmt(defect));
  }

  // trajectory shadowing: divergence from the reduced flow scales like
  // sigma^(rho + 1), so the log-log slope clears rho + 0.5
  {
    std::mt19937_64 hrng(7);
    Matrix D{{0.4, 0.0}, {-0.8, 1.0}};
    auto fnet = netlin::choose_alpha_star(Matrix{{1, 2}, {-2, -3}}, D,
                                          graphlab::make_graph(3, {{0, 1}, {0, 2}}));
    Matrix Kf = fnet.A;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) Kf(i, j) -= fnet.alpha_star * fnet.lambda * fnet.D(i, j);
    auto fsplit = netlin::center_split(Kf, fnet.m);
    PolyField h = random_field(2, 0, 2, 2, 3, 3, hrng);
    NetField F(fnet, h);
    Matrix W = center_rows(fnet, fsplit);

    auto divergence = [&](const cmred::CenterModel& model, double sigma) {
      PolyField X = graph_map(fnet, fsplit, model);
      Vec x = X.eval({sigma}, {});
      const double dt = 2e-4, T = 1.0;
      double worst = 0.0;
      auto red = [&](const Vec& v) { return Vec{model.reduced.eval(v, {})[0]}; };
      Vec yv{sigma};
      for (double t = 0.0; t < T; t += dt) {
        x = rk4_step(F, x, dt);
        yv = rk4_step(red, yv, dt);
        double yext = 0.0;
        for (std::size_t i = 0; i < 6; ++i) yext += W(0, i) * x[i];
        worst = std::max(worst, std::abs(yext - yv[0]));
      }
      return worst;
    };
    auto slope_of = [&](const cmred::CenterModel& model, const std::vector<double>& sigmas) {
      std::vector<double> ls, ld;
      for (double s : sigmas) {
        ls.push_back(std::log(s));
        ld.push_back(std::log(divergence(model, s)));
      }
      return lsq_slope(ls, ld);
    };

    auto m2 = cmred::reduced_field(fnet, fsplit, h, 2);
    double s2 = slope_of(m2, {1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4});
    g.require(s2 >= 2.5, "shadowing slope at order 2 is " + fmt(s2));
    auto m3 = cmred::reduced_field(fnet, fsplit, h, 3);
    double s3 = slope_of(m3, {1e-1, 3.16e-2, 1e-2, 3.16e-3});
    g.require(s3 >= 3.5, "shadowing slope at order 3 is " + fmt(s3));
    g.note = "slopes " + fmt(s2) + " / " + fmt(s3);
  }
  return g;
}

// --- criterion 8: normal-form chain ---
Gate criterion8() {
  Gate g;
  Matrix companion{{0, 1, 0}, {0, 0, 1}, {0, 0, 0}};

  // a jet whose lower components are already clean passes the shears untouched
  {
    PolyField f = cmred::from_linear(companion, 3, 3).with_order(3);
    f.add_term(MultiIndex{2, 0, 0, 0, 0, 0}, Vec{0.0, 0.0, 0.9});
    f.add_term(MultiIndex{1, 0, 0, 0, 1, 0}, Vec{0.0, 0.0, -0.4});
    auto out = nform::eliminate_lower(nform::make_jet(f));
    g.require(cmred::max_coeff_difference(out.field, f) == 0.0,
              "clean jet was modified by the shears");
  }

  // full chain conjugacy: blown-up flow matches the source flow through the
  // recorded state/time scalings
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  {
    PolyField f = cmred::from_linear(companion, 3, 3).with_order(3);
    Matrix E = Matrix::identity(3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) E(i, j) += 0.3 * U(rng);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        MultiIndex e(6, 0);
        e[i] = 1;
        e[3 + j] = 1;
        f.add_term(e, Vec{0.0, 0.0, E(i, j)});
      }
    f.add_term(MultiIndex{2, 0, 0, 0, 0, 0}, Vec{0.0, 0.0, 0.9});
    f.add_term(MultiIndex{1, 1, 0, 0, 0, 0}, Vec{0.0, 0.0, 0.5});
    f.add_term(MultiIndex{0, 0, 2, 0, 0, 0}, Vec{0.0, 0.0, -0.4});
    f.add_term(MultiIndex{3, 0, 0, 0, 0, 0}, Vec{0.0, 0.0, 0.25});

    auto jet = nform::make_jet(f);
    auto u = nform::extract_unfolding(jet);
    g.require(u.a1_nonzero && u.eps_invertible, "unfolding is degenerate");
    auto res = nform::blow_up_and_scale(jet, u.a, u.eps_map, 0.2, {0.6, -1.0, 0.3});
    g.require(res.lambda_nf >= 0.0, "negative unfolding parameter");

    Vec eps = res.eps_source;
    Vec x{0.2, 0.1, -0.1}, z(3);
    for (std::size_t i = 0; i < 3; ++i) z[i] = (x[i] - res.state_offset[i]) / res.state_scale[i];
    double dtau = 5e-4, worst = 0.0;
    auto fx = [&](const Vec& p) { return res.field.eval(p, {}); };
    auto fz = [&](const Vec& p) { return f.eval(p, eps); };
    for (int k = 0; k < 1000; ++k) {
      x = rk4_step(fx, x, dtau);
      z = rk4_step(fz, z, dtau / res.time_scale);
      Vec mapped(3);
      for (std::size_t i = 0; i < 3; ++i) mapped[i] = res.state_scale[i] * z[i] + res.state_offset[i];
      worst = std::max(worst, vec_diff(mapped, x));
    }
    g.require(worst <= 1e-7, "chain conjugacy defect " + fmt(worst));
    g.note = "conjugacy defect " + fmt(worst);
  }

  // lambda_nf is a square times a positive power and can never go negative
  for (int trial = 0; trial < 5; ++trial) {
    PolyField f = cmred::from_linear(companion, 3, 3).with_order(3);
    Matrix E = Matrix::identity(3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) E(i, j) += 0.2 * U(rng);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        MultiIndex e(6, 0);
        e[i] = 1;
        e[3 + j] = 1;
        f.add_term(e, Vec{0.0, 0.0, E(i, j)});
      }
    f.add_term(MultiIndex{2, 0, 0, 0, 0, 0}, Vec{0.0, 0.0, 0.5 + 0.4 * U(rng)});
    f.add_term(MultiIndex{1, 1, 0, 0, 0, 0}, Vec{0.0, 0.0, U(rng)});
    auto jet = nform::make_jet(f);
    auto u = nform::extract_unfolding(jet);
    if (!u.a1_nonzero || !u.eps_invertible) continue;
    std::array<double, 3> gamma{U(rng), -0.4 - std::abs(U(rng)), U(rng)};
    auto res = nform::blow_up_and_scale(jet, u.a, u.eps_map, 0.1 + 0.2 * std::abs(U(rng)), gamma);
    g.require(res.lambda_nf >= 0.0, "negative unfolding parameter on random jet");
  }

  // fixed points of the cubic field at nu = 0
  {
    auto pair = nform::nf_fixed_points(0.5, 0.0);
    g.require(pair.p1.point[0] == -1.0 && pair.p2.point[0] == 1.0,
              "fixed points differ from the closed form at lambda = 0.5");
    g.require(pair.p1.n_stable == 2 && pair.p1.n_unstable == 1,
              "p1 is not a 2/1 stable/unstable split");
    auto pair2 = nform::nf_fixed_points(2.0, 0.0);
    g.require(pair2.p1.point[0] == -2.0 && pair2.p2.point[0] == 2.0,
              "fixed points differ from the closed form at lambda = 2");
    g.require(pair2.p1.n_stable == 2 && pair2.p1.n_unstable == 1,
              "p1 split lost away from lambda = 0.5");
  }
  return g;
}

// --- criterion 9: integrator order, Lyapunov estimates, synchronization ---
Gate criterion9() {
  Gate g;

  // fourth-order convergence on the cubic model field
  {
    PolyField field = nform::nf_field(0.5, 0.1);
    Vec x0{-0.9, 0.4, 0.3};
    dynsim::Rhs rhs = [&field](const Vec& x, Vec& dx) { dx = field.eval(x, {}); };
    dynsim::SimConfig fine;
    fine.dt = 1e-5;
    fine.T = 2.0;
    Vec ref = dynsim::integrate(rhs, x0, fine).states.back();
    std::vector<double> hs{4e-2, 2e-2, 1e-2, 5e-3}, lx, ly;
    for (double h : hs) {
      dynsim::SimConfig cfg;
      cfg.dt = h;
      cfg.T = 2.0;
      double err = vec_diff(dynsim::integrate(rhs, x0, cfg).states.back(), ref);
      lx.push_back(std::log(h));
      ly.push_back(std::log(err));
    }
    double slope = lsq_slope(lx, ly);
    g.require(slope >= 3.8, "integrator order slope " + fmt(slope));
    g.note = "order slope " + fmt(slope);
  }

  // largest exponent of linear systems = spectral abscissa
  {
    struct Case {
      Matrix M;
      double want;
    };
    std::vector<Case> cases;
    cases.push_back({Matrix{{0.3, 1.0}, {0.0, -0.2}}, 0.3});
    cases.push_back({Matrix{{-0.5, 0.3}, {0.0, -0.2}}, -0.2});
    cases.push_back({Matrix{{-0.1, 2.0}, {-2.0, -0.1}}, -0.1});
    for (const auto& c : cases) {
      dynsim::Rhs rhs = [&c](const Vec& x, Vec& dx) { dx = c.M.apply(x); };
      dynsim::SimConfig cfg;
      cfg.dt = 1e-2;
      cfg.T = 400.0;
      cfg.seed = 11;
      auto est = dynsim::largest_lyapunov(rhs, Vec(2, 0.0), cfg);
      g.require(std::abs(est.value - c.want) <= 5e-2,
                "exponent " + fmt(est.value) + " vs abscissa " + fmt(c.want));
    }
  }

  // synchronized initial data shadows the isolated node to 1e-10 per 1e4 steps
  {
    auto graph = graphlab::make_graph(3, {{0, 1}, {0, 2}});
    Matrix A{{1, 2}, {-2, -3}}, D{{1, 0}, {-2, 2}};
    PolyField fn = cmred::from_linear(A, 0, 3);
    fn.add_term(MultiIndex{2, 0}, Vec{0.0, 0.4});
    fn.add_term(MultiIndex{1, 1}, Vec{-0.3, 0.0});
    Vec node0{0.05, -0.03}, x0(6);
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t i = 0; i < 2; ++i) x0[p * 2 + i] = node0[i];
    dynsim::SimConfig cfg;
    cfg.T = 10.0;  // 1e4 steps at the default dt
    auto net = dynsim::integrate_network(graph, D, 0.2, fn, x0, cfg);
    auto iso = dynsim::integrate_network(graphlab::make_graph(1, {}), D, 0.0, fn, node0, cfg);
    double drift = 0.0;
    for (std::size_t k = 0; k < net.states.size(); ++k)
      for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t i = 0; i < 2; ++i)
          drift = std::max(drift, std::abs(net.states[k][p * 2 + i] - iso.states[k][i]));
    g.require(drift <= 1e-10, "synchronization drift " + fmt(drift));
  }
  return g;
}

// --- criterion 10: chaos scan completes with a self-consistent report ---
Gate criterion10() {
  Gate g;
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "nilnet_acceptance_scan";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto t0 = std::chrono::steady_clock::now();
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  int rc = cli::dispatch({"--out", dir.string(), "--seed", "3", "sim", "scan",
                          "--lambda-min", "0.05", "--lambda-max", "1.0", "--lambda-steps", "20",
                          "--nu-min", "-0.5", "--nu-max", "0.5", "--nu-steps", "20",
                          "--kappa", "0", "--kappa", "0.05", "--kappa", "0.1"});
  std::cout.rdbuf(old);
  double dt = now_minus(t0);
  g.require(rc == 0, "scan exit code " + std::to_string(rc));
  g.require(dt < 300.0, "runtime " + fmt(dt) + " s exceeds 5 min");
  if (!g.ok) return g;

  io::json rep = io::read_json_file((dir / "scan.json").string());
  g.require(rep["lambda_grid"].size() == 20 && rep["nu_grid"].size() == 20 &&
                rep["kappa_grid"].size() == 3,
            "grid shape mismatch");
  g.require(rep["points"].is_array() && rep["points"].size() == 1200, "expected 1200 points");
  std::size_t evaluated = rep["evaluated"].get<std::size_t>();
  std::size_t skipped = rep["skipped"].get<std::size_t>();
  g.require(evaluated + skipped == 1200, "evaluated + skipped != points");

  const char* number_keys[] = {"lambda", "nu", "kappa", "lyapunov"};
  const char* bool_keys[] = {"skipped", "saddle_focus", "ratio_flag", "returned", "lyap_valid",
                             "lyap_converged"};
  int saddle = 0, ratio = 0;
  for (const auto& p : rep["points"]) {
    for (const char* k : number_keys)
      g.require(p.contains(k) && p[k].is_number(), std::string("missing number field ") + k);
    for (const char* k : bool_keys)
      g.require(p.contains(k) && p[k].is_boolean(), std::string("missing flag ") + k);
    g.require(p["score"].is_number() || p["score"].is_null(), "score is not number-or-null");
    g.require(p["shooting_distance"].is_number() || p["shooting_distance"].is_null(),
              "shooting distance is not number-or-null");
    if (p["skipped"].get<bool>()) continue;

    // flag self-consistency, recomputed from the reported spectrum
    const auto& spec = p["spectrum"];
    g.require(spec.is_array() && spec.size() == 3, "spectrum is not three eigenvalues");
    int stable_complex = 0, unstable = 0;
    for (const auto& z : spec) {
      double re = z[0].get<double>(), im = z[1].get<double>();
      if (re < 0.0 && std::abs(im) > 0.0) ++stable_complex;
      if (re > 0.0) ++unstable;
    }
    bool sf = p["saddle_focus"].get<bool>();
    g.require(sf == (stable_complex == 2 && unstable == 1),
              "saddle-focus flag contradicts the spectrum");
    if (sf) ++saddle;
    if (p["ratio_flag"].get<bool>()) {
      ++ratio;
      g.require(sf, "ratio flag without a saddle focus");
    }
    if (p["returned"].get<bool>())
      g.require(p["shooting_distance"].is_number(), "returned shot without a distance");
  }

  // ranked indices are valid, unique, and sorted by score
  double prev = std::numeric_limits<double>::infinity();
  std::vector<bool> seen(1200, false);
  for (const auto& idx : rep["ranked"]) {
    std::size_t k = idx.get<std::size_t>();
    g.require(k < 1200 && !seen[k], "ranked index invalid or repeated");
    if (k >= 1200) break;
    seen[k] = true;
    const auto& p = rep["points"][k];
    double sc = p["score"].is_null() ? -std::numeric_limits<double>::infinity()
                                     : p["score"].get<double>();
    g.require(sc <= prev + 1e-15, "ranking is not sorted by score");
    prev = sc;
  }

  g.note = std::to_string(evaluated) + " points, " + std::to_string(saddle) + " saddle-focus, " +
           std::to_string(ratio) + " ratio flags, " + fmt(dt) + " s";
  return g;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    Gate (*fn)();
  };
  const Entry entries[] = {
      {"coupling synthesis worked example", criterion1},
      {"beta sweep of the gain-21 design", criterion2},
      {"small graph spectra and verdicts", criterion3},
      {"random two-component designs", criterion4},
      {"hub graphs and the gap bound", criterion5},
      {"block spectra vs full linearization", criterion6},
      {"center-manifold reduction", criterion7},
      {"normal-form chain", criterion8},
      {"integration and exponent estimates", criterion9},
      {"chaos scan report", criterion10},
  };

  int failures = 0;
  int id = 0;
  for (const auto& e : entries) {
    ++id;
    Gate g;
    try {
      g = e.fn();
    } catch (const std::exception& ex) {
      g.ok = false;
      g.fail = std::string("exception: ") + ex.what();
    }
    std::ostringstream line;
    line << "criterion " << id << " (" << e.name << "): " << (g.ok ? "pass" : "FAIL");
    if (g.ok && !g.note.empty()) line << " [" << g.note << "]";
    if (!g.ok) line << " [" << g.fail << "]";
    std::cout << line.str() << "\n";
    if (!g.ok) ++failures;
  }
  return failures;
}

#include "nilnet/graphlab.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace nilnet::graphlab {

namespace {

// Power sums below this (times N, at inf-norm scaling) count as vanishing.
constexpr double kPowerSumFloor = 1e-9;

std::vector<std::size_t> degrees(const Graph& g) {
  std::vector<std::size_t> d(g.n, 0);
  for (auto [i, j] : g.edges) {
    ++d[i];
    ++d[j];
  }
  return d;
}

std::vector<std::vector<std::size_t>> adjacency(const Graph& g) {
  std::vector<std::vector<std::size_t>> adj(g.n);
  for (auto [i, j] : g.edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  return adj;
}

std::vector<std::size_t> component_labels(const Graph& g) {
  auto adj = adjacency(g);
  std::vector<std::size_t> label(g.n, g.n);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < g.n; ++s) {
    if (label[s] != g.n) continue;
    stack.push_back(s);
    label[s] = next;
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w : adj[v]) {
        if (label[w] == g.n) {
          label[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

}  // namespace

Graph make_graph(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges) {
  for (auto& e : edges) {
    if (e.first == e.second) throw ValidationError("graph: self-loop not allowed");
    if (e.first >= n || e.second >= n) throw ValidationError("graph: edge endpoint out of range");
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
    throw ValidationError("graph: duplicate edge");
  return Graph{n, std::move(edges)};
}

Matrix laplacian(const Graph& g) {
  Matrix L = Matrix::zero(g.n, g.n);
  for (auto [i, j] : g.edges) {
    L(i, j) -= 1.0;
    L(j, i) -= 1.0;
    L(i, i) += 1.0;
    L(j, j) += 1.0;
  }
  return L;
}

Spectrum laplacian_spectrum(const Graph& g, const Tolerances& tol) {
  return numkit::eigendecompose(laplacian(g), true, tol);
}

std::size_t component_count(const Graph& g) {
  if (g.n == 0) return 0;
  auto label = component_labels(g);
  return 1 + *std::max_element(label.begin(), label.end());
}

bool is_connected(const Graph& g) { return component_count(g) <= 1; }

Graph complement(const Graph& g) {
  std::vector<std::vector<bool>> has(g.n, std::vector<bool>(g.n, false));
  for (auto [i, j] : g.edges) has[i][j] = true;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = i + 1; j < g.n; ++j)
      if (!has[i][j]) edges.emplace_back(i, j);
  return Graph{g.n, std::move(edges)};
}

Graph disjoint_union(const Graph& a, const Graph& b) {
  Graph out{a.n + b.n, a.edges};
  for (auto [i, j] : b.edges) out.edges.emplace_back(a.n + i, a.n + j);
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

Graph gen_star(std::size_t leaves) {
  Graph g{leaves + 1, {}};
  for (std::size_t i = 1; i <= leaves; ++i) g.edges.emplace_back(0, i);
  return g;
}

Graph gen_erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (p < 0.0 || p > 1.0) throw ValidationError("gen_erdos_renyi: p outside [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Graph g{n, {}};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(rng) < p) g.edges.emplace_back(i, j);
  return g;
}

VersatilityReport check_versatile(const Graph& g, std::size_t rho, const Tolerances& tol,
                                  std::optional<std::size_t> which) {
  if (g.n < 2) throw ValidationError("check_versatile: need at least 2 nodes");
  if (rho == 0) throw ValidationError("check_versatile: rho must be positive");
  VersatilityReport rep;
  rep.rho = rho;
  rep.connected = is_connected(g);

  Spectrum spec = laplacian_spectrum(g, tol);
  std::size_t idx = which ? *which : g.n - 1;
  if (idx >= g.n) throw ValidationError("check_versatile: eigenvalue index out of range");
  rep.eigenvalue = spec.values[idx].real();

  double gap_thr = tol.gap * std::max(1.0, std::abs(rep.eigenvalue));
  rep.simple = true;
  for (std::size_t k = 0; k < g.n; ++k) {
    if (k == idx) continue;
    if (std::abs(spec.values[k].real() - rep.eigenvalue) < gap_thr) rep.simple = false;
  }

  Vec nu = spec.vectors.col(idx);
  double mx = 0.0;
  for (double v : nu) mx = std::max(mx, std::abs(v));
  for (double& v : nu) v /= mx;
  rep.eigenvector = nu;

  rep.power_sums.clear();
  for (std::size_t ell = 2; ell <= rho + 1; ++ell) {
    double s = 0.0;
    for (double v : nu) s += std::pow(v, static_cast<double>(ell));
    rep.power_sums.push_back(s);
    if (!rep.failed_ell && std::abs(s) <= kPowerSumFloor * static_cast<double>(g.n))
      rep.failed_ell = ell;
  }

  rep.verdict = rep.connected && rep.simple && !rep.failed_ell;
  if (!rep.connected)
    rep.reason = "graph is disconnected";
  else if (!rep.simple)
    rep.reason = "selected eigenvalue is not simple";
  else if (rep.failed_ell)
    rep.reason = "eigenvector power sum vanishes at exponent " + std::to_string(*rep.failed_ell);
  return rep;
}

TwoComponentResult gen_two_component_versatile(std::size_t s, std::size_t t,
                                               const Graph& inner_s, const Graph& inner_t,
                                               const Tolerances& tol) {
  if (s == 0 || t == 0) throw ValidationError("two-component generator: empty component");
  if (s == t) throw ValidationError("two-component generator: components must differ in size");
  if (inner_s.n != s || inner_t.n != t)
    throw ValidationError("two-component generator: inner graph size mismatch");
  if (!is_connected(inner_s) || !is_connected(inner_t))
    throw ValidationError("two-component generator: inner graphs must be connected");

  TwoComponentResult out;
  out.graph = complement(disjoint_union(inner_s, inner_t));
  out.eigenvalue = static_cast<double>(s + t);
  out.eigenvector.assign(s + t, 0.0);
  for (std::size_t i = 0; i < s; ++i) out.eigenvector[i] = static_cast<double>(t);
  for (std::size_t i = s; i < s + t; ++i) out.eigenvector[i] = -static_cast<double>(s);

  // Verify the prediction on the assembled graph before handing it out.
  std::size_t n = s + t;
  Spectrum spec = laplacian_spectrum(out.graph, tol);
  double lam = spec.values[n - 1].real();
  if (std::abs(lam - out.eigenvalue) > 1e-8 * static_cast<double>(n))
    throw NumericalError("two-component generator: largest eigenvalue is not s+t");
  double gap_thr = tol.gap * std::max(1.0, lam);
  if (std::abs(spec.values[n - 2].real() - lam) < gap_thr)
    throw NumericalError("two-component generator: largest eigenvalue is not simple");
  Vec v = spec.vectors.col(n - 1);
  double scale = 0.0, pat_mx = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  for (double x : out.eigenvector) pat_mx = std::max(pat_mx, std::abs(x));
  double dplus = 0.0, dminus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double vi = v[i] / scale, pi = out.eigenvector[i] / pat_mx;
    dplus = std::max(dplus, std::abs(vi - pi));
    dminus = std::max(dminus, std::abs(vi + pi));
  }
  if (std::min(dplus, dminus) > 1e-8)
    throw NumericalError("two-component generator: eigenvector pattern mismatch");
  return out;
}

Graph gen_hub_graph(std::size_t N, std::size_t r, std::size_t C, std::uint64_t seed) {
  if (N < 1 || r < 1 || C < 1) throw ValidationError("gen_hub_graph: N, r, C must be positive");
  if (C > N) throw ValidationError("gen_hub_graph: hub degree exceeds peripheral count");
  double croot = std::cbrt(static_cast<double>(N)) + 1.0;
  if (static_cast<double>(r) * croot > static_cast<double>(N))
    throw ValidationError("gen_hub_graph: r too large for N");
  if (static_cast<double>(C) < croot * static_cast<double>(r))
    throw ValidationError("gen_hub_graph: C too small for given r");

  // Node 0 is the hub; peripherals are 1..N with degree cap r-1 before hub
  // attachment so the final peripheral degrees stay <= r.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> deg(N + 1, 0);
  std::vector<std::vector<bool>> has(N + 1, std::vector<bool>(N + 1, false));
  Graph g{N + 1, {}};
  auto add_edge = [&](std::size_t a, std::size_t b) {
    g.edges.emplace_back(std::min(a, b), std::max(a, b));
    has[a][b] = has[b][a] = true;
    ++deg[a];
    ++deg[b];
  };

  if (r >= 2 && N >= 2) {
    std::uniform_int_distribution<std::size_t> pick(1, N);
    std::size_t attempts = 2 * N * r;
    for (std::size_t k = 0; k < attempts; ++k) {
      std::size_t a = pick(rng), b = pick(rng);
      if (a == b || has[a][b]) continue;
      if (deg[a] >= r - 1 || deg[b] >= r - 1) continue;
      add_edge(a, b);
    }
  }

  // Attach the hub: one peripheral per component first so the result is
  // connected, then fill up to degree C.
  Graph periph{N, {}};
  for (auto [i, j] : g.edges) periph.edges.emplace_back(i - 1, j - 1);
  auto label = component_labels(periph);
  std::size_t comps = 1 + *std::max_element(label.begin(), label.end());
  if (comps > C) throw ValidationError("gen_hub_graph: C below peripheral component count");

  std::vector<bool> seen(comps, false);
  std::vector<std::size_t> attach;
  for (std::size_t v = 0; v < N; ++v) {
    if (!seen[label[v]]) {
      seen[label[v]] = true;
      attach.push_back(v + 1);
    }
  }
  std::vector<std::size_t> rest;
  for (std::size_t v = 1; v <= N; ++v)
    if (std::find(attach.begin(), attach.end(), v) == attach.end()) rest.push_back(v);
  std::shuffle(rest.begin(), rest.end(), rng);
  for (std::size_t k = 0; attach.size() < C; ++k) attach.push_back(rest[k]);
  for (std::size_t v : attach) add_edge(0, v);

  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

DegreeVersatilityReport check_degree_versatility(const Graph& g, std::size_t rho,
                                                 const Tolerances& tol) {
  if (g.n < 2) throw ValidationError("check_degree_versatility: need at least 2 nodes");
  auto deg = degrees(g);
  std::size_t hub = 0;
  for (std::size_t i = 1; i < g.n; ++i)
    if (deg[i] > deg[hub]) hub = i;
  std::size_t C = deg[hub];
  std::size_t r = 0;
  bool strict = true;
  for (std::size_t i = 0; i < g.n; ++i) {
    if (i == hub) continue;
    r = std::max(r, deg[i]);
    if (deg[i] == C) strict = false;
  }

  DegreeVersatilityReport out;
  out.hub_degree = C;
  out.peripheral_degree = r;
  double croot = std::cbrt(static_cast<double>(g.n - 1)) + 1.0;
  out.hypothesis_holds = strict && is_connected(g) && r >= 1 &&
                         static_cast<double>(C + 1) > croot * static_cast<double>(r);
  out.report = check_versatile(g, rho, tol);
  if (out.hypothesis_holds && out.report.eigenvalue < static_cast<double>(C + 1) - 1e-8)
    throw NumericalError("check_degree_versatility: largest eigenvalue below hub degree + 1");
  return out;
}

GapBound spectral_gap_bound(const Graph& g, const Tolerances& tol) {
  if (g.n < 2) throw ValidationError("spectral_gap_bound: need at least 2 nodes");
  if (!is_connected(g)) throw ValidationError("spectral_gap_bound: graph must be connected");
  auto deg = degrees(g);
  std::size_t hub = 0;
  for (std::size_t i = 1; i < g.n; ++i)
    if (deg[i] > deg[hub]) hub = i;
  std::size_t C = deg[hub];
  std::size_t r = 0;
  for (std::size_t i = 0; i < g.n; ++i)
    if (i != hub) r = std::max(r, deg[i]);

  Spectrum spec = laplacian_spectrum(g, tol);
  GapBound out;
  out.mu = spec.values[g.n - 1].real();
  out.kappa = g.n >= 2 ? spec.values[g.n - 2].real() : 0.0;
  out.ratio = out.kappa / out.mu;
  out.hub_degree = C;
  out.peripheral_degree = r;
  out.bound = std::min((2.0 * static_cast<double>(r) + 1.0) / (static_cast<double>(C) + 1.0),
                       3.0 * static_cast<double>(r) / static_cast<double>(C));
  if (out.ratio > out.bound + 1e-12)
    throw NumericalError("spectral_gap_bound: gap ratio exceeds the degree bound");
  return out;
}

}  // namespace nilnet::graphlab

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nilnet/numkit.hpp"

namespace nilnet::graphlab {

using numkit::Matrix;
using numkit::Spectrum;
using numkit::Tolerances;

struct Graph {
  std::size_t n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // normalized: i<j, sorted, unique
};

// Normalizes edge order and rejects self-loops, duplicates, out-of-range endpoints.
Graph make_graph(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> edges);

Matrix laplacian(const Graph& g);
Spectrum laplacian_spectrum(const Graph& g, const Tolerances& tol = {});
bool is_connected(const Graph& g);
std::size_t component_count(const Graph& g);
Graph complement(const Graph& g);
Graph disjoint_union(const Graph& a, const Graph& b);
Graph gen_star(std::size_t leaves);  // hub is node 0
Graph gen_erdos_renyi(std::size_t n, double p, std::uint64_t seed);

struct VersatilityReport {
  std::size_t rho = 0;
  double eigenvalue = 0.0;
  bool simple = false;
  Vec eigenvector;   // inf-norm normalized, largest-magnitude entry positive
  Vec power_sums;    // sum_i nu_i^ell for ell = 2..rho+1
  bool verdict = false;
  bool connected = false;
  std::string reason;                     // empty when verdict true
  std::optional<std::size_t> failed_ell;  // first ell with vanishing power sum
};

// which unset: the largest Laplacian eigenvalue; otherwise the ascending index.
VersatilityReport check_versatile(const Graph& g, std::size_t rho,
                                  const Tolerances& tol = {},
                                  std::optional<std::size_t> which = std::nullopt);

struct TwoComponentResult {
  Graph graph;        // complement of the disjoint union
  double eigenvalue;  // s + t
  Vec eigenvector;    // +t on the first component, -s on the second
};

// inner_s and inner_t are the graphs placed on the two components before
// taking the complement; s != t required.
TwoComponentResult gen_two_component_versatile(std::size_t s, std::size_t t,
                                               const Graph& inner_s, const Graph& inner_t,
                                               const Tolerances& tol = {});

// One hub of degree C over N peripheral nodes of degree <= r; requires
// (C+1)/r > cbrt(N)+1, realized via r <= N/(cbrt(N)+1) and C >= (cbrt(N)+1) r.
Graph gen_hub_graph(std::size_t N, std::size_t r, std::size_t C, std::uint64_t seed);

struct DegreeVersatilityReport {
  VersatilityReport report;
  bool hypothesis_holds = false;  // strict max-degree node and the degree-gap condition
  std::size_t hub_degree = 0;
  std::size_t peripheral_degree = 0;
};

DegreeVersatilityReport check_degree_versatility(const Graph& g, std::size_t rho,
                                                 const Tolerances& tol = {});

struct GapBound {
  double ratio;  // second-largest / largest Laplacian eigenvalue
  double bound;  // min((2r+1)/(C+1), 3r/C)
  double kappa;
  double mu;
  std::size_t hub_degree;
  std::size_t peripheral_degree;
};

GapBound spectral_gap_bound(const Graph& g, const Tolerances& tol = {});

}  // namespace nilnet::graphlab

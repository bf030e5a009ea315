#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nilnet/cmred.hpp"
#include "nilnet/graphlab.hpp"
#include "nilnet/nform.hpp"

// Time integration of networks and low-dimensional model fields, plus the
// diagnostics built on top of it: synchronization error, largest Lyapunov
// exponent, coupling-strength stability sweeps, and the saddle-focus grid
// scan over the cubic model family.

namespace nilnet::dynsim {

using numkit::Matrix;

struct SimConfig {
  double dt = 1e-3;
  double T = 10.0;
  std::string method = "rk4";  // "rk4" or "dp54"
  std::uint64_t seed = 0;
  std::size_t renorm_interval = 10;  // steps between tangent renormalizations
  double transient_skip = -1.0;      // seconds; negative means 20% of T
  double tol = 1e-8;                 // dp54 error target
};

struct Trajectory {
  Vec times;
  std::vector<Vec> states;  // flattened state per sample
  bool truncated = false;   // orbit left the |x| <= 1e8 box
  double truncation_time = 0.0;
  std::string metadata;
};

// Autonomous right-hand side writing dx into the second argument.
using Rhs = std::function<void(const Vec&, Vec&)>;

// Fixed-step RK4 or adaptive DP54 depending on cfg.method. Samples every
// accepted step. Blow-up truncates the trajectory and records the event.
Trajectory integrate(const Rhs& rhs, const Vec& x0, const SimConfig& cfg);

// Right-hand side of the coupled network x_i' = f(x_i) - alpha sum_j
// L(i,j) D x_j for a shared node field f with parameters frozen at eps.
Rhs network_rhs(const graphlab::Graph& g, const Matrix& D, double alpha,
                const cmred::PolyField& f, const Vec& eps = {});

Trajectory integrate_network(const graphlab::Graph& g, const Matrix& D, double alpha,
                             const cmred::PolyField& f, const Vec& x0, const SimConfig& cfg,
                             const Vec& eps = {});

// Per-sample max over node pairs of the Euclidean distance |x_i - x_j|.
Vec sync_error(const Trajectory& traj, std::size_t nodes);

struct LyapunovEstimate {
  double value = 0.0;
  Vec trace;  // running estimate at each renormalization
  double first_half = 0.0;
  double last_half = 0.0;
  bool converged = false;  // halves agree within 5e-2 * max(1, |value|)
};

// Jacobian action v -> Df(x) v; the overload without it uses central
// differences on the rhs.
using Jvp = std::function<void(const Vec&, const Vec&, Vec&)>;

LyapunovEstimate largest_lyapunov(const Rhs& rhs, const Jvp& jvp, const Vec& x0,
                                  const SimConfig& cfg);
LyapunovEstimate largest_lyapunov(const Rhs& rhs, const Vec& x0, const SimConfig& cfg);

struct SweepEntry {
  double alpha = 0.0;
  bool stable = false;
  double margin = 0.0;           // max real part over all blocks
  std::size_t worst_channel = 0;  // index into lambdas of the block attaining it
};

struct SweepResult {
  Vec lambdas;  // Laplacian spectrum, ascending
  std::vector<SweepEntry> entries;
  bool found_crossing = false;
  double first_crossing = 0.0;
  std::size_t crossing_channel = 0;
};

// Hurwitz verdict of every block A - alpha lambda_p D along the grid.
SweepResult alpha_stability_sweep(const graphlab::Graph& g, const Matrix& A, const Matrix& D,
                                  const Vec& alpha_grid);

struct ScanPoint {
  double lambda = 0.0, nu = 0.0, kappa = 0.0;
  bool skipped = false;
  std::string reason;
  std::vector<std::complex<double>> spectrum;  // at the left fixed point
  bool saddle_focus = false;
  bool ratio_flag = false;  // unstable rate beats the stable contraction
  bool returned = false;    // unstable shoot re-entered the ball
  double shooting_distance = 0.0;
  double lyapunov = 0.0;
  bool lyap_valid = false;
  bool lyap_converged = false;
  double score = 0.0;
};

struct ScanReport {
  Vec lambda_grid, nu_grid, kappa_grid;
  std::vector<ScanPoint> points;       // index = (il * |nu| + in) * |kappa| + ik
  std::vector<std::size_t> ranked;     // point indices, best candidates first
  std::size_t evaluated = 0, skipped = 0;
  double elapsed_seconds = 0.0;
};

// Saddle-focus candidate scan over the model family built from the quadratic
// coefficients a: at kappa = 0 the truncated cubic field, otherwise its
// blow-up carrying the O(kappa) corrections. Each grid point reports the
// fixed-point spectrum flags, a shooting distance from the unstable manifold
// back to the stable plane (heuristic proxy measured inside a ball of radius
// 0.5, not a homoclinicity proof), and a Lyapunov estimate. Points are
// independent and merged by grid index.
ScanReport shilnikov_scan(const std::array<double, 6>& a, const Vec& lambda_grid,
                          const Vec& nu_grid, const Vec& kappa_grid, const SimConfig& cfg);

}  // namespace nilnet::dynsim

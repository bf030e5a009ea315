#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "nilnet/numkit.hpp"

namespace nilnet::coupling {

using numkit::Matrix;
using numkit::Tolerances;

// Orthonormal directions along which the vector field initially grows:
// <x_i, A x_i> > 0 even though A is stable.
struct SkewnessCertificate {
  std::size_t m = 0;
  Matrix directions;  // n x m, orthonormal columns
  Vec rayleigh;       // <x_i, A x_i>, all positive when m > 0
};

// Directions are eigenvectors of (A + A^T)/2 with positive eigenvalues,
// sorted by eigenvalue descending. If want_m exceeds what is achievable the
// achievable count is returned; no positive directions gives an m=0
// certificate rather than an error.
SkewnessCertificate find_skew_directions(const Matrix& A,
                                         std::optional<std::size_t> want_m = std::nullopt,
                                         const Tolerances& tol = {});

// Certificate from caller-chosen orthonormal directions; validates
// orthonormality and positive rayleigh quotients.
SkewnessCertificate make_certificate(const Matrix& A, const Matrix& X,
                                     const Tolerances& tol = {});

struct CouplingDesign {
  Matrix A;
  Matrix D;
  Matrix P;  // strictly upper-triangular m x m, P(j,i) = <x_j, (A+A^T) x_i> for j<i
  Matrix X;  // n x m directions
  Matrix Y;  // n x (n-m) orthonormal complement
  double c = 0.0;
  std::size_t m = 0;
  std::size_t kernel_geom = 0;  // geometric multiplicity of 0 in A - D
};

// D x_i = A x_i - sum_{j<i} P(j,i) x_j on span(X), D = c I on span(Y). When c
// is unset the smallest admissible value is found by bisection (resolution
// 1e-3, cap 1e6): D positive-definite and A - D with exactly m eigenvalues at
// zero, all others strictly in the left half plane.
CouplingDesign synthesize_D(const Matrix& A, const SkewnessCertificate& cert,
                            std::optional<double> c = std::nullopt,
                            const Tolerances& tol = {});

// Rebuilds a certificate from (A, D) by orthonormalizing a grade-ordered
// basis of the generalized kernel of A - D.
SkewnessCertificate recover_skew_directions(const Matrix& A, const Matrix& D,
                                            const Tolerances& tol = {});

// A <- A + eps * sum_i x_i x_{i+1}^T: collapses the kernel of A - D to a
// single Jordan chain (kernel_geom becomes 1) while D stays fixed.
CouplingDesign perturb_for_single_kernel(const CouplingDesign& design, double eps,
                                         const Tolerances& tol = {});

struct HyperbolicityFix {
  Matrix A_tilde;
  Matrix D_tilde;
  double delta = 0.0;
};

// A_tilde = A + delta I, D_tilde = D + delta/(alpha_star * lambda_K) I with
// lambda_K the last entry of lambdas. The distinguished block
// A - alpha_star lambda_K D is unchanged exactly; every other block gains
// (1 - lambda_i/lambda_K) delta I. With delta unset the smallest |delta| from
// {0, +-1e-6, +-1e-5, ...} making all non-distinguished blocks hyperbolic is
// chosen.
HyperbolicityFix perturb_for_hyperbolicity(const Matrix& A, const Matrix& D,
                                           double alpha_star, const Vec& lambdas,
                                           std::optional<double> delta = std::nullopt,
                                           const Tolerances& tol = {});

enum class SweepEventType { real_axis_crossing, complex_pair_crossing, arrival_at_zero };

struct SweepEvent {
  double beta = 0.0;
  SweepEventType type = SweepEventType::real_axis_crossing;
  std::size_t track = 0;
};

struct BetaSweepResult {
  Vec betas;
  std::vector<std::vector<std::complex<double>>> tracks;  // [step][track]
  std::vector<SweepEvent> events;
  std::vector<std::size_t> ambiguous_steps;  // pairing moved implausibly far
};

// Eigenvalues of A - beta D over the grid with continuity-based pairing.
BetaSweepResult beta_sweep(const Matrix& A, const Matrix& D, const Vec& grid,
                           const Tolerances& tol = {});

}  // namespace nilnet::coupling

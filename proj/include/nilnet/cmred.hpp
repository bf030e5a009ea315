#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "nilnet/common.hpp"
#include "nilnet/graphlab.hpp"
#include "nilnet/netlin.hpp"
#include "nilnet/numkit.hpp"

namespace nilnet::cmred {

using numkit::Matrix;
using numkit::Tolerances;

// Exponent vector over (x_1..x_n, eps_1..eps_d); every eps variable carries
// degree 1, so "degree" below always means joint total degree.
using MultiIndex = std::vector<unsigned>;

std::size_t total_degree(const MultiIndex& e);

// Graded order: total degree first, ties broken lexicographically. This is
// also the serialization order of terms.
struct GradedLess {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const;
};

// Truncated polynomial map R^n x R^d -> R^target_dim with a hard cap on the
// total degree of stored terms. Arithmetic helpers below keep results inside
// the cap, so jets stay jets.
class PolyField {
 public:
  using TermMap = std::map<MultiIndex, Vec, GradedLess>;

  PolyField() = default;
  PolyField(std::size_t n, std::size_t d, std::size_t target_dim, std::size_t order);

  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  std::size_t nvars() const { return n_ + d_; }
  std::size_t target_dim() const { return target_; }
  std::size_t order() const { return order_; }

  const TermMap& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  // Accumulates coef into the term; silently drops exponents beyond the cap.
  void add_term(const MultiIndex& exps, const Vec& coef);
  void set_term(const MultiIndex& exps, const Vec& coef);
  Vec coeff(const MultiIndex& exps) const;  // zero vector when absent

  std::size_t state_degree(const MultiIndex& e) const;

  Vec eval(const Vec& x, const Vec& eps) const;
  PolyField part(std::size_t degree) const;  // homogeneous slice
  PolyField truncated(std::size_t max_degree) const;
  PolyField with_order(std::size_t order) const;  // changes the cap only
  void prune(double tol = 0.0);  // drops terms with max |coef| <= tol

  double max_coeff() const;
  bool vanishes_at_zero_state() const;  // every term has state degree >= 1
  // vanishes at x=0 for all eps and has no eps-free linear terms: the shape
  // required of nonlinearities entering the reduction.
  bool is_strict_nonlinearity() const;

 private:
  void check_exps(const MultiIndex& exps, const Vec& coef) const;

  std::size_t n_ = 0, d_ = 0, target_ = 0, order_ = 0;
  TermMap terms_;
};

bool same_shape(const PolyField& a, const PolyField& b);
double max_coeff_difference(const PolyField& a, const PolyField& b);

PolyField add(const PolyField& a, const PolyField& b);
PolyField sub(const PolyField& a, const PolyField& b);
PolyField scale(const PolyField& a, double s);
PolyField mul(const PolyField& a, const PolyField& b, std::size_t out_order);  // scalar*scalar
PolyField mul_vs(const PolyField& vec, const PolyField& scalar, std::size_t out_order);
PolyField component(const PolyField& f, std::size_t i);  // scalar slice of the target
PolyField apply_linear(const Matrix& M, const PolyField& f);
PolyField from_linear(const Matrix& M, std::size_t d, std::size_t order);  // x -> Mx
Matrix linear_state_matrix(const PolyField& f);  // eps-free degree-1 coefficients
PolyField partial_state(const PolyField& f, std::size_t i);
// sum_i df/dx_i * g_i (derivatives in state variables only).
PolyField directional_derivative(const PolyField& f, const PolyField& g,
                                 std::size_t out_order);

// Substitution: states of f replaced by components of sub_states (and, in the
// full form, parameters replaced by sub_params); result truncated at out_order.
PolyField compose(const PolyField& f, const PolyField& sub_states, std::size_t out_order);
PolyField compose_full(const PolyField& f, const PolyField& sub_states,
                       const PolyField& sub_params, std::size_t out_order);

PolyField identity_map(std::size_t n, std::size_t d, std::size_t order);
PolyField param_identity(std::size_t n, std::size_t d, std::size_t order);  // (x,eps)->eps

// Truncated inverse of a polynomial map with invertible linear state part:
// compose(phi, result) = identity through out_order. Parameters pass through.
PolyField truncated_inverse_map(const PolyField& phi, std::size_t out_order);

// h acting node-wise on `copies` stacked state blocks.
PolyField node_diagonal_lift(const PolyField& h, std::size_t copies);
// weights[p] * f stacked into block p of the target.
PolyField channel_embed(const Vec& weights, const PolyField& f);

// All exponent vectors of the given total degree, graded-lex order.
std::vector<MultiIndex> homogeneous_exponents(std::size_t nvars, std::size_t degree);

// Matrix of psi -> T psi - Dpsi(x) * N x on homogeneous degree-k polynomials
// in (m states, num_params parameters) with values in R^{T.rows()}. Unknowns
// are stacked monomial-major in graded-lex order. Its spectrum is
// {mu_T - sum_i k_i mu_N} over state exponents k with |k| <= degree.
Matrix homological_operator(const Matrix& T, const Matrix& N, std::size_t degree,
                            std::size_t num_params);

// max |coefficient| of J X + H(X) - DX * R through the given order; measures
// how far X(y) is from being invariant with reduced dynamics R.
double invariance_residual(const Matrix& J, const PolyField& H, const PolyField& X,
                           const PolyField& R, std::size_t order);

struct CenterModel {
  PolyField psi;      // (center coords, eps) -> ambient; values in E^h
  PolyField reduced;  // (center coords, eps) -> center coords
  std::size_t order = 0;
  double residual = 0.0;  // invariance defect through `order`
  // Network route only: psi restricted to each Laplacian eigenvector channel,
  // ascending eigenvalue order; psi = sum_q channel_embed(v_q, psi_channels[q]).
  std::vector<PolyField> psi_channels;
};

// Dense full-space reduction: the serial reference. Solves the order-k
// coefficient equations on the whole ambient space degree by degree.
CenterModel reduce_dense(const Matrix& J, const netlin::CenterSplit& split,
                         const PolyField& H, std::size_t rho,
                         const Tolerances& tol = Tolerances{});

// The graph map of the center manifold alone (psi of reduce_dense).
PolyField solve_homological(const Matrix& J, const netlin::CenterSplit& split,
                            const PolyField& H, std::size_t rho,
                            const Tolerances& tol = Tolerances{});

// Lifts a within-block split of A - alpha* lambda D to the full N n system:
// E^c = v (x) E^c_block, E^h = v (x) E^h_block plus every other channel.
netlin::CenterSplit lift_split(const netlin::NetworkDesign& net,
                               const netlin::CenterSplit& split,
                               const Tolerances& tol = Tolerances{});

// Channel-parallel reduction of the network system with node-wise
// nonlinearity h: the nonlinearity being identical on every node makes the
// order-k solve block-diagonal across Laplacian channels, which is what keeps
// the cost at N small dense solves instead of one giant one.
CenterModel reduced_field(const netlin::NetworkDesign& net, const netlin::CenterSplit& split,
                          const PolyField& h, std::size_t rho,
                          const Tolerances& tol = Tolerances{});

// Raised when a power sum sum_p v_p^ell needed by inverse_design vanishes.
class VersatilityError : public ValidationError {
 public:
  VersatilityError(std::size_t ell, const std::string& what)
      : ValidationError(what), ell_(ell) {}
  std::size_t ell() const { return ell_; }

 private:
  std::size_t ell_ = 0;
};

// Builds a node nonlinearity whose reduced field matches `target` through
// order rho. Corrections are added degree by degree; each monomial correction
// lives in E^c (its E^h components are zero) and is scaled by the reciprocal
// of the power sum sum_p v_p^(a+1), a = state degree of the monomial.
PolyField inverse_design(const PolyField& target, const netlin::NetworkDesign& net,
                         const netlin::CenterSplit& split, std::size_t rho,
                         const Tolerances& tol = Tolerances{});

}  // namespace nilnet::cmred

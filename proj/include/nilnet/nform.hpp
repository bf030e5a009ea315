#pragma once

// Reduction of a 3-state, 3-parameter jet with nilpotent linear part to the
// cubic unfolding normal form
//
//   x' = y,  y' = z,  z' = lambda - y + nu z - x^2/2 + remainder
//
// through a chain of recorded coordinate changes: a linear frame change to
// the companion nilpotent block, two near-identity shears that empty the
// first two components, a parameter redefinition, a parameter-dependent
// shift, and a weighted state/parameter/time scaling. Every stage keeps its
// inverse so trajectories can be mapped between charts.

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "nilnet/cmred.hpp"

namespace nilnet::nform {

using cmred::PolyField;
using numkit::Matrix;

// One step of the chain: y = map(x; eps), x = inverse(y; eps). Parameters
// pass through untouched; both directions are truncated at the jet order.
struct JetTransform {
  std::string tag;
  PolyField map;
  PolyField inverse;
};

// A vector field on three states and three parameters, vanishing at x = 0
// for every parameter value, together with the transforms applied so far.
struct Jet3 {
  PolyField field;
  std::vector<JetTransform> frame;

  std::size_t order() const { return field.order(); }
};

// Validates shape (n = d = target = 3, order >= 3, no parameter-only terms)
// and wraps the field with an empty frame.
Jet3 make_jet(const PolyField& field);

// Linear change of basis bringing the nilpotent linear part to the
// companion block [[0,1,0],[0,0,1],[0,0,0]]. A field already in that frame
// passes through unchanged. Throws when the linear part is not nilpotent or
// its kernel is not one-dimensional.
Jet3 normalize_frame(const PolyField& field);

// Two shears y2 = x2 + h1 and y3 = x3 + h2~ that make the first two
// components exactly x2 and x3 through the truncation order, leaving all
// content in the third component.
Jet3 eliminate_lower(const Jet3& jet);

// Coefficients read off the eliminated jet: the six parameter-free
// quadratics of the third component, the linear parameter map of its
// state-linear terms, and genericity diagnostics.
struct UnfoldingData {
  std::array<double, 6> a{};  // z1^2, z1 z2, z1 z3, z2^2, z2 z3, z3^2
  Matrix eps_map;             // eps_map(i, j) = coefficient of z_{i+1} eps_{j+1}
  bool a1_nonzero = false;
  bool eps_invertible = false;
  double eps_cond = 0.0;
  // second steady-state branch z1 = branch_coef * eps~_1 + O(eps^2),
  // meaningful only when a1_nonzero
  double branch_coef = 0.0;
};

UnfoldingData extract_unfolding(const Jet3& jet);

struct NormalFormResult {
  std::array<double, 6> a{};
  Matrix eps_map;
  double kappa = 0.0;
  double r = 0.0;           // (-1/gamma2)^(1/2)
  double lambda_nf = 0.0;   // gamma1^2 r^6 / 2, never negative
  double nu_nf = 0.0;       // gamma3 r
  double remainder_norm = 0.0;  // sum |coef| of the retained correction terms
  PolyField field;          // numeric-coefficient field in (x, y, z), d = 0
  // affine chart map from eliminated-jet coordinates: x_i = scale_i z_i +
  // offset_i, with the new time tau = time_scale * t
  Vec state_scale;
  Vec state_offset;
  double time_scale = 0.0;
  Vec eps_source;           // old-parameter values realizing the gamma ray
  bool generic = false;
};

// Applies the parameter redefinition, the z1 shift, the weighted blow-up
// w = (k^3 u1, k^4 u2, k^5 u3), eps = (k^3 g1, k^2 g2, k g3), and the
// gamma2/a1 rescale at the given numeric kappa and gamma. Terms of blow-up
// weight above six survive with positive kappa powers and are kept as the
// remainder. Throws when a1 = 0, gamma2 >= 0, or kappa = 0.
NormalFormResult blow_up_and_scale(const Jet3& jet, const std::array<double, 6>& a,
                                   const Matrix& eps_map, double kappa,
                                   const std::array<double, 3>& gamma);

// The exact cubic target field for given unfolding parameters.
PolyField nf_field(double lambda_nf, double nu_nf);

struct Equilibrium {
  Vec point;
  std::vector<std::complex<double>> spectrum;
  std::size_t n_stable = 0;
  std::size_t n_unstable = 0;
  bool saddle_focus = false;  // complex contracting pair + one real expander
};

struct FixedPointPair {
  Equilibrium p1;  // x = -sqrt(2 lambda)
  Equilibrium p2;  // x = +sqrt(2 lambda)
};

// The two equilibria (-+sqrt(2 lambda), 0, 0) of the cubic field with their
// Jacobian spectra and stable/unstable splits. Requires lambda_nf > 0.
FixedPointPair nf_fixed_points(double lambda_nf, double nu_nf);

}  // namespace nilnet::nform

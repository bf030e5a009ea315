#include "nilnet/nform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

// Pipeline for three-dimensional jets with a nilpotent linear part: move the
// frame onto the companion block, push all nonlinearity into the last
// component with two shear substitutions, read off the unfolding data, and
// rescale along the singular parameter curve so the truncated system lands on
//   x' = y, y' = z, z' = lambda - y + nu z - x^2/2 + O(kappa).
// Every substitution is recorded so trajectories can be mapped back.

namespace nilnet::nform {

namespace {

using cmred::MultiIndex;
using cmred::PolyField;

Matrix companion_block() {
  return Matrix{{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {0.0, 0.0, 0.0}};
}

void check_shape(const PolyField& f) {
  if (f.n() != 3 || f.d() != 3 || f.target_dim() != 3)
    throw ValidationError("jet must map three states and three parameters to three components");
  if (f.order() < 3) throw ValidationError("jet order must be at least three");
  if (!f.vanishes_at_zero_state())
    throw ValidationError("jet must vanish at the state origin for every parameter");
}

// Scalar field reading off state variable j.
PolyField coordinate(std::size_t j, std::size_t order) {
  PolyField x(3, 3, 1, order);
  MultiIndex e(6, 0);
  e[j] = 1;
  x.add_term(e, {1.0});
  return x;
}

// Replace component i of f with the scalar field g.
PolyField set_component(const PolyField& f, std::size_t i, const PolyField& g) {
  if (g.target_dim() != 1 || g.n() != f.n() || g.d() != f.d())
    throw ValidationError("component replacement: shape mismatch");
  PolyField out(f.n(), f.d(), f.target_dim(), f.order());
  for (const auto& [e, c] : f.terms()) {
    Vec cc = c;
    cc[i] = 0.0;
    out.add_term(e, cc);
  }
  for (const auto& [e, c] : g.terms()) {
    Vec cc(f.target_dim(), 0.0);
    cc[i] = c[0];
    out.add_term(e, cc);
  }
  out.prune(0.0);
  return out;
}

// Vector field after the change of variables y = phi(x; eps):
// (Dphi . f) evaluated at phi^{-1}(y).
PolyField pushforward(const PolyField& f, const PolyField& phi, const PolyField& phi_inv) {
  PolyField moved = cmred::directional_derivative(phi, f, f.order());
  return cmred::compose(moved, phi_inv, f.order());
}

void require_companion(const PolyField& f, const char* what) {
  Matrix L = cmred::linear_state_matrix(f);
  Matrix diff = L;
  Matrix J = companion_block();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) diff(i, j) -= J(i, j);
  if (diff.max_abs() > 1e-12) throw ValidationError(std::string(what) + " requires the companion frame");
}

void require_eliminated(const PolyField& f, const char* what) {
  require_companion(f, what);
  std::size_t ord = f.order();
  if (cmred::max_coeff_difference(cmred::component(f, 0), coordinate(1, ord)) > 1e-12 ||
      cmred::max_coeff_difference(cmred::component(f, 1), coordinate(2, ord)) > 1e-12)
    throw ValidationError(std::string(what) + " requires the eliminated form");
}

}  // namespace

Jet3 make_jet(const PolyField& field) {
  check_shape(field);
  Jet3 out;
  out.field = field;
  return out;
}

Jet3 normalize_frame(const PolyField& field) {
  check_shape(field);
  Matrix L = cmred::linear_state_matrix(field);
  double ls = std::max(1.0, L.norm_inf());
  Matrix L2 = L * L;
  Matrix L3 = L2 * L;
  if (L3.max_abs() > 1e-8 * ls * ls * ls)
    throw ValidationError("frame normalization: linear part is not nilpotent");
  Matrix ker = numkit::nullspace(L, 1e-8);
  if (ker.cols() != 1)
    throw ValidationError("frame normalization: kernel of the linear part must be one-dimensional");

  std::size_t ord = field.order();
  Jet3 out;
  {
    Matrix diff = L;
    Matrix J = companion_block();
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) diff(i, j) -= J(i, j);
    if (diff.max_abs() == 0.0) {
      PolyField id = cmred::identity_map(3, 3, ord);
      out.field = field;
      out.frame.push_back({"frame", id, id});
      return out;
    }
  }

  // Cyclic basis [L^2 u, L u, u]. The top right singular vector of L^2 spans
  // the direction that survives two applications of L, so the three vectors
  // are independent and the matrix of L in this basis is the companion block.
  auto dec = numkit::svd(L2);
  Vec u(3);
  for (std::size_t i = 0; i < 3; ++i) u[i] = dec.V(i, 0);
  std::size_t imax = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(u[i]) > std::abs(u[imax])) imax = i;
  if (u[imax] < 0.0)
    for (double& v : u) v = -v;
  Matrix B = Matrix::from_columns({L2.apply(u), L.apply(u), u});
  Matrix Binv = numkit::inverse(B);

  PolyField to_new = cmred::from_linear(Binv, 3, ord);
  PolyField to_old = cmred::from_linear(B, 3, ord);
  PolyField moved = cmred::apply_linear(Binv, cmred::compose(field, to_old, ord));

  Matrix Lnew = cmred::linear_state_matrix(moved);
  Matrix J = companion_block();
  double drift = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) drift = std::max(drift, std::abs(Lnew(i, j) - J(i, j)));
  if (drift > 1e-9 * ls) throw NumericalError("frame normalization did not reach the companion block");
  for (std::size_t j = 0; j < 3; ++j) {
    MultiIndex e(6, 0);
    e[j] = 1;
    Vec c = moved.coeff(e);
    for (std::size_t i = 0; i < 3; ++i) c[i] += J(i, j) - Lnew(i, j);
    moved.set_term(e, c);
  }
  moved.prune(0.0);
  out.field = moved;
  out.frame.push_back({"frame", to_new, to_old});
  return out;
}

Jet3 eliminate_lower(const Jet3& jet) {
  check_shape(jet.field);
  require_companion(jet.field, "lower elimination");

  std::size_t ord = jet.order();
  PolyField x2 = coordinate(1, ord), x3 = coordinate(2, ord);
  Jet3 out = jet;

  auto stage = [&](std::size_t comp, const PolyField& lead, const char* tag) {
    PolyField h = cmred::sub(cmred::component(out.field, comp), lead);
    h.prune(0.0);
    if (h.empty()) {
      PolyField id = cmred::identity_map(3, 3, ord);
      out.frame.push_back({tag, id, id});
      return;
    }
    // y_{comp+1} = x_{comp+1} + h makes component comp read y_{comp+1}.
    PolyField phi = cmred::identity_map(3, 3, ord);
    phi = set_component(phi, comp + 1, cmred::add(cmred::component(phi, comp + 1), h));
    PolyField phi_inv = cmred::truncated_inverse_map(phi, ord);
    PolyField moved = pushforward(out.field, phi, phi_inv);
    // The shear empties these components exactly; what remains is roundoff at
    // the scale of the composed coefficients.
    double scale = std::max({1.0, out.field.max_coeff(), moved.max_coeff()});
    for (std::size_t i = 0; i <= comp; ++i) {
      const PolyField& want = (i == 0) ? x2 : x3;
      if (cmred::max_coeff_difference(cmred::component(moved, i), want) > 1e-9 * scale)
        throw NumericalError("lower elimination drifted off the shear structure");
      moved = set_component(moved, i, want);
    }
    out.field = moved;
    out.frame.push_back({tag, phi, phi_inv});
  };

  stage(0, x2, "shear-1");
  stage(1, x3, "shear-2");
  return out;
}

UnfoldingData extract_unfolding(const Jet3& jet) {
  check_shape(jet.field);
  require_eliminated(jet.field, "unfolding extraction");

  PolyField h3 = cmred::component(jet.field, 2);
  UnfoldingData out;
  auto quad = [&](std::size_t i, std::size_t j) {
    MultiIndex e(6, 0);
    e[i] += 1;
    e[j] += 1;
    return h3.coeff(e)[0];
  };
  out.a = {quad(0, 0), quad(0, 1), quad(0, 2), quad(1, 1), quad(1, 2), quad(2, 2)};

  out.eps_map = Matrix::zero(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      MultiIndex e(6, 0);
      e[i] = 1;
      e[3 + j] = 1;
      out.eps_map(i, j) = h3.coeff(e)[0];
    }

  out.a1_nonzero = std::abs(out.a[0]) > 1e-12;
  auto dec = numkit::svd(out.eps_map);
  double smax = dec.sigma[0], smin = dec.sigma[2];
  out.eps_cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  out.eps_invertible = smin > 0.0 && out.eps_cond <= 1e8;
  if (out.a1_nonzero) out.branch_coef = -1.0 / out.a[0];
  return out;
}

NormalFormResult blow_up_and_scale(const Jet3& jet, const std::array<double, 6>& a,
                                   const Matrix& eps_map, double kappa,
                                   const std::array<double, 3>& gamma) {
  check_shape(jet.field);
  require_eliminated(jet.field, "blow-up");
  if (std::abs(a[0]) <= 1e-12)
    throw ValidationError("blow-up requires a nonzero leading quadratic coefficient");
  if (!(gamma[1] < 0.0)) throw ValidationError("blow-up requires a negative second ray coefficient");
  if (kappa == 0.0 || !std::isfinite(kappa))
    throw ValidationError("blow-up requires a nonzero finite scale");
  if (eps_map.rows() != 3 || eps_map.cols() != 3)
    throw ValidationError("blow-up parameter map must be 3x3");

  const std::size_t ord = jet.order();
  const double a1 = a[0];
  const double big = std::max(1.0, jet.field.max_coeff());

  // Parameter redefinition: collect the full series multiplying each state
  // variable linearly, as a polynomial map on the parameters alone.
  PolyField h3 = cmred::component(jet.field, 2);
  PolyField emap(3, 0, 3, ord);
  for (const auto& [e, c] : h3.terms()) {
    if (h3.state_degree(e) != 1 || cmred::total_degree(e) < 2) continue;
    std::size_t which = e[0] ? 0u : (e[1] ? 1u : 2u);
    MultiIndex b{e[3], e[4], e[5]};
    Vec cc(3, 0.0);
    cc[which] = c[0];
    emap.add_term(b, cc);
  }
  Matrix elin = cmred::linear_state_matrix(emap);
  {
    Matrix diff = elin;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) diff(i, j) -= eps_map(i, j);
    if (diff.max_abs() > 1e-9 * std::max(1.0, eps_map.max_abs()))
      throw ValidationError("blow-up parameter map does not match the jet");
  }
  {
    auto dec = numkit::svd(elin);
    if (dec.sigma[2] <= 0.0 || dec.sigma[0] / dec.sigma[2] > 1e8)
      throw ValidationError("blow-up parameter map is too close to singular");
  }
  PolyField einv = cmred::truncated_inverse_map(emap, ord);

  // Substitute eps = einv(eps_tilde) so the state-linear block becomes
  // exactly eps_i z_i, then snap it there.
  PolyField sub_params(3, 3, 3, ord);
  for (const auto& [e, c] : einv.terms()) {
    MultiIndex full{0, 0, 0, e[0], e[1], e[2]};
    sub_params.add_term(full, c);
  }
  PolyField moved =
      cmred::compose_full(jet.field, cmred::identity_map(3, 3, ord), sub_params, ord);
  PolyField f2 = cmred::component(moved, 2);
  PolyField zlin(3, 3, 1, ord), rest(3, 3, 1, ord);
  for (const auto& [e, c] : f2.terms()) {
    if (f2.state_degree(e) == 1 && cmred::total_degree(e) >= 2)
      zlin.add_term(e, c);
    else
      rest.add_term(e, c);
  }
  PolyField diag(3, 3, 1, ord);
  for (std::size_t i = 0; i < 3; ++i) {
    MultiIndex e(6, 0);
    e[i] = 1;
    e[3 + i] = 1;
    diag.add_term(e, {1.0});
  }
  // Exact through the cap by construction of einv; the residual is roundoff
  // at the scale of the composed coefficients.
  double redef_scale = std::max({big, moved.max_coeff()});
  if (cmred::max_coeff_difference(zlin, diag) > 1e-9 * redef_scale)
    throw NumericalError("parameter redefinition drifted off the diagonal");
  moved = set_component(moved, 2, cmred::add(rest, diag));

  // Shift z1 = w1 - eps1/(2 a1): removes the w1-linear parameter term and
  // leaves the constant -eps1^2/(4 a1). The shift has identity derivative,
  // so plain substitution transforms the field.
  PolyField shiftmap = cmred::identity_map(3, 3, ord);
  {
    MultiIndex e{0, 0, 0, 1, 0, 0};
    shiftmap.add_term(e, {-1.0 / (2.0 * a1), 0.0, 0.0});
  }
  PolyField shifted = cmred::compose(moved, shiftmap, ord);

  // Blow-up weights: states carry kappa^{2+i}, parameters kappa^{3-j}, time
  // kappa. A term c w^alpha eps^beta contributes c kappa^{W-6} gamma^beta to
  // the u^alpha coefficient of the last component.
  const double r = std::sqrt(-1.0 / gamma[1]);
  PolyField hshift = cmred::component(shifted, 2);
  std::map<MultiIndex, double, cmred::GradedLess> ucoef;
  for (const auto& [e, c] : hshift.terms()) {
    int W = 0;
    for (std::size_t i = 0; i < 3; ++i) W += static_cast<int>(e[i]) * (3 + static_cast<int>(i));
    for (std::size_t j = 0; j < 3; ++j) W += static_cast<int>(e[3 + j]) * (3 - static_cast<int>(j));
    double gb = 1.0;
    for (std::size_t j = 0; j < 3; ++j)
      for (unsigned k = 0; k < e[3 + j]; ++k) gb *= gamma[j];
    double val = c[0] * gb;
    if (W < 6) {
      if (std::abs(val) > 1e-10 * big)
        throw NumericalError("blow-up produced a diverging low-order term");
      continue;
    }
    val *= std::pow(kappa, W - 6);
    MultiIndex al{e[0], e[1], e[2]};
    ucoef[al] += val;
  }

  // Final linear scale x_i = c_i u_i, tau = tbar / r with c_i = -2 a1 r^{2+i}
  // turns the weight-six core into the target cubic field.
  const Vec cs{-2.0 * a1 * r * r * r, -2.0 * a1 * r * r * r * r,
               -2.0 * a1 * r * r * r * r * r};
  PolyField zfield(3, 0, 1, ord);
  for (const auto& [al, q] : ucoef) {
    double denom = 1.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (unsigned k = 0; k < al[i]; ++k) denom *= cs[i];
    double v = q * r * cs[2] / denom;
    if (v != 0.0) zfield.add_term(al, {v});
  }

  NormalFormResult out;
  out.a = a;
  out.eps_map = eps_map;
  out.kappa = kappa;
  out.r = r;
  out.lambda_nf = 0.5 * gamma[0] * gamma[0] * std::pow(r, 6);
  out.nu_nf = gamma[2] * r;

  // Everything beyond the weight-six core is the residual; its coefficient
  // mass bounds the defect on the unit box.
  PolyField rem = cmred::sub(zfield, cmred::component(nf_field(out.lambda_nf, out.nu_nf), 2));
  rem.prune(0.0);
  out.remainder_norm = 0.0;
  for (const auto& [e, c] : rem.terms()) out.remainder_norm += std::abs(c[0]);

  PolyField field(3, 0, 3, ord);
  {
    MultiIndex ey{0, 1, 0}, ez{0, 0, 1};
    field.add_term(ey, {1.0, 0.0, 0.0});
    field.add_term(ez, {0.0, 1.0, 0.0});
    for (const auto& [e, c] : zfield.terms()) field.add_term(e, {0.0, 0.0, c[0]});
  }
  field.prune(0.0);
  out.field = field;

  out.state_scale = Vec(3);
  for (std::size_t i = 0; i < 3; ++i) out.state_scale[i] = cs[i] / std::pow(kappa, 3.0 + i);
  out.state_offset = Vec{-r * r * r * gamma[0], 0.0, 0.0};
  out.time_scale = kappa / r;
  Vec eps_tilde{kappa * kappa * kappa * gamma[0], kappa * kappa * gamma[1], kappa * gamma[2]};
  out.eps_source = einv.eval(eps_tilde, {});
  out.generic = true;
  return out;
}

PolyField nf_field(double lambda_nf, double nu_nf) {
  PolyField f(3, 0, 3, 3);
  f.add_term({0, 1, 0}, {1.0, 0.0, -1.0});
  f.add_term({0, 0, 1}, {0.0, 1.0, nu_nf});
  f.add_term({0, 0, 0}, {0.0, 0.0, lambda_nf});
  f.add_term({2, 0, 0}, {0.0, 0.0, -0.5});
  f.prune(0.0);
  return f;
}

FixedPointPair nf_fixed_points(double lambda_nf, double nu_nf) {
  if (!(lambda_nf > 0.0))
    throw ValidationError("fixed points require a positive unfolding parameter");
  const double x0 = std::sqrt(2.0 * lambda_nf);
  auto make = [&](double xs) {
    Equilibrium eq;
    eq.point = Vec{xs, 0.0, 0.0};
    Matrix J{{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {-xs, -1.0, nu_nf}};
    auto spec = numkit::eigendecompose(J, false);
    eq.spectrum = spec.values;
    for (const auto& z : spec.values) {
      if (z.real() < 0.0)
        ++eq.n_stable;
      else
        ++eq.n_unstable;
    }
    bool complex_stable = false;
    for (const auto& z : spec.values)
      if (z.real() < 0.0 && std::abs(z.imag()) > 1e-12) complex_stable = true;
    eq.saddle_focus = complex_stable && eq.n_unstable == 1;
    return eq;
  };
  return {make(-x0), make(x0)};
}

}  // namespace nilnet::nform

#include "nilnet/cmred.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <utility>

namespace nilnet::cmred {

namespace {

using netlin::CenterSplit;
using netlin::NetworkDesign;

double ipow(double b, unsigned e) {
  double r = 1.0;
  for (unsigned i = 0; i < e; ++i) r *= b;
  return r;
}

PolyField constant_one(std::size_t n, std::size_t d, std::size_t order) {
  PolyField one(n, d, 1, order);
  one.set_term(MultiIndex(n + d, 0u), Vec{1.0});
  return one;
}

void accumulate(PolyField& into, const PolyField& from) {
  if (!same_shape(into, from))
    throw ValidationError("polynomial accumulate: shapes differ");
  for (const auto& [e, c] : from.terms()) into.add_term(e, c);
}

Matrix row_slice(const Matrix& M, std::size_t r0, std::size_t r1) {
  Matrix out(r1 - r0, M.cols());
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) out(i - r0, j) = M(i, j);
  return out;
}

struct SplitFrames {
  Matrix Wc;   // m x n rows extracting center coordinates
  Matrix Wh;   // (n-m) x n rows extracting hyperbolic coordinates
  Matrix T22;  // action of M on E^h in the Eh_basis frame
};

SplitFrames split_frames(const Matrix& M, const CenterSplit& split) {
  const std::size_t n = M.rows();
  const std::size_t m = split.Ec_basis.cols();
  const std::size_t hd = split.Eh_basis.cols();
  if (!M.square() || split.Ec_basis.rows() != n ||
      (hd > 0 && split.Eh_basis.rows() != n) || m + hd != n || m == 0)
    throw ValidationError("center split does not match the matrix dimensions");
  Matrix reduce_check = M * split.Ec_basis - split.Ec_basis * split.nilpotent_block;
  if (reduce_check.max_abs() > 1e-8 * std::max(1.0, M.norm_inf()))
    throw ValidationError("center split does not reduce the matrix");
  Matrix Z(n, n);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < n; ++i) Z(i, j) = split.Ec_basis(i, j);
  for (std::size_t j = 0; j < hd; ++j)
    for (std::size_t i = 0; i < n; ++i) Z(i, m + j) = split.Eh_basis(i, j);
  Matrix Zinv = numkit::inverse(Z);
  SplitFrames fr;
  fr.Wc = row_slice(Zinv, 0, m);
  fr.Wh = row_slice(Zinv, m, n);
  fr.T22 = hd > 0 ? Matrix(fr.Wh * M * split.Eh_basis) : Matrix(0, 0);
  return fr;
}

void check_reduction_inputs(const PolyField& H, std::size_t n, std::size_t rho) {
  if (H.n() != n || H.target_dim() != n)
    throw ValidationError("nonlinearity dimensions do not match the system");
  if (!H.is_strict_nonlinearity())
    throw ValidationError(
        "nonlinearity must vanish at the origin for every parameter value and "
        "carry no parameter-free linear terms");
  if (rho < 1 || rho > 6)
    throw ValidationError("reduction order must be between 1 and 6");
}

// Solves T w - Dw(x)*(N x) = rhs for a homogeneous degree-k polynomial w.
PolyField solve_block(const Matrix& T, const Matrix& N, const PolyField& rhs,
                      std::size_t degree) {
  const std::size_t dim = T.rows();
  const std::size_t m = N.rows();
  const std::size_t d = rhs.d();
  PolyField out(m, d, dim, rhs.order());
  if (dim == 0 || rhs.empty()) return out;
  if (rhs.target_dim() != dim)
    throw ValidationError("homological solve: right-hand side has wrong dimension");
  const auto monos = homogeneous_exponents(m + d, degree);
  Matrix op = homological_operator(T, N, degree, d);
  Vec b(monos.size() * dim, 0.0);
  for (std::size_t a = 0; a < monos.size(); ++a) {
    Vec c = rhs.coeff(monos[a]);
    for (std::size_t r = 0; r < dim; ++r) b[a * dim + r] = c[r];
  }
  Vec sol;
  try {
    sol = numkit::lu_solve(std::move(op), std::move(b));
  } catch (const NumericalError&) {
    throw NumericalError(
        "homological operator is singular: the hyperbolic block has an "
        "eigenvalue at zero");
  }
  for (std::size_t a = 0; a < monos.size(); ++a) {
    Vec c(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) c[r] = sol[a * dim + r];
    out.set_term(monos[a], c);
  }
  out.prune(0.0);
  return out;
}

// Cross terms sum_j Dw^(j) * g^(k+1-j) entering the degree-k right-hand side.
PolyField feedback_terms(const PolyField& w, const std::vector<PolyField>& gparts,
                         std::size_t k) {
  PolyField cross(w.n(), w.d(), w.target_dim(), w.order());
  for (std::size_t j = 2; j + 1 <= k; ++j)
    accumulate(cross, directional_derivative(w.part(j), gparts[k + 1 - j], k));
  return cross;
}

}  // namespace

std::size_t total_degree(const MultiIndex& e) {
  std::size_t s = 0;
  for (unsigned v : e) s += v;
  return s;
}

bool GradedLess::operator()(const MultiIndex& a, const MultiIndex& b) const {
  const std::size_t da = total_degree(a), db = total_degree(b);
  if (da != db) return da < db;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

PolyField::PolyField(std::size_t n, std::size_t d, std::size_t target_dim,
                     std::size_t order)
    : n_(n), d_(d), target_(target_dim), order_(order) {}

void PolyField::check_exps(const MultiIndex& exps, const Vec& coef) const {
  if (exps.size() != n_ + d_)
    throw ValidationError("polynomial term: exponent vector has wrong length");
  if (coef.size() != target_)
    throw ValidationError("polynomial term: coefficient has wrong dimension");
}

void PolyField::add_term(const MultiIndex& exps, const Vec& coef) {
  check_exps(exps, coef);
  if (total_degree(exps) > order_) return;
  auto it = terms_.find(exps);
  if (it == terms_.end()) {
    terms_.emplace(exps, coef);
    return;
  }
  for (std::size_t i = 0; i < target_; ++i) it->second[i] += coef[i];
}

void PolyField::set_term(const MultiIndex& exps, const Vec& coef) {
  check_exps(exps, coef);
  if (total_degree(exps) > order_) return;
  terms_[exps] = coef;
}

Vec PolyField::coeff(const MultiIndex& exps) const {
  auto it = terms_.find(exps);
  if (it == terms_.end()) return Vec(target_, 0.0);
  return it->second;
}

std::size_t PolyField::state_degree(const MultiIndex& e) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < n_; ++i) s += e[i];
  return s;
}

Vec PolyField::eval(const Vec& x, const Vec& eps) const {
  if (x.size() != n_ || eps.size() != d_)
    throw ValidationError("polynomial eval: point has wrong dimensions");
  Vec out(target_, 0.0);
  for (const auto& [e, c] : terms_) {
    double mono = 1.0;
    for (std::size_t i = 0; i < n_; ++i) mono *= ipow(x[i], e[i]);
    for (std::size_t j = 0; j < d_; ++j) mono *= ipow(eps[j], e[n_ + j]);
    for (std::size_t t = 0; t < target_; ++t) out[t] += mono * c[t];
  }
  return out;
}

PolyField PolyField::part(std::size_t degree) const {
  PolyField out(n_, d_, target_, order_);
  for (const auto& [e, c] : terms_)
    if (total_degree(e) == degree) out.set_term(e, c);
  return out;
}

PolyField PolyField::truncated(std::size_t max_degree) const {
  PolyField out(n_, d_, target_, std::min(order_, max_degree));
  for (const auto& [e, c] : terms_)
    if (total_degree(e) <= max_degree) out.set_term(e, c);
  return out;
}

PolyField PolyField::with_order(std::size_t order) const {
  PolyField out(n_, d_, target_, order);
  for (const auto& [e, c] : terms_)
    if (total_degree(e) <= order) out.set_term(e, c);
  return out;
}

void PolyField::prune(double tol) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    double m = 0.0;
    for (double v : it->second) m = std::max(m, std::fabs(v));
    if (m <= tol)
      it = terms_.erase(it);
    else
      ++it;
  }
}

double PolyField::max_coeff() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_)
    for (double v : c) m = std::max(m, std::fabs(v));
  return m;
}

bool PolyField::vanishes_at_zero_state() const {
  for (const auto& [e, c] : terms_) {
    if (state_degree(e) > 0) continue;
    for (double v : c)
      if (v != 0.0) return false;
  }
  return true;
}

bool PolyField::is_strict_nonlinearity() const {
  for (const auto& [e, c] : terms_) {
    bool zero = true;
    for (double v : c)
      if (v != 0.0) zero = false;
    if (zero) continue;
    if (state_degree(e) == 0) return false;
    if (total_degree(e) < 2) return false;
  }
  return true;
}

bool same_shape(const PolyField& a, const PolyField& b) {
  return a.n() == b.n() && a.d() == b.d() && a.target_dim() == b.target_dim();
}

double max_coeff_difference(const PolyField& a, const PolyField& b) {
  if (!same_shape(a, b))
    throw ValidationError("polynomial comparison: shapes differ");
  double m = 0.0;
  for (const auto& [e, c] : a.terms()) {
    Vec cb = b.coeff(e);
    for (std::size_t i = 0; i < c.size(); ++i)
      m = std::max(m, std::fabs(c[i] - cb[i]));
  }
  for (const auto& [e, c] : b.terms()) {
    Vec ca = a.coeff(e);
    for (std::size_t i = 0; i < c.size(); ++i)
      m = std::max(m, std::fabs(c[i] - ca[i]));
  }
  return m;
}

PolyField add(const PolyField& a, const PolyField& b) {
  if (!same_shape(a, b)) throw ValidationError("polynomial add: shapes differ");
  PolyField out(a.n(), a.d(), a.target_dim(), std::max(a.order(), b.order()));
  for (const auto& [e, c] : a.terms()) out.add_term(e, c);
  for (const auto& [e, c] : b.terms()) out.add_term(e, c);
  return out;
}

PolyField sub(const PolyField& a, const PolyField& b) { return add(a, scale(b, -1.0)); }

PolyField scale(const PolyField& a, double s) {
  PolyField out(a.n(), a.d(), a.target_dim(), a.order());
  for (const auto& [e, c] : a.terms()) {
    Vec sc(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) sc[i] = s * c[i];
    out.set_term(e, sc);
  }
  return out;
}

PolyField mul(const PolyField& a, const PolyField& b, std::size_t out_order) {
  if (a.target_dim() != 1 || b.target_dim() != 1)
    throw ValidationError("polynomial mul: expects scalar fields");
  if (a.n() != b.n() || a.d() != b.d())
    throw ValidationError("polynomial mul: variable spaces differ");
  PolyField out(a.n(), a.d(), 1, out_order);
  const std::size_t nv = a.nvars();
  for (const auto& [ea, ca] : a.terms()) {
    const std::size_t da = total_degree(ea);
    if (da > out_order) continue;
    for (const auto& [eb, cb] : b.terms()) {
      if (da + total_degree(eb) > out_order) continue;
      MultiIndex e(nv);
      for (std::size_t i = 0; i < nv; ++i) e[i] = ea[i] + eb[i];
      out.add_term(e, Vec{ca[0] * cb[0]});
    }
  }
  return out;
}

PolyField mul_vs(const PolyField& vec, const PolyField& scalar, std::size_t out_order) {
  if (scalar.target_dim() != 1)
    throw ValidationError("polynomial mul_vs: second factor must be scalar");
  if (vec.n() != scalar.n() || vec.d() != scalar.d())
    throw ValidationError("polynomial mul_vs: variable spaces differ");
  PolyField out(vec.n(), vec.d(), vec.target_dim(), out_order);
  const std::size_t nv = vec.nvars();
  for (const auto& [ea, ca] : vec.terms()) {
    const std::size_t da = total_degree(ea);
    if (da > out_order) continue;
    for (const auto& [eb, cb] : scalar.terms()) {
      if (da + total_degree(eb) > out_order) continue;
      MultiIndex e(nv);
      for (std::size_t i = 0; i < nv; ++i) e[i] = ea[i] + eb[i];
      Vec c(ca.size());
      for (std::size_t i = 0; i < ca.size(); ++i) c[i] = ca[i] * cb[0];
      out.add_term(e, c);
    }
  }
  return out;
}

PolyField component(const PolyField& f, std::size_t i) {
  if (i >= f.target_dim())
    throw ValidationError("polynomial component: index out of range");
  PolyField out(f.n(), f.d(), 1, f.order());
  for (const auto& [e, c] : f.terms())
    if (c[i] != 0.0) out.set_term(e, Vec{c[i]});
  return out;
}

PolyField apply_linear(const Matrix& M, const PolyField& f) {
  if (M.cols() != f.target_dim())
    throw ValidationError("polynomial apply_linear: matrix does not match target");
  PolyField out(f.n(), f.d(), M.rows(), f.order());
  for (const auto& [e, c] : f.terms()) out.add_term(e, M.apply(c));
  out.prune(0.0);
  return out;
}

PolyField from_linear(const Matrix& M, std::size_t d, std::size_t order) {
  if (order < 1) throw ValidationError("from_linear: order must be at least 1");
  PolyField out(M.cols(), d, M.rows(), order);
  for (std::size_t j = 0; j < M.cols(); ++j) {
    MultiIndex e(M.cols() + d, 0u);
    e[j] = 1;
    Vec c = M.col(j);
    bool nonzero = false;
    for (double v : c)
      if (v != 0.0) nonzero = true;
    if (nonzero) out.set_term(e, c);
  }
  return out;
}

Matrix linear_state_matrix(const PolyField& f) {
  Matrix M(f.target_dim(), f.n());
  for (std::size_t j = 0; j < f.n(); ++j) {
    MultiIndex e(f.nvars(), 0u);
    e[j] = 1;
    Vec c = f.coeff(e);
    for (std::size_t i = 0; i < f.target_dim(); ++i) M(i, j) = c[i];
  }
  return M;
}

PolyField partial_state(const PolyField& f, std::size_t i) {
  if (i >= f.n())
    throw ValidationError("polynomial derivative: state index out of range");
  PolyField out(f.n(), f.d(), f.target_dim(), f.order());
  for (const auto& [e, c] : f.terms()) {
    if (e[i] == 0) continue;
    MultiIndex de = e;
    de[i] -= 1;
    Vec dc(c.size());
    for (std::size_t t = 0; t < c.size(); ++t) dc[t] = c[t] * double(e[i]);
    out.add_term(de, dc);
  }
  return out;
}

PolyField directional_derivative(const PolyField& f, const PolyField& g,
                                 std::size_t out_order) {
  if (g.target_dim() != f.n())
    throw ValidationError("directional derivative: direction has wrong dimension");
  if (f.n() != g.n() || f.d() != g.d())
    throw ValidationError("directional derivative: variable spaces differ");
  PolyField out(f.n(), f.d(), f.target_dim(), out_order);
  for (std::size_t i = 0; i < f.n(); ++i)
    accumulate(out, mul_vs(partial_state(f, i), component(g, i), out_order));
  return out;
}

PolyField compose_full(const PolyField& f, const PolyField& sub_states,
                       const PolyField& sub_params, std::size_t out_order) {
  if (sub_states.target_dim() != f.n())
    throw ValidationError("compose: state substitution has wrong target dimension");
  if (sub_params.target_dim() != f.d())
    throw ValidationError("compose: parameter substitution has wrong target dimension");
  if (sub_states.n() != sub_params.n() || sub_states.d() != sub_params.d())
    throw ValidationError("compose: substitutions live in different variable spaces");
  const std::size_t nn = sub_states.n(), nd = sub_states.d();
  PolyField out(nn, nd, f.target_dim(), out_order);
  std::vector<std::vector<PolyField>> powx(f.n()), powp(f.d());
  auto power = [&](std::vector<PolyField>& cache, const PolyField& base,
                   unsigned e) -> const PolyField& {
    if (cache.empty()) cache.push_back(constant_one(nn, nd, out_order));
    while (cache.size() <= e) {
      if (cache.size() == 1)
        cache.push_back(base.truncated(out_order).with_order(out_order));
      else
        cache.push_back(mul(cache.back(), base, out_order));
    }
    return cache[e];
  };
  std::vector<PolyField> basex, basep;
  for (std::size_t i = 0; i < f.n(); ++i) basex.push_back(component(sub_states, i));
  for (std::size_t j = 0; j < f.d(); ++j) basep.push_back(component(sub_params, j));
  for (const auto& [e, c] : f.terms()) {
    PolyField prod = constant_one(nn, nd, out_order);
    bool dead = false;
    for (std::size_t i = 0; i < f.n() && !dead; ++i) {
      if (!e[i]) continue;
      prod = mul(prod, power(powx[i], basex[i], e[i]), out_order);
      dead = prod.empty();
    }
    for (std::size_t j = 0; j < f.d() && !dead; ++j) {
      if (!e[f.n() + j]) continue;
      prod = mul(prod, power(powp[j], basep[j], e[f.n() + j]), out_order);
      dead = prod.empty();
    }
    if (dead) continue;
    for (const auto& [pe, pv] : prod.terms()) {
      Vec coef(f.target_dim());
      for (std::size_t t = 0; t < f.target_dim(); ++t) coef[t] = c[t] * pv[0];
      out.add_term(pe, coef);
    }
  }
  return out;
}

PolyField compose(const PolyField& f, const PolyField& sub_states, std::size_t out_order) {
  if (f.d() != sub_states.d())
    throw ValidationError("compose: parameter dimensions differ");
  return compose_full(f, sub_states,
                      param_identity(sub_states.n(), sub_states.d(), out_order),
                      out_order);
}

PolyField identity_map(std::size_t n, std::size_t d, std::size_t order) {
  return from_linear(Matrix::identity(n), d, order);
}

PolyField param_identity(std::size_t n, std::size_t d, std::size_t order) {
  PolyField out(n, d, d, std::max<std::size_t>(order, 1));
  for (std::size_t j = 0; j < d; ++j) {
    MultiIndex e(n + d, 0u);
    e[n + j] = 1;
    Vec c(d, 0.0);
    c[j] = 1.0;
    out.set_term(e, c);
  }
  return out;
}

PolyField truncated_inverse_map(const PolyField& phi, std::size_t out_order) {
  if (phi.target_dim() != phi.n())
    throw ValidationError("map inversion: map must be square in the states");
  MultiIndex zero(phi.nvars(), 0u);
  Vec c0 = phi.coeff(zero);
  for (double v : c0)
    if (v != 0.0) throw ValidationError("map inversion: map must fix the origin");
  Matrix M = linear_state_matrix(phi);
  Matrix Minv = numkit::inverse(M);  // throws when the linear part is singular
  PolyField p = sub(phi.with_order(out_order),
                    from_linear(M, phi.d(), std::max<std::size_t>(out_order, 1)));
  PolyField id = identity_map(phi.n(), phi.d(), out_order);
  PolyField psi = apply_linear(Minv, id);
  for (std::size_t it = 0; it < out_order; ++it)
    psi = apply_linear(Minv, sub(id, compose(p, psi, out_order)));
  double err = max_coeff_difference(compose(phi, psi, out_order), id);
  // The fixed-point iteration is exact through out_order, so err is pure
  // roundoff and scales with the coefficients of both maps.
  double scale = std::max({1.0, phi.max_coeff(), psi.max_coeff()});
  if (err > 1e-9 * scale)
    throw NumericalError("map inversion did not converge to the identity");
  return psi;
}

PolyField node_diagonal_lift(const PolyField& h, std::size_t copies) {
  if (copies == 0) throw ValidationError("node lift: need at least one copy");
  const std::size_t n = h.n(), d = h.d();
  PolyField out(copies * n, d, copies * h.target_dim(), h.order());
  for (std::size_t p = 0; p < copies; ++p) {
    for (const auto& [e, c] : h.terms()) {
      MultiIndex ne(copies * n + d, 0u);
      for (std::size_t i = 0; i < n; ++i) ne[p * n + i] = e[i];
      for (std::size_t j = 0; j < d; ++j) ne[copies * n + j] = e[n + j];
      Vec nc(copies * h.target_dim(), 0.0);
      for (std::size_t t = 0; t < h.target_dim(); ++t) nc[p * h.target_dim() + t] = c[t];
      out.add_term(ne, nc);
    }
  }
  return out;
}

PolyField channel_embed(const Vec& weights, const PolyField& f) {
  const std::size_t blocks = weights.size();
  if (blocks == 0) throw ValidationError("channel embed: empty weight vector");
  PolyField out(f.n(), f.d(), blocks * f.target_dim(), f.order());
  for (const auto& [e, c] : f.terms()) {
    Vec nc(blocks * f.target_dim(), 0.0);
    for (std::size_t p = 0; p < blocks; ++p)
      for (std::size_t t = 0; t < f.target_dim(); ++t)
        nc[p * f.target_dim() + t] = weights[p] * c[t];
    out.add_term(e, nc);
  }
  return out;
}

std::vector<MultiIndex> homogeneous_exponents(std::size_t nvars, std::size_t degree) {
  std::vector<MultiIndex> out;
  if (nvars == 0) {
    if (degree == 0) out.push_back(MultiIndex{});
    return out;
  }
  MultiIndex cur(nvars, 0u);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t var,
                                                          std::size_t left) {
    if (var + 1 == nvars) {
      cur[var] = unsigned(left);
      out.push_back(cur);
      return;
    }
    for (std::size_t e = 0; e <= left; ++e) {
      cur[var] = unsigned(e);
      rec(var + 1, left - e);
    }
  };
  rec(0, degree);
  std::sort(out.begin(), out.end(), GradedLess{});
  return out;
}

Matrix homological_operator(const Matrix& T, const Matrix& N, std::size_t degree,
                            std::size_t num_params) {
  if (!T.square() || !N.square())
    throw ValidationError("homological operator: blocks must be square");
  const std::size_t dim = T.rows();
  const std::size_t m = N.rows();
  const auto monos = homogeneous_exponents(m + num_params, degree);
  std::map<MultiIndex, std::size_t, GradedLess> index;
  for (std::size_t a = 0; a < monos.size(); ++a) index[monos[a]] = a;
  Matrix op(monos.size() * dim, monos.size() * dim, 0.0);
  for (std::size_t a = 0; a < monos.size(); ++a) {
    const MultiIndex& e = monos[a];
    for (std::size_t rp = 0; rp < dim; ++rp)
      for (std::size_t r = 0; r < dim; ++r) op(a * dim + rp, a * dim + r) += T(rp, r);
    for (std::size_t i = 0; i < m; ++i) {
      if (e[i] == 0) continue;
      for (std::size_t j = 0; j < m; ++j) {
        const double nij = N(i, j);
        if (nij == 0.0) continue;
        MultiIndex shifted = e;
        shifted[i] -= 1;
        shifted[j] += 1;
        const std::size_t b = index.at(shifted);
        for (std::size_t r = 0; r < dim; ++r)
          op(b * dim + r, a * dim + r) -= double(e[i]) * nij;
      }
    }
  }
  return op;
}

double invariance_residual(const Matrix& J, const PolyField& H, const PolyField& X,
                           const PolyField& R, std::size_t order) {
  PolyField lhs = apply_linear(J, X);
  if (!H.terms().empty()) lhs = add(lhs, compose(H, X, order));
  PolyField defect = sub(lhs, directional_derivative(X, R, order));
  return defect.truncated(order).max_coeff();
}

CenterModel reduce_dense(const Matrix& J, const CenterSplit& split, const PolyField& H,
                         std::size_t rho, const Tolerances&) {
  const std::size_t n = J.rows();
  check_reduction_inputs(H, n, rho);
  SplitFrames fr = split_frames(J, split);
  const std::size_t m = split.Ec_basis.cols();
  const std::size_t hd = split.Eh_basis.cols();
  const std::size_t d = H.d();
  const Matrix& N = split.nilpotent_block;

  PolyField X = apply_linear(split.Ec_basis, identity_map(m, d, rho));
  PolyField psi(m, d, n, rho);
  PolyField w(m, d, hd, rho);
  PolyField R = from_linear(N, d, rho);
  std::vector<PolyField> gparts(rho + 1, PolyField(m, d, m, rho));

  for (std::size_t k = 2; k <= rho; ++k) {
    PolyField ck = compose(H, X, k).part(k);
    PolyField gk = apply_linear(fr.Wc, ck);
    gparts[k] = gk;
    accumulate(R, gk);
    if (hd > 0) {
      PolyField rhs = sub(feedback_terms(w, gparts, k), apply_linear(fr.Wh, ck));
      PolyField wk = solve_block(fr.T22, N, rhs.with_order(k), k);
      PolyField psik = apply_linear(split.Eh_basis, wk.with_order(rho));
      accumulate(w, wk.with_order(rho));
      accumulate(psi, psik);
      accumulate(X, psik);
    }
  }
  CenterModel model;
  model.psi = psi;
  model.reduced = R;
  model.order = rho;
  model.residual = invariance_residual(J, H, X, R, rho);
  return model;
}

PolyField solve_homological(const Matrix& J, const CenterSplit& split, const PolyField& H,
                            std::size_t rho, const Tolerances& tol) {
  return reduce_dense(J, split, H, rho, tol).psi;
}

namespace {

// Locates the distinguished channel and returns the Laplacian eigenpairs with
// the stored design eigenvector substituted on that channel.
struct ChannelData {
  std::size_t s = 0;
  Vec lambdas;
  std::vector<Vec> vectors;
};

ChannelData channel_data(const NetworkDesign& net, const Tolerances& tol) {
  const std::size_t N = net.graph.n;
  numkit::Spectrum spec = graphlab::laplacian_spectrum(net.graph, tol);
  std::size_t s = 0;
  double best = std::fabs(spec.values[0].real() - net.lambda);
  for (std::size_t q = 1; q < N; ++q) {
    double dist = std::fabs(spec.values[q].real() - net.lambda);
    if (dist < best) {
      best = dist;
      s = q;
    }
  }
  if (best > 1e-8 * std::max(1.0, std::fabs(net.lambda)))
    throw ValidationError("design eigenvalue is not in the graph spectrum");
  Vec vs = spec.vectors.col(s);
  double dplus = 0.0, dminus = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    dplus = std::max(dplus, std::fabs(vs[i] - net.v[i]));
    dminus = std::max(dminus, std::fabs(vs[i] + net.v[i]));
  }
  if (std::min(dplus, dminus) > 1e-8)
    throw NumericalError("design eigenvector does not match the graph Laplacian");
  ChannelData ch;
  ch.s = s;
  ch.lambdas.resize(N);
  ch.vectors.resize(N);
  for (std::size_t q = 0; q < N; ++q) {
    ch.lambdas[q] = spec.values[q].real();
    ch.vectors[q] = (q == s) ? net.v : spec.vectors.col(q);
  }
  ch.lambdas[s] = net.lambda;
  return ch;
}

PolyField stack_nodes(const std::vector<PolyField>& nodes) {
  const std::size_t N = nodes.size();
  const std::size_t nt = nodes[0].target_dim();
  PolyField out(nodes[0].n(), nodes[0].d(), N * nt, nodes[0].order());
  for (std::size_t p = 0; p < N; ++p) {
    for (const auto& [e, c] : nodes[p].terms()) {
      Vec nc(N * nt, 0.0);
      for (std::size_t t = 0; t < nt; ++t) nc[p * nt + t] = c[t];
      out.add_term(e, nc);
    }
  }
  return out;
}

}  // namespace

netlin::CenterSplit lift_split(const NetworkDesign& net, const CenterSplit& split,
                               const Tolerances& tol) {
  const std::size_t N = net.graph.n;
  const std::size_t n = net.A.rows();
  const std::size_t m = split.Ec_basis.cols();
  ChannelData ch = channel_data(net, tol);
  auto kron_col = [&](const Vec& v, const Vec& u) {
    Vec out(N * n, 0.0);
    for (std::size_t p = 0; p < N; ++p)
      for (std::size_t i = 0; i < n; ++i) out[p * n + i] = v[p] * u[i];
    return out;
  };
  std::vector<Vec> ec_cols, eh_cols;
  for (std::size_t j = 0; j < m; ++j)
    ec_cols.push_back(kron_col(net.v, split.Ec_basis.col(j)));
  for (std::size_t j = 0; j < split.Eh_basis.cols(); ++j)
    eh_cols.push_back(kron_col(net.v, split.Eh_basis.col(j)));
  for (std::size_t q = 0; q < N; ++q) {
    if (q == ch.s) continue;
    for (std::size_t i = 0; i < n; ++i) {
      Vec e(n, 0.0);
      e[i] = 1.0;
      eh_cols.push_back(kron_col(ch.vectors[q], e));
    }
  }
  Matrix vv(N, N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) vv(i, j) = net.v[i] * net.v[j];
  CenterSplit full;
  full.Ec_basis = Matrix::from_columns(ec_cols);
  full.Eh_basis = Matrix::from_columns(eh_cols);
  full.proj_c = numkit::kron(vv, split.proj_c);
  full.nilpotent_block = split.nilpotent_block;
  return full;
}

CenterModel reduced_field(const NetworkDesign& net, const CenterSplit& split,
                          const PolyField& h, std::size_t rho, const Tolerances& tol) {
  const std::size_t N = net.graph.n;
  const std::size_t n = net.A.rows();
  if (!net.A.square() || !net.D.square() || net.D.rows() != n || net.v.size() != N)
    throw ValidationError("network design dimensions are inconsistent");
  check_reduction_inputs(h, n, rho);
  const std::size_t m = split.Ec_basis.cols();
  if (m != net.m)
    throw ValidationError("center split dimension does not match the design");
  const std::size_t d = h.d();

  Matrix K = net.A;
  {
    Matrix scaled = net.D;
    scaled *= net.alpha_star * net.lambda;
    K -= scaled;
  }
  SplitFrames fr = split_frames(K, split);
  const std::size_t hd = split.Eh_basis.cols();
  const Matrix& Nblk = split.nilpotent_block;
  ChannelData ch = channel_data(net, tol);

  std::vector<Matrix> Bq(N);
  for (std::size_t q = 0; q < N; ++q) {
    if (q == ch.s) continue;
    Matrix scaled = net.D;
    scaled *= net.alpha_star * ch.lambdas[q];
    Bq[q] = net.A;
    Bq[q] -= scaled;
  }

  PolyField ec_lin = apply_linear(split.Ec_basis, identity_map(m, d, rho));
  std::vector<PolyField> X_node(N);
  for (std::size_t p = 0; p < N; ++p) X_node[p] = scale(ec_lin, net.v[p]);
  std::vector<PolyField> psi_ch(N, PolyField(m, d, n, rho));
  PolyField w_s(m, d, hd, rho);
  PolyField R = from_linear(Nblk, d, rho);
  std::vector<PolyField> gparts(rho + 1, PolyField(m, d, m, rho));

  for (std::size_t k = 2; k <= rho; ++k) {
    // node-wise jets of h on the manifold, then their channel components
    std::vector<PolyField> hx(N);
    std::vector<std::exception_ptr> fails(N);
#pragma omp parallel for schedule(dynamic)
    for (int p = 0; p < int(N); ++p) {
      try {
        hx[p] = compose(h, X_node[p], k).part(k);
      } catch (...) {
        fails[p] = std::current_exception();
      }
    }
    for (auto& f : fails)
      if (f) std::rethrow_exception(f);

    std::vector<PolyField> cq(N, PolyField(m, d, n, rho));
    for (std::size_t q = 0; q < N; ++q)
      for (std::size_t p = 0; p < N; ++p)
        accumulate(cq[q], scale(hx[p], ch.vectors[q][p]));

    PolyField gk = apply_linear(fr.Wc, cq[ch.s]);
    gparts[k] = gk;
    accumulate(R, gk);

    std::vector<PolyField> psik(N);
    PolyField wk;
    std::fill(fails.begin(), fails.end(), std::exception_ptr{});
#pragma omp parallel for schedule(dynamic)
    for (int q = 0; q < int(N); ++q) {
      try {
        if (std::size_t(q) == ch.s) {
          if (hd > 0) {
            PolyField rhs =
                sub(feedback_terms(w_s, gparts, k), apply_linear(fr.Wh, cq[q]));
            wk = solve_block(fr.T22, Nblk, rhs.with_order(k), k);
            psik[q] = apply_linear(split.Eh_basis, wk.with_order(rho));
          } else {
            psik[q] = PolyField(m, d, n, rho);
          }
        } else {
          PolyField rhs =
              sub(feedback_terms(psi_ch[q], gparts, k), cq[q]).with_order(k);
          psik[q] = solve_block(Bq[q], Nblk, rhs, k).with_order(rho);
        }
      } catch (...) {
        fails[q] = std::current_exception();
      }
    }
    for (auto& f : fails)
      if (f) std::rethrow_exception(f);

    if (hd > 0) accumulate(w_s, wk.with_order(rho));
    for (std::size_t q = 0; q < N; ++q) {
      accumulate(psi_ch[q], psik[q]);
      for (std::size_t p = 0; p < N; ++p)
        accumulate(X_node[p], scale(psik[q], ch.vectors[q][p]));
    }
  }

  PolyField psi_amb(m, d, N * n, rho);
  for (std::size_t q = 0; q < N; ++q)
    accumulate(psi_amb, channel_embed(ch.vectors[q], psi_ch[q]));
  psi_amb.prune(0.0);

  Matrix Jfull = netlin::assemble_linearization(net, net.alpha_star);
  PolyField Hfull = node_diagonal_lift(h, N);
  PolyField Xfull = stack_nodes(X_node);

  CenterModel model;
  model.psi = psi_amb;
  model.reduced = R;
  model.order = rho;
  model.residual = invariance_residual(Jfull, Hfull, Xfull, R, rho);
  model.psi_channels = psi_ch;
  return model;
}

PolyField inverse_design(const PolyField& target, const NetworkDesign& net,
                         const CenterSplit& split, std::size_t rho,
                         const Tolerances& tol) {
  const std::size_t m = split.Ec_basis.cols();
  const std::size_t n = net.A.rows();
  const std::size_t d = target.d();
  if (rho < 1 || rho > 6)
    throw ValidationError("design order must be between 1 and 6");
  if (target.n() != m || target.target_dim() != m)
    throw ValidationError("design target must live on the center coordinates");
  PolyField tgt = target;
  tgt.prune(0.0);
  if (!tgt.vanishes_at_zero_state())
    throw ValidationError("design target must vanish at the origin for every parameter");
  for (const auto& [e, c] : tgt.terms())
    if (total_degree(e) > rho)
      throw ValidationError("design target has terms beyond the requested order");
  {
    Matrix lin = linear_state_matrix(tgt);
    Matrix diff = lin - split.nilpotent_block;
    if (diff.max_abs() > 1e-10 * std::max(1.0, split.nilpotent_block.max_abs()))
      throw ValidationError("design target linear part must equal the center block");
  }

  const Vec& v = net.v;
  const std::size_t N = v.size();
  double vinf = 0.0;
  for (double x : v) vinf = std::max(vinf, std::fabs(x));
  auto power_sum = [&](std::size_t ell) {
    double s = 0.0;
    for (double x : v) s += ipow(x, unsigned(ell));
    return s;
  };
  auto require_versatile = [&](std::size_t ell) {
    double s = power_sum(ell);
    if (std::fabs(s) <= 1e-9 * double(N) * ipow(vinf, unsigned(ell))) {
      std::ostringstream msg;
      msg << "not versatile at ell=" << ell
          << ": the eigenvector power sum vanishes, no node nonlinearity can "
             "realize this term";
      throw VersatilityError(ell, msg.str());
    }
    return s;
  };

  const double deficit_floor = 1e-13 * std::max(1.0, tgt.max_coeff());
  PolyField h(n, d, n, rho);
  for (std::size_t k = 2; k <= rho; ++k) {
    CenterModel model = reduced_field(net, split, h, k, tol);
    PolyField deficit = sub(tgt.part(k), model.reduced.part(k));
    for (const auto& [e, u] : deficit.terms()) {
      double umax = 0.0;
      for (double x : u) umax = std::max(umax, std::fabs(x));
      if (umax <= deficit_floor) continue;
      const std::size_t a = tgt.state_degree(e);
      if (a == 0)
        throw NumericalError("design produced a parameter-only deficit");
      const double s_pow = require_versatile(a + 1);
      // monomial in ambient coordinates reproducing e on the center subspace
      PolyField mono(n, d, 1, rho);
      {
        MultiIndex e0(n + d, 0u);
        for (std::size_t j = 0; j < d; ++j) e0[n + j] = e[m + j];
        mono.set_term(e0, Vec{1.0});
      }
      for (std::size_t i = 0; i < m; ++i) {
        if (!e[i]) continue;
        PolyField lin(n, d, 1, rho);
        for (std::size_t jrow = 0; jrow < n; ++jrow) {
          if (split.Ec_basis(jrow, i) == 0.0) continue;
          MultiIndex le(n + d, 0u);
          le[jrow] = 1;
          lin.set_term(le, Vec{split.Ec_basis(jrow, i)});
        }
        for (unsigned rep = 0; rep < e[i]; ++rep) mono = mul(mono, lin, rho);
      }
      Vec dir = split.Ec_basis.apply(u);
      for (double& x : dir) x /= s_pow;
      for (const auto& [me, mv] : mono.terms()) {
        Vec c(n);
        for (std::size_t t = 0; t < n; ++t) c[t] = dir[t] * mv[0];
        h.add_term(me, c);
      }
    }
  }
  h.prune(0.0);

  CenterModel audit = reduced_field(net, split, h, rho, tol);
  if (max_coeff_difference(audit.reduced, tgt) >
      1e-8 * std::max(1.0, tgt.max_coeff()))
    throw NumericalError("nonlinearity design did not converge to the target");
  return h;
}

}  // namespace nilnet::cmred

#include "nilnet/netlin.hpp"

#include <algorithm>
#include <cmath>

#include "nilnet/coupling.hpp"

namespace nilnet::netlin {

Matrix assemble_linearization(const NetworkDesign& net, double alpha) {
  if (!net.A.square() || !net.D.square() || net.A.rows() != net.D.rows())
    throw ValidationError("assemble_linearization: A and D must be square and equal size");
  if (net.graph.n == 0) throw ValidationError("assemble_linearization: empty graph");
  Matrix L = graphlab::laplacian(net.graph);
  Matrix out = numkit::kron(Matrix::identity(net.graph.n), net.A);
  Matrix coupling_part = numkit::kron(L, net.D);
  coupling_part *= alpha;
  out -= coupling_part;
  return out;
}

std::vector<BlockSpectrum> block_spectrum(const NetworkDesign& net, double alpha,
                                          const Tolerances& tol) {
  Spectrum lap = graphlab::laplacian_spectrum(net.graph, tol);
  std::vector<BlockSpectrum> out(net.graph.n);
  for (std::size_t p = 0; p < net.graph.n; ++p) {
    out[p].lambda_p = lap.values[p].real();
    out[p].v_p = lap.vectors.col(p);
    Matrix block = net.A - (alpha * out[p].lambda_p) * net.D;
    out[p].spec = numkit::eigendecompose(block, false, tol);
  }
  return out;
}

namespace {

bool block_hyperbolic(const Matrix& block, const Tolerances& tol) {
  Spectrum spec = numkit::eigendecompose(block, false, tol);
  for (const auto& z : spec.values)
    if (std::abs(z.real()) <= tol.gap) return false;
  return true;
}

// distinct non-distinguished eigenvalues, distinguished appended last
Vec audit_lambda_list(const Spectrum& lap, std::size_t idx, const Tolerances& tol) {
  Vec out;
  for (std::size_t p = 0; p < lap.size(); ++p) {
    if (p == idx) continue;
    double l = lap.values[p].real();
    bool seen = false;
    for (double o : out)
      if (std::abs(o - l) <= tol.gap) seen = true;
    if (!seen) out.push_back(l);
  }
  out.push_back(lap.values[idx].real());
  return out;
}

}  // namespace

NetworkDesign choose_alpha_star(const Matrix& A, const Matrix& D, const graphlab::Graph& g,
                                std::optional<std::size_t> which, const Tolerances& tol) {
  if (!A.square() || !D.square() || A.rows() != D.rows())
    throw ValidationError("choose_alpha_star: A and D must be square and equal size");
  if (g.n < 2) throw ValidationError("choose_alpha_star: need at least 2 nodes");

  Spectrum lap = graphlab::laplacian_spectrum(g, tol);
  std::size_t idx = which ? *which : g.n - 1;
  if (idx >= g.n) throw ValidationError("choose_alpha_star: eigenvalue index out of range");
  double lambda = lap.values[idx].real();
  if (lambda <= tol.gap)
    throw ValidationError("choose_alpha_star: distinguished eigenvalue must be positive");
  double gap_thr = tol.gap * std::max(1.0, lambda);
  for (std::size_t p = 0; p < g.n; ++p)
    if (p != idx && std::abs(lap.values[p].real() - lambda) < gap_thr)
      throw ValidationError("choose_alpha_star: distinguished eigenvalue not simple");

  NetworkDesign net;
  net.graph = g;
  net.alpha_star = 1.0 / lambda;
  net.lambda = lambda;
  net.v = lap.vectors.col(idx);

  Matrix K = A - (net.alpha_star * lambda) * D;
  net.m = numkit::generalized_kernel(K, tol.zero_eig).dim();
  if (net.m == 0)
    throw ValidationError("choose_alpha_star: distinguished block has no kernel");

  Vec lambdas = audit_lambda_list(lap, idx, tol);
  bool all_ok = true;
  for (std::size_t k = 0; k + 1 < lambdas.size(); ++k) {
    Matrix block = A - (net.alpha_star * lambdas[k]) * D;
    if (!block_hyperbolic(block, tol)) all_ok = false;
  }
  if (all_ok) {
    net.A = A;
    net.D = D;
    return net;
  }

  auto fix = coupling::perturb_for_hyperbolicity(A, D, net.alpha_star, lambdas,
                                                 std::nullopt, tol);
  for (std::size_t k = 0; k + 1 < lambdas.size(); ++k) {
    Matrix block = fix.A_tilde - (net.alpha_star * lambdas[k]) * fix.D_tilde;
    if (!block_hyperbolic(block, tol))
      throw NumericalError("choose_alpha_star: block still on the axis after perturbation");
  }
  net.A = fix.A_tilde;
  net.D = fix.D_tilde;
  return net;
}

CenterSplit center_split(const Matrix& M, std::size_t m, const Tolerances& tol) {
  if (!M.square()) throw ValidationError("center_split: non-square matrix");
  const std::size_t n = M.rows();
  if (m == 0 || m > n) throw ValidationError("center_split: bad center dimension");

  auto gk = numkit::generalized_kernel(M, tol.zero_eig);
  if (gk.dim() != m)
    throw NumericalError("center_split: generalized kernel has dimension " +
                         std::to_string(gk.dim()) + ", expected " + std::to_string(m));

  CenterSplit out;
  out.Ec_basis = gk.basis;

  Matrix Bw = numkit::orthonormal_complement(out.Ec_basis);
  const std::size_t h = n - m;

  // orthogonal frame Z = [E^c | W]; E^c is M-invariant so Z^T M Z is block
  // upper-triangular up to round-off
  Matrix Z(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) Z(i, j) = out.Ec_basis(i, j);
    for (std::size_t j = 0; j < h; ++j) Z(i, m + j) = Bw(i, j);
  }
  Matrix T = Z.transpose() * M * Z;
  double scale = std::max(1.0, M.norm_inf());
  Matrix T11(m, m), T12(m, h), T22(h, h);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) T11(i, j) = T(i, j);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < h; ++j) T12(i, j) = T(i, m + j);
  double t21 = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < m; ++j) t21 = std::max(t21, std::abs(T(m + i, j)));
    for (std::size_t j = 0; j < h; ++j) T22(i, j) = T(m + i, m + j);
  }
  if (t21 > 1e-8 * scale)
    throw NumericalError("center_split: center subspace not invariant under M");

  if (h > 0) {
    // invariant complement E^h = span(W + E^c Y) with T11 Y - Y T22 = -T12
    Matrix Op = numkit::kron(Matrix::identity(h), T11) - numkit::kron(T22.transpose(), Matrix::identity(m));
    Vec rhs(m * h);
    for (std::size_t j = 0; j < h; ++j)
      for (std::size_t i = 0; i < m; ++i) rhs[j * m + i] = -T12(i, j);
    Vec y = numkit::lu_solve(Op, rhs);
    Matrix Y(m, h);
    for (std::size_t j = 0; j < h; ++j)
      for (std::size_t i = 0; i < m; ++i) Y(i, j) = y[j * m + i];
    out.Eh_basis = Bw + out.Ec_basis * Y;
  } else {
    out.Eh_basis = Matrix(n, 0);
  }

  // projection with range E^c and kernel E^h
  if (h > 0) {
    Matrix Z2(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) Z2(i, j) = out.Ec_basis(i, j);
      for (std::size_t j = 0; j < h; ++j) Z2(i, m + j) = out.Eh_basis(i, j);
    }
    Matrix Z2inv = numkit::inverse(Z2);
    out.proj_c = Matrix::zero(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += out.Ec_basis(i, k) * Z2inv(k, j);
        out.proj_c(i, j) = s;
      }
  } else {
    out.proj_c = Matrix::identity(n);
  }

  // grade order makes the sub-grade entries structural zeros; snap round-off
  out.nilpotent_block = T11;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (std::abs(out.nilpotent_block(i, j)) < 1e-12 * scale) out.nilpotent_block(i, j) = 0.0;
  return out;
}

}  // namespace nilnet::netlin

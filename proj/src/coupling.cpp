#include "nilnet/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nilnet::coupling {

using numkit::EigClass;
using numkit::Spectrum;

namespace {

Matrix symmetric_part(const Matrix& A) {
  Matrix S = A;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) S(i, j) = 0.5 * (A(i, j) + A(j, i));
  return S;
}

Vec rayleigh_values(const Matrix& A, const Matrix& X) {
  Vec r(X.cols());
  for (std::size_t j = 0; j < X.cols(); ++j) {
    Vec x = X.col(j);
    r[j] = numkit::dot(x, A.apply(x));
  }
  return r;
}

// strictly upper products P(j,i) = <x_j, (A+A^T) x_i>, j < i
Matrix products_matrix(const Matrix& A, const Matrix& X) {
  const std::size_t m = X.cols();
  Matrix S = symmetric_part(A);
  Matrix P = Matrix::zero(m, m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = j + 1; i < m; ++i)
      P(j, i) = 2.0 * numkit::dot(X.col(j), S.apply(X.col(i)));
  return P;
}

Matrix build_D(const Matrix& A, const Matrix& X, const Matrix& P, const Matrix& Y, double c) {
  Matrix D = (A * X - X * P) * X.transpose();
  if (Y.cols() > 0) {
    Matrix YYt = Y * Y.transpose();
    YYt *= c;
    D += YYt;
  }
  return D;
}

struct SpectrumAudit {
  bool ok = false;
  std::size_t zero_count = 0;
  double worst_re = 0.0;  // largest real part among nonzero eigenvalues
};

// exactly m eigenvalues at 0 (scale of A sets the threshold; the kernel is
// exact by construction), everything else strictly stable
SpectrumAudit audit_spectrum(const Matrix& A, const Matrix& D, std::size_t m,
                             const Tolerances& tol) {
  Matrix K = A - D;
  Spectrum spec = numkit::eigendecompose(K, false, tol);
  double ztol = tol.zero_eig * std::max(1.0, A.norm_inf());
  SpectrumAudit out;
  out.worst_re = -std::numeric_limits<double>::infinity();
  for (const auto& z : spec.values) {
    if (std::abs(z) <= ztol) {
      ++out.zero_count;
    } else {
      out.worst_re = std::max(out.worst_re, z.real());
    }
  }
  out.ok = out.zero_count == m && out.worst_re < -tol.gap;
  return out;
}

CouplingDesign assemble_design(const Matrix& A, const SkewnessCertificate& cert, double c,
                               const Tolerances& tol) {
  CouplingDesign d;
  d.A = A;
  d.X = cert.directions;
  d.Y = numkit::orthonormal_complement(d.X);
  d.P = products_matrix(A, d.X);
  d.c = c;
  d.m = cert.m;
  d.D = build_D(A, d.X, d.P, d.Y, c);
  Matrix K = A - d.D;
  double cutoff = tol.zero_eig * std::max(1.0, K.norm_inf());
  d.kernel_geom = numkit::nullspace(K, cutoff).cols();
  return d;
}

bool admissible(const Matrix& A, const SkewnessCertificate& cert, const Matrix& Y, double c,
                const Tolerances& tol) {
  Matrix P = products_matrix(A, cert.directions);
  Matrix D = build_D(A, cert.directions, P, Y, c);
  if (!numkit::is_positive_definite(D, tol).first) return false;
  return audit_spectrum(A, D, cert.m, tol).ok;
}

}  // namespace

SkewnessCertificate find_skew_directions(const Matrix& A, std::optional<std::size_t> want_m,
                                         const Tolerances& tol) {
  if (!A.square()) throw ValidationError("find_skew_directions: non-square matrix");
  Matrix S = symmetric_part(A);
  Spectrum spec = numkit::eigendecompose(S, true, tol);
  double thr = tol.zero_eig * std::max(1.0, S.norm_inf());

  // eigenvalues ascending; walk from the top for positive ones
  std::vector<Vec> dirs;
  Vec ray;
  const std::size_t n = A.rows();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t idx = n - 1 - k;
    double mu = spec.values[idx].real();
    if (mu <= thr) break;
    dirs.push_back(spec.vectors.col(idx));
    ray.push_back(mu);  // <x, Ax> = <x, Sx> = mu for a unit eigenvector
    if (want_m && dirs.size() == *want_m) break;
  }

  SkewnessCertificate cert;
  cert.m = dirs.size();
  cert.directions = dirs.empty() ? Matrix(n, 0) : Matrix::from_columns(dirs);
  cert.rayleigh = ray;
  return cert;
}

SkewnessCertificate make_certificate(const Matrix& A, const Matrix& X, const Tolerances& tol) {
  if (!A.square() || X.rows() != A.rows())
    throw ValidationError("make_certificate: dimension mismatch");
  for (std::size_t i = 0; i < X.cols(); ++i)
    for (std::size_t j = i; j < X.cols(); ++j) {
      double d = numkit::dot(X.col(i), X.col(j));
      double want = i == j ? 1.0 : 0.0;
      if (std::abs(d - want) > 1e-10)
        throw ValidationError("make_certificate: directions not orthonormal");
    }
  SkewnessCertificate cert;
  cert.m = X.cols();
  cert.directions = X;
  cert.rayleigh = rayleigh_values(A, X);
  for (double r : cert.rayleigh)
    if (r <= tol.posdef_margin)
      throw ValidationError("make_certificate: rayleigh quotient not positive");
  return cert;
}

CouplingDesign synthesize_D(const Matrix& A, const SkewnessCertificate& cert,
                            std::optional<double> c, const Tolerances& tol) {
  if (cert.m < 1) throw ValidationError("synthesize_D: certificate has no directions");
  if (!A.square() || cert.directions.rows() != A.rows())
    throw ValidationError("synthesize_D: dimension mismatch");

  if (c) {
    CouplingDesign d = assemble_design(A, cert, *c, tol);
    if (!numkit::is_positive_definite(d.D, tol).first)
      throw NumericalError("synthesize_D: D not positive-definite at given c");
    if (!audit_spectrum(A, d.D, cert.m, tol).ok)
      throw NumericalError("synthesize_D: spectrum of A - D not admissible at given c");
    return d;
  }

  Matrix Y = numkit::orthonormal_complement(cert.directions);
  if (Y.cols() == 0) {
    // no complement: c plays no role
    CouplingDesign d = assemble_design(A, cert, 0.0, tol);
    if (!numkit::is_positive_definite(d.D, tol).first ||
        !audit_spectrum(A, d.D, cert.m, tol).ok)
      throw NumericalError("synthesize_D: full-dimensional certificate not admissible");
    return d;
  }

  constexpr double kCap = 1e6;
  constexpr double kResolution = 1e-3;
  double hi = 1.0;
  while (!admissible(A, cert, Y, hi, tol)) {
    hi *= 2.0;
    if (hi > kCap) throw NumericalError("synthesize_D: no admissible c below 1e6");
  }
  double lo = 0.0;
  while (hi - lo > kResolution) {
    double mid = 0.5 * (lo + hi);
    if (admissible(A, cert, Y, mid, tol))
      hi = mid;
    else
      lo = mid;
  }
  return assemble_design(A, cert, hi, tol);
}

SkewnessCertificate recover_skew_directions(const Matrix& A, const Matrix& D,
                                            const Tolerances& tol) {
  if (!A.square() || A.rows() != D.rows() || !D.square())
    throw ValidationError("recover_skew_directions: dimension mismatch");
  if (!numkit::is_positive_definite(D, tol).first)
    throw ValidationError("recover_skew_directions: D not positive-definite");

  Matrix K = A - D;
  auto gk = numkit::generalized_kernel(K, tol.zero_eig);
  if (gk.dim() == 0) throw NumericalError("recover_skew_directions: empty generalized kernel");

  // grade order makes K map each direction into the span of earlier ones, so
  // <x_i, K x_i> = 0 and the rayleigh quotient reduces to <x_i, D x_i> > 0
  SkewnessCertificate cert;
  cert.m = gk.dim();
  cert.directions = gk.basis;
  cert.rayleigh = rayleigh_values(A, gk.basis);
  for (double r : cert.rayleigh)
    if (r <= 0.0)
      throw NumericalError("recover_skew_directions: nonpositive rayleigh quotient");
  return cert;
}

CouplingDesign perturb_for_single_kernel(const CouplingDesign& design, double eps,
                                         const Tolerances& tol) {
  if (eps <= 0.0) throw ValidationError("perturb_for_single_kernel: eps must be positive");
  if (design.m < 1) throw ValidationError("perturb_for_single_kernel: empty design");

  Matrix A = design.A;
  for (std::size_t i = 0; i + 1 < design.m; ++i) {
    Vec xi = design.X.col(i), xn = design.X.col(i + 1);
    for (std::size_t r = 0; r < A.rows(); ++r)
      for (std::size_t s = 0; s < A.cols(); ++s) A(r, s) += eps * xi[r] * xn[s];
  }

  bool was_hurwitz = numkit::hurwitz_margin(design.A, tol) > 0.0;
  if (was_hurwitz && numkit::hurwitz_margin(A, tol) <= 0.0)
    throw ValidationError("perturb_for_single_kernel: eps pushes A out of the Hurwitz class");

  CouplingDesign out = design;
  out.A = A;
  out.P = products_matrix(A, out.X);
  Matrix K = A - out.D;
  double cutoff = tol.zero_eig * std::max(1.0, K.norm_inf());
  out.kernel_geom = numkit::nullspace(K, cutoff).cols();
  return out;
}

HyperbolicityFix perturb_for_hyperbolicity(const Matrix& A, const Matrix& D, double alpha_star,
                                           const Vec& lambdas, std::optional<double> delta,
                                           const Tolerances& tol) {
  if (lambdas.empty()) throw ValidationError("perturb_for_hyperbolicity: empty eigenvalue list");
  double lambda_K = lambdas.back();
  if (lambda_K <= 0.0 || alpha_star <= 0.0)
    throw ValidationError("perturb_for_hyperbolicity: need positive alpha_star and lambda_K");

  auto apply = [&](double d) {
    HyperbolicityFix fix;
    fix.delta = d;
    fix.A_tilde = A;
    fix.D_tilde = D;
    for (std::size_t i = 0; i < A.rows(); ++i) {
      fix.A_tilde(i, i) += d;
      fix.D_tilde(i, i) += d / (alpha_star * lambda_K);
    }
    return fix;
  };
  auto hyperbolic_blocks = [&](const HyperbolicityFix& fix) {
    for (std::size_t k = 0; k + 1 < lambdas.size(); ++k) {
      Matrix block = fix.A_tilde - (alpha_star * lambdas[k]) * fix.D_tilde;
      Spectrum spec = numkit::eigendecompose(block, false, tol);
      for (const auto& z : spec.values)
        if (std::abs(z.real()) <= tol.gap) return false;
    }
    return true;
  };

  if (delta) {
    HyperbolicityFix fix = apply(*delta);
    if (!numkit::is_positive_definite(fix.D_tilde, tol).first)
      throw ValidationError("perturb_for_hyperbolicity: D_tilde loses positive-definiteness");
    return fix;
  }

  std::vector<double> grid{0.0};
  for (double mag = 1e-6; mag <= 1e-1 * 1.0000001; mag *= 10.0) {
    grid.push_back(mag);
    grid.push_back(-mag);
  }
  for (double d : grid) {
    HyperbolicityFix fix = apply(d);
    if (!numkit::is_positive_definite(fix.D_tilde, tol).first) continue;
    if (hyperbolic_blocks(fix)) return fix;
  }
  throw NumericalError("perturb_for_hyperbolicity: no delta in the grid succeeds");
}

BetaSweepResult beta_sweep(const Matrix& A, const Matrix& D, const Vec& grid,
                           const Tolerances& tol) {
  if (!A.square() || A.rows() != D.rows() || !D.square())
    throw ValidationError("beta_sweep: dimension mismatch");
  if (grid.empty()) throw ValidationError("beta_sweep: empty grid");
  for (std::size_t k = 0; k + 1 < grid.size(); ++k)
    if (grid[k] >= grid[k + 1]) throw ValidationError("beta_sweep: grid not increasing");

  const std::size_t n = A.rows();
  const std::size_t steps = grid.size();
  BetaSweepResult out;
  out.betas = grid;
  out.tracks.assign(steps, std::vector<std::complex<double>>(n));

  // eigen stage: grid points are independent
  std::vector<std::string> failures(steps);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::size_t k = 0; k < steps; ++k) {
    try {
      Matrix M = A - grid[k] * D;
      Spectrum spec = numkit::eigendecompose(M, false, tol);
      out.tracks[k] = spec.values;
    } catch (const std::exception& e) {
      failures[k] = e.what();
    }
  }
  for (const auto& f : failures)
    if (!f.empty()) throw NumericalError("beta_sweep: eigen stage failed: " + f);

  // sequential continuity pairing: greedy globally-closest matching
  double scale = A.norm_inf() + D.norm_inf();
  double jump_thr = 10.0 * std::max(1e-3, grid.back() - grid.front()) /
                        static_cast<double>(std::max<std::size_t>(steps - 1, 1)) *
                        (1.0 + scale) +
                    1e-9;
  for (std::size_t k = 1; k < steps; ++k) {
    const auto& prev = out.tracks[k - 1];
    auto& cur = out.tracks[k];
    std::vector<std::complex<double>> matched(n);
    std::vector<bool> used_p(n, false), used_c(n, false);
    double worst = 0.0;
    for (std::size_t round = 0; round < n; ++round) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t bi = 0, bj = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (used_p[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (used_c[j]) continue;
          double d = std::abs(prev[i] - cur[j]);
          if (d < best) {
            best = d;
            bi = i;
            bj = j;
          }
        }
      }
      used_p[bi] = used_c[bj] = true;
      matched[bi] = cur[bj];
      worst = std::max(worst, best);
    }
    cur = matched;
    if (worst > jump_thr) out.ambiguous_steps.push_back(k);
  }

  // events per track; crossings keyed off the last nonzero sign so a sample
  // landing exactly on the axis still registers
  double im_thr = 1e-7 * (1.0 + scale);
  constexpr double kArrivalTol = 1e-6;
  std::vector<bool> pair_event_step(steps, false);
  for (std::size_t t = 0; t < n; ++t) {
    int prev_sign = 0;
    bool arrived = std::abs(out.tracks[0][t]) <= kArrivalTol;
    for (std::size_t k = 0; k < steps; ++k) {
      auto b = out.tracks[k][t];
      int s = b.real() > 0.0 ? 1 : (b.real() < 0.0 ? -1 : 0);
      if (s != 0 && prev_sign != 0 && s != prev_sign) {
        double im_here = std::abs(b.imag());
        double im_before = k > 0 ? std::abs(out.tracks[k - 1][t].imag()) : 0.0;
        bool complex_pair = std::max(im_here, im_before) > im_thr;
        if (complex_pair) {
          if (!pair_event_step[k]) {  // conjugate twin files the same event
            pair_event_step[k] = true;
            out.events.push_back({grid[k], SweepEventType::complex_pair_crossing, t});
          }
        } else {
          out.events.push_back({grid[k], SweepEventType::real_axis_crossing, t});
        }
      }
      if (s != 0) prev_sign = s;
      bool near_zero = std::abs(b) <= kArrivalTol;
      if (k > 0 && near_zero && !arrived)
        out.events.push_back({grid[k], SweepEventType::arrival_at_zero, t});
      arrived = near_zero;
    }
  }
  std::sort(out.events.begin(), out.events.end(),
            [](const SweepEvent& a, const SweepEvent& b) { return a.beta < b.beta; });
  return out;
}

}  // namespace nilnet::coupling

#include "nilnet/dynsim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nilnet::dynsim {

namespace {

constexpr double kBlowup = 1e8;

void validate_cfg(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ValidationError("time step must be positive");
  if (!(cfg.T > 0.0)) throw ValidationError("horizon must be positive");
  if (cfg.method != "rk4" && cfg.method != "dp54")
    throw ValidationError("integration method must be rk4 or dp54");
  if (cfg.renorm_interval == 0)
    throw ValidationError("renormalization interval must cover at least one step");
  if (!(cfg.tol > 0.0)) throw ValidationError("error tolerance must be positive");
}

double max_abs(const Vec& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

double norm2(const Vec& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

struct Rk4Work {
  Vec k1, k2, k3, k4, tmp;
  explicit Rk4Work(std::size_t n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}
};

void rk4_step(const Rhs& rhs, Vec& x, double dt, Rk4Work& w) {
  const std::size_t n = x.size();
  rhs(x, w.k1);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * dt * w.k1[i];
  rhs(w.tmp, w.k2);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * dt * w.k2[i];
  rhs(w.tmp, w.k3);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + dt * w.k3[i];
  rhs(w.tmp, w.k4);
  for (std::size_t i = 0; i < n; ++i)
    x[i] += dt / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
}

Trajectory integrate_rk4(const Rhs& rhs, const Vec& x0, const SimConfig& cfg) {
  Trajectory out;
  const auto nsteps = static_cast<std::size_t>(std::llround(cfg.T / cfg.dt));
  out.times.reserve(nsteps + 1);
  out.states.reserve(nsteps + 1);
  out.times.push_back(0.0);
  out.states.push_back(x0);
  Vec x = x0;
  Rk4Work w(x.size());
  for (std::size_t i = 1; i <= nsteps; ++i) {
    rk4_step(rhs, x, cfg.dt, w);
    double t = static_cast<double>(i) * cfg.dt;
    if (max_abs(x) > kBlowup || !std::isfinite(max_abs(x))) {
      out.truncated = true;
      out.truncation_time = t;
      break;
    }
    out.times.push_back(t);
    out.states.push_back(x);
  }
  return out;
}

// Dormand-Prince 5(4) coefficients.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
constexpr double kE1 = 35.0 / 384 - 5179.0 / 57600, kE3 = 500.0 / 1113 - 7571.0 / 16695,
                 kE4 = 125.0 / 192 - 393.0 / 640, kE5 = -2187.0 / 6784 + 92097.0 / 339200,
                 kE6 = 11.0 / 84 - 187.0 / 2100, kE7 = -1.0 / 40;

Trajectory integrate_dp54(const Rhs& rhs, const Vec& x0, const SimConfig& cfg) {
  Trajectory out;
  out.times.push_back(0.0);
  out.states.push_back(x0);
  const std::size_t n = x0.size();
  Vec x = x0, xs(n), x5(n), err(n);
  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  rhs(x, k1);
  double t = 0.0, h = std::min(cfg.dt, cfg.T);
  const double hmin = 1e-12 * cfg.T;
  while (t < cfg.T) {
    h = std::min(h, cfg.T - t);
    for (std::size_t i = 0; i < n; ++i) xs[i] = x[i] + h * kA21 * k1[i];
    rhs(xs, k2);
    for (std::size_t i = 0; i < n; ++i) xs[i] = x[i] + h * (kA31 * k1[i] + kA32 * k2[i]);
    rhs(xs, k3);
    for (std::size_t i = 0; i < n; ++i)
      xs[i] = x[i] + h * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
    rhs(xs, k4);
    for (std::size_t i = 0; i < n; ++i)
      xs[i] = x[i] + h * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] + kA54 * k4[i]);
    rhs(xs, k5);
    for (std::size_t i = 0; i < n; ++i)
      xs[i] = x[i] +
              h * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] + kA64 * k4[i] + kA65 * k5[i]);
    rhs(xs, k6);
    for (std::size_t i = 0; i < n; ++i)
      x5[i] = x[i] + h * (kB1 * k1[i] + kB3 * k3[i] + kB4 * k4[i] + kB5 * k5[i] + kB6 * k6[i]);
    rhs(x5, k7);

    double errnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] + kE5 * k5[i] + kE6 * k6[i] +
                      kE7 * k7[i]);
      double sc = cfg.tol + cfg.tol * std::max(std::abs(x[i]), std::abs(x5[i]));
      errnorm += (e / sc) * (e / sc);
    }
    errnorm = std::sqrt(errnorm / static_cast<double>(n));

    if (errnorm <= 1.0 || h <= hmin) {
      t += h;
      x = x5;
      std::swap(k1, k7);  // first-same-as-last
      if (max_abs(x) > kBlowup || !std::isfinite(max_abs(x))) {
        out.truncated = true;
        out.truncation_time = t;
        break;
      }
      out.times.push_back(t);
      out.states.push_back(x);
    }
    double fac = 0.9 * std::pow(std::max(errnorm, 1e-10), -0.2);
    h *= std::clamp(fac, 0.2, 5.0);
    if (h < hmin) h = hmin;
  }
  return out;
}

std::string describe(const SimConfig& cfg, std::size_t dim) {
  std::ostringstream os;
  os << "method=" << cfg.method << " dt=" << cfg.dt << " T=" << cfg.T << " seed=" << cfg.seed
     << " dim=" << dim;
  return os.str();
}

}  // namespace

Trajectory integrate(const Rhs& rhs, const Vec& x0, const SimConfig& cfg) {
  validate_cfg(cfg);
  if (x0.empty()) throw ValidationError("initial state is empty");
  Trajectory out = cfg.method == "rk4" ? integrate_rk4(rhs, x0, cfg) : integrate_dp54(rhs, x0, cfg);
  out.metadata = describe(cfg, x0.size());
  return out;
}

Rhs network_rhs(const graphlab::Graph& g, const Matrix& D, double alpha,
                const cmred::PolyField& f, const Vec& eps) {
  const std::size_t nloc = D.rows();
  if (D.cols() != nloc) throw ValidationError("coupling matrix must be square");
  if (f.n() != nloc || f.target_dim() != nloc)
    throw ValidationError("node field dimensions do not match the coupling matrix");
  if (eps.size() != f.d() && !(eps.empty() && f.d() == 0))
    throw ValidationError("parameter vector does not match the node field");
  if (g.n == 0) throw ValidationError("graph is empty");
  {
    Vec f0 = f.eval(Vec(nloc, 0.0), eps.empty() ? Vec(f.d(), 0.0) : eps);
    if (max_abs(f0) > 0.0) throw ValidationError("node field must vanish at the origin");
  }

  std::vector<std::vector<std::size_t>> nbr(g.n);
  for (const auto& [i, j] : g.edges) {
    nbr[i].push_back(j);
    nbr[j].push_back(i);
  }
  const Vec eps_local = eps.empty() ? Vec(f.d(), 0.0) : eps;
  const std::size_t nodes = g.n;
  return [nloc, nodes, nbr, D, alpha, f, eps_local](const Vec& x, Vec& dx) {
    Vec xi(nloc), yi(nloc);
    for (std::size_t p = 0; p < nodes; ++p) {
      for (std::size_t i = 0; i < nloc; ++i) xi[i] = x[p * nloc + i];
      Vec fx = f.eval(xi, eps_local);
      // Laplacian row action: deg(p) x_p - sum of neighbors.
      const auto& np = nbr[p];
      for (std::size_t i = 0; i < nloc; ++i) yi[i] = static_cast<double>(np.size()) * xi[i];
      for (std::size_t q : np)
        for (std::size_t i = 0; i < nloc; ++i) yi[i] -= x[q * nloc + i];
      Vec dy = D.apply(yi);
      for (std::size_t i = 0; i < nloc; ++i) dx[p * nloc + i] = fx[i] - alpha * dy[i];
    }
  };
}

Trajectory integrate_network(const graphlab::Graph& g, const Matrix& D, double alpha,
                             const cmred::PolyField& f, const Vec& x0, const SimConfig& cfg,
                             const Vec& eps) {
  if (x0.size() != g.n * D.rows())
    throw ValidationError("initial state does not match nodes times node dimension");
  return integrate(network_rhs(g, D, alpha, f, eps), x0, cfg);
}

Vec sync_error(const Trajectory& traj, std::size_t nodes) {
  if (nodes == 0) throw ValidationError("node count must be positive");
  Vec out(traj.states.size(), 0.0);
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const Vec& x = traj.states[k];
    if (x.size() % nodes != 0)
      throw ValidationError("state dimension is not divisible by the node count");
    const std::size_t nloc = x.size() / nodes;
    double worst = 0.0;
    for (std::size_t p = 0; p < nodes; ++p)
      for (std::size_t q = p + 1; q < nodes; ++q) {
        double s = 0.0;
        for (std::size_t i = 0; i < nloc; ++i) {
          double d = x[p * nloc + i] - x[q * nloc + i];
          s += d * d;
        }
        worst = std::max(worst, std::sqrt(s));
      }
    out[k] = worst;
  }
  return out;
}

LyapunovEstimate largest_lyapunov(const Rhs& rhs, const Jvp& jvp, const Vec& x0,
                                  const SimConfig& cfg) {
  validate_cfg(cfg);
  if (x0.empty()) throw ValidationError("initial state is empty");
  const std::size_t n = x0.size();
  const double skip = cfg.transient_skip < 0.0 ? 0.2 * cfg.T : cfg.transient_skip;
  const auto nsteps = static_cast<std::size_t>(std::llround(cfg.T / cfg.dt));
  const auto skip_steps = std::min(nsteps, static_cast<std::size_t>(std::llround(skip / cfg.dt)));

  // Unit start tangent from the seed.
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Vec v(n);
  for (double& c : v) c = U(rng);
  double nv = norm2(v);
  if (nv == 0.0) {
    v.assign(n, 0.0);
    v[0] = 1.0;
    nv = 1.0;
  }
  for (double& c : v) c /= nv;

  Vec x = x0;
  Vec kx1(n), kx2(n), kx3(n), kx4(n), kv1(n), kv2(n), kv3(n), kv4(n), xt(n), vt(n);
  std::vector<double> logs;   // post-transient stretch factors per renormalization
  double t_accum = 0.0, logsum = 0.0;
  LyapunovEstimate est;

  for (std::size_t i = 1; i <= nsteps; ++i) {
    // One RK4 step of the pair (x, v) with v' = Df(x) v.
    rhs(x, kx1);
    jvp(x, v, kv1);
    for (std::size_t j = 0; j < n; ++j) {
      xt[j] = x[j] + 0.5 * cfg.dt * kx1[j];
      vt[j] = v[j] + 0.5 * cfg.dt * kv1[j];
    }
    rhs(xt, kx2);
    jvp(xt, vt, kv2);
    for (std::size_t j = 0; j < n; ++j) {
      xt[j] = x[j] + 0.5 * cfg.dt * kx2[j];
      vt[j] = v[j] + 0.5 * cfg.dt * kv2[j];
    }
    rhs(xt, kx3);
    jvp(xt, vt, kv3);
    for (std::size_t j = 0; j < n; ++j) {
      xt[j] = x[j] + cfg.dt * kx3[j];
      vt[j] = v[j] + cfg.dt * kv3[j];
    }
    rhs(xt, kx4);
    jvp(xt, vt, kv4);
    for (std::size_t j = 0; j < n; ++j) {
      x[j] += cfg.dt / 6.0 * (kx1[j] + 2.0 * kx2[j] + 2.0 * kx3[j] + kx4[j]);
      v[j] += cfg.dt / 6.0 * (kv1[j] + 2.0 * kv2[j] + 2.0 * kv3[j] + kv4[j]);
    }
    if (max_abs(x) > kBlowup || !std::isfinite(max_abs(x)))
      throw NumericalError("orbit escaped during exponent estimation");

    if (i % cfg.renorm_interval == 0) {
      double s = norm2(v);
      if (s == 0.0) throw NumericalError("tangent vector collapsed");
      for (double& c : v) c /= s;
      if (i > skip_steps) {
        logs.push_back(std::log(s));
        logsum += std::log(s);
        t_accum += static_cast<double>(cfg.renorm_interval) * cfg.dt;
        est.trace.push_back(logsum / t_accum);
      }
    }
  }

  if (logs.size() < 2)
    throw ValidationError("horizon leaves fewer than two renormalizations after the transient");
  est.value = logsum / t_accum;
  const std::size_t half = logs.size() / 2;
  const double tau = static_cast<double>(cfg.renorm_interval) * cfg.dt;
  double s1 = std::accumulate(logs.begin(), logs.begin() + half, 0.0);
  double s2 = std::accumulate(logs.begin() + half, logs.end(), 0.0);
  est.first_half = s1 / (static_cast<double>(half) * tau);
  est.last_half = s2 / (static_cast<double>(logs.size() - half) * tau);
  est.converged = std::abs(est.last_half - est.first_half) <= 5e-2 * std::max(1.0, std::abs(est.value));
  return est;
}

LyapunovEstimate largest_lyapunov(const Rhs& rhs, const Vec& x0, const SimConfig& cfg) {
  Jvp fd = [rhs](const Vec& x, const Vec& v, Vec& out) {
    const std::size_t n = x.size();
    double xs = 1.0;
    for (double c : x) xs = std::max(xs, std::abs(c));
    const double eta = 1e-7 * xs;
    Vec xp(n), xm(n), fp(n), fm(n);
    for (std::size_t i = 0; i < n; ++i) {
      xp[i] = x[i] + eta * v[i];
      xm[i] = x[i] - eta * v[i];
    }
    rhs(xp, fp);
    rhs(xm, fm);
    for (std::size_t i = 0; i < n; ++i) out[i] = (fp[i] - fm[i]) / (2.0 * eta);
  };
  return largest_lyapunov(rhs, fd, x0, cfg);
}

SweepResult alpha_stability_sweep(const graphlab::Graph& g, const Matrix& A, const Matrix& D,
                                  const Vec& alpha_grid) {
  if (A.rows() != A.cols() || D.rows() != D.cols() || A.rows() != D.rows())
    throw ValidationError("state and coupling matrices must be square of equal size");
  if (alpha_grid.empty()) throw ValidationError("alpha grid is empty");
  for (std::size_t i = 1; i < alpha_grid.size(); ++i)
    if (alpha_grid[i] < alpha_grid[i - 1])
      throw ValidationError("alpha grid must be sorted ascending");

  auto lspec = graphlab::laplacian_spectrum(g);
  SweepResult out;
  out.lambdas.resize(lspec.values.size());
  for (std::size_t p = 0; p < lspec.values.size(); ++p) out.lambdas[p] = lspec.values[p].real();
  out.entries.resize(alpha_grid.size());

  const std::size_t n = A.rows();
  const auto total = static_cast<std::ptrdiff_t>(alpha_grid.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const double alpha = alpha_grid[static_cast<std::size_t>(idx)];
    SweepEntry e;
    e.alpha = alpha;
    e.margin = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < out.lambdas.size(); ++p) {
      Matrix M = A;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) M(r, c) -= alpha * out.lambdas[p] * D(r, c);
      auto spec = numkit::eigendecompose(M, false);
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& z : spec.values) worst = std::max(worst, z.real());
      if (worst > e.margin) {
        e.margin = worst;
        e.worst_channel = p;
      }
    }
    e.stable = e.margin < 0.0;
    out.entries[static_cast<std::size_t>(idx)] = e;
  }

  for (const auto& e : out.entries) {
    if (!e.stable) {
      out.found_crossing = true;
      out.first_crossing = e.alpha;
      out.crossing_channel = e.worst_channel;
      break;
    }
  }
  return out;
}

namespace {

Matrix jacobian_at(const std::vector<cmred::PolyField>& partials, const Vec& p) {
  Matrix J(3, 3, 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    Vec col = partials[j].eval(p, {});
    for (std::size_t i = 0; i < 3; ++i) J(i, j) = col[i];
  }
  return J;
}

// Newton refinement of an equilibrium of a polynomial field.
bool refine_equilibrium(const cmred::PolyField& f, const std::vector<cmred::PolyField>& partials,
                        Vec& p) {
  for (int it = 0; it < 40; ++it) {
    Vec r = f.eval(p, {});
    if (max_abs(r) <= 1e-13) return true;
    Vec step;
    try {
      step = numkit::lu_solve(jacobian_at(partials, p), r);
    } catch (const NumericalError&) {
      return false;
    }
    for (std::size_t i = 0; i < 3; ++i) p[i] -= step[i];
    if (max_abs(p) > 1e3) return false;
  }
  return max_abs(f.eval(p, {})) <= 1e-10;
}

// Family member at (lambda, nu, kappa): the truncated cubic field at
// kappa = 0; otherwise the blow-up of the quadratic model jet with the given
// a-coefficients along the ray (sqrt(2 lambda), -1, nu), which carries the
// O(kappa) corrections generated by a2..a6.
cmred::PolyField family_field(const std::array<double, 6>& a, double lambda, double nu,
                              double kappa) {
  if (kappa == 0.0) return nform::nf_field(lambda, nu);
  cmred::PolyField f(3, 3, 3, 3);
  cmred::MultiIndex e2{0, 1, 0, 0, 0, 0}, e3{0, 0, 1, 0, 0, 0};
  f.add_term(e2, Vec{1.0, 0.0, 0.0});
  f.add_term(e3, Vec{0.0, 1.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) {
    cmred::MultiIndex e(6, 0);
    e[i] = 1;
    e[3 + i] = 1;
    f.add_term(e, Vec{0.0, 0.0, 1.0});
  }
  static const std::array<std::pair<std::size_t, std::size_t>, 6> quads{
      {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};
  for (std::size_t q = 0; q < 6; ++q) {
    cmred::MultiIndex e(6, 0);
    e[quads[q].first] += 1;
    e[quads[q].second] += 1;
    if (a[q] != 0.0) f.add_term(e, Vec{0.0, 0.0, a[q]});
  }
  auto jet = nform::make_jet(f);
  auto res = nform::blow_up_and_scale(jet, a, Matrix::identity(3), kappa,
                                      {std::sqrt(2.0 * lambda), -1.0, nu});
  return res.field;
}

Vec real_eigvec(const Matrix& M, double mu) {
  Matrix S = M;
  for (std::size_t i = 0; i < 3; ++i) S(i, i) -= mu;
  Matrix ker = numkit::nullspace(S, 1e-6);
  if (ker.cols() == 0) return {};
  Vec v(3);
  for (std::size_t i = 0; i < 3; ++i) v[i] = ker(i, 0);
  return v;
}

}  // namespace

ScanReport shilnikov_scan(const std::array<double, 6>& a, const Vec& lambda_grid,
                          const Vec& nu_grid, const Vec& kappa_grid, const SimConfig& cfg) {
  validate_cfg(cfg);
  if (lambda_grid.empty() || nu_grid.empty() || kappa_grid.empty())
    throw ValidationError("scan grids must be non-empty");
  if (std::abs(a[0]) <= 1e-12)
    throw ValidationError("scan family requires a nonzero leading quadratic coefficient");
  const auto t0 = std::chrono::steady_clock::now();

  ScanReport rep;
  rep.lambda_grid = lambda_grid;
  rep.nu_grid = nu_grid;
  rep.kappa_grid = kappa_grid;
  const std::size_t nl = lambda_grid.size(), nn = nu_grid.size(), nk = kappa_grid.size();
  rep.points.resize(nl * nn * nk);

  const auto total = static_cast<std::ptrdiff_t>(rep.points.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::ptrdiff_t idx = 0; idx < total; ++idx) {
    const auto u = static_cast<std::size_t>(idx);
    ScanPoint pt;
    pt.lambda = lambda_grid[u / (nn * nk)];
    pt.nu = nu_grid[(u / nk) % nn];
    pt.kappa = kappa_grid[u % nk];
    pt.shooting_distance = std::numeric_limits<double>::infinity();

    if (!(pt.lambda > 0.0)) {
      pt.skipped = true;
      pt.reason = "unfolding parameter not positive";
      pt.score = -std::numeric_limits<double>::infinity();
      rep.points[u] = pt;
      continue;
    }

    cmred::PolyField field = family_field(a, pt.lambda, pt.nu, pt.kappa);
    std::vector<cmred::PolyField> partials;
    for (std::size_t j = 0; j < 3; ++j) partials.push_back(cmred::partial_state(field, j));

    // Left fixed point of the actual family member, its spectrum, flags.
    Vec p{-std::sqrt(2.0 * pt.lambda), 0.0, 0.0};
    if (!refine_equilibrium(field, partials, p)) {
      pt.reason = "equilibrium refinement failed";
      pt.score = -1.0;
      rep.points[u] = pt;
      continue;
    }
    Matrix J = jacobian_at(partials, p);
    auto spec = numkit::eigendecompose(J, false);
    pt.spectrum = spec.values;
    double mu_u = -std::numeric_limits<double>::infinity();
    double re_stable = 0.0, im_stable = 0.0;
    std::size_t n_unstable = 0;
    for (const auto& z : spec.values) {
      if (z.real() > 0.0) {
        ++n_unstable;
        mu_u = std::max(mu_u, z.real());
      } else if (std::abs(z.imag()) > 1e-12) {
        re_stable = z.real();
        im_stable = std::abs(z.imag());
      }
    }
    pt.saddle_focus = n_unstable == 1 && im_stable > 1e-12 && re_stable < 0.0;
    pt.ratio_flag = pt.saddle_focus && mu_u > -re_stable;

    if (pt.saddle_focus) {
      // Shoot along the unstable direction; measure closest return to the
      // stable plane (orthogonal to the left unstable eigenvector) inside a
      // ball of radius 0.5 around the fixed point.
      Vec vu = real_eigvec(J, mu_u);
      Vec wu = real_eigvec(J.transpose(), mu_u);
      if (!vu.empty() && !wu.empty()) {
        double wn = norm2(wu);
        Rhs rhs = [&field](const Vec& x, Vec& dx) { dx = field.eval(x, {}); };
        for (double sgn : {1.0, -1.0}) {
          Vec x(3);
          for (std::size_t i = 0; i < 3; ++i) x[i] = p[i] + sgn * 1e-3 * vu[i];
          SimConfig scfg = cfg;
          scfg.method = "dp54";
          Trajectory traj = integrate(rhs, x, scfg);
          bool left = false;
          for (std::size_t k = 0; k < traj.states.size(); ++k) {
            Vec d(3);
            for (std::size_t i = 0; i < 3; ++i) d[i] = traj.states[k][i] - p[i];
            double dist = norm2(d);
            if (!left) {
              if (dist > 0.5) left = true;
              continue;
            }
            if (dist <= 0.5) {
              double plane = std::abs(wu[0] * d[0] + wu[1] * d[1] + wu[2] * d[2]) / wn;
              if (plane < pt.shooting_distance) {
                pt.shooting_distance = plane;
                pt.returned = true;
              }
            }
          }
        }
      }
    }

    // Exploratory exponent from a seeded start near the fixed point.
    {
      std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL * (u + 1));
      std::uniform_real_distribution<double> U(-1.0, 1.0);
      Vec x0(3);
      for (std::size_t i = 0; i < 3; ++i) x0[i] = p[i] + 0.1 * U(rng);
      Rhs rhs = [&field](const Vec& x, Vec& dx) { dx = field.eval(x, {}); };
      try {
        SimConfig lcfg = cfg;
        lcfg.method = "rk4";
        auto est = largest_lyapunov(rhs, x0, lcfg);
        pt.lyapunov = est.value;
        pt.lyap_valid = true;
        pt.lyap_converged = est.converged;
      } catch (const NumericalError&) {
        pt.lyap_valid = false;
      } catch (const ValidationError&) {
        pt.lyap_valid = false;
      }
    }

    pt.score = (pt.saddle_focus ? 2.0 : 0.0) + (pt.ratio_flag ? 1.0 : 0.0) +
               (pt.returned ? 1.0 / (1.0 + pt.shooting_distance) : 0.0);
    rep.points[u] = pt;
  }

  for (const auto& pt : rep.points) {
    if (pt.skipped)
      ++rep.skipped;
    else
      ++rep.evaluated;
  }
  rep.ranked.resize(rep.points.size());
  std::iota(rep.ranked.begin(), rep.ranked.end(), std::size_t{0});
  std::stable_sort(rep.ranked.begin(), rep.ranked.end(), [&rep](std::size_t a, std::size_t b) {
    return rep.points[a].score > rep.points[b].score;
  });
  rep.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace nilnet::dynsim

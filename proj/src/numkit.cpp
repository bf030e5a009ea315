#include "nilnet/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

namespace nilnet {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace nilnet

namespace nilnet::numkit {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ValidationError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_columns(const std::vector<Vec>& cols) {
  if (cols.empty()) return {};
  Matrix m(cols[0].size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j].size() != m.rows_) throw ValidationError("from_columns: ragged input");
    for (std::size_t i = 0; i < m.rows_; ++i) m(i, j) = cols[j][i];
  }
  return m;
}

Matrix Matrix::diagonal(const Vec& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Vec Matrix::apply(const Vec& x) const {
  if (x.size() != cols_) throw ValidationError("Matrix::apply: size mismatch");
  Vec y(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    const double* row = data_.data() + i * cols_;
    for (std::size_t j = 0; j < cols_; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

Vec Matrix::col(std::size_t j) const {
  Vec v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
  return v;
}

Vec Matrix::row(std::size_t i) const {
  return Vec(data_.begin() + i * cols_, data_.begin() + (i + 1) * cols_);
}

void Matrix::set_col(std::size_t j, const Vec& v) {
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw ValidationError("Matrix +=: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw ValidationError("Matrix -=: shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

double Matrix::norm_inf() const {
  double best = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) s += std::abs((*this)(i, j));
    best = std::max(best, s);
  }
  return best;
}

double Matrix::max_abs() const {
  double best = 0.0;
  for (double v : data_) best = std::max(best, std::abs(v));
  return best;
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ValidationError("Matrix *: shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix operator*(double s, Matrix a) { return a *= s; }

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

Vec axpy(double a, const Vec& x, const Vec& y) {
  Vec r(y);
  for (std::size_t i = 0; i < x.size(); ++i) r[i] += a * x[i];
  return r;
}

std::size_t Spectrum::count(EigClass c) const {
  std::size_t k = 0;
  for (auto cl : classes)
    if (cl == c) ++k;
  return k;
}

// --- LU factorization with partial pivoting ---

namespace {

struct Lu {
  Matrix m;
  std::vector<std::size_t> perm;
};

Lu lu_factor(Matrix A) {
  if (!A.square()) throw ValidationError("lu: non-square matrix");
  const std::size_t n = A.rows();
  Lu f{std::move(A), {}};
  f.perm.resize(n);
  std::iota(f.perm.begin(), f.perm.end(), 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(f.m(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      double v = std::abs(f.m(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best < 1e-300) throw NumericalError("lu: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(f.m(k, j), f.m(piv, j));
      std::swap(f.perm[k], f.perm[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      double l = f.m(i, k) / f.m(k, k);
      f.m(i, k) = l;
      for (std::size_t j = k + 1; j < n; ++j) f.m(i, j) -= l * f.m(k, j);
    }
  }
  return f;
}

Vec lu_apply(const Lu& f, const Vec& b) {
  const std::size_t n = f.m.rows();
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = b[f.perm[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) y[i] -= f.m(i, j) * y[j];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) y[i] -= f.m(i, j) * y[j];
    y[i] /= f.m(i, i);
  }
  return y;
}

}  // namespace

Vec lu_solve(Matrix A, Vec b) {
  Lu f = lu_factor(std::move(A));
  return lu_apply(f, b);
}

Matrix lu_solve_many(Matrix A, Matrix B) {
  Lu f = lu_factor(std::move(A));
  Matrix X(B.rows(), B.cols());
  for (std::size_t j = 0; j < B.cols(); ++j) X.set_col(j, lu_apply(f, B.col(j)));
  return X;
}

Matrix inverse(const Matrix& A) { return lu_solve_many(A, Matrix::identity(A.rows())); }

// --- one-sided Jacobi SVD ---

Svd svd(const Matrix& A, double eps) {
  const std::size_t m = A.rows(), n = A.cols();
  Matrix B = A;
  Matrix V = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0, aqq = 0, apq = 0;
        for (std::size_t i = 0; i < m; ++i) {
          app += B(i, p) * B(i, p);
          aqq += B(i, q) * B(i, q);
          apq += B(i, p) * B(i, q);
        }
        if (app == 0.0 || aqq == 0.0) continue;
        if (std::abs(apq) <= eps * std::sqrt(app * aqq)) continue;
        rotated = true;
        double zeta = (aqq - app) / (2.0 * apq);
        double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          double bp = B(i, p), bq = B(i, q);
          B(i, p) = c * bp - s * bq;
          B(i, q) = s * bp + c * bq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          double vp = V(i, p), vq = V(i, q);
          V(i, p) = c * vp - s * vq;
          V(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
  Svd out;
  out.sigma.resize(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vec norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < m; ++i) s += B(i, j) * B(i, j);
    norms[j] = std::sqrt(s);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
  out.U = Matrix(m, n);
  out.V = Matrix(n, n);
  for (std::size_t jj = 0; jj < n; ++jj) {
    std::size_t j = order[jj];
    out.sigma[jj] = norms[j];
    for (std::size_t i = 0; i < m; ++i)
      out.U(i, jj) = norms[j] > 0 ? B(i, j) / norms[j] : 0.0;
    for (std::size_t i = 0; i < n; ++i) out.V(i, jj) = V(i, j);
  }
  return out;
}

Matrix nullspace(const Matrix& A, double cutoff) {
  Svd s = svd(A);
  std::size_t n = A.cols();
  std::size_t k = 0;
  while (k < n && s.sigma[n - 1 - k] <= cutoff) ++k;
  Matrix K(n, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < n; ++i) K(i, j) = s.V(i, n - k + j);
  return K;
}

Matrix orthonormal_complement(const Matrix& Q) {
  const std::size_t n = Q.rows();
  std::vector<Vec> have;
  for (std::size_t j = 0; j < Q.cols(); ++j) have.push_back(Q.col(j));
  std::vector<Vec> added;
  for (std::size_t cand = 0; cand < n && have.size() + added.size() < n; ++cand) {
    Vec v(n, 0.0);
    v[cand] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : have) {
        double c = dot(u, v);
        for (std::size_t i = 0; i < n; ++i) v[i] -= c * u[i];
      }
      for (const auto& u : added) {
        double c = dot(u, v);
        for (std::size_t i = 0; i < n; ++i) v[i] -= c * u[i];
      }
    }
    double nv = norm2(v);
    if (nv > 0.5) {
      for (auto& x : v) x /= nv;
      added.push_back(std::move(v));
    }
  }
  if (have.size() + added.size() != n)
    throw NumericalError("orthonormal_complement: could not complete basis");
  return Matrix::from_columns(added);
}

GramSchmidt gram_schmidt(const std::vector<Vec>& vectors, double tol) {
  GramSchmidt out;
  const std::size_t k = vectors.size();
  out.mixing = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    Vec v = vectors[i];
    const double orig = norm2(v);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < out.basis.size(); ++j) {
        double c = dot(out.basis[j], v);
        out.mixing(j, i) += c;
        for (std::size_t z = 0; z < v.size(); ++z) v[z] -= c * out.basis[j][z];
      }
    }
    double nv = norm2(v);
    if (nv <= tol * std::max(1.0, orig))
      throw ValidationError("gram_schmidt: input vectors are rank deficient");
    out.mixing(i, i) = nv;
    for (auto& x : v) x /= nv;
    out.basis.push_back(std::move(v));
  }
  return out;
}

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) {
      double a = A(i, j);
      if (a == 0.0) continue;
      for (std::size_t p = 0; p < B.rows(); ++p)
        for (std::size_t q = 0; q < B.cols(); ++q)
          K(i * B.rows() + p, j * B.cols() + q) = a * B(p, q);
    }
  return K;
}

// --- symmetric eigensolver: cyclic Jacobi rotations ---

namespace {

void jacobi_symmetric(const Matrix& M, Vec& evals, Matrix& V, const Tolerances& tol) {
  const std::size_t n = M.rows();
  Matrix A = M;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double avg = 0.5 * (A(i, j) + A(j, i));
      A(i, j) = A(j, i) = avg;
    }
  V = Matrix::identity(n);
  const double scale = std::max(1.0, A.norm_inf());
  const std::size_t cap = tol.sweep_cap * std::max<std::size_t>(n * n, 1);
  for (std::size_t sweep = 0; sweep < cap; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off = std::max(off, std::abs(A(i, j)));
    if (off <= tol.iter_eps * scale) break;
    if (sweep + 1 == cap)
      throw NumericalError("eigendecompose: Jacobi sweeps exceeded iteration cap");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = A(p, q);
        if (std::abs(apq) <= 1e-3 * tol.iter_eps * scale) continue;
        double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        double app = A(p, p), aqq = A(q, q);
        A(p, p) = app - t * apq;
        A(q, q) = aqq + t * apq;
        A(p, q) = A(q, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          double aip = A(i, p), aiq = A(i, q);
          A(i, p) = A(p, i) = c * aip - s * aiq;
          A(i, q) = A(q, i) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          double vip = V(i, p), viq = V(i, q);
          V(i, p) = c * vip - s * viq;
          V(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  evals.resize(n);
  for (std::size_t i = 0; i < n; ++i) evals[i] = A(i, i);
}

// --- general eigensolver: Householder Hessenberg + Francis double-shift QR ---

void hessenberg(Matrix& H) {
  const int n = static_cast<int>(H.rows());
  Vec ort(n, 0.0);
  for (int m = 1; m <= n - 2; ++m) {
    double scale = 0.0;
    for (int i = m; i < n; ++i) scale += std::abs(H(i, m - 1));
    if (scale == 0.0) continue;
    double h = 0.0;
    for (int i = n - 1; i >= m; --i) {
      ort[i] = H(i, m - 1) / scale;
      h += ort[i] * ort[i];
    }
    double g = std::sqrt(h);
    if (ort[m] > 0) g = -g;
    h -= ort[m] * g;
    ort[m] -= g;
    for (int j = m; j < n; ++j) {
      double f = 0.0;
      for (int i = n - 1; i >= m; --i) f += ort[i] * H(i, j);
      f /= h;
      for (int i = m; i < n; ++i) H(i, j) -= f * ort[i];
    }
    for (int i = 0; i < n; ++i) {
      double f = 0.0;
      for (int j = n - 1; j >= m; --j) f += ort[j] * H(i, j);
      f /= h;
      for (int j = m; j < n; ++j) H(i, j) -= f * ort[j];
    }
    H(m, m - 1) = scale * g;
    for (int i = m + 1; i < n; ++i) H(i, m - 1) = 0.0;
  }
}

void hqr_eigenvalues(Matrix& H, Vec& wr, Vec& wi) {
  const int nn = static_cast<int>(H.rows());
  int n = nn - 1;
  const double eps = std::pow(2.0, -52.0);
  double exshift = 0.0;
  double p = 0, q = 0, r = 0, s = 0, z = 0, w, x, y;
  wr.assign(nn, 0.0);
  wi.assign(nn, 0.0);

  double norm = 0.0;
  for (int i = 0; i < nn; ++i)
    for (int j = std::max(i - 1, 0); j < nn; ++j) norm += std::abs(H(i, j));
  if (norm == 0.0) return;

  int iter = 0;
  long total = 0;
  const long cap = 60L * nn + 200;
  while (n >= 0) {
    int l = n;
    while (l > 0) {
      s = std::abs(H(l - 1, l - 1)) + std::abs(H(l, l));
      if (s == 0.0) s = norm;
      if (std::abs(H(l, l - 1)) < eps * s) break;
      --l;
    }
    if (l == n) {
      H(n, n) += exshift;
      wr[n] = H(n, n);
      wi[n] = 0.0;
      --n;
      iter = 0;
    } else if (l == n - 1) {
      w = H(n, n - 1) * H(n - 1, n);
      p = (H(n - 1, n - 1) - H(n, n)) / 2.0;
      q = p * p + w;
      z = std::sqrt(std::abs(q));
      H(n, n) += exshift;
      H(n - 1, n - 1) += exshift;
      x = H(n, n);
      if (q >= 0) {
        z = (p >= 0) ? p + z : p - z;
        wr[n - 1] = x + z;
        wr[n] = wr[n - 1];
        if (z != 0.0) wr[n] = x - w / z;
        wi[n - 1] = 0.0;
        wi[n] = 0.0;
      } else {
        wr[n - 1] = x + p;
        wr[n] = x + p;
        wi[n - 1] = z;
        wi[n] = -z;
      }
      n -= 2;
      iter = 0;
    } else {
      x = H(n, n);
      y = H(n - 1, n - 1);
      w = H(n, n - 1) * H(n - 1, n);
      if (iter == 10 || iter == 20) {
        exshift += x;
        for (int i = 0; i <= n; ++i) H(i, i) -= x;
        s = std::abs(H(n, n - 1)) + std::abs(H(n - 1, n - 2));
        x = y = 0.75 * s;
        w = -0.4375 * s * s;
      }
      ++iter;
      if (++total > cap)
        throw NumericalError("eigendecompose: QR iteration did not converge");

      int m = n - 2;
      while (m >= l) {
        z = H(m, m);
        r = x - z;
        s = y - z;
        p = (r * s - w) / H(m + 1, m) + H(m, m + 1);
        q = H(m + 1, m + 1) - z - r - s;
        r = H(m + 2, m + 1);
        s = std::abs(p) + std::abs(q) + std::abs(r);
        p /= s;
        q /= s;
        r /= s;
        if (m == l) break;
        if (std::abs(H(m, m - 1)) * (std::abs(q) + std::abs(r)) <
            eps * (std::abs(p) *
                   (std::abs(H(m - 1, m - 1)) + std::abs(z) + std::abs(H(m + 1, m + 1)))))
          break;
        --m;
      }
      for (int i = m + 2; i <= n; ++i) {
        H(i, i - 2) = 0.0;
        if (i > m + 2) H(i, i - 3) = 0.0;
      }

      for (int k = m; k <= n - 1; ++k) {
        bool notlast = (k != n - 1);
        if (k != m) {
          p = H(k, k - 1);
          q = H(k + 1, k - 1);
          r = notlast ? H(k + 2, k - 1) : 0.0;
          x = std::abs(p) + std::abs(q) + std::abs(r);
          if (x == 0.0) continue;
          p /= x;
          q /= x;
          r /= x;
        }
        s = std::sqrt(p * p + q * q + r * r);
        if (p < 0) s = -s;
        if (s == 0.0) continue;
        if (k != m)
          H(k, k - 1) = -s * x;
        else if (l != m)
          H(k, k - 1) = -H(k, k - 1);
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;
        for (int j = k; j < nn; ++j) {
          double f = H(k, j) + q * H(k + 1, j);
          if (notlast) {
            f += r * H(k + 2, j);
            H(k + 2, j) -= f * z;
          }
          H(k, j) -= f * x;
          H(k + 1, j) -= f * y;
        }
        for (int i = 0; i <= std::min(n, k + 3); ++i) {
          double f = x * H(i, k) + y * H(i, k + 1);
          if (notlast) {
            f += z * H(i, k + 2);
            H(i, k + 2) -= f * r;
          }
          H(i, k) -= f;
          H(i, k + 1) -= f * q;
        }
      }
    }
  }
}

struct RankedEig {
  std::complex<double> value;
  std::size_t input_index;
};

void sort_eigs(std::vector<RankedEig>& eigs) {
  std::stable_sort(eigs.begin(), eigs.end(), [](const RankedEig& a, const RankedEig& b) {
    if (a.value.real() != b.value.real()) return a.value.real() < b.value.real();
    double aa = std::abs(a.value.imag()), ab = std::abs(b.value.imag());
    if (aa != ab) return aa < ab;
    if (a.value.imag() != b.value.imag()) return a.value.imag() < b.value.imag();
    return a.input_index < b.input_index;
  });
}

EigClass classify(std::complex<double> v, double thr) {
  if (std::abs(v.real()) <= thr) return EigClass::center;
  return v.real() < 0 ? EigClass::stable : EigClass::unstable;
}

}  // namespace

Spectrum eigendecompose(const Matrix& M, bool symmetric_hint, const Tolerances& tol) {
  if (!M.square()) throw ValidationError("eigendecompose: non-square matrix");
  if (!M.all_finite()) throw ValidationError("eigendecompose: non-finite entries");
  const std::size_t n = M.rows();
  const double scale = std::max(1.0, M.norm_inf());
  const double zero_thr = tol.zero_eig * scale;

  Spectrum out;
  std::vector<RankedEig> eigs(n);
  if (symmetric_hint) {
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        asym = std::max(asym, std::abs(M(i, j) - M(j, i)));
    if (asym > 1e-9 * scale)
      throw ValidationError("eigendecompose: symmetric_hint set on asymmetric matrix");
    Vec evals;
    Matrix V;
    jacobi_symmetric(M, evals, V, tol);
    for (std::size_t i = 0; i < n; ++i) eigs[i] = {{evals[i], 0.0}, i};
    sort_eigs(eigs);
    out.vectors = Matrix(n, n);
    out.has_vectors = true;
    for (std::size_t j = 0; j < n; ++j) {
      Vec v = V.col(eigs[j].input_index);
      std::size_t arg = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
      if (v[arg] < 0)
        for (auto& x : v) x = -x;
      out.vectors.set_col(j, v);
    }
  } else {
    Matrix H = M;
    hessenberg(H);
    Vec wr, wi;
    hqr_eigenvalues(H, wr, wi);
    for (std::size_t i = 0; i < n; ++i) eigs[i] = {{wr[i], wi[i]}, i};
    sort_eigs(eigs);
  }
  out.values.resize(n);
  out.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = eigs[i].value;
    out.classes[i] = classify(eigs[i].value, zero_thr);
  }
  return out;
}

std::pair<bool, double> is_positive_definite(const Matrix& M, const Tolerances& tol) {
  if (!M.square()) throw ValidationError("is_positive_definite: non-square matrix");
  const std::size_t n = M.rows();
  Matrix S(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) S(i, j) = 0.5 * (M(i, j) + M(j, i));
  Vec evals;
  Matrix V;
  jacobi_symmetric(S, evals, V, tol);
  double mn = evals.empty() ? 0.0 : *std::min_element(evals.begin(), evals.end());
  return {mn > tol.posdef_margin, mn};
}

Matrix schur_complement(const Matrix& M, std::size_t split) {
  if (!M.square()) throw ValidationError("schur_complement: non-square matrix");
  const std::size_t n = M.rows();
  if (split == 0 || split >= n) throw ValidationError("schur_complement: bad split");
  const std::size_t k = n - split;
  Matrix M11(split, split), M12(split, k), M21(k, split), M22(k, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i < split && j < split)
        M11(i, j) = M(i, j);
      else if (i < split)
        M12(i, j - split) = M(i, j);
      else if (j < split)
        M21(i - split, j) = M(i, j);
      else
        M22(i - split, j - split) = M(i, j);
    }
  Matrix X = lu_solve_many(M22, M21);  // M22^{-1} M21
  return M11 - M12 * X;
}

double hurwitz_margin(const Matrix& M, const Tolerances& tol) {
  Spectrum s = eigendecompose(M, false, tol);
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& v : s.values) mx = std::max(mx, v.real());
  return -mx;
}

GeneralizedKernel generalized_kernel(const Matrix& M, double cutoff) {
  if (!M.square()) throw ValidationError("generalized_kernel: non-square matrix");
  const std::size_t n = M.rows();
  GeneralizedKernel out;
  std::vector<Vec> cols;

  Matrix P = (1.0 / std::max(1.0, M.norm_inf())) * M;
  for (std::size_t k = 1; k <= n; ++k) {
    Matrix N = nullspace(P, cutoff);
    if (N.cols() <= cols.size()) break;
    std::size_t before = cols.size();
    // orthonormal part of N outside the current basis, via SVD of the
    // projected columns (singular values are sines of principal angles,
    // cleanly separated near 1 and 0)
    Matrix W = N;
    for (std::size_t j = 0; j < W.cols(); ++j) {
      Vec w = W.col(j);
      for (int pass = 0; pass < 2; ++pass)
        for (const auto& u : cols) w = axpy(-dot(w, u), u, w);
      W.set_col(j, w);
    }
    Svd s = svd(W);
    for (std::size_t i = 0; i < s.sigma.size(); ++i) {
      if (s.sigma[i] <= 0.5) continue;
      Vec u = s.U.col(i);
      double nrm = norm2(u);
      for (double& x : u) x /= nrm;
      cols.push_back(std::move(u));
    }
    out.grade_dims.push_back(cols.size() - before);
    if (cols.size() >= n) break;
    P = P * M;
    double scale = P.norm_inf();
    if (scale > 1.0) P *= 1.0 / scale;
  }

  out.basis = cols.empty() ? Matrix(n, 0) : Matrix::from_columns(cols);
  return out;
}

double max_principal_angle(const Matrix& Q1, const Matrix& Q2) {
  if (Q1.rows() != Q2.rows() || Q1.cols() != Q2.cols())
    throw ValidationError("max_principal_angle: dimension mismatch");
  if (Q1.cols() == 0) return 0.0;
  Svd s = svd(Q1.transpose() * Q2);
  double smin = s.sigma.back();
  smin = std::min(1.0, std::max(-1.0, smin));
  return std::acos(smin);
}

}  // namespace nilnet::numkit

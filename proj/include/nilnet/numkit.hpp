#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <utility>
#include <vector>

#include "nilnet/common.hpp"

namespace nilnet::numkit {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows_(r), cols_(c), data_(r * c, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix zero(std::size_t r, std::size_t c) { return Matrix(r, c, 0.0); }
  static Matrix from_columns(const std::vector<Vec>& cols);
  static Matrix diagonal(const Vec& d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transpose() const;
  Vec apply(const Vec& x) const;
  Vec col(std::size_t j) const;
  Vec row(std::size_t i) const;
  void set_col(std::size_t j, const Vec& v);

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  double norm_inf() const;   // max row sum of |entries|
  double max_abs() const;
  bool all_finite() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix a);

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
Vec axpy(double a, const Vec& x, const Vec& y);  // a*x + y

struct Tolerances {
  double zero_eig = 1e-8;       // |lambda| ~ 0 threshold, relative to ||M||_inf
  double gap = 1e-6;            // minimum separation declaring simplicity
  double posdef_margin = 1e-10; // required min eigenvalue of the symmetric part
  double iter_eps = 1e-13;      // iteration convergence
  std::size_t sweep_cap = 100;  // Jacobi cap factor: sweep_cap * n^2
};

enum class EigClass { stable, center, unstable };

struct Spectrum {
  std::vector<std::complex<double>> values;  // sorted by (re, |im|, im, input idx)
  std::vector<EigClass> classes;
  Matrix vectors;     // columns, real; filled only on the symmetric path
  bool has_vectors = false;

  std::size_t size() const { return values.size(); }
  std::size_t count(EigClass c) const;
};

Spectrum eigendecompose(const Matrix& M, bool symmetric_hint,
                        const Tolerances& tol = {});

// true iff the symmetric part (M + M^T)/2 has min eigenvalue > posdef_margin;
// the witness is that minimum eigenvalue.
std::pair<bool, double> is_positive_definite(const Matrix& M,
                                             const Tolerances& tol = {});

// M11 - M12 M22^{-1} M21 with M11 the leading split x split block.
Matrix schur_complement(const Matrix& M, std::size_t split);

struct GramSchmidt {
  std::vector<Vec> basis;  // orthonormal
  Matrix mixing;           // upper triangular R with input_i = sum_j R(j,i) * basis_j
};
GramSchmidt gram_schmidt(const std::vector<Vec>& vectors, double tol = 1e-12);

Matrix kron(const Matrix& A, const Matrix& B);

// -max(Re lambda); positive iff M is Hurwitz.
double hurwitz_margin(const Matrix& M, const Tolerances& tol = {});

// --- solver utilities used across the toolkit ---

Vec lu_solve(Matrix A, Vec b);              // partial pivoting; A consumed
Matrix lu_solve_many(Matrix A, Matrix B);   // solves A X = B
Matrix inverse(const Matrix& A);

struct Svd {         // thin SVD by one-sided Jacobi; A = U diag(sigma) V^T
  Matrix U;
  Vec sigma;         // descending
  Matrix V;
};
Svd svd(const Matrix& A, double eps = 1e-14);

// Orthonormal basis of the (numerical) kernel, singular values <= cutoff.
Matrix nullspace(const Matrix& A, double cutoff);

// Columns extending Q's columns to an orthonormal basis of R^n.
Matrix orthonormal_complement(const Matrix& Q);

// Generalized kernel (union of ker M^k) with an orthonormal basis ordered by
// grade: all plain kernel vectors first, then the new directions of ker M^2,
// and so on. grade_dims records how many columns each grade contributed.
// cutoff is applied to singular values of the powers of M, each power
// rescaled to unit inf-norm first.
struct GeneralizedKernel {
  Matrix basis;
  std::vector<std::size_t> grade_dims;
  std::size_t dim() const { return basis.cols(); }
};
GeneralizedKernel generalized_kernel(const Matrix& M, double cutoff = 1e-8);

// Largest principal angle between two subspaces given by orthonormal columns.
double max_principal_angle(const Matrix& Q1, const Matrix& Q2);

}  // namespace nilnet::numkit

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "nilnet/numkit.hpp"
#include "oracles.hpp"

using namespace nilnet;
using namespace nilnet::numkit;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> u(-amp, amp);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

const Matrix kA_ex8{{1, 1, 0, 0},
                    {-1, 1, 1, 0},
                    {0, -1, 1, 16.94},
                    {1, -4.24, -4.24, -17.94}};

Matrix ex8_D(double c) {
  Matrix D{{1, 1, 0, 0}, {-1, 1, 1, 0}, {0, -1, 1, 0}, {1, -4.24, -4.24, 0}};
  D(3, 3) = c;
  return D;
}

}  // namespace

TEST_CASE("eigendecompose: identity and diagonal") {
  Spectrum s = eigendecompose(Matrix::identity(3), true);
  REQUIRE(s.size() == 3);
  for (auto v : s.values) {
    CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(v.imag() == 0.0);
  }
  Spectrum d = eigendecompose(Matrix::diagonal({3.0, -1.0, 0.0}), true);
  CHECK(d.values[0].real() == doctest::Approx(-1.0));
  CHECK(d.values[1].real() == doctest::Approx(0.0));
  CHECK(d.values[2].real() == doctest::Approx(3.0));
  CHECK(d.classes[0] == EigClass::stable);
  CHECK(d.classes[1] == EigClass::center);
  CHECK(d.classes[2] == EigClass::unstable);
}

TEST_CASE("eigendecompose: 3-node complement Laplacian spectrum {3,1,0}") {
  Matrix L{{1, 0, -1}, {0, 1, -1}, {-1, -1, 2}};
  Spectrum s = eigendecompose(L, true);
  CHECK(std::abs(s.values[0]) <= 1e-12);
  CHECK(s.values[1].real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.values[2].real() == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("eigendecompose: random matrices match companion-free root oracle") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 12; ++trial) {
    Matrix M = random_matrix(5, 5, rng, 2.0);
    Spectrum s = eigendecompose(M, false);
    auto ref = oracles::eig_oracle(M);
    std::vector<oracles::Cx> got(s.values.begin(), s.values.end());
    CHECK(oracles::multiset_distance(got, ref) <= 1e-8);
  }
}

TEST_CASE("eigendecompose: symmetric invariants") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix B = random_matrix(6, 6, rng, 3.0);
    Matrix M = B + B.transpose();
    Spectrum s = eigendecompose(M, true);
    REQUIRE(s.has_vectors);
    const Matrix& V = s.vectors;
    Matrix G = V.transpose() * V;
    G -= Matrix::identity(6);
    CHECK(G.norm_inf() <= 1e-10);
    Matrix R = M * V;
    for (std::size_t j = 0; j < 6; ++j)
      for (std::size_t i = 0; i < 6; ++i) R(i, j) -= s.values[j].real() * V(i, j);
    CHECK(R.norm_inf() <= 1e-8 * std::max(1.0, M.norm_inf()));
  }
}

TEST_CASE("eigendecompose: conjugate pairs adjacent, deterministic order") {
  Matrix M{{0, -2, 0, 0}, {2, 0, 0, 0}, {0, 0, 0, -1}, {0, 0, 1, 0}};
  Spectrum s = eigendecompose(M, false);
  CHECK(s.values[0].imag() == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(s.values[1].imag() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.values[2].imag() == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(s.values[3].imag() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("eigendecompose: input validation") {
  CHECK_THROWS_AS(eigendecompose(Matrix(2, 3), false), ValidationError);
  Matrix M{{0, 1}, {5, 0}};
  CHECK_THROWS_AS(eigendecompose(M, true), ValidationError);
}

TEST_CASE("is_positive_definite: identity and the worked 4x4 boundary") {
  auto [ok, witness] = is_positive_definite(Matrix::identity(3));
  CHECK(ok);
  CHECK(witness == doctest::Approx(1.0).epsilon(1e-12));

  auto [ok_high, w_high] = is_positive_definite(ex8_D(9.24));
  CHECK(ok_high);
  CHECK(w_high > 0.0);
  auto [ok_low, w_low] = is_positive_definite(ex8_D(9.0));
  CHECK_FALSE(ok_low);
  CHECK(w_low < 0.0);
}

TEST_CASE("is_positive_definite: random constructed instances") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix B = random_matrix(5, 5, rng);
    Matrix M = B.transpose() * B;
    for (std::size_t i = 0; i < 5; ++i) M(i, i) += 0.1;
    auto [ok, w] = is_positive_definite(M);
    CHECK(ok);
    CHECK(w >= 0.1 - 1e-9);
  }
}

TEST_CASE("positive definite implies spectrum in the right half plane") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix B = random_matrix(4, 4, rng);
    Matrix S = B.transpose() * B;
    for (std::size_t i = 0; i < 4; ++i) S(i, i) += 0.1;
    Matrix K = random_matrix(4, 4, rng, 2.0);
    Matrix M = S + K - K.transpose();  // symmetric part stays S
    auto [ok, w] = is_positive_definite(M);
    REQUIRE(ok);
    Spectrum s = eigendecompose(M, false);
    for (auto v : s.values) CHECK(v.real() > 0.0);
  }
}

TEST_CASE("schur_complement: block diagonal, bordered form, direct formula") {
  Matrix M{{1, 2, 0, 0}, {3, 4, 0, 0}, {0, 0, 5, 0}, {0, 0, 0, 6}};
  Matrix S = schur_complement(M, 2);
  CHECK(S(0, 0) == doctest::Approx(1.0));
  CHECK(S(0, 1) == doctest::Approx(2.0));
  CHECK(S(1, 0) == doctest::Approx(3.0));
  CHECK(S(1, 1) == doctest::Approx(4.0));

  // bordered symmetric form with lower-right block 2c*I
  std::mt19937_64 rng(3);
  double c = 4.0;
  Matrix B = random_matrix(3, 3, rng);
  Matrix H11 = B + B.transpose();
  Matrix H12 = random_matrix(3, 2, rng);
  Matrix H(5, 5);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) H(i, j) = H11(i, j);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      H(i, 3 + j) = H12(i, j);
      H(3 + j, i) = H12(i, j);
    }
  H(3, 3) = H(4, 4) = 2.0 * c;
  Matrix got = schur_complement(H, 3);
  Matrix want = H11 - (1.0 / (2.0 * c)) * (H12 * H12.transpose());
  got -= want;
  CHECK(got.norm_inf() <= 1e-12);

  // random 4x4 against an independently inverted 2x2 block
  for (int trial = 0; trial < 10; ++trial) {
    Matrix R = random_matrix(4, 4, rng);
    double a = R(2, 2), b = R(2, 3), cc = R(3, 2), d = R(3, 3);
    double det = a * d - b * cc;
    if (std::abs(det) < 1e-3) continue;
    Matrix inv22{{d / det, -b / det}, {-cc / det, a / det}};
    Matrix M12(2, 2), M21(2, 2), M11(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        M11(i, j) = R(i, j);
        M12(i, j) = R(i, j + 2);
        M21(i, j) = R(i + 2, j);
      }
    Matrix want2 = M11 - M12 * inv22 * M21;
    Matrix got2 = schur_complement(R, 2);
    got2 -= want2;
    CHECK(got2.norm_inf() <= 1e-12);
  }
}

TEST_CASE("schur_complement: positive definiteness factors through the split") {
  std::mt19937_64 rng(9);
  int seen_pd = 0, seen_not = 0;
  for (int trial = 0; trial < 40; ++trial) {
    Matrix B = random_matrix(4, 4, rng);
    Matrix M = B + B.transpose();
    if (trial % 2 == 0)
      for (std::size_t i = 0; i < 4; ++i) M(i, i) += 4.0;
    auto [pd_m, wm] = is_positive_definite(M);
    auto [pd_22, w22] = is_positive_definite(schur_complement(Matrix::identity(4), 2));
    (void)pd_22;
    (void)w22;
    Matrix M22(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) M22(i, j) = M(i + 2, j + 2);
    auto [pd_block, wb] = is_positive_definite(M22);
    (void)wb;
    bool rhs = false;
    if (pd_block) {
      auto [pd_s, ws] = is_positive_definite(schur_complement(M, 2));
      (void)ws;
      rhs = pd_s;
    }
    CHECK(pd_m == rhs);
    (wm > 0 ? seen_pd : seen_not)++;
  }
  CHECK(seen_pd > 0);
  CHECK(seen_not > 0);
}

TEST_CASE("gram_schmidt: fixed and random cases") {
  std::vector<Vec> basis = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  GramSchmidt g = gram_schmidt(basis);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(g.basis[i][j] == doctest::Approx(i == j ? 1.0 : 0.0));
      if (i != j) CHECK(g.mixing(i, j) == doctest::Approx(0.0));
    }

  GramSchmidt h = gram_schmidt({{1, 0}, {1, 1}});
  CHECK(h.basis[0][0] == doctest::Approx(1.0));
  CHECK(h.basis[0][1] == doctest::Approx(0.0));
  CHECK(h.basis[1][0] == doctest::Approx(0.0));
  CHECK(h.basis[1][1] == doctest::Approx(1.0));

  std::mt19937_64 rng(31);
  std::vector<Vec> vs;
  for (int i = 0; i < 4; ++i) {
    Vec v(6);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& x : v) x = u(rng);
    vs.push_back(v);
  }
  GramSchmidt r = gram_schmidt(vs);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i; j < 4; ++j) {
      double want = (i == j) ? 1.0 : 0.0;
      CHECK(std::abs(dot(r.basis[i], r.basis[j]) - want) <= 1e-12);
    }
  // reconstruction: input_i = sum_j mixing(j,i) basis_j
  for (std::size_t i = 0; i < 4; ++i) {
    Vec rec(6, 0.0);
    for (std::size_t j = 0; j <= i; ++j)
      for (std::size_t z = 0; z < 6; ++z) rec[z] += r.mixing(j, i) * r.basis[j][z];
    for (std::size_t z = 0; z < 6; ++z) CHECK(rec[z] == doctest::Approx(vs[i][z]).epsilon(1e-10));
  }

  CHECK_THROWS_AS(gram_schmidt({{1, 0}, {2, 0}}), ValidationError);
}

TEST_CASE("kron: structure and definition") {
  Matrix B{{1, 2}, {3, 4}};
  Matrix K = kron(Matrix::identity(2), B);
  CHECK(K.rows() == 4);
  CHECK(K(0, 0) == 1);
  CHECK(K(1, 1) == 4);
  CHECK(K(2, 2) == 1);
  CHECK(K(2, 3) == 2);
  CHECK(K(0, 2) == 0);

  // projection identity: (v v^T kron I)(v kron x) = |v|^2 (v kron x)
  Vec v = {1.0, -2.0, 0.5};
  Vec x = {0.3, 0.7};
  Matrix vvT(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) vvT(i, j) = v[i] * v[j];
  Matrix P = kron(vvT, Matrix::identity(2));
  Vec vx(6);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) vx[i * 2 + j] = v[i] * x[j];
  Vec got = P.apply(vx);
  double vn2 = dot(v, v);
  for (int i = 0; i < 6; ++i) CHECK(got[i] == doctest::Approx(vn2 * vx[i]).epsilon(1e-12));

  std::mt19937_64 rng(41);
  Matrix A2 = random_matrix(2, 2, rng);
  Matrix B3 = random_matrix(3, 3, rng);
  Matrix K2 = kron(A2, B3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
          CHECK(K2(i * 3 + p, j * 3 + q) == doctest::Approx(A2(i, j) * B3(p, q)));
}

TEST_CASE("hurwitz_margin: worked matrix, identity scaling, 2x2 criterion") {
  CHECK(hurwitz_margin(kA_ex8) > 0.0);
  CHECK(hurwitz_margin(-1.0 * Matrix::identity(3)) == doctest::Approx(1.0).epsilon(1e-12));

  for (double a : {-2.0, -1.0, 1.0})
    for (double d : {-3.0, -1.0, 2.0})
      for (double b : {-2.0, 1.0, 3.0})
        for (double c : {-2.0, -1.0, 2.0}) {
          double tr = a + d, det = a * d - b * c;
          if (std::abs(tr) < 1e-9 || std::abs(det) < 1e-9) continue;
          Matrix M{{a, b}, {c, d}};
          bool hurwitz = hurwitz_margin(M) > 0.0;
          CHECK(hurwitz == (tr < 0 && det > 0));
        }
}

TEST_CASE("block Kronecker spectrum probe") {
  std::mt19937_64 rng(59);
  Matrix L{{1, 0, -1}, {0, 1, -1}, {-1, -1, 2}};
  Matrix A = random_matrix(3, 3, rng);
  Matrix D = random_matrix(3, 3, rng);
  double alpha = 0.37;
  Matrix full = kron(Matrix::identity(3), A) - alpha * kron(L, D);
  Spectrum fs = eigendecompose(full, false);
  std::vector<oracles::Cx> flat(fs.values.begin(), fs.values.end());

  Spectrum ls = eigendecompose(L, true);
  std::vector<oracles::Cx> blocks;
  for (auto lam : ls.values) {
    Matrix Mb = A - (alpha * lam.real()) * D;
    Spectrum bs = eigendecompose(Mb, false);
    blocks.insert(blocks.end(), bs.values.begin(), bs.values.end());
  }
  CHECK(oracles::multiset_distance(flat, blocks) <= 1e-8);
}

TEST_CASE("svd and nullspace helpers") {
  std::mt19937_64 rng(67);
  Matrix B = random_matrix(5, 2, rng);
  Matrix C = random_matrix(2, 4, rng);
  Matrix A = B * C;  // rank <= 2
  Svd s = svd(A);
  CHECK(s.sigma[2] <= 1e-12 * std::max(1.0, s.sigma[0]));
  Matrix K = nullspace(A, 1e-10 * std::max(1.0, s.sigma[0]));
  CHECK(K.cols() == 2);
  for (std::size_t j = 0; j < K.cols(); ++j) {
    Vec img = A.apply(K.col(j));
    CHECK(norm2(img) <= 1e-10);
  }
  Matrix Q = orthonormal_complement(K);
  CHECK(Q.cols() == 2);
  for (std::size_t j = 0; j < Q.cols(); ++j)
    for (std::size_t i = 0; i < K.cols(); ++i)
      CHECK(std::abs(dot(Q.col(j), K.col(i))) <= 1e-12);
}

TEST_CASE("lu solvers") {
  std::mt19937_64 rng(73);
  Matrix A = random_matrix(6, 6, rng);
  for (std::size_t i = 0; i < 6; ++i) A(i, i) += 3.0;
  Vec b(6, 1.0);
  Vec x = lu_solve(A, b);
  Vec r = A.apply(x);
  for (int i = 0; i < 6; ++i) CHECK(r[i] == doctest::Approx(1.0).epsilon(1e-10));
  Matrix inv = inverse(A);
  Matrix prod = A * inv;
  prod -= Matrix::identity(6);
  CHECK(prod.norm_inf() <= 1e-10);
  CHECK_THROWS_AS(lu_solve(Matrix(3, 3), Vec(3, 1.0)), NumericalError);
}

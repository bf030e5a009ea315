#pragma once

#include <optional>
#include <vector>

#include "nilnet/graphlab.hpp"
#include "nilnet/numkit.hpp"

namespace nilnet::netlin {

using numkit::Matrix;
using numkit::Spectrum;
using numkit::Tolerances;

// A network of identical nodes x_i' = f(x_i) - alpha sum_j L(i,j) D x_j with
// one distinguished simple Laplacian eigenvalue lambda tuned so that
// A - alpha_star lambda D has an m-dimensional generalized kernel.
struct NetworkDesign {
  graphlab::Graph graph;
  Matrix A;
  Matrix D;
  double alpha_star = 0.0;
  double lambda = 0.0;  // distinguished Laplacian eigenvalue
  Vec v;                // its unit-norm eigenvector
  std::size_t m = 0;    // center dimension of the distinguished block
};

// I_N (x) A - alpha L_G (x) D, size Nn x Nn.
Matrix assemble_linearization(const NetworkDesign& net, double alpha);

struct BlockSpectrum {
  double lambda_p = 0.0;
  Vec v_p;
  Spectrum spec;  // of A - alpha lambda_p D
};

// One block per Laplacian eigenpair, ascending; their union is the spectrum
// of the assembled linearization.
std::vector<BlockSpectrum> block_spectrum(const NetworkDesign& net, double alpha,
                                          const Tolerances& tol = {});

// alpha_star = 1/lambda for the chosen simple Laplacian eigenvalue (largest
// by default, otherwise the ascending index). Audits hyperbolicity of every
// other block and falls back to the diagonal-shift perturbation when a block
// sits on the imaginary axis; the returned design carries the (possibly
// perturbed) A and D.
NetworkDesign choose_alpha_star(const Matrix& A, const Matrix& D, const graphlab::Graph& g,
                                std::optional<std::size_t> which = std::nullopt,
                                const Tolerances& tol = {});

struct CenterSplit {
  Matrix Ec_basis;         // n x m, orthonormal, grade-ordered
  Matrix Eh_basis;         // n x (n-m), invariant complement
  Matrix proj_c;           // spectral projection onto E^c along E^h
  Matrix nilpotent_block;  // strictly upper-triangular coordinates of M on E^c
};

// Splits R^n = E^c + E^h for a matrix with exactly m eigenvalues at zero and
// a hyperbolic rest. E^c comes from iterated nullspaces; E^h from a Sylvester
// solve in the [E^c | complement] frame, avoiding complex eigenvectors.
CenterSplit center_split(const Matrix& M, std::size_t m, const Tolerances& tol = {});

}  // namespace nilnet::netlin

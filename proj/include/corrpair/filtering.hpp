#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "corrpair/parallel.hpp"
#include "corrpair/types.hpp"

namespace corrpair {

struct PairModelSpec;

enum class FilterKind { Identity, Convolution, ExplicitOperator };

// A linear map Phi on Sym_beta(N).
//
// Convolution: (Phi[R])_ab = sum_{c,d} F(a-c, b-d) R_cd on the torus, with F
// stored as an N x N matrix indexed by (x mod N, y mod N).
// ExplicitOperator: a D x D real matrix acting on basis coordinates, see
// to_coordinates().
struct FilterSpec {
  FilterKind kind = FilterKind::Identity;
  Matrix kernel;
  RealMatrix op;
  double decay_exponent = 3.0;
  double decay_constant = 10.0;
  std::string label = "identity";

  static FilterSpec identity();
  static FilterSpec convolution(Matrix kernel, std::string label = "custom");
  static FilterSpec explicit_operator(RealMatrix op, std::string label = "explicit");

  // Dimension the filter is tied to, 0 for Identity.
  int dimension() const;
};

// F(x,y) = delta * [x=y=0] + c / (1 + (|x|+|y|)^s), torus distances.
FilterSpec power_decay_kernel(int n, double s, double c, double delta = 0.0);
// delta_00 + eps * (four nearest neighbours).
FilterSpec stencil5_kernel(int n, double eps);
// Presets: "identity", "power_decay(s, c)", "stencil5(eps)".
FilterSpec filter_from_preset(std::string_view preset, int n);

// E_ik (Real) or E_ik^Im (Imag) with i <= k.
struct BasisMatrix {
  enum class Part { Real, Imag };
  int i = 0;
  int k = 0;
  Part part = Part::Real;
};

// Real coordinates of Sym_beta(N): Re r_ik for i <= k, then (complex class)
// Im r_ik for i < k. Ordering follows basis().
int basis_dimension(int n, SymmetryClass s);
std::vector<BasisMatrix> basis(int n, SymmetryClass s);
RealVector to_coordinates(const Matrix& r, SymmetryClass s);
Matrix from_coordinates(const RealVector& c, int n, SymmetryClass s);
Matrix basis_matrix(int n, const BasisMatrix& e);
// Gram weight <E, E> / <E_ii, E_ii>: 1 on the diagonal, 2 off it.
inline double gram_weight(const BasisMatrix& e) { return e.i == e.k ? 1.0 : 2.0; }

Matrix apply_filter(const FilterSpec& phi, const Matrix& w, SymmetryClass s);
// Adjoint with respect to the Hilbert-Schmidt inner product.
Matrix apply_filter_adjoint(const FilterSpec& phi, const Matrix& w, SymmetryClass s);
FilterSpec adjoint(const FilterSpec& phi, int n, SymmetryClass s);

Matrix basis_image(const FilterSpec& phi, const BasisMatrix& e, int n, SymmetryClass s);

// Nonzero entries of basis_image, as (a, b, value) with all positions listed.
struct SparseEntry {
  int a;
  int b;
  Complex value;
};
std::vector<SparseEntry> basis_image_sparse(const FilterSpec& phi, const BasisMatrix& e, int n,
                                            SymmetryClass s, double drop_tol = 0.0);

struct DecayReport {
  bool passed = true;
  double worst_ratio = 0.0;  // max |Phi[E]_ab| (1 + d^s) / C0
  BasisMatrix witness;
  int a = 0;
  int b = 0;
};
DecayReport check_decay(const FilterSpec& phi, int n, SymmetryClass s, double exponent, double c0);

struct LowerBoundReport {
  bool passed = true;
  double min_value = 0.0;
  double max_imag = 0.0;  // convolution only: max |Im F^| on the grid
};
LowerBoundReport check_lower_bound(const FilterSpec& phi, int n, SymmetryClass s, double c0);

// Discrete Fourier transform F^(p/N, q/N) = sum F(x,y) exp(2 pi i (x p - y q)/N).
Matrix kernel_fourier(const Matrix& kernel);

// Operator matrix on coordinates: column c holds to_coordinates(Phi[E_c]).
RealMatrix assemble_operator(const FilterSpec& phi, int n, SymmetryClass s);

// Sigma_{W~}[R] = E[W~ Tr(R W~)] for W~ = Phi_j[W_j], from the profile.
Matrix covariance_tensor_apply(const PairModelSpec& spec, int j, const Matrix& r);
// E[W~1 Tr(R W~2)].
Matrix cross_covariance_apply(const PairModelSpec& spec, const Matrix& r);

namespace kernels {
// Circular 2-D convolution by direct summation, O(N^4).
Matrix convolve_direct(const Matrix& kernel, const Matrix& r, Backend backend);
}  // namespace kernels

}  // namespace corrpair

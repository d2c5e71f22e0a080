#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace corrpair {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// beta = 1 for real symmetric, 2 for complex Hermitian.
enum class SymmetryClass { RealSymmetric = 1, ComplexHermitian = 2 };

constexpr int beta(SymmetryClass s) { return static_cast<int>(s); }

std::string to_string(SymmetryClass s);
SymmetryClass symmetry_from_string(std::string_view name);

struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateCovariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StepSizeUnstable : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnrealizableCorrelation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientSamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// True when m equals its conjugate transpose within tol (entrywise), and has
// zero imaginary part for the real class.
bool is_member(const Matrix& m, SymmetryClass s, double tol = 0.0);

// Normalized trace <X> = N^{-1} Tr X.
inline Complex normalized_trace(const Matrix& m) {
  return m.trace() / static_cast<double>(m.rows());
}

// Largest |eigenvalue| of a Hermitian matrix.
double hermitian_norm(const Matrix& m);

}  // namespace corrpair

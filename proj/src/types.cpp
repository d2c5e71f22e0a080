#include "corrpair/types.hpp"

#include <Eigen/Eigenvalues>

namespace corrpair {

std::string to_string(SymmetryClass s) {
  return s == SymmetryClass::RealSymmetric ? "real" : "complex";
}

SymmetryClass symmetry_from_string(std::string_view name) {
  if (name == "real" || name == "goe" || name == "real_symmetric") return SymmetryClass::RealSymmetric;
  if (name == "complex" || name == "gue" || name == "complex_hermitian") return SymmetryClass::ComplexHermitian;
  throw std::invalid_argument("unknown symmetry class: " + std::string(name));
}

bool is_member(const Matrix& m, SymmetryClass s, double tol) {
  if (m.rows() != m.cols()) return false;
  const Eigen::Index n = m.rows();
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      if (std::abs(m(a, b) - std::conj(m(b, a))) > tol) return false;
      if (s == SymmetryClass::RealSymmetric && std::abs(m(a, b).imag()) > tol) return false;
    }
  }
  return true;
}

double hermitian_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

}  // namespace corrpair

#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "corrpair/filtering.hpp"
#include "corrpair/types.hpp"

namespace corrpair {

struct PairModelSpec;

// S[R] = E[W~ R W~] for one matrix of the pair.
class SelfEnergy {
 public:
  // S[R] = scale * <R> * I.
  static SelfEnergy flat(int n, double scale = 1.0);
  // Identity filter with per-entry variances.
  static SelfEnergy from_profile(const RealMatrix& variance, SymmetryClass s);
  // Picks the profile form for identity filters, the basis sum otherwise.
  static SelfEnergy from_model(const PairModelSpec& spec, int j);
  // Always the basis sum S[R] = sum_b v_b Phi[E_b] R Phi[E_b].
  static SelfEnergy from_model_general(const PairModelSpec& spec, int j);

  int dimension() const { return n_; }
  Matrix operator()(const Matrix& r) const;
  // True when S maps diagonal matrices to diagonal matrices.
  bool preserves_diagonal() const;
  // Diagonal of S[diag(d)]; requires preserves_diagonal().
  Vector apply_diagonal(const Vector& d) const;
  // Matrix of the diagonal action: apply_diagonal(d) = diagonal_action() * d.
  RealMatrix diagonal_action() const;

 private:
  struct Flat {
    double scale;
  };
  struct Profile {
    RealMatrix variance;
    SymmetryClass symmetry;
  };
  struct Term {
    double weight;
    std::vector<SparseEntry> entries;
  };
  struct BasisSum {
    std::vector<Term> terms;
  };
  std::variant<Flat, Profile, BasisSum> rep_;
  int n_ = 0;
};

struct MdeOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
  double theta_start = 0.5;
  double theta_floor = 0.05;
};

struct MdeResult {
  Matrix m;
  int iterations = 0;
  double residual = 0.0;
};

// Solves -M^{-1} = z - A + S[M] with Im z * Im M > 0.
MdeResult solve_mde(const Matrix& a, const SelfEnergy& s, Complex z, const Matrix* init = nullptr,
                    const MdeOptions& options = {});

struct ScdosResult {
  std::vector<double> energies;
  double eta = 0.0;
  std::vector<double> rho;
  std::vector<Complex> trace;  // <M(E + i eta)>
  std::vector<int> iterations;
  std::vector<double> residual;
};

// rho(E) = |<Im M(E + i eta)>| / pi, warm-started along the grid.
ScdosResult scdos(const Matrix& a, const SelfEnergy& s, const std::vector<double>& energies, double eta,
                  const MdeOptions& options = {});

// count points spanning [-||A|| - 3, ||A|| + 3].
std::vector<double> default_energy_grid(const Matrix& a, int count = 2001);

struct Interval {
  double lo;
  double hi;
};

// Maximal intervals where rho >= kappa, endpoints linearly interpolated.
std::vector<Interval> kappa_bulk(const std::vector<double>& energies, const std::vector<double>& rho,
                                 double kappa);

struct SpectralSolution {
  ScdosResult curve;
  double kappa = 0.0;
  std::vector<Interval> bulk;

  // Columns: E, eta, rho, iterations, residual.
  std::string csv() const;
  void write_csv(const std::string& path) const;
};

SpectralSolution spectral_solution(const Matrix& a, const SelfEnergy& s, const std::vector<double>& energies,
                                   double eta, double kappa, const MdeOptions& options = {});

// Semicircle Stieltjes transform (-z + sqrt(z^2 - 4))/2 on the branch with
// Im m * Im z > 0.
Complex semicircle_stieltjes(Complex z);

struct FreeConvolutionPoint {
  Complex z;
  Complex mc;
  double residual = 0.0;  // |m_c - mhat(z + t m_c)|
  int iterations = 0;
};

// Solves m_c(z) = mhat(z + t m_c(z)) at each z.
std::vector<FreeConvolutionPoint> free_convolution_check(const std::function<Complex(Complex)>& mhat, double t,
                                                         const std::vector<Complex>& zs,
                                                         const MdeOptions& options = {});

}  // namespace corrpair

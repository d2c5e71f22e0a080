#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "corrpair/filtering.hpp"
#include "corrpair/model.hpp"
#include "corrpair/parallel.hpp"
#include "corrpair/rng.hpp"
#include "corrpair/types.hpp"

namespace corrpair {

// Flow data for one real coordinate of the pair: the entry (a,b), a <= b, or
// its imaginary part in the complex class.
struct CoordinateFlow {
  int a = 0;
  int b = 0;
  BasisMatrix::Part part = BasisMatrix::Part::Real;
  // Variance of this coordinate under GOE/GUE; sets the noise rate.
  double q = 0.0;
  Eigen::Matrix2d c;       // covariance of (w1, w2)
  Eigen::Matrix2d s;       // c^{-1}
  Eigen::Matrix2d o;       // eigenvectors of s in columns
  Eigen::Vector2d lambda;  // eigenvalues of s, ascending
};

struct EntryFlowData {
  int n = 0;
  SymmetryClass symmetry = SymmetryClass::RealSymmetric;
  double alpha = 1.0;
  std::vector<CoordinateFlow> coords;  // ordered as basis(n, symmetry)
  std::vector<std::vector<int>> by_row;  // coordinate indices grouped by a

  // Largest decay rate q * lambda / 2 over all coordinates.
  double max_rate() const;
  // Largest ||S|| over all coordinates.
  double max_s_norm() const;
};

EntryFlowData build_entry_data(const CorrelationProfile& profile, SymmetryClass s);

struct FlowState {
  double t = 0.0;
  Matrix w1;
  Matrix w2;
  Matrix w1_initial;
  Matrix w2_initial;
  std::shared_ptr<const EntryFlowData> entries;
  // Stream position: step k of evolution draws from child_stream(seed, k, row).
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

FlowState make_flow_state(const Matrix& w1, const Matrix& w2, std::shared_ptr<const EntryFlowData> entries,
                          std::uint64_t seed);

// Exact Ornstein-Uhlenbeck update of every coordinate from state.t to t_target.
FlowState evolve_exact(const FlowState& state, double t_target, Backend backend = Backend::OpenMP);

// Unit Brownian increments, one row per (coordinate, component), one column per step.
struct BrownianPath {
  double dt = 0.0;
  RealMatrix increments;

  int steps() const { return static_cast<int>(increments.cols()); }
  // Sums consecutive blocks of `factor` steps.
  BrownianPath coarsen(int factor) const;
};

BrownianPath sample_brownian_path(const EntryFlowData& data, int steps, double dt, Rng& rng);

struct EmOptions {
  bool diffusion = true;
};

// Euler-Maruyama along a given path.
FlowState evolve_em(const FlowState& state, const BrownianPath& path, const EmOptions& options = {});
// Exponential integrator driven by the same increments: decay is exact and
// each increment enters with weight (1 - e^{-k dt}) / (k dt).
FlowState evolve_exact_given_path(const FlowState& state, const BrownianPath& path);

struct EmResult {
  FlowState state;
  BrownianPath path;
  // dt * max_rate > 0.1
  bool accuracy_warning = false;
};

// Throws StepSizeUnstable when dt * max_rate >= 2.
EmResult evolve_em(const FlowState& state, double t_target, double dt, Rng& rng, const EmOptions& options = {});

struct GaussianDivisibleDecomposition {
  double t = 0.0;
  double s = 0.0;
  double c_star = 0.0;  // s / t
  Matrix what1;
  Matrix what2;
  Matrix wg1;
  Matrix wg2;
  // Standard normals behind wg: coordinate-major, two columns (j = 1, 2).
  RealMatrix injected;

  Matrix reconstructed(int j) const;
};

// W_t in law as What + sqrt(s) W_G, resampled from the state's initial pair.
GaussianDivisibleDecomposition gaussian_divisible_split(const FlowState& state, Rng& rng);

struct DriftDiagnostic {
  double naive_bound = 0.0;     // N^2 / alpha^2
  double improved_bound = 0.0;  // N^2 / alpha
  double measured = 0.0;        // <|Sigma^{-1}[W_t]|^2> on the 2N block
};

DriftDiagnostic drift_norm_diagnostic(const FlowState& state);

struct FlowTrajectoryRow {
  double t = 0.0;
  double mean_var1 = 0.0;
  double mean_var2 = 0.0;
  double mean_cov = 0.0;
  double drift_measured = 0.0;
};

// Columns: t, mean_var1, mean_var2, mean_cov, drift_measured.
void write_flow_trajectory_csv(const std::string& path, const std::vector<FlowTrajectoryRow>& rows);

// Coordinate value of a Hermitian matrix.
double coordinate_value(const Matrix& w, const CoordinateFlow& c);

}  // namespace corrpair

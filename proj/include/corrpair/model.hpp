#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "corrpair/filtering.hpp"
#include "corrpair/rng.hpp"
#include "corrpair/types.hpp"

namespace corrpair {

enum class EntryLaw { Gaussian, ShiftedBernoulli };

std::string to_string(EntryLaw law);
EntryLaw entry_law_from_string(std::string_view name);

// Per-entry second moments of the pair (W1, W2). Variances are absolute,
// i.e. already carry the 1/N factor.
struct CorrelationProfile {
  RealMatrix variance1;
  RealMatrix variance2;
  RealMatrix cross;
  double alpha = 1.0;

  int n() const { return static_cast<int>(variance1.rows()); }
  const RealMatrix& variance(int j) const { return j == 1 ? variance1 : variance2; }

  // sigma^2 = scale/N off the diagonal and diag_scale/N on it, constant rho.
  static CorrelationProfile uniform(int n, double scale, double diag_scale, double rho, double alpha);
  // GOE/GUE second moments (diagonal 2/N for the real class), constant rho.
  static CorrelationProfile invariant(int n, SymmetryClass s, double rho, double alpha);
};

struct ModelConstants {
  double c0 = 0.5;
  double C0 = 10.0;
};

struct PairModelSpec {
  int n = 0;
  SymmetryClass symmetry = SymmetryClass::RealSymmetric;
  CorrelationProfile profile;
  Matrix deformation1;
  Matrix deformation2;
  FilterSpec filter1;
  FilterSpec filter2;
  EntryLaw entry_law = EntryLaw::Gaussian;
  ModelConstants constants;

  const Matrix& deformation(int j) const { return j == 1 ? deformation1 : deformation2; }
  const FilterSpec& filter(int j) const { return j == 1 ? filter1 : filter2; }
};

// Wigner pair with invariant second moments, zero deformation, identity filters.
PairModelSpec wigner_pair_spec(int n, SymmetryClass s, double alpha, double rho,
                               EntryLaw law = EntryLaw::Gaussian);

struct ValidationReport {
  struct Check {
    std::string name;
    bool passed = true;
    std::string detail;
    std::optional<std::pair<int, int>> index;
  };
  std::vector<Check> checks;

  bool ok() const;
  const Check* find(std::string_view name) const;
  const Check* first_failure() const;
};

ValidationReport validate_spec(const PairModelSpec& spec);

struct MatrixPairSample {
  Matrix w1;
  Matrix w2;
  Matrix h1;
  Matrix h2;
  std::uint64_t seed = 0;
  std::uint64_t spec_hash = 0;
};

// Content hash of every field of the spec.
std::uint64_t spec_hash(const PairModelSpec& spec);

// Seed of sample `index` under `master`.
std::uint64_t sample_seed(std::uint64_t master, std::uint64_t index);

MatrixPairSample sample_pair(const PairModelSpec& spec, std::uint64_t seed);
// Same draw with the hash supplied by the caller.
MatrixPairSample sample_pair(const PairModelSpec& spec, std::uint64_t seed, std::uint64_t hash);

// Draws one correlated entry pair with the given standard deviations.
std::pair<double, double> draw_entry_pair(EntryLaw law, double sd1, double sd2, double rho, Rng& rng);

void fill_gaussian_invariant(Matrix& out, int n, SymmetryClass s, Rng& rng);
Matrix sample_gaussian_invariant(int n, SymmetryClass s, std::uint64_t seed);

struct SharedPairOptions {
  // Divide by sqrt(1 + alpha) so each matrix keeps invariant variances.
  bool normalize = false;
  Matrix deformation;  // empty means zero
};

// W_j = W + sqrt(alpha) W_G^(j) with W, W_G^(j) independent invariant Gaussians.
MatrixPairSample sample_shared_pair(int n, SymmetryClass s, double alpha, std::uint64_t seed,
                                    const SharedPairOptions& options = {});

// H_j = sqrt(1 - alpha) W_0 + sqrt(alpha) W_j with independent GOE matrices.
MatrixPairSample sample_mixture_pair(int n, double alpha, std::uint64_t seed);

}  // namespace corrpair

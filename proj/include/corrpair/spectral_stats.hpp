#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "corrpair/mde.hpp"
#include "corrpair/model.hpp"
#include "corrpair/types.hpp"

namespace corrpair {

struct SpectrumPair {
  RealVector lambdas1;
  RealVector lambdas2;
  std::uint64_t seed = 0;
};

// Ascending eigenvalues of a Hermitian matrix.
RealVector eigen_spectrum(const Matrix& h, SymmetryClass s);
SpectrumPair spectrum_pair(const MatrixPairSample& sample, SymmetryClass s);

// N^{-1} sum 1/(lambda_i - z).
Complex resolvent_trace(const RealVector& lambdas, Complex z);

// max_z |<G(z)> - <M(z)>| * N * |Im z|.
double local_law_residual(const RealVector& lambdas, const std::vector<Complex>& zs,
                          const std::vector<Complex>& m_trace);

struct LocalWindow {
  double energy = 0.0;
  double rho = 0.0;
  int k = 1;

  // Throws std::invalid_argument when rho < kappa.
  static LocalWindow make(double energy, double rho, int k = 1, double kappa = 0.0);
};

// The k eigenvalues nearest to the window energy (ties to the smaller index),
// in index order, rescaled by (lambda - E) N rho.
std::vector<double> nearest_fluctuations(const RealVector& lambdas, const LocalWindow& w);

// C_k = (N-k)! N^k / N! * rho^k.
double correlation_normalizer(int n, int k, double rho);

// F on R^{m+n}, zero outside the cube |x_i|, |y_j| <= radius.
struct TestFunction {
  int m = 1;
  int n = 1;
  double radius = 1.0;
  std::function<double(const double* x, const double* y)> eval;
  std::string label;
};

struct LocalFunction {
  double radius = 1.0;
  std::function<double(double)> eval;
};

// (1 - (x/width)^2)^3 on |x| < width.
LocalFunction bump(double width);
// exp(-x^2 / (2 width^2)) cos(freq x), cut at 8 width.
LocalFunction gaussian_cosine(double width, double freq);
// Catmull-Rom interpolation of values on an increasing grid, zero outside.
LocalFunction tabulated(std::vector<double> xs, std::vector<double> values);

// prod_i f(x_i) prod_j g(y_j).
TestFunction product_function(int m, int n, const LocalFunction& f, const LocalFunction& g);
TestFunction bump_product(int m, int n, double width);
TestFunction gaussian_cosine_product(int m, int n, double width, double freq);
// m = n = 1, bicubic Catmull-Rom on a grid; values(i, j) = F(xs[i], ys[j]).
TestFunction tabulated2d(std::vector<double> xs, std::vector<double> ys, RealMatrix values);
TestFunction zero_function(int m, int n);

// Sum over ordered tuples of distinct eigenvalues inside the support.
double tuple_sum(const TestFunction& f, const std::vector<double>& x, const std::vector<double>& y);

struct JointStatistic {
  double joint = 0.0;
  double joint_se = 0.0;
  double product = 0.0;
  double product_se = 0.0;
  double gap = 0.0;
  double gap_se = 0.0;
  std::size_t samples = 0;
};

// Rescaled fluctuations of every eigenvalue within the support radius.
std::vector<double> window_points(const RealVector& lambdas, const LocalWindow& w, double radius);

// Joint statistic C_m C_n E[sum F] and the product of marginals from paired
// halves (sample i with sample i + S/2).
JointStatistic joint_local_statistic(const std::vector<SpectrumPair>& samples, const TestFunction& f,
                                     const LocalWindow& w1, const LocalWindow& w2,
                                     double tolerance = std::numeric_limits<double>::infinity());

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t samples = 0;
};

// C_2 E[sum_{i != j} F(x_i, x_j)] from single-matrix spectra (m = n = 1).
MeanEstimate pair_correlation_term(const std::vector<RealVector>& spectra, const TestFunction& f,
                                   const LocalWindow& w);
// C_1^2 E[sum_i F(x_i, x_i)] (m = n = 1).
MeanEstimate diagonal_term(const std::vector<RealVector>& spectra, const TestFunction& f, const LocalWindow& w);

struct CorrelationEstimate {
  double corr = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double se = 0.0;  // bootstrap standard deviation
  std::size_t samples = 0;
};

double pearson(const std::vector<double>& x, const std::vector<double>& y);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Pearson correlation with a percentile bootstrap interval.
CorrelationEstimate correlation_with_bootstrap(const std::vector<double>& x, const std::vector<double>& y,
                                               int resamples = 1000, std::uint64_t seed = 0x5eed);

// Correlation of the k = 1 nearest fluctuations; needs at least 100 samples.
CorrelationEstimate fluctuation_correlation(const std::vector<SpectrumPair>& samples, const LocalWindow& w1,
                                            const LocalWindow& w2, int resamples = 1000,
                                            std::uint64_t seed = 0x5eed);

// Tr H^2 = sum |h_ab|^2.
double trace_square(const Matrix& h);
CorrelationEstimate trace_square_correlation(const std::vector<double>& xi1, const std::vector<double>& xi2,
                                             int resamples = 1000, std::uint64_t seed = 0x5eed);

struct GapRatio {
  double mean = 0.0;
  std::size_t count = 0;
};

// Mean of min(g_i, g_{i+1}) / max(g_i, g_{i+1}) over gaps inside the interval.
GapRatio gap_ratio_statistic(const RealVector& lambdas, const Interval& bulk);

struct GreenObservable {
  std::vector<Complex> z1;
  std::vector<Complex> z2;
  std::vector<double> factors1;
  std::vector<double> factors2;
  double value = 1.0;
};

// R = prod_p <Im G1(z1_p)> prod_q <Im G2(z2_q)>.
GreenObservable green_observable(const SpectrumPair& pair, const std::vector<Complex>& z1,
                                 const std::vector<Complex>& z2);

}  // namespace corrpair

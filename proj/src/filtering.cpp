#include "corrpair/filtering.hpp"

#include <cmath>
#include <mutex>
#include <regex>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <fftw3.h>

#include "corrpair/model.hpp"
#include "corrpair/parallel.hpp"

namespace corrpair {

FilterSpec FilterSpec::identity() { return FilterSpec{}; }

FilterSpec FilterSpec::convolution(Matrix kernel, std::string label) {
  if (kernel.rows() != kernel.cols() || kernel.rows() == 0)
    throw std::invalid_argument("convolution kernel must be a nonempty square array");
  FilterSpec f;
  f.kind = FilterKind::Convolution;
  f.kernel = std::move(kernel);
  f.label = std::move(label);
  return f;
}

FilterSpec FilterSpec::explicit_operator(RealMatrix op, std::string label) {
  if (op.rows() != op.cols() || op.rows() == 0)
    throw std::invalid_argument("explicit operator must be a nonempty square matrix");
  FilterSpec f;
  f.kind = FilterKind::ExplicitOperator;
  f.op = std::move(op);
  f.label = std::move(label);
  return f;
}

namespace {

int wrap(int x, int n) { return ((x % n) + n) % n; }

int torus_abs(int x, int n) {
  const int r = wrap(x, n);
  return std::min(r, n - r);
}

// Recovers N from D = N(N+1)/2 (real) or N^2 (complex).
int dimension_from_coordinates(int d) {
  const int tri = static_cast<int>(std::lround((std::sqrt(8.0 * d + 1.0) - 1.0) / 2.0));
  if (tri * (tri + 1) / 2 == d) return tri;
  const int sq = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
  if (sq * sq == d) return sq;
  return 0;
}

}  // namespace

int FilterSpec::dimension() const {
  switch (kind) {
    case FilterKind::Identity:
      return 0;
    case FilterKind::Convolution:
      return static_cast<int>(kernel.rows());
    case FilterKind::ExplicitOperator:
      return dimension_from_coordinates(static_cast<int>(op.rows()));
  }
  return 0;
}

FilterSpec power_decay_kernel(int n, double s, double c, double delta) {
  Matrix k(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      const double d = torus_abs(x, n) + torus_abs(y, n);
      k(x, y) = c / (1.0 + std::pow(d, s));
    }
  k(0, 0) += delta;
  std::ostringstream label;
  label << "power_decay(" << s << ", " << c << ")";
  FilterSpec f = FilterSpec::convolution(std::move(k), label.str());
  f.decay_exponent = s;
  return f;
}

FilterSpec stencil5_kernel(int n, double eps) {
  Matrix k = Matrix::Zero(n, n);
  k(0, 0) += 1.0;
  const int offs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (const auto& o : offs) k(wrap(o[0], n), wrap(o[1], n)) += eps;
  std::ostringstream label;
  label << "stencil5(" << eps << ")";
  return FilterSpec::convolution(std::move(k), label.str());
}

FilterSpec filter_from_preset(std::string_view preset, int n) {
  const std::string p(preset);
  if (p == "identity") return FilterSpec::identity();
  static const std::regex two(R"(\s*power_decay\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\)\s*)");
  static const std::regex one(R"(\s*stencil5\(\s*([-+0-9.eE]+)\s*\)\s*)");
  std::smatch m;
  if (std::regex_match(p, m, two)) return power_decay_kernel(n, std::stod(m[1]), std::stod(m[2]));
  if (std::regex_match(p, m, one)) return stencil5_kernel(n, std::stod(m[1]));
  throw std::invalid_argument("unknown filter preset: " + p);
}

int basis_dimension(int n, SymmetryClass s) {
  return s == SymmetryClass::RealSymmetric ? n * (n + 1) / 2 : n * n;
}

std::vector<BasisMatrix> basis(int n, SymmetryClass s) {
  std::vector<BasisMatrix> out;
  out.reserve(static_cast<std::size_t>(basis_dimension(n, s)));
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k) out.push_back({i, k, BasisMatrix::Part::Real});
  if (s == SymmetryClass::ComplexHermitian)
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k) out.push_back({i, k, BasisMatrix::Part::Imag});
  return out;
}

RealVector to_coordinates(const Matrix& r, SymmetryClass s) {
  const int n = static_cast<int>(r.rows());
  RealVector c(basis_dimension(n, s));
  int idx = 0;
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k) c(idx++) = r(i, k).real();
  if (s == SymmetryClass::ComplexHermitian)
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k) c(idx++) = r(i, k).imag();
  return c;
}

Matrix from_coordinates(const RealVector& c, int n, SymmetryClass s) {
  if (c.size() != basis_dimension(n, s)) throw std::invalid_argument("coordinate vector has wrong length");
  Matrix r(n, n);
  int idx = 0;
  for (int i = 0; i < n; ++i)
    for (int k = i; k < n; ++k) r(i, k) = r(k, i) = c(idx++);
  if (s == SymmetryClass::ComplexHermitian)
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k) {
        const double im = c(idx++);
        r(i, k) = Complex(r(i, k).real(), im);
        r(k, i) = Complex(r(k, i).real(), -im);
      }
  return r;
}

Matrix basis_matrix(int n, const BasisMatrix& e) {
  if (e.i < 0 || e.k >= n || e.i > e.k) throw std::invalid_argument("basis indices must satisfy 0 <= i <= k < n");
  Matrix m = Matrix::Zero(n, n);
  if (e.part == BasisMatrix::Part::Real) {
    m(e.i, e.k) = 1.0;
    m(e.k, e.i) = 1.0;
  } else {
    if (e.i == e.k) throw std::invalid_argument("imaginary basis matrices need i < k");
    m(e.i, e.k) = Complex(0, 1);
    m(e.k, e.i) = Complex(0, -1);
  }
  return m;
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// out = ifft(fft(a) .* fft(b)), circular in both indices.
Matrix convolve_fft(const Matrix& kernel, const Matrix& r) {
  const int n = static_cast<int>(r.rows());
  Matrix fa = kernel;
  Matrix fb = r;
  auto* pa = reinterpret_cast<fftw_complex*>(fa.data());
  auto* pb = reinterpret_cast<fftw_complex*>(fb.data());
  fftw_plan fwd_a, fwd_b, inv;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd_a = fftw_plan_dft_2d(n, n, pa, pa, FFTW_FORWARD, FFTW_ESTIMATE);
    fwd_b = fftw_plan_dft_2d(n, n, pb, pb, FFTW_FORWARD, FFTW_ESTIMATE);
    inv = fftw_plan_dft_2d(n, n, pa, pa, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(fwd_a);
  fftw_execute(fwd_b);
  fa.array() *= fb.array();
  fftw_execute(inv);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_a);
    fftw_destroy_plan(fwd_b);
    fftw_destroy_plan(inv);
  }
  fa /= static_cast<double>(n) * n;
  return fa;
}

void enforce_class(Matrix& m, SymmetryClass s) {
  const Eigen::Index n = m.rows();
  for (Eigen::Index a = 0; a < n; ++a) {
    m(a, a) = m(a, a).real();
    for (Eigen::Index b = a + 1; b < n; ++b) {
      Complex v = 0.5 * (m(a, b) + std::conj(m(b, a)));
      if (s == SymmetryClass::RealSymmetric) v = v.real();
      m(a, b) = v;
      m(b, a) = std::conj(v);
    }
  }
}

}  // namespace

namespace kernels {

// Upper triangle by direct summation, mirrored.
Matrix convolve_direct(const Matrix& kernel, const Matrix& r, Backend backend) {
  const int n = static_cast<int>(r.rows());
  Matrix out(n, n);
  auto row = [&](int a) {
    for (int b = a; b < n; ++b) {
      Complex acc = 0.0;
      for (int d = 0; d < n; ++d) {
        const int y = wrap(b - d, n);
        for (int c = 0; c < n; ++c) acc += kernel(wrap(a - c, n), y) * r(c, d);
      }
      out(a, b) = acc;
    }
  };
  if (backend == Backend::Serial) {
    for (int a = 0; a < n; ++a) row(a);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (int a = 0; a < n; ++a) row(a);
  }
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) out(b, a) = std::conj(out(a, b));
  return out;
}

}  // namespace kernels

namespace {

constexpr int kDirectLimit = 64;

Matrix apply_convolution(const Matrix& kernel, const Matrix& w, SymmetryClass s) {
  Matrix out = w.rows() <= kDirectLimit ? kernels::convolve_direct(kernel, w, Backend::OpenMP)
                                        : convolve_fft(kernel, w);
  enforce_class(out, s);
  return out;
}

Matrix apply_explicit(const RealMatrix& op, const Matrix& w, SymmetryClass s) {
  const int n = static_cast<int>(w.rows());
  if (op.rows() != basis_dimension(n, s)) throw std::invalid_argument("explicit operator dimension mismatch");
  return from_coordinates(op * to_coordinates(w, s), n, s);
}

void check_dims(const FilterSpec& phi, const Matrix& w) {
  if (w.rows() != w.cols()) throw std::invalid_argument("matrix must be square");
  const int d = phi.dimension();
  if (d != 0 && d != w.rows()) throw std::invalid_argument("filter dimension mismatch");
}

RealVector gram_weights(int n, SymmetryClass s) {
  const auto b = basis(n, s);
  RealVector g(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) g(static_cast<Eigen::Index>(i)) = gram_weight(b[i]);
  return g;
}

Matrix adjoint_kernel(const Matrix& kernel) {
  const int n = static_cast<int>(kernel.rows());
  Matrix adj(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) adj(x, y) = std::conj(kernel(wrap(-x, n), wrap(-y, n)));
  return adj;
}

}  // namespace

Matrix apply_filter(const FilterSpec& phi, const Matrix& w, SymmetryClass s) {
  check_dims(phi, w);
  switch (phi.kind) {
    case FilterKind::Identity:
      return w;
    case FilterKind::Convolution:
      return apply_convolution(phi.kernel, w, s);
    case FilterKind::ExplicitOperator:
      return apply_explicit(phi.op, w, s);
  }
  return w;
}

FilterSpec adjoint(const FilterSpec& phi, int n, SymmetryClass s) {
  switch (phi.kind) {
    case FilterKind::Identity:
      return phi;
    case FilterKind::Convolution: {
      FilterSpec f = phi;
      f.kernel = adjoint_kernel(phi.kernel);
      f.label = phi.label + "*";
      return f;
    }
    case FilterKind::ExplicitOperator: {
      const RealVector g = gram_weights(n, s);
      FilterSpec f = phi;
      f.op = g.cwiseInverse().asDiagonal() * phi.op.transpose() * g.asDiagonal();
      f.label = phi.label + "*";
      return f;
    }
  }
  return phi;
}

Matrix apply_filter_adjoint(const FilterSpec& phi, const Matrix& w, SymmetryClass s) {
  check_dims(phi, w);
  if (phi.kind == FilterKind::Identity) return w;
  return apply_filter(adjoint(phi, static_cast<int>(w.rows()), s), w, s);
}

std::vector<SparseEntry> basis_image_sparse(const FilterSpec& phi, const BasisMatrix& e, int n,
                                            SymmetryClass s, double drop_tol) {
  if (e.part == BasisMatrix::Part::Imag && s == SymmetryClass::RealSymmetric)
    throw std::invalid_argument("imaginary basis matrices do not exist in the real class");
  std::vector<SparseEntry> out;
  const Complex unit = e.part == BasisMatrix::Part::Real ? Complex(1, 0) : Complex(0, 1);
  switch (phi.kind) {
    case FilterKind::Identity:
      out.push_back({e.i, e.k, unit});
      if (e.i != e.k) out.push_back({e.k, e.i, std::conj(unit)});
      return out;
    case FilterKind::Convolution:
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          Complex v = unit * phi.kernel(wrap(a - e.i, n), wrap(b - e.k, n));
          if (e.i != e.k) v += std::conj(unit) * phi.kernel(wrap(a - e.k, n), wrap(b - e.i, n));
          if (std::abs(v) > drop_tol) out.push_back({a, b, v});
        }
      return out;
    case FilterKind::ExplicitOperator: {
      const Matrix img = apply_explicit(phi.op, basis_matrix(n, e), s);
      for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a)
          if (std::abs(img(a, b)) > drop_tol) out.push_back({a, b, img(a, b)});
      return out;
    }
  }
  return out;
}

Matrix basis_image(const FilterSpec& phi, const BasisMatrix& e, int n, SymmetryClass s) {
  Matrix m = Matrix::Zero(n, n);
  for (const auto& t : basis_image_sparse(phi, e, n, s)) m(t.a, t.b) = t.value;
  return m;
}

DecayReport check_decay(const FilterSpec& phi, int n, SymmetryClass s, double exponent, double c0) {
  DecayReport rep;
  const bool torus = phi.kind == FilterKind::Convolution;
  for (const auto& e : basis(n, s)) {
    const Matrix img = basis_image(phi, e, n, s);
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) {
        const double v = std::abs(img(a, b));
        if (v == 0.0) continue;
        // Phi[E_ik] is symmetric in (a, b), so measure to the nearer of (i, k) and (k, i).
        auto dist = [&](int x) { return torus ? torus_abs(x, n) : std::abs(x); };
        const int d = std::min(dist(e.i - a) + dist(e.k - b), dist(e.k - a) + dist(e.i - b));
        const double ratio = v * (1.0 + std::pow(static_cast<double>(d), exponent)) / c0;
        if (ratio > rep.worst_ratio) {
          rep.worst_ratio = ratio;
          rep.witness = e;
          rep.a = a;
          rep.b = b;
        }
      }
  }
  rep.passed = rep.worst_ratio <= 1.0 + 1e-12;
  return rep;
}

Matrix kernel_fourier(const Matrix& kernel) {
  const int n = static_cast<int>(kernel.rows());
  // FFTW_BACKWARD gives sum F(x,y) exp(+2 pi i (x p + y q)/N); flip q.
  Matrix f = kernel;
  auto* p = reinterpret_cast<fftw_complex*>(f.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(n, n, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  // Eigen is column-major, so FFTW sees the transpose; the 2-D DFT of a
  // transpose is the transpose of the DFT, and the layout cancels out.
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  Matrix out(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out(a, b) = f(a, wrap(-b, n));
  return out;
}

RealMatrix assemble_operator(const FilterSpec& phi, int n, SymmetryClass s) {
  const auto b = basis(n, s);
  RealMatrix t(static_cast<Eigen::Index>(b.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t c = 0; c < b.size(); ++c)
    t.col(static_cast<Eigen::Index>(c)) = to_coordinates(basis_image(phi, b[c], n, s), s);
  return t;
}

LowerBoundReport check_lower_bound(const FilterSpec& phi, int n, SymmetryClass s, double c0) {
  LowerBoundReport rep;
  switch (phi.kind) {
    case FilterKind::Identity:
      rep.min_value = 1.0;
      break;
    case FilterKind::Convolution: {
      const Matrix fh = kernel_fourier(phi.kernel);
      rep.min_value = fh.real().minCoeff();
      rep.max_imag = fh.imag().cwiseAbs().maxCoeff();
      break;
    }
    case FilterKind::ExplicitOperator: {
      if (n > 32) throw std::domain_error("explicit operator lower bound is limited to N <= 32");
      const RealMatrix t = assemble_operator(phi, n, s);
      const RealVector g = gram_weights(n, s);
      const RealVector gs = g.cwiseSqrt();
      RealMatrix k = gs.asDiagonal() * t * gs.cwiseInverse().asDiagonal();
      RealMatrix sym = 0.5 * (k + k.transpose());
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(sym, Eigen::EigenvaluesOnly);
      rep.min_value = es.eigenvalues()(0);
      break;
    }
  }
  rep.passed = rep.min_value >= c0;
  return rep;
}

namespace {

// E[W Tr(R W')] for per-entry second moments m_ab = E[w_ab conj(w'_ab)].
Matrix profile_tensor(const RealMatrix& m, const Matrix& r, SymmetryClass s) {
  const Eigen::Index n = r.rows();
  Matrix out(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a == b || s == SymmetryClass::ComplexHermitian)
        out(a, b) = m(a, b) * r(a, b);
      else
        out(a, b) = m(a, b) * (r(a, b) + r(b, a));
    }
  return out;
}

}  // namespace

Matrix covariance_tensor_apply(const PairModelSpec& spec, int j, const Matrix& r) {
  if (j != 1 && j != 2) throw std::invalid_argument("matrix index must be 1 or 2");
  const FilterSpec& phi = spec.filter(j);
  const Matrix pr = apply_filter_adjoint(phi, r, spec.symmetry);
  return apply_filter(phi, profile_tensor(spec.profile.variance(j), pr, spec.symmetry), spec.symmetry);
}

Matrix cross_covariance_apply(const PairModelSpec& spec, const Matrix& r) {
  const auto& p = spec.profile;
  const RealMatrix m = p.cross.cwiseProduct(p.variance1.cwiseSqrt()).cwiseProduct(p.variance2.cwiseSqrt());
  const Matrix pr = apply_filter_adjoint(spec.filter2, r, spec.symmetry);
  return apply_filter(spec.filter1, profile_tensor(m, pr, spec.symmetry), spec.symmetry);
}

}  // namespace corrpair

#include <doctest.h>

#include <numbers>

#include "corrpair/filtering.hpp"
#include "corrpair/model.hpp"
#include "oracles.hpp"

using namespace corrpair;

namespace {

Matrix random_member(int n, SymmetryClass s, std::uint64_t seed) {
  return sample_gaussian_invariant(n, s, seed);
}

// Generic kernel with F(x, y) = conj F(y, x); real for the real class.
Matrix hermitian_kernel(int n, SymmetryClass s, std::uint64_t seed) {
  Rng rng(seed);
  Matrix f(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      const double re = standard_normal(rng);
      const double im = s == SymmetryClass::ComplexHermitian ? standard_normal(rng) : 0.0;
      f(x, y) = Complex(re, im);
    }
  Matrix g(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) g(x, y) = 0.5 * (f(x, y) + std::conj(f(y, x)));
  return g;
}

double hs(const Matrix& x, const Matrix& y) { return (x.adjoint() * y).trace().real(); }

PairModelSpec generic_spec(int n, SymmetryClass s, bool filtered) {
  PairModelSpec spec = wigner_pair_spec(n, s, 0.4, 0.3);
  Rng rng(77);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      const double v1 = 0.6 + 1.5 * uniform01(rng), v2 = 0.6 + 1.5 * uniform01(rng);
      const double r = -0.6 + 1.2 * uniform01(rng);
      spec.profile.variance1(a, b) = spec.profile.variance1(b, a) = v1 / n;
      spec.profile.variance2(a, b) = spec.profile.variance2(b, a) = v2 / n;
      spec.profile.cross(a, b) = spec.profile.cross(b, a) = r;
    }
  if (filtered) {
    spec.filter1 = stencil5_kernel(n, 0.1);
    Matrix k = power_decay_kernel(n, 3.0, 0.2, 1.0).kernel;
    if (s == SymmetryClass::ComplexHermitian) {
      k(1, 0) += Complex(0.0, 0.05);
      k(0, 1) += Complex(0.0, -0.05);
    }
    spec.filter2 = FilterSpec::convolution(k, "test");
  }
  return spec;
}

}  // namespace

TEST_CASE("identity filter returns its input") {
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian}) {
    const Matrix w = random_member(6, s, 1);
    CHECK(apply_filter(FilterSpec::identity(), w, s) == w);
  }
}

TEST_CASE("delta kernel is the identity on both convolution paths") {
  for (int n : {5, 80}) {
    Matrix k = Matrix::Zero(n, n);
    k(0, 0) = 1.0;
    const Matrix w = random_member(n, SymmetryClass::ComplexHermitian, 2);
    const Matrix out = apply_filter(FilterSpec::convolution(k), w, SymmetryClass::ComplexHermitian);
    CHECK((out - w).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("convolution matches the brute-force double sum for N <= 8") {
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian})
    for (int n = 1; n <= 8; ++n) {
      const Matrix f = hermitian_kernel(n, s, 10 + n);
      const Matrix w = random_member(n, s, 20 + n);
      const Matrix got = apply_filter(FilterSpec::convolution(f), w, s);
      const Matrix want = oracle::brute_convolution(f, w);
      CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(is_member(got, s));
    }
}

TEST_CASE("FFT path agrees with direct summation") {
  const int n = 72;  // above the direct-summation cutoff
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian}) {
    const Matrix f = hermitian_kernel(n, s, 5);
    const Matrix w = random_member(n, s, 6);
    const Matrix fft = apply_filter(FilterSpec::convolution(f), w, s);
    const Matrix direct = kernels::convolve_direct(f, w, Backend::Serial);
    CHECK((fft - direct).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(is_member(fft, s));
  }
}

TEST_CASE("serial and OpenMP direct convolution are bitwise identical") {
  const int n = 20;
  const Matrix f = hermitian_kernel(n, SymmetryClass::ComplexHermitian, 8);
  const Matrix w = random_member(n, SymmetryClass::ComplexHermitian, 9);
  const Matrix a = kernels::convolve_direct(f, w, Backend::Serial);
  const Matrix b = kernels::convolve_direct(f, w, Backend::OpenMP);
  CHECK(a.cwiseEqual(b).all());
}

TEST_CASE("filters are linear") {
  const int n = 9;
  const auto s = SymmetryClass::ComplexHermitian;
  const Matrix x = random_member(n, s, 1), y = random_member(n, s, 2);
  const double a = 0.7, b = -1.3;
  std::vector<FilterSpec> filters = {FilterSpec::identity(), stencil5_kernel(n, 0.2),
                                     FilterSpec::convolution(hermitian_kernel(n, s, 3))};
  RealMatrix op = RealMatrix::Random(basis_dimension(n, s), basis_dimension(n, s));
  filters.push_back(FilterSpec::explicit_operator(op));
  for (const auto& f : filters) {
    const Matrix lhs = apply_filter(f, a * x + b * y, s);
    const Matrix rhs = a * apply_filter(f, x, s) + b * apply_filter(f, y, s);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("basis coordinates round trip and basis matrices follow the E_ik convention") {
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian}) {
    const int n = 4;
    const Matrix w = random_member(n, s, 4);
    CHECK((from_coordinates(to_coordinates(w, s), n, s) - w).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(static_cast<int>(basis(n, s).size()) == basis_dimension(n, s));
    CHECK(basis_dimension(n, s) == (s == SymmetryClass::RealSymmetric ? n * (n + 1) / 2 : n * n));
  }
  const Matrix e = basis_matrix(3, {0, 2, BasisMatrix::Part::Real});
  CHECK(e(0, 2) == Complex(1.0));
  CHECK(e(2, 0) == Complex(1.0));
  CHECK(e.cwiseAbs().sum() == 2.0);
  const Matrix ei = basis_matrix(3, {0, 2, BasisMatrix::Part::Imag});
  CHECK(ei(0, 2) == Complex(0.0, 1.0));
  CHECK(ei(2, 0) == Complex(0.0, -1.0));
}

TEST_CASE("basis images: identity gives E_ik, convolution matches apply_filter") {
  const int n = 6;
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian}) {
    const FilterSpec f = FilterSpec::convolution(hermitian_kernel(n, s, 31));
    for (const auto& e : basis(n, s)) {
      const Matrix em = basis_matrix(n, e);
      CHECK(basis_image(FilterSpec::identity(), e, n, s) == em);
      const Matrix want = oracle::brute_convolution(f.kernel, em);
      CHECK((basis_image(f, e, n, s) - want).cwiseAbs().maxCoeff() <= 1e-13);
      Matrix sparse = Matrix::Zero(n, n);
      for (const auto& se : basis_image_sparse(f, e, n, s)) sparse(se.a, se.b) += se.value;
      CHECK((sparse - want).cwiseAbs().maxCoeff() <= 1e-13);
    }
  }
  CHECK_THROWS(basis_image(FilterSpec::identity(), {0, 1, BasisMatrix::Part::Imag}, n, SymmetryClass::RealSymmetric));
}

TEST_CASE("decay check") {
  const int n = 16;
  const auto s = SymmetryClass::RealSymmetric;
  CHECK(check_decay(FilterSpec::identity(), n, s, 5.0, 1.0).passed);
  const FilterSpec f = power_decay_kernel(n, 3.0, 1.0);
  // Off-diagonal images carry two mirrored copies of F, hence the factor 2.
  const auto pass = check_decay(f, n, s, 3.0, 2.0);
  CHECK(pass.passed);
  const auto fail = check_decay(f, n, s, 4.0, 2.0);
  CHECK_FALSE(fail.passed);
  CHECK(fail.worst_ratio > 1.0);

  const int m = 5;
  const int d = basis_dimension(m, s);
  const FilterSpec dense = FilterSpec::explicit_operator(RealMatrix::Ones(d, d));
  const auto rep = check_decay(dense, m, s, 3.0, 10.0);
  CHECK_FALSE(rep.passed);
  const int dist = std::abs(rep.witness.i - rep.a) + std::abs(rep.witness.k - rep.b);
  CHECK(dist == 2 * (m - 1));
}

TEST_CASE("Fourier transform matches the defining sum") {
  const int n = 5;
  const Matrix f = hermitian_kernel(n, SymmetryClass::ComplexHermitian, 41);
  const Matrix ft = kernel_fourier(f);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      Complex acc = 0.0;
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
          acc += f(x, y) * std::exp(Complex(0.0, 2.0 * std::numbers::pi * (x * p - y * q) / n));
      CHECK(std::abs(ft(p, q) - acc) <= 1e-12);
    }
}

TEST_CASE("lower bound via the Fourier transform") {
  const int n = 8;
  const auto s = SymmetryClass::RealSymmetric;
  const auto id = check_lower_bound(FilterSpec::identity(), n, s, 1.0);
  CHECK(id.passed);
  CHECK(id.min_value == doctest::Approx(1.0));
  const auto st = check_lower_bound(stencil5_kernel(n, 0.1), n, s, 0.5);
  CHECK(st.passed);
  CHECK(st.min_value == doctest::Approx(0.6).epsilon(1e-12));
  const auto neg = check_lower_bound(stencil5_kernel(n, 0.5), n, s, 0.1);
  CHECK_FALSE(neg.passed);
  CHECK(neg.min_value == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("explicit operator lower bound agrees with the convolution route and is capped at N = 32") {
  const int n = 6;
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian}) {
    const FilterSpec conv = stencil5_kernel(n, 0.1);
    const FilterSpec expl = FilterSpec::explicit_operator(assemble_operator(conv, n, s));
    const auto a = check_lower_bound(conv, n, s, 0.5);
    const auto b = check_lower_bound(expl, n, s, 0.5);
    CHECK(b.passed);
    CHECK(b.min_value == doctest::Approx(a.min_value).epsilon(1e-10));
  }
  const int big = 33;
  const int d = basis_dimension(big, SymmetryClass::RealSymmetric);
  CHECK_THROWS_AS(check_lower_bound(FilterSpec::explicit_operator(RealMatrix::Identity(d, d)), big,
                                    SymmetryClass::RealSymmetric, 0.5),
                  std::domain_error);
}

TEST_CASE("adjoint satisfies <Phi X, Y> = <X, Phi* Y>") {
  const int n = 7;
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian}) {
    const Matrix x = random_member(n, s, 51), y = random_member(n, s, 52);
    Matrix k = power_decay_kernel(n, 3.0, 0.3, 1.0).kernel;
    k(2, 1) += 0.2;  // break the x <-> y symmetry, keep Hermiticity
    k(1, 2) += 0.2;
    k(3, 0) += 0.1;
    k(0, 3) += 0.1;
    const int d = basis_dimension(n, s);
    const FilterSpec filters[] = {FilterSpec::convolution(k),
                                  FilterSpec::explicit_operator(RealMatrix::Random(d, d))};
    for (const auto& f : filters) {
      const double lhs = hs(apply_filter(f, x, s), y);
      const double rhs = hs(x, apply_filter_adjoint(f, y, s));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

TEST_CASE("covariance tensor: invariant profile gives 2/(beta N) R, R = 0 gives 0") {
  const int n = 6;
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian}) {
    const auto spec = wigner_pair_spec(n, s, 1.0, 0.0);
    const Matrix r = random_member(n, s, 61);
    const Matrix got = covariance_tensor_apply(spec, 1, r);
    CHECK((got - 2.0 / (beta(s) * n) * r).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(covariance_tensor_apply(spec, 2, Matrix::Zero(n, n)).isZero(0.0));
  }
}

TEST_CASE("covariance tensor is self-adjoint and positive semidefinite on Sym(N)") {
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian})
    for (int n : {3, 6}) {
      const auto spec = generic_spec(n, s, true);
      for (int j = 1; j <= 2; ++j) {
        const auto b = basis(n, s);
        const int d = static_cast<int>(b.size());
        RealMatrix t(d, d);
        for (int c = 0; c < d; ++c) {
          const Matrix img = covariance_tensor_apply(spec, j, basis_matrix(n, b[c]));
          for (int r = 0; r < d; ++r) t(r, c) = hs(basis_matrix(n, b[r]), img);
        }
        CHECK((t - t.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * t.cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (t + t.transpose()));
        CHECK(es.eigenvalues().minCoeff() >= -1e-12 * t.cwiseAbs().maxCoeff());
      }
    }
}

TEST_CASE("covariance tensor matches the Monte Carlo estimate of E[W Tr(R W)] at N = 4") {
  const int n = 4;
  for (auto s : {SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian}) {
    const auto spec = generic_spec(n, s, true);
    REQUIRE(validate_spec(spec).ok());
    const Matrix r = random_member(n, s, 71);
    const Matrix want1 = covariance_tensor_apply(spec, 2, r);
    const Matrix want12 = cross_covariance_apply(spec, r);
    std::vector<oracle::Moments> m1(2 * n * n), m12(2 * n * n);
    const std::uint64_t count = s == SymmetryClass::RealSymmetric ? 1000000 : 400000;
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto p = sample_pair(spec, sample_seed(72, i));
      const Matrix wt1 = p.h1 - spec.deformation1, wt2 = p.h2 - spec.deformation2;
      const Complex tr2 = (r * wt2).trace();
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          const Complex v = wt2(a, b) * tr2, c = wt1(a, b) * tr2;
          const int k = 2 * (a * n + b);
          m1[k].add(v.real());
          m1[k + 1].add(v.imag());
          m12[k].add(c.real());
          m12[k + 1].add(c.imag());
        }
    }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const int k = 2 * (a * n + b);
        CHECK(std::abs(m1[k].mean() - want1(a, b).real()) <= 4.0 * m1[k].se() + 1e-15);
        CHECK(std::abs(m1[k + 1].mean() - want1(a, b).imag()) <= 4.0 * m1[k + 1].se() + 1e-15);
        CHECK(std::abs(m12[k].mean() - want12(a, b).real()) <= 4.0 * m12[k].se() + 1e-15);
        CHECK(std::abs(m12[k + 1].mean() - want12(a, b).imag()) <= 4.0 * m12[k + 1].se() + 1e-15);
      }
  }
}

TEST_CASE("presets parse") {
  CHECK(filter_from_preset("identity", 5).kind == FilterKind::Identity);
  const auto st = filter_from_preset("stencil5(0.1)", 6);
  CHECK(st.kind == FilterKind::Convolution);
  CHECK(st.kernel(0, 0) == Complex(1.0));
  CHECK(st.kernel(5, 0) == Complex(0.1));
  const auto pd = filter_from_preset("power_decay(3, 0.5)", 6);
  CHECK(pd.kernel(1, 1).real() == doctest::Approx(0.5 / 9.0));
  CHECK_THROWS(filter_from_preset("gaussian(1)", 6));
}

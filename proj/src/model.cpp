#include "corrpair/model.hpp"

#include <cmath>
#include <sstream>

namespace corrpair {

std::string to_string(EntryLaw law) {
  return law == EntryLaw::Gaussian ? "gaussian" : "shifted_bernoulli";
}

EntryLaw entry_law_from_string(std::string_view name) {
  if (name == "gaussian") return EntryLaw::Gaussian;
  if (name == "shifted_bernoulli" || name == "bernoulli") return EntryLaw::ShiftedBernoulli;
  throw std::invalid_argument("unknown entry law: " + std::string(name));
}

CorrelationProfile CorrelationProfile::uniform(int n, double scale, double diag_scale, double rho,
                                               double alpha) {
  CorrelationProfile p;
  p.variance1 = RealMatrix::Constant(n, n, scale / n);
  p.variance1.diagonal().setConstant(diag_scale / n);
  p.variance2 = p.variance1;
  p.cross = RealMatrix::Constant(n, n, rho);
  p.alpha = alpha;
  return p;
}

CorrelationProfile CorrelationProfile::invariant(int n, SymmetryClass s, double rho, double alpha) {
  const double diag = s == SymmetryClass::RealSymmetric ? 2.0 : 1.0;
  return uniform(n, 1.0, diag, rho, alpha);
}

PairModelSpec wigner_pair_spec(int n, SymmetryClass s, double alpha, double rho, EntryLaw law) {
  PairModelSpec spec;
  spec.n = n;
  spec.symmetry = s;
  spec.profile = CorrelationProfile::invariant(n, s, rho, alpha);
  spec.deformation1 = Matrix::Zero(n, n);
  spec.deformation2 = Matrix::Zero(n, n);
  spec.entry_law = law;
  return spec;
}

bool ValidationReport::ok() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

const ValidationReport::Check* ValidationReport::find(std::string_view name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

const ValidationReport::Check* ValidationReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.passed) return &c;
  return nullptr;
}

namespace {

using Check = ValidationReport::Check;

Check shape_check(const PairModelSpec& spec) {
  Check c{"dimensions", true, "", std::nullopt};
  const int n = spec.n;
  auto bad = [&](const std::string& what) {
    c.passed = false;
    c.detail = what + " does not have dimension " + std::to_string(n);
  };
  if (n < 1) {
    c.passed = false;
    c.detail = "n must be positive";
  } else if (spec.profile.variance1.rows() != n || spec.profile.variance1.cols() != n) {
    bad("variance1");
  } else if (spec.profile.variance2.rows() != n || spec.profile.variance2.cols() != n) {
    bad("variance2");
  } else if (spec.profile.cross.rows() != n || spec.profile.cross.cols() != n) {
    bad("cross");
  } else if (spec.deformation1.rows() != n || spec.deformation1.cols() != n) {
    bad("deformation1");
  } else if (spec.deformation2.rows() != n || spec.deformation2.cols() != n) {
    bad("deformation2");
  } else {
    for (int j = 1; j <= 2; ++j) {
      const int d = spec.filter(j).dimension();
      if (d != 0 && d != n) bad("filter" + std::to_string(j));
    }
  }
  return c;
}

Check variance_check(const PairModelSpec& spec, int j) {
  Check c{"variance_bounds_" + std::to_string(j), true, "", std::nullopt};
  const RealMatrix& v = spec.profile.variance(j);
  const double lo = spec.constants.c0 / spec.n;
  const double hi = spec.constants.C0 / spec.n;
  for (int a = 0; a < spec.n; ++a) {
    for (int b = 0; b < spec.n; ++b) {
      const double x = v(a, b);
      if (!(x >= lo && x <= hi)) {
        c.passed = false;
        c.index = {a, b};
        std::ostringstream os;
        os << "N*sigma^2 = " << x * spec.n << " outside [" << spec.constants.c0 << ", "
           << spec.constants.C0 << "]";
        c.detail = os.str();
        return c;
      }
    }
  }
  return c;
}

Check symmetric_check(const RealMatrix& m, const std::string& name) {
  Check c{name, true, "", std::nullopt};
  for (int a = 0; a < m.rows(); ++a) {
    for (int b = a + 1; b < m.cols(); ++b) {
      if (m(a, b) != m(b, a)) {
        c.passed = false;
        c.index = {a, b};
        c.detail = "entry differs from its transpose";
        return c;
      }
    }
  }
  return c;
}

Check decorrelation_check(const PairModelSpec& spec) {
  Check c{"decorrelation", true, "", std::nullopt};
  const double bound = 1.0 - spec.profile.alpha;
  for (int a = 0; a < spec.n; ++a) {
    for (int b = a; b < spec.n; ++b) {
      const double r = spec.profile.cross(a, b);
      if (!(std::abs(r) <= bound + 1e-12)) {
        c.passed = false;
        c.index = {a, b};
        std::ostringstream os;
        os << "|rho| = " << std::abs(r) << " exceeds 1 - alpha = " << bound;
        c.detail = os.str();
        return c;
      }
    }
  }
  return c;
}

Check hermitian_check(const PairModelSpec& spec, int j) {
  Check c{"deformation_hermitian_" + std::to_string(j), true, "", std::nullopt};
  const Matrix& m = spec.deformation(j);
  for (int a = 0; a < spec.n; ++a) {
    for (int b = a; b < spec.n; ++b) {
      const bool herm = m(a, b) == std::conj(m(b, a));
      const bool real_ok = spec.symmetry == SymmetryClass::ComplexHermitian || m(a, b).imag() == 0.0;
      if (!herm || !real_ok) {
        c.passed = false;
        c.index = {a, b};
        c.detail = herm ? "complex entry in a real symmetric deformation" : "not Hermitian";
        return c;
      }
    }
  }
  return c;
}

Check norm_check(const PairModelSpec& spec, int j) {
  Check c{"deformation_norm_" + std::to_string(j), true, "", std::nullopt};
  const double norm = hermitian_norm(spec.deformation(j));
  if (!(norm <= spec.constants.C0)) {
    c.passed = false;
    std::ostringstream os;
    os << "||A|| = " << norm << " exceeds C0 = " << spec.constants.C0;
    c.detail = os.str();
  }
  return c;
}

void filter_checks(const PairModelSpec& spec, int j, std::vector<Check>& out) {
  const FilterSpec& phi = spec.filter(j);
  if (phi.kind == FilterKind::Identity) return;
  const std::string suffix = "_" + std::to_string(j);

  if (phi.kind == FilterKind::Convolution) {
    Check herm{"filter_hermitian" + suffix, true, "", std::nullopt};
    const int n = spec.n;
    for (int x = 0; x < n && herm.passed; ++x) {
      for (int y = 0; y < n; ++y) {
        const Complex f = phi.kernel(x, y);
        if (std::abs(f - std::conj(phi.kernel(y, x))) > 1e-12 ||
            (spec.symmetry == SymmetryClass::RealSymmetric && f.imag() != 0.0)) {
          herm.passed = false;
          herm.index = {x, y};
          herm.detail = "kernel violates F(x,y) = conj F(y,x) or is complex in the real class";
          break;
        }
      }
    }
    out.push_back(herm);
  }

  if (phi.kind == FilterKind::Convolution || spec.n <= 32) {
    const auto lb = check_lower_bound(phi, spec.n, spec.symmetry, spec.constants.c0);
    Check c{"filter_lower_bound" + suffix, lb.passed, "", std::nullopt};
    std::ostringstream os;
    os << "min = " << lb.min_value << ", c0 = " << spec.constants.c0;
    c.detail = os.str();
    out.push_back(c);
  }

  if (spec.n <= 128) {
    const auto dr = check_decay(phi, spec.n, spec.symmetry, phi.decay_exponent, phi.decay_constant);
    Check c{"filter_decay" + suffix, dr.passed, "", std::nullopt};
    if (!dr.passed) {
      c.index = {dr.a, dr.b};
      std::ostringstream os;
      os << "basis (" << dr.witness.i << "," << dr.witness.k << ") ratio " << dr.worst_ratio;
      c.detail = os.str();
    }
    out.push_back(c);
  }
}

}  // namespace

ValidationReport validate_spec(const PairModelSpec& spec) {
  ValidationReport r;
  r.checks.push_back(shape_check(spec));
  if (!r.checks.back().passed) return r;

  Check alpha{"alpha_range", true, "", std::nullopt};
  if (!(spec.profile.alpha > 0.0 && spec.profile.alpha <= 1.0)) {
    alpha.passed = false;
    alpha.detail = "alpha must lie in (0, 1]";
  }
  r.checks.push_back(alpha);
  r.checks.push_back(variance_check(spec, 1));
  r.checks.push_back(variance_check(spec, 2));
  r.checks.push_back(symmetric_check(spec.profile.variance1, "variance_symmetry_1"));
  r.checks.push_back(symmetric_check(spec.profile.variance2, "variance_symmetry_2"));
  r.checks.push_back(symmetric_check(spec.profile.cross, "cross_symmetry"));
  r.checks.push_back(decorrelation_check(spec));
  for (int j = 1; j <= 2; ++j) {
    r.checks.push_back(hermitian_check(spec, j));
    r.checks.push_back(norm_check(spec, j));
  }
  for (int j = 1; j <= 2; ++j) filter_checks(spec, j, r.checks);

  if (spec.entry_law == EntryLaw::ShiftedBernoulli) {
    Check c{"bernoulli_realizable", true, "", std::nullopt};
    for (int a = 0; a < spec.n && c.passed; ++a)
      for (int b = a; b < spec.n; ++b)
        if (spec.profile.cross(a, b) < 0.0) {
          c.passed = false;
          c.index = {a, b};
          c.detail = "negative rho needs the Gaussian law";
          break;
        }
    r.checks.push_back(c);
  }
  return r;
}

namespace {

template <class Derived>
std::uint64_t hash_matrix(const Eigen::MatrixBase<Derived>& m, std::uint64_t h) {
  const std::int64_t dims[2] = {static_cast<std::int64_t>(m.rows()), static_cast<std::int64_t>(m.cols())};
  h = fnv1a(dims, sizeof(dims), h);
  if (m.size() > 0)
    h = fnv1a(m.derived().data(), sizeof(typename Derived::Scalar) * static_cast<std::size_t>(m.size()), h);
  return h;
}

std::uint64_t hash_filter(const FilterSpec& f, std::uint64_t h) {
  const int kind = static_cast<int>(f.kind);
  h = fnv1a(&kind, sizeof(kind), h);
  h = hash_matrix(f.kernel, h);
  h = hash_matrix(f.op, h);
  h = fnv1a(&f.decay_exponent, sizeof(double), h);
  h = fnv1a(&f.decay_constant, sizeof(double), h);
  return fnv1a(f.label.data(), f.label.size(), h);
}

}  // namespace

std::uint64_t spec_hash(const PairModelSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const int head[3] = {spec.n, beta(spec.symmetry), static_cast<int>(spec.entry_law)};
  h = fnv1a(head, sizeof(head), h);
  h = hash_matrix(spec.profile.variance1, h);
  h = hash_matrix(spec.profile.variance2, h);
  h = hash_matrix(spec.profile.cross, h);
  h = fnv1a(&spec.profile.alpha, sizeof(double), h);
  h = hash_matrix(spec.deformation1, h);
  h = hash_matrix(spec.deformation2, h);
  h = hash_filter(spec.filter1, h);
  h = hash_filter(spec.filter2, h);
  const double consts[2] = {spec.constants.c0, spec.constants.C0};
  return fnv1a(consts, sizeof(consts), h);
}

std::uint64_t sample_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over a combination of the two inputs
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::pair<double, double> draw_entry_pair(EntryLaw law, double sd1, double sd2, double rho, Rng& rng) {
  if (law == EntryLaw::Gaussian) {
    if (rho >= 0.0) {
      const double z0 = standard_normal(rng);
      const double z1 = standard_normal(rng);
      const double z2 = standard_normal(rng);
      const double sr = std::sqrt(rho);
      const double si = std::sqrt(1.0 - rho);
      return {sd1 * (sr * z0 + si * z1), sd2 * (sr * z0 + si * z2)};
    }
    const double z1 = standard_normal(rng);
    const double z2 = standard_normal(rng);
    return {sd1 * z1, sd2 * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2)};
  }
  if (rho < 0.0) throw UnrealizableCorrelation("shifted Bernoulli pairs need rho >= 0");
  std::bernoulli_distribution coin(0.5);
  if (uniform01(rng) < rho) {
    const double b = coin(rng) ? 1.0 : -1.0;
    return {sd1 * b, sd2 * b};
  }
  const double b1 = coin(rng) ? 1.0 : -1.0;
  const double b2 = coin(rng) ? 1.0 : -1.0;
  return {sd1 * b1, sd2 * b2};
}

MatrixPairSample sample_pair(const PairModelSpec& spec, std::uint64_t seed) {
  return sample_pair(spec, seed, spec_hash(spec));
}

MatrixPairSample sample_pair(const PairModelSpec& spec, std::uint64_t seed, std::uint64_t hash) {
  const int n = spec.n;
  const auto& p = spec.profile;
  Rng rng = child_stream(seed, 0);
  MatrixPairSample out;
  out.seed = seed;
  out.spec_hash = hash;
  out.w1.resize(n, n);
  out.w2.resize(n, n);
  const bool complex_class = spec.symmetry == SymmetryClass::ComplexHermitian;
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      const double sd1 = std::sqrt(p.variance1(a, b));
      const double sd2 = std::sqrt(p.variance2(a, b));
      const double rho = p.cross(a, b);
      if (a == b || !complex_class) {
        auto [x1, x2] = draw_entry_pair(spec.entry_law, sd1, sd2, rho, rng);
        out.w1(a, b) = out.w1(b, a) = x1;
        out.w2(a, b) = out.w2(b, a) = x2;
      } else {
        const double h = std::sqrt(0.5);
        auto [r1, r2] = draw_entry_pair(spec.entry_law, h * sd1, h * sd2, rho, rng);
        auto [i1, i2] = draw_entry_pair(spec.entry_law, h * sd1, h * sd2, rho, rng);
        out.w1(a, b) = Complex(r1, i1);
        out.w1(b, a) = Complex(r1, -i1);
        out.w2(a, b) = Complex(r2, i2);
        out.w2(b, a) = Complex(r2, -i2);
      }
    }
  }
  out.h1 = spec.deformation1 + apply_filter(spec.filter1, out.w1, spec.symmetry);
  out.h2 = spec.deformation2 + apply_filter(spec.filter2, out.w2, spec.symmetry);
  return out;
}

void fill_gaussian_invariant(Matrix& out, int n, SymmetryClass s, Rng& rng) {
  out.resize(n, n);
  const double inv_n = 1.0 / n;
  if (s == SymmetryClass::RealSymmetric) {
    const double off = std::sqrt(inv_n);
    const double diag = std::sqrt(2.0 * inv_n);
    for (int a = 0; a < n; ++a) {
      out(a, a) = diag * standard_normal(rng);
      for (int b = a + 1; b < n; ++b) out(a, b) = out(b, a) = off * standard_normal(rng);
    }
    return;
  }
  const double part = std::sqrt(0.5 * inv_n);
  const double diag = std::sqrt(inv_n);
  for (int a = 0; a < n; ++a) {
    out(a, a) = diag * standard_normal(rng);
    for (int b = a + 1; b < n; ++b) {
      const double re = part * standard_normal(rng);
      const double im = part * standard_normal(rng);
      out(a, b) = Complex(re, im);
      out(b, a) = Complex(re, -im);
    }
  }
}

Matrix sample_gaussian_invariant(int n, SymmetryClass s, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  Rng rng = child_stream(seed, 0);
  Matrix m;
  fill_gaussian_invariant(m, n, s, rng);
  return m;
}

namespace {

std::uint64_t construction_hash(const char* tag, int n, SymmetryClass s, double alpha) {
  std::uint64_t h = fnv1a(tag, std::char_traits<char>::length(tag));
  const int head[2] = {n, beta(s)};
  h = fnv1a(head, sizeof(head), h);
  return fnv1a(&alpha, sizeof(alpha), h);
}

}  // namespace

MatrixPairSample sample_shared_pair(int n, SymmetryClass s, double alpha, std::uint64_t seed,
                                    const SharedPairOptions& options) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
  MatrixPairSample out;
  out.seed = seed;
  out.spec_hash = construction_hash(options.normalize ? "shared/normalized" : "shared", n, s, alpha);
  Rng r0 = child_stream(seed, 0, 0);
  Rng r1 = child_stream(seed, 0, 1);
  Rng r2 = child_stream(seed, 0, 2);
  Matrix w, g1, g2;
  fill_gaussian_invariant(w, n, s, r0);
  fill_gaussian_invariant(g1, n, s, r1);
  fill_gaussian_invariant(g2, n, s, r2);
  const double sa = std::sqrt(alpha);
  const double scale = options.normalize ? 1.0 / std::sqrt(1.0 + alpha) : 1.0;
  out.w1 = scale * (w + sa * g1);
  out.w2 = scale * (w + sa * g2);
  if (options.deformation.size() > 0) {
    out.h1 = options.deformation + out.w1;
    out.h2 = options.deformation + out.w2;
  } else {
    out.h1 = out.w1;
    out.h2 = out.w2;
  }
  return out;
}

MatrixPairSample sample_mixture_pair(int n, double alpha, std::uint64_t seed) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  MatrixPairSample out;
  out.seed = seed;
  out.spec_hash = construction_hash("mixture", n, SymmetryClass::RealSymmetric, alpha);
  Rng r0 = child_stream(seed, 0, 0);
  Rng r1 = child_stream(seed, 0, 1);
  Rng r2 = child_stream(seed, 0, 2);
  Matrix w0, g1, g2;
  const auto s = SymmetryClass::RealSymmetric;
  fill_gaussian_invariant(w0, n, s, r0);
  fill_gaussian_invariant(g1, n, s, r1);
  fill_gaussian_invariant(g2, n, s, r2);
  const double a = std::sqrt(1.0 - alpha);
  const double b = std::sqrt(alpha);
  out.w1 = a * w0 + b * g1;
  out.w2 = a * w0 + b * g2;
  out.h1 = out.w1;
  out.h2 = out.w2;
  return out;
}

}  // namespace corrpair

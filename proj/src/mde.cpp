#include "corrpair/mde.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <numeric>
#include <algorithm>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "corrpair/model.hpp"

namespace corrpair {

SelfEnergy SelfEnergy::flat(int n, double scale) {
  SelfEnergy s;
  s.rep_ = Flat{scale};
  s.n_ = n;
  return s;
}

SelfEnergy SelfEnergy::from_profile(const RealMatrix& variance, SymmetryClass sym) {
  SelfEnergy s;
  s.rep_ = Profile{variance, sym};
  s.n_ = static_cast<int>(variance.rows());
  return s;
}

SelfEnergy SelfEnergy::from_model(const PairModelSpec& spec, int j) {
  if (spec.filter(j).kind == FilterKind::Identity)
    return from_profile(spec.profile.variance(j), spec.symmetry);
  return from_model_general(spec, j);
}

SelfEnergy SelfEnergy::from_model_general(const PairModelSpec& spec, int j) {
  SelfEnergy s;
  BasisSum sum;
  const RealMatrix& var = spec.profile.variance(j);
  const bool complex_class = spec.symmetry == SymmetryClass::ComplexHermitian;
  for (const auto& e : basis(spec.n, spec.symmetry)) {
    double v = var(e.i, e.k);
    if (complex_class && e.i != e.k) v *= 0.5;
    sum.terms.push_back({v, basis_image_sparse(spec.filter(j), e, spec.n, spec.symmetry, 1e-300)});
  }
  s.rep_ = std::move(sum);
  s.n_ = spec.n;
  return s;
}

Matrix SelfEnergy::operator()(const Matrix& r) const {
  const int n = n_;
  if (const auto* f = std::get_if<Flat>(&rep_)) {
    return Matrix::Identity(n, n) * (f->scale * normalized_trace(r));
  }
  if (const auto* p = std::get_if<Profile>(&rep_)) {
    Matrix out = Matrix::Zero(n, n);
    const Vector d = r.diagonal();
    const Vector diag = p->variance.cast<Complex>() * d;
    if (p->symmetry == SymmetryClass::RealSymmetric) {
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          if (a != b) out(a, b) = p->variance(a, b) * r(b, a);
    }
    out.diagonal() = diag;
    return out;
  }
  const auto& sum = std::get<BasisSum>(rep_);
  Matrix out = Matrix::Zero(n, n);
  for (const auto& term : sum.terms) {
    // (P R P)_ab = sum P_ac R_cd P_db
    for (const auto& left : term.entries)
      for (const auto& right : term.entries)
        out(left.a, right.b) += term.weight * left.value * r(left.b, right.a) * right.value;
  }
  return out;
}

bool SelfEnergy::preserves_diagonal() const { return !std::holds_alternative<BasisSum>(rep_); }

Vector SelfEnergy::apply_diagonal(const Vector& d) const {
  if (const auto* f = std::get_if<Flat>(&rep_)) {
    return Vector::Constant(n_, f->scale * d.mean());
  }
  if (const auto* p = std::get_if<Profile>(&rep_)) {
    return p->variance.cast<Complex>() * d;
  }
  throw std::logic_error("self-energy does not preserve diagonal matrices");
}

RealMatrix SelfEnergy::diagonal_action() const {
  if (const auto* f = std::get_if<Flat>(&rep_)) return RealMatrix::Constant(n_, n_, f->scale / n_);
  if (const auto* p = std::get_if<Profile>(&rep_)) return p->variance;
  throw std::logic_error("self-energy does not preserve diagonal matrices");
}

namespace {

double sign_of(double x) { return x > 0 ? 1.0 : -1.0; }

bool is_diagonal(const Matrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j && a(i, j) != Complex(0.0)) return false;
  return true;
}

// Damped fixed point x <- (1 - theta) x + theta F(x); F returns (F(x), residual).
template <class X, class Map>
MdeResult damped_iteration(X x, Map&& map, const MdeOptions& opt, X& out) {
  double theta = opt.theta_start;
  double prev = std::numeric_limits<double>::infinity();
  MdeResult res;
  for (int it = 0; it <= opt.max_iterations; ++it) {
    X fx;
    const double r = map(x, fx);
    res.iterations = it;
    res.residual = r;
    if (!std::isfinite(r)) break;
    if (r < opt.tolerance) {
      out = std::move(x);
      return res;
    }
    if (r > prev) theta = std::max(0.5 * theta, opt.theta_floor);
    prev = r;
    x = (1.0 - theta) * x + theta * fx;
  }
  throw NonConvergence("MDE iteration did not converge (residual " + std::to_string(res.residual) + ")");
}


// Coarsest partition with constant a and constant class sums of S on each class.
// The vector MDE solution is constant on such classes.
std::vector<int> equitable_classes(const Vector& a, const RealMatrix& s) {
  const int n = static_cast<int>(a.size());
  std::vector<int> cls(static_cast<std::size_t>(n), 0);
  auto relabel = [&](const std::vector<std::vector<double>>& sig) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto close = [](const std::vector<double>& u, const std::vector<double>& v) {
      for (std::size_t j = 0; j < u.size(); ++j)
        if (std::abs(u[j] - v[j]) > 1e-12 * (1.0 + std::abs(u[j]) + std::abs(v[j]))) return false;
      return true;
    };
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return sig[i] < sig[j]; });
    std::vector<int> out(static_cast<std::size_t>(n));
    int label = -1;
    for (std::size_t p = 0; p < order.size(); ++p) {
      if (p == 0 || !close(sig[order[p]], sig[order[p - 1]])) ++label;
      out[order[p]] = label;
    }
    return std::make_pair(out, label + 1);
  };
  std::vector<std::vector<double>> sig(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sig[i] = {a(i).real(), a(i).imag()};
  auto [c0, k] = relabel(sig);
  cls = c0;
  for (int round = 0; round < n; ++round) {
    for (int i = 0; i < n; ++i) {
      std::vector<double> v(static_cast<std::size_t>(k + 1), 0.0);
      v[0] = cls[i];
      for (int c = 0; c < n; ++c) v[1 + cls[c]] += s(i, c);
      sig[i] = std::move(v);
    }
    auto [next, k2] = relabel(sig);
    cls = next;
    if (k2 == k) break;
    k = k2;
  }
  return cls;
}

// Newton on 1/m + z - a + S m = 0 with backtracking that keeps sg * Im m > 0.
template <class Fixed>
bool newton_refine(Vector& m, const Vector& a, const Eigen::MatrixXcd& s, Complex z, double sg, double tol,
                   Fixed&& fixed, MdeResult& res) {
  const int k = static_cast<int>(m.size());
  auto g = [&](const Vector& v) {
    Vector out = s * v;
    for (int b = 0; b < k; ++b) out(b) += 1.0 / v(b) + z - a(b);
    return out;
  };
  Vector fm;
  double r = fixed(m, fm);
  for (int it = 0; it < 100; ++it) {
    if (r < tol) {
      res.iterations = it;
      res.residual = r;
      return true;
    }
    Eigen::MatrixXcd j = s;
    for (int b = 0; b < k; ++b) j(b, b) -= 1.0 / (m(b) * m(b));
    const Vector step = j.partialPivLu().solve(-g(m));
    double lambda = 1.0;
    bool moved = false;
    for (int h = 0; h < 40; ++h, lambda *= 0.5) {
      const Vector trial = m + lambda * step;
      bool admissible = true;
      for (int b = 0; b < k; ++b) admissible = admissible && sg * trial(b).imag() > 0;
      if (!admissible) continue;
      const double rt = fixed(trial, fm);
      if (std::isfinite(rt) && rt < r) {
        m = trial;
        r = rt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  res.residual = r;
  return r < tol;
}

}  // namespace

MdeResult solve_mde(const Matrix& a, const SelfEnergy& s, Complex z, const Matrix* init, const MdeOptions& opt) {
  if (z.imag() == 0.0) throw std::invalid_argument("solve_mde needs Im z != 0");
  const int n = static_cast<int>(a.rows());
  if (s.dimension() != n) throw std::invalid_argument("self-energy dimension mismatch");
  const double sg = sign_of(z.imag());

  const bool diag_path = s.preserves_diagonal() && is_diagonal(a) && (!init || is_diagonal(*init));
  if (diag_path) {
    const Vector ad = a.diagonal();
    const RealMatrix full = s.diagonal_action();
    const std::vector<int> cls = equitable_classes(ad, full);
    const int k = cls.empty() ? 0 : *std::max_element(cls.begin(), cls.end()) + 1;
    // Reduced problem on the classes: S~_{BC} = sum_{c in C} S_ic for any i in B.
    std::vector<int> rep(static_cast<std::size_t>(k), -1), size(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      if (rep[cls[i]] < 0) rep[cls[i]] = i;
      ++size[cls[i]];
    }
    RealMatrix red = RealMatrix::Zero(k, k);
    Vector ar(k), x(k);
    for (int b = 0; b < k; ++b) {
      ar(b) = ad(rep[b]);
      for (int c = 0; c < n; ++c) red(b, cls[c]) += full(rep[b], c);
    }
    if (init) {
      x.setZero();
      for (int i = 0; i < n; ++i) x(cls[i]) += (*init)(i, i) / static_cast<double>(size[cls[i]]);
    } else {
      for (int b = 0; b < k; ++b) x(b) = -1.0 / (z - ar(b) + Complex(0, sg));
    }
    const Eigen::MatrixXcd redc = red.cast<Complex>();
    auto fixed = [&](const Vector& m, Vector& fm) {
      const Vector sm = redc * m;
      fm.resize(k);
      for (int b = 0; b < k; ++b) fm(b) = -1.0 / (z - ar(b) + sm(b));
      return (m - fm).cwiseAbs().maxCoeff();
    };
    Vector m;
    MdeResult res;
    MdeOptions warm = opt;
    warm.max_iterations = std::min(opt.max_iterations, 300);
    try {
      res = damped_iteration(x, fixed, warm, m);
    } catch (const NonConvergence&) {
      // Near spectral edges the fixed point barely contracts; Newton takes over.
      Vector y = x;
      if (!newton_refine(y, ar, redc, z, sg, opt.tolerance, fixed, res)) {
        res = damped_iteration(x, fixed, opt, m);
      } else {
        m = std::move(y);
        res.iterations += warm.max_iterations;
      }
    }
    for (int b = 0; b < k; ++b)
      if (!(sg * m(b).imag() > 0)) throw NonConvergence("MDE solution left the admissible half-plane");
    Vector mf(n);
    for (int i = 0; i < n; ++i) mf(i) = m(cls[i]);
    res.m = mf.asDiagonal();
    return res;
  }

  Matrix x;
  if (init)
    x = *init;
  else
    x = -(Matrix::Identity(n, n) * (z + Complex(0, sg)) - a).inverse();
  auto map = [&](const Matrix& m, Matrix& fm) {
    Matrix k = -a + s(m);
    k.diagonal().array() += z;
    fm = -k.partialPivLu().inverse();
    return (m - fm).cwiseAbs().maxCoeff();
  };
  Matrix m;
  MdeResult res = damped_iteration(x, map, opt, m);
  const Matrix im = (m - m.adjoint()) / Complex(0, 2);
  Eigen::SelfAdjointEigenSolver<Matrix> es(im, Eigen::EigenvaluesOnly);
  const double lo = sg > 0 ? es.eigenvalues()(0) : -es.eigenvalues()(n - 1);
  if (!(lo > 0)) throw NonConvergence("MDE solution left the admissible half-plane");
  res.m = std::move(m);
  return res;
}

ScdosResult scdos(const Matrix& a, const SelfEnergy& s, const std::vector<double>& energies, double eta,
                  const MdeOptions& options) {
  if (!(eta > 0)) throw std::invalid_argument("eta must be positive");
  ScdosResult out;
  out.energies = energies;
  out.eta = eta;
  Matrix prev;
  bool have_prev = false;
  for (double e : energies) {
    const Complex z(e, eta);
    MdeResult r;
    if (have_prev) {
      try {
        r = solve_mde(a, s, z, &prev, options);
      } catch (const NonConvergence&) {
        r = solve_mde(a, s, z, nullptr, options);
      }
    } else {
      r = solve_mde(a, s, z, nullptr, options);
    }
    const Complex tr = normalized_trace(r.m);
    out.trace.push_back(tr);
    out.rho.push_back(std::abs(tr.imag()) / std::numbers::pi);
    out.iterations.push_back(r.iterations);
    out.residual.push_back(r.residual);
    prev = std::move(r.m);
    have_prev = true;
  }
  return out;
}

std::vector<double> default_energy_grid(const Matrix& a, int count) {
  const double half = hermitian_norm(a) + 3.0;
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = -half + 2.0 * half * i / (count - 1);
  return g;
}

std::vector<Interval> kappa_bulk(const std::vector<double>& e, const std::vector<double>& rho, double kappa) {
  if (e.size() != rho.size()) throw std::invalid_argument("energy and density grids differ in length");
  std::vector<Interval> out;
  const std::size_t n = e.size();
  auto cross = [&](std::size_t i) {
    // crossing between i and i+1
    const double t = (kappa - rho[i]) / (rho[i + 1] - rho[i]);
    return e[i] + t * (e[i + 1] - e[i]);
  };
  bool inside = false;
  double lo = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool in = rho[i] >= kappa;
    if (in && !inside) {
      lo = i == 0 ? e[0] : cross(i - 1);
      inside = true;
    } else if (!in && inside) {
      out.push_back({lo, cross(i - 1)});
      inside = false;
    }
  }
  if (inside) out.push_back({lo, e[n - 1]});
  return out;
}

std::string SpectralSolution::csv() const {
  std::ostringstream f;
  f << "E,eta,rho,iterations,residual\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.energies.size(); ++i)
    f << curve.energies[i] << ',' << curve.eta << ',' << curve.rho[i] << ',' << curve.iterations[i] << ','
      << curve.residual[i] << '\n';
  return f.str();
}

void SpectralSolution::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << csv();
}

SpectralSolution spectral_solution(const Matrix& a, const SelfEnergy& s, const std::vector<double>& energies,
                                   double eta, double kappa, const MdeOptions& options) {
  SpectralSolution sol;
  sol.curve = scdos(a, s, energies, eta, options);
  sol.kappa = kappa;
  sol.bulk = kappa_bulk(sol.curve.energies, sol.curve.rho, kappa);
  return sol;
}

Complex semicircle_stieltjes(Complex z) {
  Complex r = std::sqrt(z * z - 4.0);
  Complex m = 0.5 * (-z + r);
  if (m.imag() * z.imag() < 0) m = 0.5 * (-z - r);
  return m;
}

std::vector<FreeConvolutionPoint> free_convolution_check(const std::function<Complex(Complex)>& mhat, double t,
                                                         const std::vector<Complex>& zs,
                                                         const MdeOptions& opt) {
  if (t < 0) throw std::invalid_argument("t must be nonnegative");
  std::vector<FreeConvolutionPoint> out;
  out.reserve(zs.size());
  for (Complex z : zs) {
    FreeConvolutionPoint p;
    p.z = z;
    Complex m = mhat(z);
    double theta = opt.theta_start;
    double prev = std::numeric_limits<double>::infinity();
    bool done = false;
    for (int it = 0; it <= opt.max_iterations; ++it) {
      const Complex fm = mhat(z + t * m);
      const double r = std::abs(m - fm);
      p.iterations = it;
      p.residual = r;
      if (r < opt.tolerance) {
        done = true;
        break;
      }
      if (r > prev) theta = std::max(0.5 * theta, opt.theta_floor);
      prev = r;
      m = (1.0 - theta) * m + theta * fm;
    }
    if (!done) throw NonConvergence("free convolution fixed point did not converge");
    p.mc = m;
    out.push_back(p);
  }
  return out;
}

}  // namespace corrpair

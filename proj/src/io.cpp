#include "corrpair/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace corrpair {

namespace {

RealMatrix matrix_from_json(const Json& rows, int n, const char* what) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != n)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(n) + " rows");
  RealMatrix m(n, n);
  for (int a = 0; a < n; ++a) {
    const Json& row = rows[static_cast<std::size_t>(a)];
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(a) + " has wrong length");
    for (int b = 0; b < n; ++b) m(a, b) = row[static_cast<std::size_t>(b)].get<double>();
  }
  return m;
}

Json matrix_to_json(const RealMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index a = 0; a < m.rows(); ++a) {
    Json row = Json::array();
    for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
    rows.push_back(row);
  }
  return rows;
}

// N * sigma^2 per entry.
RealMatrix variance_from_json(const Json& doc, int n, SymmetryClass s) {
  if (doc.is_null() || (doc.is_string() && doc.get<std::string>() == "invariant")) {
    return CorrelationProfile::invariant(n, s, 0.0, 1.0).variance1;
  }
  if (doc.is_number()) return RealMatrix::Constant(n, n, doc.get<double>() / n);
  if (doc.is_object()) {
    if (doc.contains("matrix")) return matrix_from_json(doc.at("matrix"), n, "variance matrix") / n;
    const double off = doc.value("offdiag", 1.0);
    const double diag = doc.value("diag", off);
    RealMatrix m = RealMatrix::Constant(n, n, off / n);
    m.diagonal().setConstant(diag / n);
    return m;
  }
  throw std::invalid_argument("unrecognized variance profile");
}

Json variance_to_json(const RealMatrix& v) {
  const int n = static_cast<int>(v.rows());
  const double diag = v(0, 0);
  const double off = n > 1 ? v(0, 1) : diag;
  bool uniform = true;
  for (int a = 0; a < n && uniform; ++a)
    for (int b = 0; b < n; ++b)
      if (v(a, b) != (a == b ? diag : off)) {
        uniform = false;
        break;
      }
  if (uniform) return Json{{"offdiag", off * n}, {"diag", diag * n}};
  return Json{{"matrix", matrix_to_json(v * n)}};
}

RealMatrix cross_from_json(const Json& doc, int n, double alpha) {
  if (doc.is_null() || (doc.is_string() && doc.get<std::string>() == "saturate"))
    return RealMatrix::Constant(n, n, 1.0 - alpha);
  if (doc.is_number()) return RealMatrix::Constant(n, n, doc.get<double>());
  if (doc.is_object() && doc.contains("matrix")) return matrix_from_json(doc.at("matrix"), n, "cross matrix");
  throw std::invalid_argument("unrecognized cross profile");
}

Json cross_to_json(const RealMatrix& c) {
  const double v = c(0, 0);
  if ((c.array() == v).all()) return v;
  return Json{{"matrix", matrix_to_json(c)}};
}

Matrix deformation_from_json(const Json& doc, int n) {
  if (doc.is_null() || (doc.is_string() && doc.get<std::string>() == "zero")) return Matrix::Zero(n, n);
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "diagonal") {
    const auto& vals = doc.at("values");
    if (static_cast<int>(vals.size()) != n) throw std::invalid_argument("diagonal deformation has wrong length");
    Matrix m = Matrix::Zero(n, n);
    for (int a = 0; a < n; ++a) m(a, a) = vals[static_cast<std::size_t>(a)].get<double>();
    return m;
  }
  if (kind == "two_level") {
    // +value on the first half of the diagonal, -value on the rest
    const double v = doc.at("value").get<double>();
    Matrix m = Matrix::Zero(n, n);
    for (int a = 0; a < n; ++a) m(a, a) = a < n / 2 ? v : -v;
    return m;
  }
  if (kind == "dense") {
    Matrix m = matrix_from_json(doc.at("real"), n, "deformation").cast<Complex>();
    if (doc.contains("imag")) m += Complex(0, 1) * matrix_from_json(doc.at("imag"), n, "deformation").cast<Complex>();
    return m;
  }
  throw std::invalid_argument("unknown deformation kind: " + kind);
}

Json deformation_to_json(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  if (a.isZero(0.0)) return "zero";
  bool diagonal = true;
  for (int i = 0; i < n && diagonal; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && a(i, j) != Complex(0.0)) {
        diagonal = false;
        break;
      }
  if (diagonal && a.diagonal().imag().isZero(0.0)) {
    Json vals = Json::array();
    for (int i = 0; i < n; ++i) vals.push_back(a(i, i).real());
    return Json{{"kind", "diagonal"}, {"values", vals}};
  }
  Json d{{"kind", "dense"}, {"real", matrix_to_json(a.real())}};
  if (!a.imag().isZero(0.0)) d["imag"] = matrix_to_json(a.imag());
  return d;
}

}  // namespace

FilterSpec filter_from_json(const Json& doc, int n) {
  if (doc.is_null()) return FilterSpec::identity();
  if (doc.is_string()) return filter_from_preset(doc.get<std::string>(), n);
  const std::string kind = doc.at("kind").get<std::string>();
  FilterSpec f;
  if (kind == "identity") {
    f = FilterSpec::identity();
  } else if (kind == "convolution") {
    if (doc.contains("preset")) {
      const std::string p = doc.at("preset").get<std::string>();
      if (p == "power_decay")
        f = power_decay_kernel(n, doc.at("s").get<double>(), doc.at("c").get<double>(), doc.value("delta", 0.0));
      else if (p == "stencil5")
        f = stencil5_kernel(n, doc.at("eps").get<double>());
      else
        f = filter_from_preset(p, n);
    } else {
      Matrix k = Matrix::Zero(n, n);
      for (const auto& t : doc.at("triples")) {
        const int x = ((t.at(0).get<int>() % n) + n) % n;
        const int y = ((t.at(1).get<int>() % n) + n) % n;
        const double re = t.at(2).get<double>();
        const double im = t.size() > 3 ? t.at(3).get<double>() : 0.0;
        k(x, y) += Complex(re, im);
      }
      f = FilterSpec::convolution(std::move(k), doc.value("label", std::string("custom")));
    }
  } else if (kind == "explicit") {
    const Json& rows = doc.at("matrix");
    const int d = static_cast<int>(rows.size());
    f = FilterSpec::explicit_operator(matrix_from_json(rows, d, "explicit operator"),
                                      doc.value("label", std::string("explicit")));
  } else {
    throw std::invalid_argument("unknown filter kind: " + kind);
  }
  if (doc.contains("decay_exponent")) f.decay_exponent = doc.at("decay_exponent").get<double>();
  if (doc.contains("decay_constant")) f.decay_constant = doc.at("decay_constant").get<double>();
  if (doc.contains("label")) f.label = doc.at("label").get<std::string>();
  return f;
}

Json filter_to_json(const FilterSpec& f) {
  Json d;
  switch (f.kind) {
    case FilterKind::Identity:
      d = Json{{"kind", "identity"}};
      break;
    case FilterKind::Convolution: {
      Json triples = Json::array();
      const int n = static_cast<int>(f.kernel.rows());
      const bool complex_kernel = !f.kernel.imag().isZero(0.0);
      for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) {
          const Complex v = f.kernel(x, y);
          if (v == Complex(0.0)) continue;
          if (complex_kernel)
            triples.push_back({x, y, v.real(), v.imag()});
          else
            triples.push_back({x, y, v.real()});
        }
      d = Json{{"kind", "convolution"}, {"triples", triples}};
      break;
    }
    case FilterKind::ExplicitOperator:
      d = Json{{"kind", "explicit"}, {"matrix", matrix_to_json(f.op)}};
      break;
  }
  d["label"] = f.label;
  d["decay_exponent"] = f.decay_exponent;
  d["decay_constant"] = f.decay_constant;
  return d;
}

PairModelSpec spec_from_json(const Json& doc, std::optional<int> n_override) {
  PairModelSpec spec;
  int n = n_override ? *n_override : doc.value("n", 0);
  if (n < 1) throw std::invalid_argument("model needs a positive dimension n");
  spec.n = n;
  spec.symmetry = symmetry_from_string(doc.value("symmetry", std::string("real")));
  spec.entry_law = entry_law_from_string(doc.value("entry_law", std::string("gaussian")));
  spec.profile.alpha = doc.value("alpha", 1.0);
  const Json none;
  spec.profile.variance1 = variance_from_json(doc.contains("variance1") ? doc.at("variance1") : none, n, spec.symmetry);
  spec.profile.variance2 = variance_from_json(doc.contains("variance2") ? doc.at("variance2") : none, n, spec.symmetry);
  spec.profile.cross = cross_from_json(doc.contains("cross") ? doc.at("cross") : none, n, spec.profile.alpha);
  spec.deformation1 = deformation_from_json(doc.contains("deformation1") ? doc.at("deformation1") : none, n);
  spec.deformation2 = deformation_from_json(doc.contains("deformation2") ? doc.at("deformation2") : none, n);
  spec.filter1 = filter_from_json(doc.contains("filter1") ? doc.at("filter1") : none, n);
  spec.filter2 = filter_from_json(doc.contains("filter2") ? doc.at("filter2") : none, n);
  if (doc.contains("constants")) {
    spec.constants.c0 = doc.at("constants").value("c0", spec.constants.c0);
    spec.constants.C0 = doc.at("constants").value("C0", spec.constants.C0);
  }
  return spec;
}

Json spec_to_json(const PairModelSpec& spec) {
  Json d;
  d["schema"] = 1;
  d["n"] = spec.n;
  d["symmetry"] = to_string(spec.symmetry);
  d["entry_law"] = to_string(spec.entry_law);
  d["alpha"] = spec.profile.alpha;
  d["variance1"] = variance_to_json(spec.profile.variance1);
  d["variance2"] = variance_to_json(spec.profile.variance2);
  d["cross"] = cross_to_json(spec.profile.cross);
  d["deformation1"] = deformation_to_json(spec.deformation1);
  d["deformation2"] = deformation_to_json(spec.deformation2);
  d["filter1"] = filter_to_json(spec.filter1);
  d["filter2"] = filter_to_json(spec.filter2);
  d["constants"] = Json{{"c0", spec.constants.c0}, {"C0", spec.constants.C0}};
  return d;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary matrix I/O assumes a little-endian host");

}  // namespace

void write_matrix_binary(const std::string& path, const Matrix& m, SymmetryClass s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const std::uint64_t n = static_cast<std::uint64_t>(m.rows());
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  const RealMatrix re = m.real();
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b) f.write(reinterpret_cast<const char*>(&re(a, b)), sizeof(double));
  if (s == SymmetryClass::ComplexHermitian) {
    const RealMatrix im = m.imag();
    for (Eigen::Index a = 0; a < m.rows(); ++a)
      for (Eigen::Index b = 0; b < m.cols(); ++b) f.write(reinterpret_cast<const char*>(&im(a, b)), sizeof(double));
  }
  if (!f) throw std::runtime_error("write failed for " + path);
}

Matrix read_matrix_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot read " + path);
  const auto size = static_cast<std::uint64_t>(f.tellg());
  f.seekg(0);
  std::uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  const std::uint64_t body = size - sizeof(n);
  const std::uint64_t block = n * n * sizeof(double);
  if (!f || n == 0 || (body != block && body != 2 * block))
    throw std::runtime_error("malformed matrix file " + path);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  double v = 0.0;
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b) {
      f.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(a, b) = v;
    }
  if (body == 2 * block)
    for (Eigen::Index a = 0; a < m.rows(); ++a)
      for (Eigen::Index b = 0; b < m.cols(); ++b) {
        f.read(reinterpret_cast<char*>(&v), sizeof(v));
        m(a, b) = Complex(m(a, b).real(), v);
      }
  if (!f) throw std::runtime_error("truncated matrix file " + path);
  return m;
}

std::string canonical_dump(const Json& doc) { return doc.dump(); }

std::uint64_t json_hash(const Json& doc) {
  const std::string s = canonical_dump(doc);
  return fnv1a(s.data(), s.size());
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

Json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return Json::parse(f);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace corrpair

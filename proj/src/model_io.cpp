#include "posdelay/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace posdelay {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "number must be finite");
  return v;
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "/" + key, "required field is missing");
  return *it;
}

Matrix optional_matrix(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return Matrix();
  return matrix_from_json(*it, path + "/" + key);
}

const json& require_array(const json& obj, const char* key, const std::string& path) {
  const json& a = require(obj, key, path);
  if (!a.is_array()) throw SchemaError(path + "/" + key, "expected an array");
  return a;
}

void put_if_nonempty(json& j, const char* key, const Matrix& m) {
  if (m.size() > 0) j[key] = matrix_to_json(m);
}

bool is_constant_kernel(const DelayKernel& k, Matrix* m, double* h_bar) {
  if (k.pieces().size() != 1) return false;
  const auto& p = k.pieces()[0];
  if (p.b != 0.0 || std::isinf(p.a) || p.terms.size() != 1) return false;
  const auto& t = p.terms[0];
  if (t.alpha != 0.0 || t.power != 0) return false;
  *m = t.coeff;
  *h_bar = -p.a;
  return true;
}

void check_class_keys(const json& j, std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = it.key() == "class" || it.key() == "n";
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw SchemaError("/" + it.key(), "unknown field for this model class");
  }
}

template <class F>
auto with_dimension_context(F&& f) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw SchemaError("", e.what());
  }
}

}  // namespace

SchemaError::SchemaError(std::string path, const std::string& message)
    : std::invalid_argument((path.empty() ? std::string("model") : path) + ": " + message),
      path_(std::move(path)) {}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw SchemaError(path, "expected a nonempty array of rows");
  const size_t rows = j.size();
  if (!j[0].is_array() || j[0].empty())
    throw SchemaError(path + "/0", "expected a nonempty array of numbers");
  const size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    const std::string rp = path + "/" + std::to_string(r);
    if (!j[r].is_array()) throw SchemaError(rp, "expected an array of numbers");
    if (j[r].size() != cols) throw SchemaError(rp, "row length differs from row 0");
    for (size_t c = 0; c < cols; ++c)
      m(r, c) = number_at(j[r][c], rp + "/" + std::to_string(c));
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of numbers");
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = number_at(j[i], path + "/" + std::to_string(i));
  return v;
}

json delay_to_json(const DelaySpec& d) {
  switch (d.kind) {
    case DelayKind::Constant: return {{"type", "const"}, {"h", d.h}};
    case DelayKind::TimeVarying:
      return {{"type", "tv"}, {"h_bar", d.h}, {"rate_bound", d.rate_bound}};
    case DelayKind::TimeVaryingUnboundedRate: return {{"type", "tv_unbounded_rate"}, {"h_bar", d.h}};
  }
  return {};
}

DelaySpec delay_from_json(const json& j, const std::string& path) {
  const json& type = require(j, "type", path);
  if (!type.is_string()) throw SchemaError(path + "/type", "expected a string");
  const std::string t = type.get<std::string>();
  DelaySpec d;
  if (t == "const") {
    d = DelaySpec::constant(number_at(require(j, "h", path), path + "/h"));
  } else if (t == "tv") {
    const double h = number_at(require(j, "h_bar", path), path + "/h_bar");
    const double eta = number_at(require(j, "rate_bound", path), path + "/rate_bound");
    if (eta >= 1.0)
      throw SchemaError(path + "/rate_bound",
                        "rate bound must be < 1 for L1/L2 analyses; use type 'tv_unbounded_rate'");
    if (eta < 0.0) throw SchemaError(path + "/rate_bound", "rate bound must be >= 0");
    d = DelaySpec::time_varying(h, eta);
  } else if (t == "tv_unbounded_rate") {
    d = DelaySpec::unbounded_rate(number_at(require(j, "h_bar", path), path + "/h_bar"));
  } else {
    throw SchemaError(path + "/type", "unknown delay type '" + t + "'");
  }
  if (d.h < 0) throw SchemaError(path, "delay must be >= 0");
  return d;
}

json kernel_to_json(const DelayKernel& k) {
  json pieces = json::array();
  for (const auto& p : k.pieces()) {
    json terms = json::array();
    for (const auto& t : p.terms)
      terms.push_back({{"coeff", matrix_to_json(t.coeff)}, {"alpha", t.alpha}, {"power", t.power}});
    json a = std::isinf(p.a) ? json("-inf") : json(p.a);
    pieces.push_back({{"interval", {a, p.b}}, {"terms", terms}});
  }
  return {{"pieces", pieces}};
}

DelayKernel kernel_from_json(const json& j, const std::string& path) {
  const json& pieces = require_array(j, "pieces", path);
  std::vector<KernelPiece> out;
  Index rows = -1, cols = -1;
  for (size_t i = 0; i < pieces.size(); ++i) {
    const std::string pp = path + "/pieces/" + std::to_string(i);
    const json& iv = require_array(pieces[i], "interval", pp);
    if (iv.size() != 2) throw SchemaError(pp + "/interval", "expected [a, b]");
    KernelPiece piece;
    if (iv[0].is_string() && iv[0].get<std::string>() == "-inf") {
      piece.a = -std::numeric_limits<double>::infinity();
    } else {
      piece.a = number_at(iv[0], pp + "/interval/0");
    }
    piece.b = number_at(iv[1], pp + "/interval/1");
    if (!(piece.a < piece.b) || piece.b > 0)
      throw SchemaError(pp + "/interval", "interval must satisfy a < b <= 0");
    const json& terms = require_array(pieces[i], "terms", pp);
    for (size_t k = 0; k < terms.size(); ++k) {
      const std::string tp = pp + "/terms/" + std::to_string(k);
      KernelTerm t;
      t.coeff = matrix_from_json(require(terms[k], "coeff", tp), tp + "/coeff");
      auto ai = terms[k].find("alpha");
      t.alpha = ai == terms[k].end() ? 0.0 : number_at(*ai, tp + "/alpha");
      auto pi = terms[k].find("power");
      if (pi != terms[k].end()) {
        if (!pi->is_number_integer() || pi->get<int>() < 0)
          throw SchemaError(tp + "/power", "power must be a nonnegative integer");
        t.power = pi->get<int>();
      }
      if (rows < 0) {
        rows = t.coeff.rows();
        cols = t.coeff.cols();
      } else if (t.coeff.rows() != rows || t.coeff.cols() != cols) {
        throw SchemaError(tp + "/coeff", "coefficient shape differs from the first term");
      }
      if (std::isinf(piece.a) && !(t.alpha > 0))
        throw SchemaError(tp + "/alpha", "infinite support requires alpha > 0");
      piece.terms.push_back(std::move(t));
    }
    out.push_back(std::move(piece));
  }
  if (rows < 0) throw SchemaError(path, "kernel has no terms");
  return DelayKernel(rows, cols, std::move(out));
}

namespace {

DelayKernel kernel_entry(const json& obj, const char* mat_key, const char* kernel_key,
                         const std::string& path, bool required) {
  auto kit = obj.find(kernel_key);
  if (kit != obj.end()) return kernel_from_json(*kit, path + "/" + kernel_key);
  auto mit = obj.find(mat_key);
  if (mit == obj.end()) {
    if (required) throw SchemaError(path + "/" + mat_key, "required field is missing");
    return DelayKernel();
  }
  const Matrix m = matrix_from_json(*mit, path + "/" + mat_key);
  const double h = number_at(require(obj, "h_bar", path), path + "/h_bar");
  if (!(h > 0)) throw SchemaError(path + "/h_bar", "h_bar must be > 0");
  return DelayKernel::constant(m, h);
}

SystemModel parse_model(const json& j) {
  if (!j.is_object()) throw SchemaError("", "model must be a JSON object");
  const json& cls = require(j, "class", "");
  if (!cls.is_string()) throw SchemaError("/class", "expected a string");
  const std::string c = cls.get<std::string>();
  if (c == "lti") {
    check_class_keys(j, {"A", "E", "C", "F"});
    LtiSystem s;
    s.A = matrix_from_json(require(j, "A", ""), "/A");
    s.E = optional_matrix(j, "E", "");
    s.C = optional_matrix(j, "C", "");
    s.F = optional_matrix(j, "F", "");
    return s;
  }
  if (c == "discrete") {
    check_class_keys(j, {"A0", "delayed", "Eu", "C0", "Fu"});
    DiscreteDelaySystem s;
    s.A0 = matrix_from_json(require(j, "A0", ""), "/A0");
    const json& d = require_array(j, "delayed", "");
    for (size_t i = 0; i < d.size(); ++i) {
      const std::string p = "/delayed/" + std::to_string(i);
      DiscreteTerm t;
      t.A = matrix_from_json(require(d[i], "A", p), p + "/A");
      t.C = optional_matrix(d[i], "C", p);
      t.delay = delay_from_json(require(d[i], "delay", p), p + "/delay");
      s.delayed.push_back(std::move(t));
    }
    s.Eu = optional_matrix(j, "Eu", "");
    s.C0 = optional_matrix(j, "C0", "");
    s.Fu = optional_matrix(j, "Fu", "");
    return s;
  }
  if (c == "difference") {
    check_class_keys(j, {"terms", "Eu", "Fu"});
    DifferenceSystem s;
    const json& d = require_array(j, "terms", "");
    for (size_t i = 0; i < d.size(); ++i) {
      const std::string p = "/terms/" + std::to_string(i);
      DifferenceTerm t;
      t.A = matrix_from_json(require(d[i], "A", p), p + "/A");
      t.C = optional_matrix(d[i], "C", p);
      t.delay = delay_from_json(require(d[i], "delay", p), p + "/delay");
      if (!(t.delay.h > 0)) throw SchemaError(p + "/delay", "difference delays must be > 0");
      s.terms.push_back(std::move(t));
    }
    if (s.terms.empty()) throw SchemaError("/terms", "at least one term is required");
    s.n = s.terms[0].A.rows();
    s.Eu = optional_matrix(j, "Eu", "");
    s.Fu = optional_matrix(j, "Fu", "");
    return s;
  }
  if (c == "coupled") {
    check_class_keys(j, {"n2", "A0", "C0", "delayed", "E1", "E2", "Cy0", "Fu"});
    CoupledSystem s;
    s.A0 = matrix_from_json(require(j, "A0", ""), "/A0");
    s.C0 = matrix_from_json(require(j, "C0", ""), "/C0");
    const json& d = require_array(j, "delayed", "");
    for (size_t i = 0; i < d.size(); ++i) {
      const std::string p = "/delayed/" + std::to_string(i);
      CoupledTerm t;
      t.A = matrix_from_json(require(d[i], "A", p), p + "/A");
      t.C = matrix_from_json(require(d[i], "C", p), p + "/C");
      t.Cy = optional_matrix(d[i], "Cy", p);
      t.delay = delay_from_json(require(d[i], "delay", p), p + "/delay");
      s.delayed.push_back(std::move(t));
    }
    s.E1 = optional_matrix(j, "E1", "");
    s.E2 = optional_matrix(j, "E2", "");
    s.Cy0 = optional_matrix(j, "Cy0", "");
    s.Fu = optional_matrix(j, "Fu", "");
    if (j.contains("n2")) {
      const json& n2 = j["n2"];
      if (!n2.is_number_integer() || n2.get<Index>() != s.C0.rows())
        throw SchemaError("/n2", "n2 must equal the row count of C0");
    }
    return s;
  }
  if (c == "distributed") {
    check_class_keys(j, {"A0", "kernels", "Eu", "C0", "Fu"});
    DistributedSystem s;
    s.A0 = matrix_from_json(require(j, "A0", ""), "/A0");
    const json& d = require_array(j, "kernels", "");
    for (size_t i = 0; i < d.size(); ++i) {
      const std::string p = "/kernels/" + std::to_string(i);
      DistributedTerm t;
      t.A = kernel_entry(d[i], "A", "A_kernel", p, true);
      if (d[i].contains("C") || d[i].contains("C_kernel"))
        t.C = kernel_entry(d[i], "C", "C_kernel", p, true);
      s.kernels.push_back(std::move(t));
    }
    s.Eu = optional_matrix(j, "Eu", "");
    s.C0 = optional_matrix(j, "C0", "");
    s.Fu = optional_matrix(j, "Fu", "");
    return s;
  }
  if (c == "neutral") {
    check_class_keys(j, {"A0", "delayed", "Eu", "C0", "Fu"});
    NeutralSystem s;
    s.A0 = matrix_from_json(require(j, "A0", ""), "/A0");
    const json& d = require_array(j, "delayed", "");
    for (size_t i = 0; i < d.size(); ++i) {
      const std::string p = "/delayed/" + std::to_string(i);
      NeutralTerm t;
      t.Ar = optional_matrix(d[i], "Ar", p);
      t.An = optional_matrix(d[i], "An", p);
      if (t.Ar.size() == 0 && t.An.size() == 0)
        throw SchemaError(p, "at least one of Ar, An is required");
      t.Cr = optional_matrix(d[i], "Cr", p);
      t.Cn = optional_matrix(d[i], "Cn", p);
      t.delay = delay_from_json(require(d[i], "delay", p), p + "/delay");
      if (!(t.delay.h > 0)) throw SchemaError(p + "/delay", "neutral delays must be > 0");
      s.delayed.push_back(std::move(t));
    }
    s.Eu = optional_matrix(j, "Eu", "");
    s.C0 = optional_matrix(j, "C0", "");
    s.Fu = optional_matrix(j, "Fu", "");
    return s;
  }
  throw SchemaError("/class", "unknown model class '" + c + "'");
}

}  // namespace

SystemModel model_from_json(const json& j) {
  SystemModel m = parse_model(j);
  with_dimension_context([&] {
    normalize_dimensions(m);
    return 0;
  });
  if (j.contains("n")) {
    const json& n = j["n"];
    const Index expect = std::holds_alternative<CoupledSystem>(m)
                             ? std::get<CoupledSystem>(m).A0.rows()
                             : state_dim(m);
    if (!n.is_number_integer() || n.get<Index>() != expect)
      throw SchemaError("/n", "n does not match the state dimension");
  }
  return m;
}

json model_to_json(const SystemModel& model) {
  json j;
  j["class"] = class_name(model);
  std::visit(Overloaded{
                 [&](const LtiSystem& s) {
                   j["n"] = s.A.rows();
                   j["A"] = matrix_to_json(s.A);
                   put_if_nonempty(j, "E", s.E);
                   put_if_nonempty(j, "C", s.C);
                   put_if_nonempty(j, "F", s.F);
                 },
                 [&](const DiscreteDelaySystem& s) {
                   j["n"] = s.A0.rows();
                   j["A0"] = matrix_to_json(s.A0);
                   json d = json::array();
                   for (const auto& t : s.delayed) {
                     json e{{"A", matrix_to_json(t.A)}, {"delay", delay_to_json(t.delay)}};
                     put_if_nonempty(e, "C", t.C);
                     d.push_back(e);
                   }
                   j["delayed"] = d;
                   put_if_nonempty(j, "Eu", s.Eu);
                   put_if_nonempty(j, "C0", s.C0);
                   put_if_nonempty(j, "Fu", s.Fu);
                 },
                 [&](const DifferenceSystem& s) {
                   j["n"] = s.n;
                   json d = json::array();
                   for (const auto& t : s.terms) {
                     json e{{"A", matrix_to_json(t.A)}, {"delay", delay_to_json(t.delay)}};
                     put_if_nonempty(e, "C", t.C);
                     d.push_back(e);
                   }
                   j["terms"] = d;
                   put_if_nonempty(j, "Eu", s.Eu);
                   put_if_nonempty(j, "Fu", s.Fu);
                 },
                 [&](const CoupledSystem& s) {
                   j["n"] = s.A0.rows();
                   j["n2"] = s.C0.rows();
                   j["A0"] = matrix_to_json(s.A0);
                   j["C0"] = matrix_to_json(s.C0);
                   json d = json::array();
                   for (const auto& t : s.delayed) {
                     json e{{"A", matrix_to_json(t.A)},
                            {"C", matrix_to_json(t.C)},
                            {"delay", delay_to_json(t.delay)}};
                     put_if_nonempty(e, "Cy", t.Cy);
                     d.push_back(e);
                   }
                   j["delayed"] = d;
                   put_if_nonempty(j, "E1", s.E1);
                   put_if_nonempty(j, "E2", s.E2);
                   put_if_nonempty(j, "Cy0", s.Cy0);
                   put_if_nonempty(j, "Fu", s.Fu);
                 },
                 [&](const DistributedSystem& s) {
                   j["n"] = s.A0.rows();
                   j["A0"] = matrix_to_json(s.A0);
                   json d = json::array();
                   for (const auto& t : s.kernels) {
                     json e;
                     Matrix m;
                     double h = 0;
                     if (is_constant_kernel(t.A, &m, &h)) {
                       e["A"] = matrix_to_json(m);
                       e["h_bar"] = h;
                     } else {
                       e["A_kernel"] = kernel_to_json(t.A);
                     }
                     if (t.C && t.C->rows() > 0) {
                       Matrix mc;
                       double hc = 0;
                       if (is_constant_kernel(*t.C, &mc, &hc) && (!e.contains("h_bar") || hc == h)) {
                         e["C"] = matrix_to_json(mc);
                         e["h_bar"] = hc;
                       } else {
                         e["C_kernel"] = kernel_to_json(*t.C);
                       }
                     }
                     d.push_back(e);
                   }
                   j["kernels"] = d;
                   put_if_nonempty(j, "Eu", s.Eu);
                   put_if_nonempty(j, "C0", s.C0);
                   put_if_nonempty(j, "Fu", s.Fu);
                 },
                 [&](const NeutralSystem& s) {
                   j["n"] = s.A0.rows();
                   j["A0"] = matrix_to_json(s.A0);
                   json d = json::array();
                   for (const auto& t : s.delayed) {
                     json e{{"Ar", matrix_to_json(t.Ar)},
                            {"An", matrix_to_json(t.An)},
                            {"delay", delay_to_json(t.delay)}};
                     put_if_nonempty(e, "Cr", t.Cr);
                     put_if_nonempty(e, "Cn", t.Cn);
                     d.push_back(e);
                   }
                   j["delayed"] = d;
                   put_if_nonempty(j, "Eu", s.Eu);
                   put_if_nonempty(j, "C0", s.C0);
                   put_if_nonempty(j, "Fu", s.Fu);
                 }},
             model);
  return j;
}

SystemModel load_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return model_from_json(j);
}

std::string save_model(const SystemModel& m) { return model_to_json(m).dump(2) + "\n"; }

SystemModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

}  // namespace posdelay

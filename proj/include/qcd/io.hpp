#pragma once

// JSON encoding of operators, channels, strategies and results. Infinite
// values are written as the strings "inf" and "-inf".

#include "qcd/adaptive.hpp"
#include "qcd/bounds.hpp"
#include "qcd/hypothesis.hpp"
#include "qcd/linalg.hpp"

#include <json.hpp>

#include <cctype>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcd::io {

using json = nlohmann::json;

/// Input error with a location inside the offending file or value.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::string where = {}, std::size_t offset = 0)
      : std::runtime_error(what), where_(std::move(where)), offset_(offset) {}
  const std::string& where() const { return where_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string where_;
  std::size_t offset_;
};

inline json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

/// Reads a decimal, "inf"/"-inf", or an exact dyadic literal such as "2^-50" or "3*2^-5".
inline double parse_number(std::string_view s) {
  auto trim = [](std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
  };
  s = trim(s);
  if (s == "inf" || s == "+inf") return kInf;
  if (s == "-inf") return -kInf;
  auto decimal = [&](std::string_view v) {
    v = trim(v);
    std::string buf(v);
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(buf.c_str(), &end);
    if (buf.empty() || end != buf.c_str() + buf.size() || errno == ERANGE)
      throw FormatError("not a number: '" + std::string(s) + "'");
    return x;
  };
  const auto caret = s.find('^');
  if (caret == std::string_view::npos) return decimal(s);
  std::string_view head = trim(s.substr(0, caret)), expo = trim(s.substr(caret + 1));
  double coef = 1.0;
  bool negative = false;
  if (!head.empty() && head.front() == '-') {
    negative = true;
    head.remove_prefix(1);
  }
  const auto star = head.find('*');
  if (star != std::string_view::npos) {
    coef = decimal(head.substr(0, star));
    head = trim(head.substr(star + 1));
  }
  if (head != "2") throw FormatError("only powers of two are accepted in '" + std::string(s) + "'");
  int k = 0;
  if (!expo.empty() && expo.front() == '+') expo.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(expo.data(), expo.data() + expo.size(), k);
  if (ec != std::errc() || ptr != expo.data() + expo.size())
    throw FormatError("bad exponent in '" + std::string(s) + "'");
  return (negative ? -1.0 : 1.0) * std::ldexp(coef, k);
}

inline double to_number(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return parse_number(j.get<std::string>());
    } catch (const FormatError& e) {
      throw FormatError(e.what(), where);
    }
  }
  throw FormatError("expected a number", where);
}

// ---------------------------------------------------------------------------
// Operators

inline json layout_json(const SystemLayout& l) {
  json dims = json::array(), labels = json::array();
  for (const auto& p : l.parts()) {
    dims.push_back(p.dim);
    labels.push_back(p.label);
  }
  return {{"dims", dims}, {"labels", labels}};
}

inline json to_json(const CMatrix& m, const SystemLayout& layout) {
  json re = json::array(), im = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array(), c = json::array();
    for (Index k = 0; k < m.cols(); ++k) {
      r.push_back(m(i, k).real());
      c.push_back(m(i, k).imag());
    }
    re.push_back(std::move(r));
    im.push_back(std::move(c));
  }
  json j = layout_json(layout);
  j["re"] = std::move(re);
  j["im"] = std::move(im);
  return j;
}

inline json to_json(const HermitianOperator& x) { return to_json(x.matrix(), x.layout()); }

inline SystemLayout layout_from_json(const json& j, Index dim, const std::string& where) {
  if (!j.contains("dims")) return SystemLayout::flat(dim);
  const auto& dims = j.at("dims");
  if (!dims.is_array() || dims.empty()) throw FormatError("'dims' must be a non-empty array", where);
  std::vector<SystemLayout::Subsystem> parts;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    std::string label = "S" + std::to_string(k + 1);
    if (j.contains("labels")) label = j.at("labels").at(k).get<std::string>();
    parts.push_back({label, dims[k].get<Index>()});
  }
  try {
    SystemLayout l(std::move(parts));
    if (l.total_dim() != dim)
      throw FormatError("'dims' multiply to " + std::to_string(l.total_dim()) + " but the matrix has size " +
                        std::to_string(dim), where);
    return l;
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what(), where);
  }
}

inline CMatrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("re")) throw FormatError("operator needs an 're' array", where);
  const auto& re = j.at("re");
  const Index n = static_cast<Index>(re.size());
  if (n == 0) throw FormatError("operator is empty", where);
  CMatrix m(n, n);
  const bool has_im = j.contains("im");
  if (has_im && j.at("im").size() != re.size()) throw FormatError("'re' and 'im' differ in shape", where);
  for (Index r = 0; r < n; ++r) {
    const auto& row = re.at(static_cast<std::size_t>(r));
    if (static_cast<Index>(row.size()) != n) throw FormatError("row " + std::to_string(r) + " is not of length " + std::to_string(n), where);
    for (Index c = 0; c < n; ++c) {
      const std::string at = where + ".re[" + std::to_string(r) + "][" + std::to_string(c) + "]";
      double im = 0.0;
      if (has_im) im = to_number(j.at("im").at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)), at);
      m(r, c) = Complex(to_number(row.at(static_cast<std::size_t>(c)), at), im);
    }
  }
  return m;
}

inline DensityMatrix density_from_json(const json& j, const std::string& where = "state") {
  CMatrix m = matrix_from_json(j, where);
  try {
    return DensityMatrix(m, layout_from_json(j, m.rows(), where));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what(), where);
  }
}

// ---------------------------------------------------------------------------
// Channels: either {"kraus": [op, ...]} or {"choi": op, "d_in", "d_out"}

inline json to_json(const Channel& ch) {
  return {{"d_in", ch.dim_in()}, {"d_out", ch.dim_out()}, {"choi", to_json(ch.choi())}};
}

inline CMatrix rect_from_json(const json& j, const std::string& where) {
  const auto& re = j.at("re");
  const Index rows = static_cast<Index>(re.size());
  const Index cols = rows ? static_cast<Index>(re.at(0).size()) : 0;
  CMatrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const std::string at = where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]";
      const double im = j.contains("im") ? to_number(j.at("im").at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)), at) : 0.0;
      m(r, c) = Complex(to_number(re.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)), at), im);
    }
  return m;
}

inline Channel channel_from_json(const json& j, const std::string& where = "channel") {
  try {
    if (j.contains("kraus")) {
      std::vector<CMatrix> ks;
      for (std::size_t k = 0; k < j.at("kraus").size(); ++k)
        ks.push_back(rect_from_json(j.at("kraus")[k], where + ".kraus[" + std::to_string(k) + "]"));
      return Channel::from_kraus(std::move(ks));
    }
    if (j.contains("choi"))
      return Channel::from_choi(matrix_from_json(j.at("choi"), where + ".choi"), j.at("d_in").get<Index>(),
                                j.at("d_out").get<Index>());
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what(), where);
  } catch (const json::exception& e) {
    throw FormatError(e.what(), where);
  }
  throw FormatError("channel needs 'kraus' or 'choi'", where);
}

// ---------------------------------------------------------------------------
// Strategies and traces

inline json to_json(const AdaptiveStrategy& s) {
  json preps = json::array();
  for (const auto& p : s.preps) preps.push_back(to_json(p));
  return {{"n", s.n}, {"rho1", to_json(s.rho1)}, {"preps", preps}};
}

inline AdaptiveStrategy strategy_from_json(const json& j, const std::string& where = "strategy") {
  AdaptiveStrategy s;
  try {
    s.rho1 = density_from_json(j.at("rho1"), where + ".rho1");
    const auto& preps = j.contains("preps") ? j.at("preps") : json::array();
    for (std::size_t k = 0; k < preps.size(); ++k)
      s.preps.push_back(channel_from_json(preps[k], where + ".preps[" + std::to_string(k) + "]"));
    s.n = j.contains("n") ? j.at("n").get<int>() : static_cast<int>(s.preps.size()) + 1;
  } catch (const json::exception& e) {
    throw FormatError(e.what(), where);
  }
  return s;
}

inline json to_json(const ProtocolTrace& t) {
  json gains = json::array(), steps = json::array();
  for (double g : t.gains) gains.push_back(number(g));
  for (std::size_t k = 0; k < t.rho.size(); ++k)
    steps.push_back({{"rho", to_json(t.rho[k])},
                     {"sigma", to_json(t.sigma[k])},
                     {"e_out", to_json(t.e_out[k])},
                     {"f_out", to_json(t.f_out[k])}});
  const auto a = amortization_report(t);
  return {{"gains", gains},
          {"ell", t.ell},
          {"sum_gains", number(a.sum_gains)},
          {"final_divergence", number(t.final_divergence)},
          {"chain_holds", a.chain_holds},
          {"steps", steps}};
}

inline ProtocolTrace trace_from_json(const json& j, const std::string& where = "trace") {
  ProtocolTrace t;
  try {
    const auto& steps = j.at("steps");
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const std::string at = where + ".steps[" + std::to_string(k) + "]";
      t.rho.push_back(density_from_json(steps[k].at("rho"), at + ".rho"));
      t.sigma.push_back(density_from_json(steps[k].at("sigma"), at + ".sigma"));
      t.e_out.push_back(density_from_json(steps[k].at("e_out"), at + ".e_out"));
      t.f_out.push_back(density_from_json(steps[k].at("f_out"), at + ".f_out"));
    }
    for (std::size_t k = 0; k < j.at("gains").size(); ++k)
      t.gains.push_back(to_number(j.at("gains")[k], where + ".gains[" + std::to_string(k) + "]"));
    t.ell = j.at("ell").get<std::size_t>();
    t.final_divergence = to_number(j.at("final_divergence"), where + ".final_divergence");
  } catch (const json::exception& e) {
    throw FormatError(e.what(), where);
  }
  if (t.rho.empty() || t.gains.size() != t.rho.size() || t.ell < 1 || t.ell > t.rho.size())
    throw FormatError("trace is inconsistent: steps, gains and ell disagree", where);
  return t;
}

inline json to_json(const BoundReport& r) {
  json j = {{"ell", r.ell},
            {"c_ell", number(r.c_ell)},
            {"c_prime_ell", number(r.c_prime_ell)},
            {"gamma_star", {r.gamma_star.first, r.gamma_star.second}},
            {"rhs_eq31", number(r.rhs_eq31)},
            {"rhs_eq28", number(r.rhs_eq28)},
            {"condition_eq38", r.condition_eq38},
            {"C_corollary", number(r.C_corollary)},
            {"chat_inf", number(r.chat_inf)},
            {"cap_c_prime", number(r.cap_c_prime)},
            {"cap_c", number(r.cap_c)},
            {"channel_dmax", number(r.channel_dmax)},
            {"channel_d2", number(r.channel_d2)}};
  j["rhs_eq39"] = r.rhs_eq39 ? number(*r.rhs_eq39) : json(nullptr);
  return j;
}

inline json to_json(const TestResult& r) {
  return {{"alpha", r.alpha}, {"beta", r.beta}, {"dh_bits", number(r.dh)}, {"test", to_json(r.pi)}};
}

// ---------------------------------------------------------------------------
// Files

inline json parse_text(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based; report line and column as well
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw FormatError("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                          e.what(), where, e.byte);
  }
}

inline json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open file", path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

}  // namespace qcd::io

#pragma once

// JSON documents for instances and cuts. Matrices are stored row-major as nested arrays.
// Numbers are written with 17 significant digits so that a write/read cycle is exact.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "etrs/cut.hpp"
#include "etrs/model.hpp"

namespace etrs::io {

using nlohmann::json;

namespace detail {

inline void write_number(std::ostream& os, double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("cannot serialize non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

inline void write_json(std::ostream& os, const json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << json(it.key()).dump() << ": ";
        write_json(os, it.value(), indent, depth + 1);
      }
      os << "\n" << close_pad << "}";
      return;
    }
    case json::value_t::array: {
      // Arrays of scalars stay on one line; nested arrays get one row per line.
      const bool nested = !j.empty() && j.front().is_structured();
      os << "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << (nested ? "," : ", ");
        if (nested) os << "\n" << pad;
        write_json(os, j[i], indent, depth + 1);
      }
      if (nested) os << "\n" << close_pad;
      os << "]";
      return;
    }
    case json::value_t::number_float:
      write_number(os, j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

inline double number(const json& j, const char* what) {
  if (!j.is_number()) throw std::invalid_argument(std::string(what) + " must be a number");
  return j.get<double>();
}

inline const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline Vec vec_from(const json& j, int n, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be an array");
  require_size(static_cast<Eigen::Index>(j.size()), n, what);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = number(j[static_cast<std::size_t>(i)], what);
  return v;
}

inline Mat mat_from(const json& j, int n, const char* what) {
  if (!j.is_array()) throw std::invalid_argument(std::string(what) + " must be an array");
  require_size(static_cast<Eigen::Index>(j.size()), n, what);
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m.row(i) = vec_from(j[static_cast<std::size_t>(i)], n, what).transpose();
  return m;
}

}  // namespace detail

/// Pretty-prints a document, formatting every floating-point value with 17 digits.
inline std::string dump(const json& j, int indent = 2) {
  std::ostringstream os;
  detail::write_json(os, j, indent, 0);
  os << "\n";
  return os.str();
}

inline json instance_to_json(const EtrsInstance& inst) {
  json j;
  j["n"] = inst.n;
  j["H"] = detail::to_json(inst.H);
  j["g"] = detail::to_json(inst.g);
  j["gamma"] = inst.gamma;
  j["nu"] = inst.nu;
  j["c"] = detail::to_json(inst.c);
  j["b"] = detail::to_json(inst.b);
  j["alpha"] = inst.alpha;
  j["interior_point"] = inst.interior_point ? detail::to_json(*inst.interior_point) : json(nullptr);
  j["variant"] = to_string(inst.variant.kind);
  if (inst.variant.kind == VariantKind::Wedge) j["beta"] = inst.variant.beta;
  if (inst.seed) j["seed"] = *inst.seed;
  return j;
}

inline EtrsInstance instance_from_json(const json& j) {
  EtrsInstance inst;
  const json& nj = detail::field(j, "n");
  if (!nj.is_number_integer() || nj.get<long long>() < 1) {
    throw std::invalid_argument("n must be a positive integer");
  }
  inst.n = nj.get<int>();
  inst.H = detail::mat_from(detail::field(j, "H"), inst.n, "H");
  if (!is_symmetric(inst.H, 1e-9)) throw std::invalid_argument("H is not symmetric");
  inst.H = symmetrize(inst.H);
  inst.g = detail::vec_from(detail::field(j, "g"), inst.n, "g");
  inst.gamma = detail::number(detail::field(j, "gamma"), "gamma");
  inst.nu = detail::number(detail::field(j, "nu"), "nu");
  if (inst.gamma > inst.nu) throw std::invalid_argument("gamma exceeds nu");
  inst.c = detail::vec_from(detail::field(j, "c"), inst.n, "c");
  inst.b = detail::vec_from(detail::field(j, "b"), inst.n, "b");
  inst.alpha = detail::number(detail::field(j, "alpha"), "alpha");
  if (j.contains("interior_point") && !j.at("interior_point").is_null()) {
    inst.interior_point = detail::vec_from(j.at("interior_point"), inst.n, "interior_point");
  }
  if (j.contains("variant")) inst.variant.kind = parse_variant(j.at("variant").get<std::string>());
  if (j.contains("beta")) inst.variant.beta = detail::number(j.at("beta"), "beta");
  if (j.contains("seed")) inst.seed = j.at("seed").get<std::uint64_t>();
  inst.validate(1e-9);
  return inst;
}

inline json cut_to_json(const Cut& cut) {
  json j;
  j["Hq"] = detail::to_json(cut.Hq);
  j["gq"] = detail::to_json(cut.gq);
  j["fq"] = cut.fq;
  j["gl"] = detail::to_json(cut.gl);
  j["fl"] = cut.fl;
  j["qlow"] = cut.qlow;
  j["variant"] = to_string(cut.variant);
  j["rho"] = cut.rho;
  return j;
}

inline Cut cut_from_json(const json& j) {
  Cut cut;
  const json& gq = detail::field(j, "gq");
  if (!gq.is_array() || gq.empty()) throw std::invalid_argument("gq must be a nonempty array");
  const int n = static_cast<int>(gq.size());
  cut.Hq = detail::mat_from(detail::field(j, "Hq"), n, "Hq");
  if (!is_symmetric(cut.Hq, 1e-9)) throw std::invalid_argument("Hq is not symmetric");
  cut.Hq = symmetrize(cut.Hq);
  cut.gq = detail::vec_from(gq, n, "gq");
  cut.fq = detail::number(detail::field(j, "fq"), "fq");
  cut.gl = detail::vec_from(detail::field(j, "gl"), n, "gl");
  cut.fl = detail::number(detail::field(j, "fl"), "fl");
  cut.qlow = detail::number(detail::field(j, "qlow"), "qlow");
  if (cut.qlow < 0.0) throw std::invalid_argument("qlow must be nonnegative");
  cut.variant = parse_cut_variant(detail::field(j, "variant").get<std::string>());
  cut.rho = detail::number(detail::field(j, "rho"), "rho");
  return cut;
}

inline json parse(const std::string& text) { return json::parse(text); }

inline json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return json::parse(ss.str());
}

inline void write_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << dump(j);
}

}  // namespace etrs::io

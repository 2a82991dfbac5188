#pragma once

// Mesh exchange (JSON), deterministic CSV and small self-contained SVG plots.

#include "lmcf/lagrangian.hpp"
#include "lmcf/types.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lmcf {

using json = nlohmann::ordered_json;

/// Shortest round-trip representation is not needed; %.17g is exact and
/// reproducible across runs.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(const std::vector<double>& row) {
    if (row.size() != header_.size()) throw Error("CSV row width does not match header");
    rows_.push_back(row);
  }

  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    for (size_t k = 0; k < header_.size(); ++k) out += (k ? "," : "") + header_[k];
    out += '\n';
    for (const auto& r : rows_) {
      for (size_t k = 0; k < r.size(); ++k) out += (k ? "," : "") + format_double(r[k]);
      out += '\n';
    }
    return out;
  }

  void write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

// ---------------------------------------------------------------------------
// Families

/// Regenerate an analytic family by name. T comes from the params (Tx, Ty).
inline DiscreteLagrangian make_family(const Family& fam, Index nu, Index nv = 0, bool with_jets = true) {
  auto get = [&](const std::string& key, double fallback) {
    const auto it = fam.params.find(key);
    return it == fam.params.end() ? fallback : it->second;
  };
  if (fam.name == "circle")
    return circle(get("r", 1.0), nu, with_jets, Eigen::Vector2d(get("cx", 0.0), get("cy", 0.0)));
  if (fam.name == "line")
    return line(get("angle", 0.0), get("half_length", 1.0), nu, with_jets, Eigen::Vector2d(get("ox", 0.0), get("oy", 0.0)));
  if (fam.name == "grim_reaper")
    return grim_reaper(Eigen::Vector2d(get("Tx", 0.0), get("Ty", -1.0)), get("half_width", 1.2), nu, with_jets);
  if (fam.name == "product_torus")
    return product_torus(get("r1", std::sqrt(2.0)), get("r2", std::sqrt(2.0)), nu, nv > 0 ? nv : nu, with_jets);
  throw ValidationError("family", "unknown family '" + fam.name + "'");
}

inline json mesh_to_json(const DiscreteLagrangian& L) {
  json j;
  j["kind"] = std::string(to_string(L.kind()));
  j["m"] = L.m();
  j["shape"] = {L.nu(), L.is_curve() ? 1 : L.nv()};
  j["periodic"] = {L.periodic_u(), L.is_curve() ? false : L.periodic_v()};
  json verts = json::array();
  for (Index i = 0; i < L.size(); ++i) {
    json row = json::array();
    for (Index c = 0; c < L.vertices().cols(); ++c) row.push_back(L.vertices()(i, c));
    verts.push_back(std::move(row));
  }
  j["vertices"] = std::move(verts);
  if (L.family() && L.has_jets()) {
    json fam;
    fam["name"] = L.family()->name;
    json params = json::object();
    for (const auto& [k, v] : L.family()->params) params[k] = v;
    fam["params"] = std::move(params);
    j["family"] = std::move(fam);
  }
  return j;
}

inline DiscreteLagrangian mesh_from_json(const json& j) {
  auto require = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw ValidationError(key, "missing field");
    return j.at(key);
  };
  const std::string kind = require("kind").get<std::string>();
  const auto& verts = require("vertices");
  if (!verts.is_array() || verts.empty()) throw ValidationError("vertices", "must be a nonempty array");
  const Index n = static_cast<Index>(verts.size());
  const Index d = static_cast<Index>(verts.at(0).size());
  Points X(n, d);
  for (Index i = 0; i < n; ++i) {
    const auto& row = verts.at(static_cast<size_t>(i));
    if (!row.is_array() || static_cast<Index>(row.size()) != d) throw ValidationError("vertices", "ragged vertex array");
    for (Index c = 0; c < d; ++c) {
      if (!row.at(static_cast<size_t>(c)).is_number()) throw ValidationError("vertices", "non-numeric coordinate");
      X(i, c) = row.at(static_cast<size_t>(c)).get<double>();
    }
  }

  if (j.contains("family")) {
    Family fam;
    fam.name = j.at("family").at("name").get<std::string>();
    for (const auto& [k, v] : j.at("family").at("params").items()) fam.params[k] = v.get<double>();
    Index nu = n, nv = 0;
    if (j.contains("shape") && kind != "closed_curve" && kind != "open_curve") {
      nu = j.at("shape").at(0).get<Index>();
      nv = j.at("shape").at(1).get<Index>();
    }
    return make_family(fam, nu, nv, true);
  }

  try {
    if (kind == "closed_curve") return DiscreteLagrangian::closed_curve(std::move(X));
    if (kind == "open_curve") return DiscreteLagrangian::open_curve(std::move(X));
  } catch (const GeometryError& e) {
    throw ValidationError("vertices", e.what());
  }
  if (kind == "product_torus" || kind == "parametric_grid") {
    const auto& shape = require("shape");
    const auto& per = require("periodic");
    const MeshKind mk = kind == "product_torus" ? MeshKind::ProductTorus : MeshKind::ParametricGrid;
    return DiscreteLagrangian::grid(mk, std::move(X), shape.at(0).get<Index>(), shape.at(1).get<Index>(),
                                    per.at(0).get<bool>(), per.at(1).get<bool>());
  }
  throw ValidationError("kind", "unknown mesh kind '" + kind + "'");
}

inline DiscreteLagrangian read_mesh(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("mesh", "cannot open " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ValidationError("mesh", std::string("malformed JSON: ") + e.what());
  }
  return mesh_from_json(j);
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

// ---------------------------------------------------------------------------
// SVG

namespace detail {

struct Bounds {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  void add(double x, double y) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  void pad() {
    const double w = std::max(x1 - x0, 1e-12), h = std::max(y1 - y0, 1e-12);
    x0 -= 0.05 * w;
    x1 += 0.05 * w;
    y0 -= 0.05 * h;
    y1 += 0.05 * h;
  }
};

inline const char* palette(size_t k) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  return colors[k % 7];
}

}  // namespace detail

/// Overlay of planar curves (first two coordinates), equal aspect ratio.
inline std::string svg_curves(const std::vector<Points>& curves, const std::vector<bool>& closed,
                              const std::string& title) {
  detail::Bounds b;
  for (const auto& c : curves)
    for (Index i = 0; i < c.rows(); ++i) b.add(c(i, 0), c(i, 1));
  b.pad();
  const double size = 480.0;
  const double scale = size / std::max(b.x1 - b.x0, b.y1 - b.y0);
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"540\" viewBox=\"0 0 520 540\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"20\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  for (size_t k = 0; k < curves.size(); ++k) {
    s << "<" << (closed[k] ? "polygon" : "polyline") << " fill=\"none\" stroke=\"" << detail::palette(k)
      << "\" stroke-width=\"1.2\" points=\"";
    for (Index i = 0; i < curves[k].rows(); ++i) {
      const double x = 20.0 + (curves[k](i, 0) - b.x0) * scale;
      const double y = 40.0 + size - (curves[k](i, 1) - b.y0) * scale;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3f,%.3f ", x, y);
      s << buf;
    }
    s << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

/// Line plot of one or more series sharing an x axis.
inline std::string svg_series(const std::vector<double>& x, const std::vector<std::vector<double>>& ys,
                              const std::vector<std::string>& labels, const std::string& title, bool log_y = false) {
  detail::Bounds b;
  auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
  for (const auto& y : ys)
    for (size_t i = 0; i < x.size() && i < y.size(); ++i)
      if (std::isfinite(ty(y[i]))) b.add(x[i], ty(y[i]));
  if (b.x0 > b.x1) b.add(0, 0);
  b.pad();
  const double W = 560, H = 320, L = 60, T = 40;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"20\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W << "\" height=\"" << H
    << "\" fill=\"none\" stroke=\"#888\"/>\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.4g", log_y ? std::pow(10.0, b.y1) : b.y1);
  s << "<text x=\"4\" y=\"" << T + 10 << "\" font-family=\"sans-serif\" font-size=\"10\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.4g", log_y ? std::pow(10.0, b.y0) : b.y0);
  s << "<text x=\"4\" y=\"" << T + H << "\" font-family=\"sans-serif\" font-size=\"10\">" << buf << "</text>\n";
  for (size_t k = 0; k < ys.size(); ++k) {
    s << "<polyline fill=\"none\" stroke=\"" << detail::palette(k) << "\" stroke-width=\"1.2\" points=\"";
    for (size_t i = 0; i < x.size() && i < ys[k].size(); ++i) {
      const double v = ty(ys[k][i]);
      if (!std::isfinite(v)) continue;
      std::snprintf(buf, sizeof buf, "%.3f,%.3f ", L + (x[i] - b.x0) / (b.x1 - b.x0) * W,
                    T + H - (v - b.y0) / (b.y1 - b.y0) * H);
      s << buf;
    }
    s << "\"/>\n";
    if (k < labels.size())
      s << "<text x=\"" << L + 10 << "\" y=\"" << T + 16 + 14 * k << "\" fill=\"" << detail::palette(k)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << labels[k] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace lmcf

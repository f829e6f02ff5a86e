#include "moo/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace moo::io {

namespace {

using nlohmann::json;

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view field) {
  double x = 0.0;
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, x);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw FormatError("trajectory csv: bad number '" + std::string(field) + "'");
  }
  return x;
}

std::size_t parse_index(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 0) {
    throw FormatError(std::string("dataset json: field '") + key +
                      "' must be a non-negative integer");
  }
  return j[key].get<std::size_t>();
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trajectory_csv_header(std::size_t dim, std::size_t num_objectives) {
  std::string h = "step";
  for (std::size_t i = 0; i < dim; ++i) h += ",theta_" + std::to_string(i);
  for (const char* prefix : {"loss_", "w_", "gnorm_"}) {
    for (std::size_t i = 0; i < num_objectives; ++i) h += "," + std::string(prefix) + std::to_string(i);
  }
  h += ",dnorm";
  return h;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::size_t d = 0;
  std::size_t k = 0;
  if (!traj.records.empty()) {
    d = traj.records.front().params.size();
    k = traj.records.front().losses.size();
  }
  std::string out = trajectory_csv_header(d, k) + "\n";
  for (const auto& r : traj.records) {
    out += std::to_string(r.step);
    auto put = [&out](std::span<const double> xs) {
      for (double x : xs) {
        out += ',';
        out += format_double(x);
      }
    };
    put(r.params);
    put(r.losses.values);
    put(r.weights.weights);
    put(r.grad_norms);
    out += ',';
    out += format_double(r.direction_norm);
    out += '\n';
  }
  return out;
}

Trajectory trajectory_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trajectory csv: missing header");
  const auto header = split(line, ',');
  std::size_t d = 0;
  std::size_t k = 0;
  for (auto h : header) {
    if (h.starts_with("theta_")) ++d;
    if (h.starts_with("loss_")) ++k;
  }
  if (header.empty() || header.front() != "step" || header.size() != 1 + d + 3 * k + 1 ||
      line != trajectory_csv_header(d, k)) {
    throw FormatError("trajectory csv: unexpected header");
  }

  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) throw FormatError("trajectory csv: wrong column count");
    TrajectoryRecord r;
    std::int64_t step = 0;
    const auto res = std::from_chars(f[0].data(), f[0].data() + f[0].size(), step);
    if (res.ec != std::errc{}) throw FormatError("trajectory csv: bad step");
    r.step = step;
    std::size_t c = 1;
    auto take = [&](std::size_t n) {
      Vector v(n);
      for (auto& x : v) x = parse_double(f[c++]);
      return v;
    };
    r.params = take(d);
    r.losses.values = take(k);
    r.weights.weights = take(k);
    r.weights.simplex = r.weights.on_simplex();
    r.grad_norms = take(k);
    r.direction_norm = parse_double(f[c]);
    traj.records.push_back(std::move(r));
  }
  return traj;
}

std::string dataset_to_json(const dpo::PreferenceDataset& dataset) {
  json pairs = json::array();
  for (const auto& p : dataset.pairs) {
    pairs.push_back({{"x", p.prompt}, {"yw", p.chosen}, {"yl", p.rejected}});
  }
  json doc = {{"objective", dataset.objective}, {"pairs", std::move(pairs)}};
  return doc.dump() + "\n";
}

dpo::PreferenceDataset dataset_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset json: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("pairs") || !doc["pairs"].is_array()) {
    throw FormatError("dataset json: expected an object with a 'pairs' array");
  }
  for (const auto& [key, _] : doc.items()) {
    if (key != "objective" && key != "pairs") {
      throw FormatError("dataset json: unknown key '" + key + "'");
    }
  }
  dpo::PreferenceDataset ds;
  ds.objective = parse_index(doc, "objective");
  for (const auto& p : doc["pairs"]) {
    if (!p.is_object() || p.size() != 3) {
      throw FormatError("dataset json: each pair needs exactly x, yw, yl");
    }
    ds.pairs.push_back({parse_index(p, "x"), parse_index(p, "yw"), parse_index(p, "yl")});
  }
  return ds;
}

std::string trajectory_svg(const std::vector<SvgSeries>& series, std::pair<double, double> start,
                           std::pair<double, double> optimum) {
  static constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  double lo_x = -1.2, hi_x = 1.2, lo_y = -1.2, hi_y = 1.2;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      lo_x = std::min(lo_x, x);
      hi_x = std::max(hi_x, x);
      lo_y = std::min(lo_y, y);
      hi_y = std::max(hi_y, y);
    }
  }
  const double size = 600.0;
  const double pad = 40.0;
  const double span = std::max(hi_x - lo_x, hi_y - lo_y);
  const double scale = (size - 2 * pad) / span;
  auto px = [&](double x) { return pad + (x - lo_x) * scale; };
  auto py = [&](double y) { return size - pad - (y - lo_y) * scale; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line class=\"axis\" x1=\"" << num(px(lo_x)) << "\" y1=\"" << num(py(0)) << "\" x2=\""
      << num(px(lo_x + span)) << "\" y2=\"" << num(py(0)) << "\" stroke=\"#bbb\"/>\n";
  out << "<line class=\"axis\" x1=\"" << num(px(0)) << "\" y1=\"" << num(py(lo_y)) << "\" x2=\""
      << num(px(0)) << "\" y2=\"" << num(py(lo_y + span)) << "\" stroke=\"#bbb\"/>\n";
  out << "<circle class=\"unit-circle\" cx=\"" << num(px(0)) << "\" cy=\"" << num(py(0))
      << "\" r=\"" << num(scale) << "\" fill=\"none\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    out << "<polyline class=\"trajectory\" data-label=\"" << series[i].label
        << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const auto& [x, y] : series[i].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!first) out << ' ';
      out << num(px(x)) << ',' << num(py(y));
      first = false;
    }
    out << "\"/>\n";
    out << "<text x=\"" << num(pad) << "\" y=\"" << num(pad + 16.0 * static_cast<double>(i))
        << "\" fill=\"" << color << "\" font-size=\"13\">" << series[i].label << "</text>\n";
  }
  out << "<circle class=\"start\" cx=\"" << num(px(start.first)) << "\" cy=\""
      << num(py(start.second)) << "\" r=\"4\" fill=\"black\"/>\n";
  out << "<text x=\"" << num(px(start.first) + 6) << "\" y=\"" << num(py(start.second) + 4)
      << "\" font-size=\"12\">start</text>\n";
  out << "<circle class=\"optimum\" cx=\"" << num(px(optimum.first)) << "\" cy=\""
      << num(py(optimum.second)) << "\" r=\"5\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << num(px(optimum.first) + 6) << "\" y=\"" << num(py(optimum.second) - 6)
      << "\" font-size=\"12\">optimum</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace moo::io

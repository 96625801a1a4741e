#pragma once

// Standalone SVG charts for delay_boxes.csv (box), sweep_summary.csv (bars) and
// load_cdf.csv (cdf). Output bytes depend only on the input table.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cecc::plot {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV");
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto r = split_csv_line(line);
    if (r.size() != t.header.size()) throw SchemaError("row with " + std::to_string(r.size()) + " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(r));
  }
  return t;
}

enum class Kind { Box, Bars, Cdf };

inline Kind parse_kind(const std::string& s) {
  if (s == "box") return Kind::Box;
  if (s == "bars") return Kind::Bars;
  if (s == "cdf") return Kind::Cdf;
  throw std::invalid_argument("unknown plot kind '" + s + "' (expected box, bars or cdf)");
}

inline std::vector<std::string> expected_columns(Kind k) {
  switch (k) {
    case Kind::Box: return {"flow_id", "min", "q1", "median", "q3", "max", "outliers"};
    case Kind::Bars: return {"cc", "flows", "satisfaction_rate", "max_bin_bytes", "median_p9999_delay_us"};
    case Kind::Cdf: return {"bin_bytes", "cum_fraction"};
  }
  return {};
}

inline void check_schema(const CsvTable& t, Kind k) {
  const auto want = expected_columns(k);
  if (t.header != want) {
    std::string exp;
    for (std::size_t i = 0; i < want.size(); ++i) exp += (i ? "," : "") + want[i];
    throw SchemaError("CSV header does not match; expected columns: " + exp);
  }
  if (t.rows.empty()) throw SchemaError("CSV has no data rows");
}

inline double num(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw SchemaError("not a number: '" + s + "'");
  }
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  if (std::fabs(v) >= 1e6)
    std::snprintf(buf, sizeof buf, "%.3gM", v / 1e6);
  else if (std::fabs(v) >= 1e3)
    std::snprintf(buf, sizeof buf, "%.4gk", v / 1e3);
  else
    std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

/// Plot frame with linear axes; x/y map data to pixel space.
class Canvas {
 public:
  static constexpr double W = 720, H = 440, L = 80, R = 20, T = 40, B = 60;

  Canvas(std::string title, double x0, double x1, double y0, double y1) : x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
    if (!(x1_ > x0_)) x1_ = x0_ + 1;
    if (!(y1_ > y0_)) y1_ = y0_ + 1;
    os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os_ << "<text x=\"" << fmt(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  }

  double x(double v) const { return L + (v - x0_) / (x1_ - x0_) * (W - L - R); }
  double y(double v) const { return H - B - (v - y0_) / (y1_ - y0_) * (H - T - B); }

  void axes(const std::string& xlabel, const std::string& ylabel, bool numeric_x = true) {
    os_ << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(H - B) << "\" x2=\"" << fmt(W - R) << "\" y2=\"" << fmt(H - B) << "\" stroke=\"black\"/>\n";
    os_ << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(T) << "\" x2=\"" << fmt(L) << "\" y2=\"" << fmt(H - B) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double v = y0_ + (y1_ - y0_) * i / 5.0;
      os_ << "<line x1=\"" << fmt(L - 4) << "\" y1=\"" << fmt(y(v)) << "\" x2=\"" << fmt(L) << "\" y2=\"" << fmt(y(v)) << "\" stroke=\"black\"/>\n";
      os_ << "<text x=\"" << fmt(L - 7) << "\" y=\"" << fmt(y(v) + 4) << "\" text-anchor=\"end\">" << fmt_tick(v) << "</text>\n";
      if (numeric_x) {
        const double u = x0_ + (x1_ - x0_) * i / 5.0;
        os_ << "<text x=\"" << fmt(x(u)) << "\" y=\"" << fmt(H - B + 16) << "\" text-anchor=\"middle\">" << fmt_tick(u) << "</text>\n";
      }
    }
    os_ << "<text x=\"" << fmt((L + W - R) / 2) << "\" y=\"" << fmt(H - 14) << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    os_ << "<text x=\"18\" y=\"" << fmt((T + H - B) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << fmt((T + H - B) / 2)
        << ")\">" << ylabel << "</text>\n";
  }

  std::ostringstream& out() { return os_; }

  std::string finish() {
    os_ << "</svg>\n";
    return os_.str();
  }

 private:
  double x0_, x1_, y0_, y1_;
  std::ostringstream os_;
};

inline const char* palette(std::size_t i) {
  static const char* c[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return c[i % 6];
}

inline std::string render_box(const CsvTable& t) {
  struct Row {
    std::string id;
    double v[5];
    std::set<double> out;
  };
  std::vector<Row> rows;
  double lo = 1e300, hi = -1e300;
  for (const auto& r : t.rows) {
    Row x;
    x.id = r[0];
    for (int i = 0; i < 5; ++i) x.v[i] = num(r[static_cast<std::size_t>(i) + 1]);
    std::stringstream ss(r[6]);
    for (std::string tok; std::getline(ss, tok, ';');)
      if (!tok.empty()) x.out.insert(num(tok));
    lo = std::min(lo, x.v[0]);
    hi = std::max(hi, x.v[4]);
    for (double o : x.out) lo = std::min(lo, o), hi = std::max(hi, o);
    rows.push_back(std::move(x));
  }
  const double pad = (hi - lo) * 0.05 + 1;
  Canvas c("Per-packet one-way delay by flow", 0, static_cast<double>(rows.size()), std::max(0.0, lo - pad), hi + pad);
  c.axes("flow", "one-way delay (us)", false);
  auto& os = c.out();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double cx = c.x(static_cast<double>(i) + 0.5), hw = std::min(30.0, (c.x(1) - c.x(0)) * 0.3);
    os << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(c.y(r.v[0])) << "\" x2=\"" << fmt(cx) << "\" y2=\"" << fmt(c.y(r.v[4])) << "\" stroke=\"black\"/>\n";
    for (int k : {0, 4})
      os << "<line x1=\"" << fmt(cx - hw / 2) << "\" y1=\"" << fmt(c.y(r.v[k])) << "\" x2=\"" << fmt(cx + hw / 2) << "\" y2=\"" << fmt(c.y(r.v[k]))
         << "\" stroke=\"black\"/>\n";
    os << "<rect x=\"" << fmt(cx - hw) << "\" y=\"" << fmt(c.y(r.v[3])) << "\" width=\"" << fmt(2 * hw) << "\" height=\""
       << fmt(std::max(0.0, c.y(r.v[1]) - c.y(r.v[3]))) << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << fmt(cx - hw) << "\" y1=\"" << fmt(c.y(r.v[2])) << "\" x2=\"" << fmt(cx + hw) << "\" y2=\"" << fmt(c.y(r.v[2]))
       << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    for (double o : r.out) os << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(c.y(o)) << "\" r=\"2.5\" fill=\"none\" stroke=\"#d62728\"/>\n";
    os << "<text x=\"" << fmt(cx) << "\" y=\"" << fmt(Canvas::H - Canvas::B + 16) << "\" text-anchor=\"middle\">" << r.id << "</text>\n";
  }
  return c.finish();
}

inline std::string render_bars(const CsvTable& t) {
  std::vector<std::string> ccs;
  std::map<int, std::map<std::string, double>> by_flows;
  for (const auto& r : t.rows) {
    if (std::find(ccs.begin(), ccs.end(), r[0]) == ccs.end()) ccs.push_back(r[0]);
    const double v = r[2] == "nan" ? 0.0 : num(r[2]);
    by_flows[static_cast<int>(num(r[1]))][r[0]] = v;
  }
  Canvas c("Satisfaction rate by flow count", 0, static_cast<double>(by_flows.size()), 0, 1);
  c.axes("concurrent flows", "satisfaction rate (fraction of UEs)", false);
  auto& os = c.out();
  std::size_t g = 0;
  for (const auto& [n, vals] : by_flows) {
    const double gx0 = c.x(static_cast<double>(g)), gw = c.x(1) - c.x(0);
    const double bw = gw * 0.8 / static_cast<double>(ccs.size());
    for (std::size_t k = 0; k < ccs.size(); ++k) {
      const auto it = vals.find(ccs[k]);
      if (it == vals.end()) continue;
      const double bx = gx0 + gw * 0.1 + bw * static_cast<double>(k);
      os << "<rect x=\"" << fmt(bx) << "\" y=\"" << fmt(c.y(it->second)) << "\" width=\"" << fmt(bw * 0.9) << "\" height=\""
         << fmt(c.y(0) - c.y(it->second)) << "\" fill=\"" << palette(k) << "\"/>\n";
    }
    os << "<text x=\"" << fmt(gx0 + gw / 2) << "\" y=\"" << fmt(Canvas::H - Canvas::B + 16) << "\" text-anchor=\"middle\">" << n << "</text>\n";
    ++g;
  }
  for (std::size_t k = 0; k < ccs.size(); ++k) {
    const double ly = Canvas::T + 4 + 16.0 * static_cast<double>(k);
    os << "<rect x=\"" << fmt(Canvas::W - 110) << "\" y=\"" << fmt(ly) << "\" width=\"10\" height=\"10\" fill=\"" << palette(k) << "\"/>\n";
    os << "<text x=\"" << fmt(Canvas::W - 95) << "\" y=\"" << fmt(ly + 9) << "\">" << ccs[k] << "</text>\n";
  }
  return c.finish();
}

inline std::string render_cdf(const CsvTable& t) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : t.rows) pts.emplace_back(num(r[0]), num(r[1]));
  std::sort(pts.begin(), pts.end());
  const double xmax = pts.back().first;
  Canvas c("CDF of per-bin egress load", 0, xmax > 0 ? xmax * 1.05 : 1, 0, 1);
  c.axes("bytes per bin", "cumulative fraction of bins");
  auto& os = c.out();
  os << "<path d=\"M" << fmt(c.x(0)) << ' ' << fmt(c.y(0));
  double prev = 0;
  for (const auto& [x, f] : pts) {
    os << " L" << fmt(c.x(x)) << ' ' << fmt(c.y(prev)) << " L" << fmt(c.x(x)) << ' ' << fmt(c.y(f));
    prev = f;
  }
  os << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  return c.finish();
}

inline std::string render(const std::string& csv_text, Kind kind) {
  const CsvTable t = parse_csv(csv_text);
  check_schema(t, kind);
  switch (kind) {
    case Kind::Box: return render_box(t);
    case Kind::Bars: return render_bars(t);
    case Kind::Cdf: return render_cdf(t);
  }
  return {};
}

}  // namespace cecc::plot

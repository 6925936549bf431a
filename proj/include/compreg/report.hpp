// Output artefacts: RFC-4180 CSV traces, key-value summaries and a
// self-contained SVG line plot.
#pragma once

#include "compreg/config.hpp"
#include "compreg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace compreg {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// CSV.

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

/// 17 significant digits; missing values become empty fields.
inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_field(fields[i]);
  out << "\r\n";
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ReportError("csv has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
  bool has(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  auto end_record = [&] {
    record.push_back(field);
    field.clear();
    if (t.header.empty()) t.header = std::move(record);
    else t.rows.push_back(std::move(record));
    record.clear();
    any = false;
  };
  char ch;
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      record.push_back(field);
      field.clear();
      any = true;
    } else if (ch == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      if (any || !field.empty()) end_record();
    } else {
      field += ch;
      any = true;
    }
  }
  if (quoted) throw ReportError("unterminated quoted field");
  if (any || !field.empty()) end_record();
  if (t.header.empty()) throw ReportError("csv has no header row");
  for (const auto& r : t.rows)
    if (r.size() != t.header.size()) throw ReportError("csv row width differs from header");
  return t;
}

inline std::vector<std::string> trace_header(int dimension) {
  std::vector<std::string> h = {"k", "agent"};
  if (dimension == 1) h.push_back("x");
  else
    for (int j = 1; j <= dimension; ++j) h.push_back("x_" + std::to_string(j));
  for (const char* name : {"f_loss", "network_loss", "V", "sc_regret", "dc_regret", "consensus_residual",
                           "lemma12_envelope", "corollary1_value", "corollary1_envelope"})
    h.push_back(name);
  return h;
}

inline void write_trace(std::ostream& out, const std::vector<TraceRow>& rows, int dimension) {
  write_csv_row(out, trace_header(dimension));
  std::vector<std::string> f;
  for (const auto& r : rows) {
    f.clear();
    f.push_back(std::to_string(r.k));
    f.push_back(std::to_string(r.agent + 1));
    for (int j = 0; j < r.x.size(); ++j) f.push_back(csv_number(r.x(j)));
    for (double v : {r.f_loss, r.network_loss, r.V, r.sc_regret, r.dc_regret, r.consensus_residual,
                     r.lemma12_envelope, r.corollary1_value, r.corollary1_envelope})
      f.push_back(csv_number(v));
    write_csv_row(out, f);
  }
}

inline void write_centers(std::ostream& out, const LossSequence& seq) {
  const int n = seq.domain().dimension();
  std::vector<std::string> h = {"k", "agent"};
  if (n == 1) h.push_back("center");
  else
    for (int j = 1; j <= n; ++j) h.push_back("center_" + std::to_string(j));
  write_csv_row(out, h);
  for (std::size_t k = 1; k <= seq.horizon(); ++k)
    for (std::size_t i = 0; i < seq.n_agents(); ++i) {
      std::vector<std::string> f = {std::to_string(k), std::to_string(i + 1)};
      for (int j = 0; j < n; ++j) f.push_back(csv_number(seq.at(k, i).center(j)));
      write_csv_row(out, f);
    }
}

// ---------------------------------------------------------------------------
// Summaries.

class Summary {
 public:
  void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
  void set(const std::string& key, double value) {
    if (!std::isnan(value)) set(key, format_double(value));
  }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    throw ReportError("summary has no key '" + key + "'");
  }
  void write(std::ostream& out) const {
    for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline void add_checks(Summary& s, const std::map<std::string, EnvelopeTally>& checks) {
  for (const auto& [name, t] : checks) {
    s.set("check." + name + ".evaluated", t.checked);
    s.set("check." + name + ".violations", t.violations);
    s.set("check." + name + ".worst_excess", t.worst_excess);
  }
}

inline Summary run_summary(const ExperimentResult& ex) {
  const auto& c = ex.config;
  Summary s;
  s.set("status", ex.ok() ? std::string("ok") : "failed: " + ex.runs.back().error);
  s.set("algorithm", to_string(c.algorithm));
  s.set("topology", c.topology);
  s.set("agents", c.agents);
  s.set("horizon", c.horizon);
  s.set("ensemble", ex.runs.size());
  if (ex.runs.empty()) return s;
  const auto& r0 = ex.runs.front();
  s.set("lambda", r0.lambda);
  s.set("path_variation", r0.path_variation);
  if (c.algorithm == Algorithm::dinoco) {
    s.set("eta", r0.step.eta);
    s.set("oracle.grid_points", r0.oracle.grid_points);
    s.set("oracle.rho", r0.oracle.rho);
    s.set("oracle.beta", r0.oracle.beta);
  } else {
    s.set("schedule", c.schedule);
    s.set("step.base", r0.step.schedule.base);
    s.set("step.G", r0.step.G);
  }
  const auto sc = ex.sc(), dc = ex.dc();
  s.set("sc_regret.mean", sc.mean);
  s.set("sc_regret.stderr", sc.stderr_);
  s.set("dc_regret.mean", dc.mean);
  s.set("dc_regret.stderr", dc.stderr_);
  double G_run = 0.0, recompute = 0.0, min_net = std::numeric_limits<double>::infinity();
  for (const auto& r : ex.runs) {
    G_run = std::max(G_run, r.G_run);
    recompute = std::max(recompute, r.recomputation_error);
    min_net = std::min(min_net, r.min_network_loss);
  }
  s.set("G_run", G_run);
  s.set("ledger.recomputation_error", recompute);
  s.set("network_loss.min", min_net);
  s.set("network_loss_l1.mean", ex.stat([](const RunResult& r) { return r.network_l1_total; }).mean);
  s.set("movement_l1.mean", ex.movement().mean);
  if (!r0.envelope_name.empty()) {
    s.set("envelope.name", r0.envelope_name);
    s.set("envelope.regret", r0.envelope_regret);
    s.set("envelope.G", r0.G_envelope);
    s.set("envelope.value", r0.envelope);
  }
  if (!std::isnan(r0.zeta_surrogate)) {
    s.set("zeta_surrogate", r0.zeta_surrogate);
    s.set("zeta_envelope", r0.zeta_envelope);
    s.set("zeta_envelope.holds", dc.mean <= r0.zeta_envelope);
  } else if (c.algorithm == Algorithm::congd) {
    s.set("zeta_surrogate", "not computable (agents stayed in consensus)");
  }
  add_checks(s, ex.checks());
  s.set("envelope_violations", ex.violations());
  if (c.algorithm == Algorithm::dinoco) {
    std::size_t audits = 0, passed = 0;
    for (const auto& r : ex.runs) {
      audits += r.audits.size();
      passed += r.audits_passed();
    }
    s.set("oracle.audits", audits);
    s.set("oracle.audits_passed", passed);
    if (audits > 0) s.set("oracle.audit_pass_rate", static_cast<double>(passed) / static_cast<double>(audits));
  }
  return s;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& sw) {
  write_csv_row(out, {"K", "sc_mean", "sc_stderr", "dc_mean", "dc_stderr", "envelope", "zeta_envelope",
                      "path_variation", "step_base", "movement_mean", "violations", "audits", "audits_passed"});
  for (const auto& p : sw.points)
    write_csv_row(out, {std::to_string(p.K), csv_number(p.sc.mean), csv_number(p.sc.stderr_), csv_number(p.dc.mean),
                        csv_number(p.dc.stderr_), csv_number(p.envelope), csv_number(p.zeta_envelope),
                        csv_number(p.path_variation), csv_number(p.step_base), csv_number(p.movement.mean),
                        std::to_string(p.violations), std::to_string(p.audits), std::to_string(p.audits_passed)});
}

inline Summary sweep_summary(const ExperimentConfig& c, const SweepResult& sw) {
  Summary s;
  s.set("status", sw.error.empty() ? std::string("ok") : "failed: " + sw.error);
  s.set("algorithm", to_string(c.algorithm));
  s.set("topology", c.topology);
  s.set("agents", c.agents);
  s.set("ensemble", c.ensemble);
  std::string ks;
  for (const auto& p : sw.points) ks += (ks.empty() ? "" : ",") + std::to_string(p.K);
  s.set("k_values", ks);
  if (!sw.error.empty()) return s;
  s.set("slope.method", sw.slope_method);
  s.set("slope.sc_regret", sw.sc_slope);
  s.set("slope.dc_regret", sw.dc_slope);
  s.set("slope.movement_l1", sw.movement_slope);
  s.set("sc_regret.verdict", SweepResult::sublinear(sw.sc_slope) ? "sublinear" : "not sublinear");
  s.set("dc_regret.verdict", SweepResult::sublinear(sw.dc_slope) ? "sublinear" : "not sublinear");
  std::size_t v = 0;
  for (const auto& p : sw.points) v += p.violations;
  s.set("envelope_violations", v);
  return s;
}

inline Summary dsgd_summary(const ExperimentConfig& c, const DsgdResult& d) {
  Summary s;
  s.set("status", d.ok() ? std::string("ok") : "failed: " + d.runs.back().run.error);
  s.set("mode", "dsgd");
  s.set("topology", c.topology);
  s.set("agents", c.agents);
  s.set("horizon", c.horizon);
  s.set("samples_per_agent", c.dsgd_samples);
  s.set("ensemble", d.runs.size());
  s.set("lambda", d.lambda);
  s.set("alpha", d.alpha);
  s.set("c", d.c);
  s.set("G", d.G);
  s.set("gap.mean", d.gap.mean);
  s.set("gap.stderr", d.gap.stderr_);
  s.set("envelope.dsgd_gap", d.envelope);
  bool jensen = true, within = true;
  for (const auto& r : d.runs) {
    jensen = jensen && r.jensen;
    within = within && r.gap <= d.envelope;
  }
  s.set("gap.within_envelope", within);
  s.set("jensen.holds", jensen);
  if (!d.runs.empty()) {
    s.set("objective.at_average", d.runs.front().objective_at_average);
    s.set("objective.minimum", d.runs.front().minimum);
    s.set("objective.mean_along_run", d.runs.front().mean_objective);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Files.

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ReportError("cannot write '" + p.string() + "'");
  return out;
}

inline std::string trace_name(const ExperimentResult& ex, std::size_t e) {
  return ex.config.ensemble == 1 ? "trace.csv" : "trace_seed" + std::to_string(ex.runs[e].seed) + ".csv";
}

inline void write_experiment(const ExperimentResult& ex, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  open_output(dir / "config.txt") << serialize_config(ex.config);
  for (std::size_t e = 0; e < ex.runs.size(); ++e) {
    auto out = open_output(dir / trace_name(ex, e));
    write_trace(out, ex.runs[e].rows, ex.config.loss.dimension);
  }
  if (ex.config.dump_centers) {
    ExperimentConfig c = ex.config;
    SequenceParams p = c.loss;
    p.horizon = c.horizon;
    p.n_agents = c.agents;
    auto out = open_output(dir / "centers.csv");
    write_centers(out, make_drifting_sequence(p, make_domain(c)));
  }
  auto out = open_output(dir / "summary.txt");
  run_summary(ex).write(out);
}

// ---------------------------------------------------------------------------
// SVG.

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string num(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(v);
  return t;
}

}  // namespace detail

/// Line plot; log axes take base-10 logs of the data (non-positive values are
/// dropped on a log axis).
inline std::string svg_plot(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                            const std::string& ylabel, bool log_x, bool log_y) {
  const double W = 720, H = 460, L = 80, R = 170, T = 40, B = 60;
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  auto usable = [&](std::pair<double, double> p) {
    return std::isfinite(p.first) && std::isfinite(p.second) && (!log_x || p.first > 0) && (!log_y || p.second > 0);
  };
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (const auto& p : s.points)
      if (usable(p)) {
        x0 = std::min(x0, tx(p.first));
        x1 = std::max(x1, tx(p.first));
        y0 = std::min(y0, ty(p.second));
        y1 = std::max(y1, ty(p.second));
      }
  if (x0 > x1) throw ReportError("nothing to plot");
  if (x1 - x0 < 1e-12) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.04 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << (L + (W - L - R) / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::svg_escape(title) << "</text>\n"
    << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << (W - L - R) << "\" height=\"" << (H - T - B)
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  auto label = [](double v, bool log) { return log ? "1e" + detail::num(v, 3) : detail::num(v, 4); };
  auto axis_ticks = [](double lo, double hi, bool log) {
    if (log && hi - lo >= 1.0) {
      std::vector<double> t;
      for (double v = std::ceil(lo); v <= hi; v += 1.0) t.push_back(v);
      return t;
    }
    return detail::linear_ticks(lo, hi);
  };
  for (double v : axis_ticks(x0, x1, log_x)) {
    o << "<line x1=\"" << px(v) << "\" y1=\"" << (H - B) << "\" x2=\"" << px(v) << "\" y2=\"" << (H - B + 5)
      << "\" stroke=\"black\"/>\n<text x=\"" << px(v) << "\" y=\"" << (H - B + 18) << "\" text-anchor=\"middle\">"
      << label(v, log_x) << "</text>\n";
  }
  for (double v : axis_ticks(y0, y1, log_y)) {
    o << "<line x1=\"" << (L - 5) << "\" y1=\"" << py(v) << "\" x2=\"" << L << "\" y2=\"" << py(v)
      << "\" stroke=\"black\"/>\n<text x=\"" << (L - 8) << "\" y=\"" << (py(v) + 4) << "\" text-anchor=\"end\">"
      << label(v, log_y) << "</text>\n";
  }
  o << "<text x=\"" << (L + (W - L - R) / 2) << "\" y=\"" << (H - 18) << "\" text-anchor=\"middle\">"
    << detail::svg_escape(xlabel) << "</text>\n"
    << "<text transform=\"translate(20," << (T + (H - T - B) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << detail::svg_escape(ylabel) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* col = colors[si % 6];
    std::string pts;
    std::size_t count = 0;
    for (const auto& p : series[si].points)
      if (usable(p)) {
        pts += detail::num(px(tx(p.first)), 7) + "," + detail::num(py(ty(p.second)), 7) + " ";
        ++count;
      }
    if (count == 0) continue;
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.8\" points=\"" << pts << "\"/>\n";
    if (count <= 20)
      for (const auto& p : series[si].points)
        if (usable(p))
          o << "<circle cx=\"" << detail::num(px(tx(p.first)), 7) << "\" cy=\"" << detail::num(py(ty(p.second)), 7)
            << "\" r=\"3\" fill=\"" << col << "\"/>\n";
    const double ly = T + 16 + 20 * static_cast<double>(si);
    o << "<line x1=\"" << (W - R + 12) << "\" y1=\"" << ly << "\" x2=\"" << (W - R + 36) << "\" y2=\"" << ly
      << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n<text x=\"" << (W - R + 42) << "\" y=\"" << (ly + 4)
      << "\">" << detail::svg_escape(series[si].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Plot for a trace CSV (running regrets of agent 1 against k) or a sweep
/// CSV (mean regrets and envelope against K, log-log).
inline std::string plot_csv(const CsvTable& t) {
  auto number = [](const std::string& s) { return s.empty() ? kMissing : std::stod(s); };
  if (t.has("sc_mean") && t.has("K")) {
    std::vector<Series> s = {{"SC-regret", {}}, {"DC-regret", {}}, {"envelope", {}}};
    const auto k = t.column("K"), sc = t.column("sc_mean"), dc = t.column("dc_mean"), env = t.column("envelope");
    for (const auto& r : t.rows) {
      const double K = number(r[k]);
      s[0].points.emplace_back(K, number(r[sc]));
      s[1].points.emplace_back(K, number(r[dc]));
      s[2].points.emplace_back(K, number(r[env]));
    }
    if (s[2].points.empty() || std::all_of(s[2].points.begin(), s[2].points.end(),
                                          [](auto p) { return std::isnan(p.second); }))
      s.pop_back();
    return svg_plot(s, "Regret vs horizon", "K", "regret", true, true);
  }
  if (t.has("sc_regret") && t.has("k")) {
    std::vector<Series> s = {{"SC-regret", {}}, {"DC-regret", {}}};
    const auto k = t.column("k"), a = t.column("agent"), sc = t.column("sc_regret"), dc = t.column("dc_regret");
    for (const auto& r : t.rows) {
      if (r[a] != "1") continue;
      s[0].points.emplace_back(number(r[k]), number(r[sc]));
      s[1].points.emplace_back(number(r[k]), number(r[dc]));
    }
    return svg_plot(s, "Running regret", "k", "regret", false, false);
  }
  throw ReportError("csv is neither a trace nor a sweep table");
}

}  // namespace compreg

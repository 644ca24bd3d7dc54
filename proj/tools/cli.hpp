#pragma once

// Command-line front end. Every subcommand resolves its parameters as
// defaults < preset < config file < flags, runs, and writes one table as CSV
// or JSON. run() is the whole program and is what the tests drive.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "strobomech/strobomech.hpp"

namespace strobomech::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3 };

// --- values and ranges ---------------------------------------------------------

inline double parse_number(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) throw UsageError("not a number: '" + text + "'");
  return v;
}

/// "a", "a,b,c", "a:b:Nlog", "a:b:Nlin" and comma-separated mixtures.
inline std::vector<double> parse_values(const std::string& spec) {
  std::vector<double> out;
  std::stringstream items(spec);
  std::string item;
  while (std::getline(items, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }),
               item.end());
    if (item.find(':') == std::string::npos) {
      out.push_back(parse_number(item));
      continue;
    }
    std::vector<std::string> parts;
    std::stringstream ps(item);
    std::string part;
    while (std::getline(ps, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw UsageError("range must look like a:b:Nlog or a:b:Nlin, got '" + item + "'");
    const double a = parse_number(parts[0]), b = parse_number(parts[1]);
    std::string count = parts[2];
    bool log_spaced = false;
    if (count.size() > 3 && count.substr(count.size() - 3) == "log") {
      log_spaced = true;
    } else if (!(count.size() > 3 && count.substr(count.size() - 3) == "lin")) {
      throw UsageError("range count needs a 'log' or 'lin' suffix: '" + item + "'");
    }
    count.resize(count.size() - 3);
    const double nd = parse_number(count);
    if (!(nd >= 1.0) || nd != std::floor(nd) || nd > 1e7) throw UsageError("bad range count in '" + item + "'");
    const long n = static_cast<long>(nd);
    if (log_spaced && !(a > 0.0 && b > 0.0)) throw UsageError("log range needs positive ends: '" + item + "'");
    for (long k = 0; k < n; ++k) {
      const double f = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
      double v = log_spaced ? std::pow(10.0, std::log10(a) + f * (std::log10(b) - std::log10(a))) : a + f * (b - a);
      if (k == 0) v = a;
      if (k == n - 1 && n > 1) v = b;
      out.push_back(v);
    }
  }
  if (out.empty()) throw UsageError("empty value list");
  return out;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- parameters ----------------------------------------------------------------

struct ParamSpec {
  std::string key;
  std::string default_value;
  std::string help;
};

class Params {
 public:
  void set(const std::string& key, std::string value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = std::move(value);
  }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw InternalError("unknown parameter " + key);
    return it->second;
  }

  std::vector<double> numbers(const std::string& key) const {
    try {
      return parse_values(text(key));
    } catch (const UsageError& e) {
      throw UsageError(key + ": " + e.what());
    }
  }

  double number(const std::string& key) const {
    const auto v = numbers(key);
    if (v.size() != 1) throw UsageError(key + " takes a single value");
    return v.front();
  }

  long integer(const std::string& key) const {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 9e15) throw UsageError(key + " must be an integer");
    return static_cast<long>(v);
  }

  std::string choice(const std::string& key, const std::vector<std::string>& allowed) const {
    const std::string& v = text(key);
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
      throw UsageError(key + " must be one of " + list + ", got '" + v + "'");
    }
    return v;
  }

  const std::vector<std::string>& keys() const { return order_; }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

// --- tables and writers -----------------------------------------------------------

using Cell = std::variant<double, long, std::string, bool, nlohmann::ordered_json>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

inline void dump_json(const nlohmann::ordered_json& j, std::string& out, int indent, int depth);

inline std::string cell_text(const Cell& c) {
  if (const auto* j = std::get_if<nlohmann::ordered_json>(&c)) {
    std::string s;
    dump_json(*j, s, -1, 0);
    return s;
  }
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* l = std::get_if<long>(&c)) return std::to_string(*l);
  if (const auto* b = std::get_if<bool>(&c)) return *b ? "true" : "false";
  return std::get<std::string>(c);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

/// Serializes with every double at 17 significant digits; the json library
/// would otherwise pick the shortest round-trip form. indent < 0 is compact.
inline void dump_json(const nlohmann::ordered_json& j, std::string& out, int indent, int depth) {
  const bool compact = indent < 0;
  const std::string pad(compact ? 0 : static_cast<size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(compact ? 0 : static_cast<size_t>(indent * depth), ' ');
  const std::string nl = compact ? "" : "\n";
  const std::string sep = compact ? ":" : ": ";
  switch (j.type()) {
    case nlohmann::ordered_json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{" + nl;
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += "," + nl;
        first = false;
        out += pad + nlohmann::ordered_json(k).dump() + sep;
        dump_json(v, out, indent, depth + 1);
      }
      out += nl + close_pad + "}";
      return;
    }
    case nlohmann::ordered_json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[" + nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += "," + nl;
        first = false;
        out += pad;
        dump_json(v, out, indent, depth + 1);
      }
      out += nl + close_pad + "]";
      return;
    }
    case nlohmann::ordered_json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

inline std::string dump_json(const nlohmann::ordered_json& j) {
  std::string out;
  dump_json(j, out, 2, 0);
  return out + "\n";
}

inline nlohmann::ordered_json cell_json(const Cell& c) {
  if (const auto* j = std::get_if<nlohmann::ordered_json>(&c)) return *j;
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* l = std::get_if<long>(&c)) return *l;
  if (const auto* b = std::get_if<bool>(&c)) return *b;
  return std::get<std::string>(c);
}

inline std::string write_csv(const std::string& mode, const Params& params, const Table& t) {
  std::string out = "# strobomech " + std::string(kVersion) + "\n# mode=" + mode + "\n";
  for (const auto& k : params.keys()) out += "# " + k + "=" + params.text(k) + "\n";
  for (size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + t.columns[c];
  out += "\n";
  for (const auto& row : t.rows) {
    for (size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + csv_field(cell_text(row[c]));
    out += "\n";
  }
  return out;
}

inline std::string write_json(const std::string& mode, const Params& params, const Table& t) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["mode"] = mode;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& k : params.keys()) cfg[k] = params.text(k);
  j["config"] = cfg;
  auto row_json = [&](const std::vector<Cell>& row) {
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (size_t c = 0; c < row.size(); ++c) r[t.columns[c]] = cell_json(row[c]);
    return r;
  };
  if (t.rows.size() == 1) {
    j["result"] = row_json(t.rows.front());
  } else {
    j["results"] = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) j["results"].push_back(row_json(row));
  }
  return dump_json(j);
}

// --- worker pool ----------------------------------------------------------------

inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STROBOMECH_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

/// Evaluates fn(0..n-1) on the pool; results come back in input order. If
/// several points fail, the lowest index's exception is rethrown.
template <class T>
std::vector<T> parallel_map(size_t n, const std::function<T(size_t)>& fn) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = static_cast<unsigned>(std::min<size_t>(worker_count(), std::max<size_t>(n, 1)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// --- modes -----------------------------------------------------------------------

struct RunContext {
  std::ostream* log = nullptr;
};

struct Mode {
  std::string name;
  std::string description;
  std::string default_format;
  std::vector<ParamSpec> params;
  std::function<Table(const Params&, RunContext&)> run;
};

struct Preset {
  std::string name;
  std::string mode;
  std::vector<std::pair<std::string, std::string>> values;
  std::string source;
};

inline Ordering parse_ordering(const Params& p) {
  return p.choice("order", {"measure-last", "thermal-last"}) == "measure-last" ? Ordering::MeasureLast
                                                                                 : Ordering::ThermalLast;
}

inline std::string ordering_name(Ordering o) { return o == Ordering::MeasureLast ? "measure-last" : "thermal-last"; }

inline std::vector<Cell> steady_cells(const SteadyState& s) {
  return {s.sigma_X, s.sigma_P, s.sigma_XP, squeezing_db(s.sigma_X), s.purity};
}

inline Table run_steady(const Params& p, RunContext&) {
  const auto order = parse_ordering(p);
  const auto method = p.choice("method", {"closed-form", "fixed-point", "large-q"});
  const long k = p.integer("k");
  const double r = p.number("r");
  if (method != "fixed-point" && order != Ordering::MeasureLast) {
    throw UsageError("closed-form and large-q describe the measure-last ordering; use method=fixed-point");
  }
  Table t{{"chi", "nbar", "Q", "sigma_X", "sigma_P", "sigma_XP", "squeezing_db", "purity"}, {}};
  for (double chi : p.numbers("chi"))
    for (double nb : p.numbers("nbar"))
      for (double Q : p.numbers("Q")) {
        const auto phys = PhysicalParams::from_Q(Q, nb, chi, r);
        SteadyState s;
        if (method == "closed-form") {
          s = bae_steady_exact(phys, static_cast<int>(k));
        } else if (method == "large-q") {
          if (k != 1) throw UsageError("large-q is only available for k = 1");
          s = bae_steady_largeQ(phys);
        } else {
          s = steady_fixed_point(bae_map(phys, order, static_cast<int>(k)), nb);
        }
        std::vector<Cell> row{chi, nb, Q};
        for (auto& c : steady_cells(s)) row.push_back(c);
        t.rows.push_back(std::move(row));
      }
  return t;
}

inline Table run_cooling(const Params& p, RunContext&) {
  const auto order = parse_ordering(p);
  const auto method = p.choice("method", {"fixed-point", "leading", "large-q"});
  if (method != "fixed-point" && order != Ordering::MeasureLast) {
    throw UsageError("leading and large-q describe the measure-last ordering; use method=fixed-point");
  }
  Table t{{"chi", "nbar", "Q", "sigma_X", "sigma_P", "sigma_XP", "purity", "occupation"}, {}};
  for (double chi : p.numbers("chi"))
    for (double nb : p.numbers("nbar"))
      for (double Q : p.numbers("Q")) {
        const auto phys = PhysicalParams::from_Q(Q, nb, chi);
        SteadyState s;
        if (method == "leading") {
          s = cooling_steady_leading(chi);
        } else if (method == "large-q") {
          s = cooling_steady_largeQ(phys);
        } else {
          s = steady_fixed_point(cooling_map(phys, order), nb);
        }
        t.rows.push_back({chi, nb, Q, s.sigma_X, s.sigma_P, s.sigma_XP, s.purity,
                          0.5 * (s.sigma_X + s.sigma_P) - 0.5});
      }
  return t;
}

inline Table run_pulse_coeffs(const Params& p, RunContext& ctx) {
  Table t{{"g0", "Np", "kappa", "tau", "omega", "g_ad", "chi_ad", "chi", "zeta", "nonqnd_ratio", "warnings"}, {}};
  for (double g0 : p.numbers("g0"))
    for (double np : p.numbers("Np"))
      for (double kappa : p.numbers("kappa"))
        for (double tau : p.numbers("tau"))
          for (double w : p.numbers("omega")) {
            const PulseParams pp{g0, np, kappa, tau, w};
            const auto m = magnus_coefficients(pp);
            std::string warn;
            for (const auto& s : pp.hierarchy_warnings()) {
              warn += (warn.empty() ? "" : "; ") + s;
              if (ctx.log) *ctx.log << "warning: " << s << "\n";
            }
            t.rows.push_back({g0, np, kappa, tau, w, m.g_ad, m.chi_ad, m.chi, m.zeta, m.nonqnd_ratio, warn});
          }
  return t;
}

inline Table ordering_sweep(const Params& p, bool cooling) {
  struct Point {
    double chi, Q;
    Ordering order;
  };
  std::vector<Point> pts;
  const double nb = p.number("nbar");
  for (double chi : p.numbers("chi"))
    for (Ordering o : {Ordering::ThermalLast, Ordering::MeasureLast})
      for (double Q : p.numbers("Q-range")) pts.push_back({chi, Q, o});
  const auto states = parallel_map<SteadyState>(pts.size(), [&](size_t i) {
    const auto phys = PhysicalParams::from_Q(pts[i].Q, nb, pts[i].chi);
    return steady_fixed_point(cooling ? cooling_map(phys, pts[i].order) : bae_map(phys, pts[i].order), nb);
  });
  Table t;
  if (cooling) {
    t.columns = {"chi", "Q", "ordering", "sigma_X", "sigma_P", "purity", "occupation", "asymmetry_db"};
  } else {
    t.columns = {"chi", "Q", "ordering", "sigma_X", "sigma_P", "squeezing_db", "purity"};
  }
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto& s = states[i];
    std::vector<Cell> row{pts[i].chi, pts[i].Q, ordering_name(pts[i].order), s.sigma_X, s.sigma_P};
    if (cooling) {
      row.insert(row.end(), {s.purity, 0.5 * (s.sigma_X + s.sigma_P) - 0.5,
                             10.0 * std::log10(s.sigma_P / s.sigma_X)});
    } else {
      row.insert(row.end(), {squeezing_db(s.sigma_X), s.purity});
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table run_fig2(const Params& p, RunContext&) { return ordering_sweep(p, false); }
inline Table run_fig3(const Params& p, RunContext&) { return ordering_sweep(p, true); }

inline Table run_fig4(const Params& p, RunContext& ctx) {
  struct Point {
    double np, Q;
  };
  std::vector<Point> pts;
  for (double np : p.numbers("Np"))
    for (double Q : p.numbers("Q-range")) pts.push_back({np, Q});
  const double g0 = p.number("g0"), nb = p.number("nbar"), eta = p.number("eta");
  const double kappa = p.number("kappa"), tau = p.number("tau");
  RiccatiOptions opts;
  opts.dt = p.number("dt");
  struct Out {
    PeriodicSteadyState sim;
    SteadyState largeq;
    double ideal_purity = 0.0;
    double chi = 0.0;
  };
  const auto res = parallel_map<Out>(pts.size(), [&](size_t i) {
    const OptomechParams op{{g0, pts[i].np, kappa, tau, 1.0}, pts[i].Q, nb, eta};
    op.validate();
    Out o;
    o.sim = periodic_steady_state(op, opts);
    o.largeq = extended_steady_largeQ(op);
    o.ideal_purity = ideal_qnd_purity_at(o.sim.mean_sigma_X, nb, pts[i].Q);
    o.chi = extended_chi(op.pulse);
    return o;
  });
  if (ctx.log) {
    const PulseParams pp{g0, pts.empty() ? 1.0 : pts.front().np, kappa, tau, 1.0};
    for (const auto& w : pp.hierarchy_warnings()) *ctx.log << "warning: " << w << "\n";
  }
  Table t{{"Q", "N_p", "chi", "squeezing_db_sim", "squeezing_db_largeq", "purity", "ideal_qnd_purity",
           "log_negativity", "newton_iterations", "residual"},
          {}};
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto& o = res[i];
    t.rows.push_back({pts[i].Q, pts[i].np, o.chi, o.sim.squeezing_db, squeezing_db(o.largeq.sigma_X),
                      o.sim.mean_purity, o.ideal_purity, o.sim.mean_log_negativity, o.sim.newton_iterations,
                      o.sim.residual});
  }
  return t;
}

/// {"n_modes", "mean", "cov"} with cov flattened row-major.
inline nlohmann::ordered_json state_json(const GaussianState& st) {
  nlohmann::ordered_json j;
  j["n_modes"] = st.n_modes();
  j["mean"] = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < st.mean().size(); ++i) j["mean"].push_back(st.mean()(i));
  j["cov"] = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < st.cov().rows(); ++r)
    for (Eigen::Index c = 0; c < st.cov().cols(); ++c) j["cov"].push_back(st.cov()(r, c));
  return j;
}

inline Table run_twomode(const Params& p, RunContext&) {
  const auto spacing = p.choice("spacing", {"bae", "cooling"}) == "bae" ? Spacing::Bae : Spacing::Cooling;
  TwoModeParams tp;
  tp.omega_1 = p.number("omega1");
  tp.omega_2 = p.number("omega2");
  tp.n_bar = p.number("nbar");
  tp.chi = p.number("chi");
  const double Q = p.number("Q");
  if (!(Q > 0.0)) throw DomainError("Q must be positive");
  tp.gamma = tp.omega() / Q;
  const auto css = collective_steady(tp, spacing);
  const auto st = two_mode_state(css);
  return {{"n_eff", "r_eff", "log_negativity", "is_entangled", "state"},
          {{css.n_eff, css.r_eff, log_negativity(st), is_entangled(css), state_json(st)}}};
}

inline Vector read_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open record file " + path);
  std::vector<double> ys;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected index,y");
    double idx = 0.0;
    try {
      idx = parse_number(line.substr(0, comma));
    } catch (const UsageError&) {
      if (ys.empty()) continue;  // header line
      throw;
    }
    if (idx != static_cast<double>(ys.size())) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": indices must run 0, 1, 2, ...");
    }
    std::string y = line.substr(comma + 1);
    while (!y.empty() && (y.back() == '\r' || y.back() == ' ')) y.pop_back();
    ys.push_back(parse_number(y));
  }
  return Eigen::Map<Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
}

inline Table run_retrodict(const Params& p, RunContext&) {
  const double chi = p.number("chi"), nb = p.number("nbar"), Q = p.number("Q"), prior = p.number("prior");
  const std::string record = p.text("record");
  if (!record.empty()) {
    const Vector y = read_record(record);
    const auto m = RecordModel::from_physical(static_cast<int>(y.size()), chi, nb, Q, prior);
    const auto r = solve_posterior(m, y);
    Table t{{"index", "y", "posterior_mean", "posterior_var", "weight"}, {}};
    for (int i = 0; i < m.n; ++i) {
      t.rows.push_back({static_cast<long>(i), y(i), r.posterior_mean(i), r.posterior_var_diag(i), r.weights_row1(i)});
    }
    return t;
  }
  const long n = p.integer("n"), trials = p.integer("trials"), seed = p.integer("seed");
  if (n < 2 || n > 100000000) throw UsageError("n must lie in [2, 1e8]");
  if (seed < 0) throw UsageError("seed must be >= 0");
  const auto m = RecordModel::from_physical(static_cast<int>(n), chi, nb, Q, prior);
  const std::string per_trial = p.text("per-trial");
  std::ofstream trial_out;
  if (!per_trial.empty()) {
    trial_out.open(per_trial);
    if (!trial_out) throw UsageError("cannot write " + per_trial);
    trial_out << "trial,x0,estimate\n";
  }
  TrialVisitor visit;
  if (trial_out.is_open()) {
    visit = [&](long k, double x0, double est) {
      trial_out << k << "," << format_double(x0) << "," << format_double(est) << "\n";
    };
  }
  const auto c = calibrate(m, trials, static_cast<std::uint64_t>(seed), visit);
  const auto f = variance_formulas(m);
  return {{"trials", "predicted_var0", "empirical_var0", "standard_error", "z_score", "residual_mean", "residual_var",
           "initial_var_formula", "steady_var_formula", "initial_var_limit", "steady_var_limit"},
          {{c.trials, c.predicted_var0, c.empirical_var0, c.standard_error, c.z_score, c.residual_mean,
            c.residual_var, f.initial_var, f.steady_var, variance_at(m, 1), steady_variance_exact(m)}}};
}

inline const std::vector<Mode>& modes() {
  static const std::vector<Mode> all = {
      {"steady", "backaction-evading steady state (pulses every half period)", "json",
       {{"chi", "0.1", "measurement strength (list/range allowed)"},
        {"nbar", "10", "bath occupation (list/range allowed)"},
        {"Q", "1e4", "quality factor (list/range allowed)"},
        {"r", "0", "squeezing parameter of the input pulses"},
        {"k", "1", "pulse spacing in half periods"},
        {"order", "measure-last", "measure-last | thermal-last"},
        {"method", "closed-form", "closed-form | fixed-point | large-q"}},
       run_steady},
      {"cooling", "measurement cooling steady state (pulses every quarter period)", "json",
       {{"chi", "0.1", "measurement strength (list/range allowed)"},
        {"nbar", "10", "bath occupation (list/range allowed)"},
        {"Q", "1e4", "quality factor (list/range allowed)"},
        {"order", "measure-last", "measure-last | thermal-last"},
        {"method", "fixed-point", "fixed-point | leading | large-q"}},
       run_cooling},
      {"pulse-coeffs", "pulse coefficients chi, zeta and the non-QND ratio", "json",
       {{"g0", "5e-4", "single-photon coupling / omega_m"},
        {"Np", "1e6", "photons per pulse (list/range allowed)"},
        {"kappa", "15", "cavity linewidth / omega_m"},
        {"tau", "0.3", "pulse length * omega_m"},
        {"omega", "1", "mechanical frequency"}},
       run_pulse_coeffs},
      {"fig2", "squeezing and purity vs Q for both map orderings", "csv",
       {{"chi", "0.05,0.1,0.5", "measurement strengths"},
        {"nbar", "10", "bath occupation"},
        {"Q-range", "1e1:1e8:40log", "quality factors"}},
       run_fig2},
      {"fig3-equiv", "cooling purity and quadrature asymmetry vs Q for both orderings", "csv",
       {{"chi", "0.05,0.1,0.5", "measurement strengths"},
        {"nbar", "10", "bath occupation"},
        {"Q-range", "1e1:1e8:40log", "quality factors"}},
       run_fig3},
      {"fig4", "conditional cavity-mechanics simulation vs Q", "csv",
       {{"Np", "1e6,5e6,1e7", "photons per pulse"},
        {"g0", "5e-4", "single-photon coupling / omega_m"},
        {"nbar", "1000", "bath occupation"},
        {"eta", "1", "detection efficiency"},
        {"kappa", "15", "cavity linewidth / omega_m"},
        {"tau", "0.3", "pulse length * omega_m"},
        {"Q-range", "1e4:1e8:9log", "quality factors"},
        {"dt", "0", "integration step, 0 = automatic"}},
       run_fig4},
      {"twomode", "two resonators: collective steady state and entanglement", "json",
       {{"omega1", "1.1", "frequency of resonator 1"},
        {"omega2", "0.9", "frequency of resonator 2"},
        {"Q", "1e6", "quality factor at the mean frequency"},
        {"nbar", "10", "bath occupation of both resonators"},
        {"chi", "0.1", "measurement strength per resonator"},
        {"spacing", "bae", "bae | cooling"}},
       run_twomode},
      {"retrodict", "position retrodiction: calibration or a given record", "json",
       {{"n", "300", "measurements per record"},
        {"chi", "0.1", "measurement strength"},
        {"nbar", "10", "bath occupation"},
        {"Q", "1e4", "quality factor"},
        {"prior", "0", "prior variance of x_0, 0 = thermal"},
        {"trials", "10000", "Monte-Carlo records"},
        {"seed", "7", "master seed"},
        {"record", "", "two-column CSV (index,y) to analyze instead of simulating"},
        {"per-trial", "", "write per-trial CSV here"}},
       run_retrodict},
  };
  return all;
}

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = {
      {"fig2", "fig2", {{"chi", "0.05,0.1,0.5"}, {"nbar", "10"}},
       "figure 2 caption: chi = 0.05, 0.1, 0.5; nbar = 10"},
      {"fig3", "fig3-equiv", {{"chi", "0.05,0.1,0.5"}, {"nbar", "10"}},
       "figure 3 caption: chi = 0.05, 0.1, 0.5; nbar = 10"},
      {"fig4", "fig4",
       {{"Np", "1e6,5e6,1e7"}, {"g0", "5e-4"}, {"nbar", "1000"}, {"eta", "1"}, {"kappa", "15"}, {"tau", "0.3"}},
       "figure 4 caption: Np = 1e6, 5e6, 1e7; g0 = 5e-4 omega_m; nbar = 1000; eta = 1; kappa = 15 omega_m; "
       "tau = 0.3 / omega_m"},
  };
  return all;
}

// --- driver ------------------------------------------------------------------------

inline void error_json(std::ostream& err, const std::string& kind, const std::string& message,
                       const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  for (const auto& [k, v] : extra.items()) j[k] = v;
  err << dump_json(j);
}

inline std::string list_presets() {
  std::string out;
  for (const auto& p : presets()) {
    out += p.name + " (" + p.mode + "): ";
    for (size_t i = 0; i < p.values.size(); ++i) out += (i ? " " : "") + p.values[i].first + "=" + p.values[i].second;
    out += "\n  source: " + p.source + "\n";
  }
  return out;
}

/// Reads key=value lines (INI syntax, '#' and ';' comments).
inline std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  CLI::ConfigINI ini;
  for (const auto& item : ini.from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    std::string key;
    for (const auto& parent : item.parents) key += parent + ".";
    key += item.name;
    std::string value;
    for (size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    out.emplace_back(key, value);
  }
  return out;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stroboscopic measurement of mechanical oscillators"};
  app.require_subcommand(0, 1);
  bool show_presets = false;
  app.add_flag("--list-presets", show_presets, "list parameter presets and exit");
  app.set_version_flag("--version", std::string(kVersion));

  struct Bound {
    const Mode* mode;
    CLI::App* sub;
    std::map<std::string, std::string> flags;
    std::string config, format, out_path, preset;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& m : modes()) {
    auto b = std::make_unique<Bound>();
    b->mode = &m;
    b->sub = app.add_subcommand(m.name, m.description);
    for (const auto& ps : m.params) {
      b->sub->add_option("--" + ps.key, b->flags[ps.key], ps.help + " [" + ps.default_value + "]");
    }
    b->sub->add_option("--config", b->config, "key=value config file");
    b->sub->add_option("--preset", b->preset, "start from a named preset (see --list-presets)");
    b->sub->add_option("--format", b->format, "csv | json [" + m.default_format + "]");
    b->sub->add_option("--out", b->out_path, "output file, default stdout");
    bound.push_back(std::move(b));
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    error_json(err, "usage", e.what());
    return kUsage;
  }

  if (show_presets) {
    out << list_presets();
    return kOk;
  }
  const Bound* chosen = nullptr;
  for (const auto& b : bound)
    if (b->sub->parsed()) chosen = b.get();
  if (!chosen) {
    out << app.help();
    return kOk;
  }
  const Mode& mode = *chosen->mode;

  try {
    Params params;
    for (const auto& ps : mode.params) params.set(ps.key, ps.default_value);
    if (!chosen->preset.empty()) {
      const auto& all = presets();
      const auto it = std::find_if(all.begin(), all.end(), [&](const Preset& p) { return p.name == chosen->preset; });
      if (it == all.end()) throw UsageError("unknown preset '" + chosen->preset + "'");
      if (it->mode != mode.name) throw UsageError("preset '" + it->name + "' belongs to mode " + it->mode);
      for (const auto& [k, v] : it->values) params.set(k, v);
    }
    if (!chosen->config.empty()) {
      for (const auto& [k, v] : read_config(chosen->config)) {
        if (!params.has(k)) throw UsageError("unknown key '" + k + "' in " + chosen->config);
        params.set(k, v);
      }
    }
    for (const auto& ps : mode.params) {
      if (chosen->sub->get_option("--" + ps.key)->count() > 0) params.set(ps.key, chosen->flags.at(ps.key));
    }
    const std::string format = chosen->format.empty() ? mode.default_format : chosen->format;
    if (format != "csv" && format != "json") throw UsageError("format must be csv or json");

    RunContext ctx{&err};
    const Table table = mode.run(params, ctx);
    const std::string text =
        format == "csv" ? write_csv(mode.name, params, table) : write_json(mode.name, params, table);
    if (chosen->out_path.empty() || chosen->out_path == "-") {
      out << text;
    } else {
      std::ofstream f(chosen->out_path, std::ios::binary);
      if (!f) throw UsageError("cannot write " + chosen->out_path);
      f << text;
    }
    return kOk;
  } catch (const UsageError& e) {
    error_json(err, "usage", e.what());
    return kUsage;
  } catch (const DomainError& e) {
    error_json(err, "usage", e.what());
    return kUsage;
  } catch (const ConvergenceError& e) {
    error_json(err, "numerical", e.what(), {{"residual", e.residual()}, {"iterations", e.iterations()}});
    return kNumerical;
  } catch (const NumericalError& e) {
    error_json(err, "numerical", e.what());
    return kNumerical;
  } catch (const InternalError& e) {
    error_json(err, "internal", e.what());
    return kNumerical;
  }
}

inline int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace strobomech::cli

#include "hlob/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hlob/metrics.hpp"
#include "hlob/runner.hpp"

namespace hlob::report {

namespace {

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

std::string schema_message(const std::string& file, const std::vector<std::string>& missing,
                           const std::vector<std::string>& unexpected) {
  std::string m = "schema mismatch in " + file;
  if (!missing.empty()) m += "; missing columns: " + join(missing, ", ");
  if (!unexpected.empty()) m += "; unexpected columns: " + join(unexpected, ", ");
  return m;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty() || s == "NA") return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Checks `t` against an exact column list.
void require_exact(const Table& t, const std::string& file, const std::vector<std::string>& expected) {
  std::vector<std::string> missing;
  std::vector<std::string> unexpected;
  const std::set<std::string> have(t.columns.begin(), t.columns.end());
  const std::set<std::string> want(expected.begin(), expected.end());
  for (const auto& c : expected) {
    if (!have.count(c)) missing.push_back(c);
  }
  for (const auto& c : t.columns) {
    if (!want.count(c)) unexpected.push_back(c);
  }
  if (!missing.empty() || !unexpected.empty()) throw SchemaError(file, missing, unexpected);
}

std::vector<double> numeric_column(const Table& t, const std::string& name) {
  const auto i = t.column(name);
  std::vector<double> v;
  for (const auto& r : t.rows) {
    if (const auto x = parse_number(r[i])) v.push_back(*x);
  }
  return v;
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
  enum class Style { points, line, bars };
  std::string name;
  std::vector<std::pair<double, double>> xy;
  Style style = Style::points;
  std::string color;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

std::string escape(const std::string& s) {
  std::string o;
  for (const char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      default: o += c;
    }
  }
  return o;
}

std::string render_svg(const Plot& p) {
  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 55;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series) {
    for (const auto& [x, y] : s.xy) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  for (const auto& s : p.series) {
    if (s.style == Series::Style::bars) y0 = std::min(y0, 0.0);
  }
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(p.title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << num(sx(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(xv)
      << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << num(sy(yv) + 4) << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(p.x_label)
    << "</text>\n";
  o << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(p.y_label) << "</text>\n";

  double bar_w = 6.0;
  std::size_t bar_series = 0;
  std::size_t bar_index = 0;
  for (const auto& s : p.series) bar_series += s.style == Series::Style::bars ? 1 : 0;
  for (const auto& s : p.series) {
    if (s.style != Series::Style::bars) continue;
    std::vector<double> xs;
    for (const auto& pt : s.xy) xs.push_back(pt.first);
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (xs[i] > xs[i - 1]) bar_w = std::min(bar_w, (sx(xs[i]) - sx(xs[i - 1])) * 0.9);
    }
  }
  const double sub_w = bar_series ? bar_w / static_cast<double>(bar_series) : bar_w;

  std::size_t legend = 0;
  for (const auto& s : p.series) {
    o << "<g data-series=\"" << escape(s.name) << "\">\n";
    switch (s.style) {
      case Series::Style::points:
        for (const auto& [x, y] : s.xy) {
          o << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y)) << "\" r=\"3\" fill=\"" << s.color
            << "\" data-x=\"" << num(x) << "\" data-y=\"" << num(y) << "\"/>\n";
        }
        break;
      case Series::Style::line: {
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.xy.size(); ++i) {
          o << (i ? " " : "") << num(sx(s.xy[i].first)) << ',' << num(sy(s.xy[i].second));
        }
        o << "\"/>\n";
        break;
      }
      case Series::Style::bars: {
        const double offset = -bar_w / 2 + sub_w * static_cast<double>(bar_index++);
        for (const auto& [x, y] : s.xy) {
          const double top = sy(std::max(y, 0.0));
          const double h = std::abs(sy(y) - sy(0.0));
          o << "<rect x=\"" << num(sx(x) + offset) << "\" y=\"" << num(top) << "\" width=\"" << num(sub_w)
            << "\" height=\"" << num(h) << "\" fill=\"" << s.color << "\" data-x=\"" << num(x) << "\" data-y=\""
            << num(y) << "\"/>\n";
        }
        break;
      }
    }
    o << "</g>\n";
    const double ly = T + 8 + 16.0 * static_cast<double>(legend++);
    o << "<rect x=\"" << W - R - 150 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << s.color
      << "\"/>\n";
    o << "<text x=\"" << W - R - 135 << "\" y=\"" << ly << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Markdown

void markdown_table(std::ostream& o, const Table& t) {
  o << "| " << join(t.columns, " | ") << " |\n|";
  for (std::size_t i = 0; i < t.columns.size(); ++i) o << "---|";
  o << '\n';
  for (const auto& r : t.rows) o << "| " << join(r, " | ") << " |\n";
  o << '\n';
}

class Writer {
 public:
  explicit Writer(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << content;
    f.flush();
    if (!f) throw std::ios_base::failure("cannot write " + path.string());
    files.push_back(path);
  }

  std::vector<std::filesystem::path> files;

 private:
  std::filesystem::path dir_;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

}  // namespace

SchemaError::SchemaError(const std::string& file, std::vector<std::string> missing, std::vector<std::string> unexpected)
    : std::runtime_error(schema_message(file, missing, unexpected)),
      missing_(std::move(missing)),
      unexpected_(std::move(unexpected)) {}

std::size_t Table::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw SchemaError("table", {name}, {});
  return static_cast<std::size_t>(it - columns.begin());
}

Table read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot read " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, '\t')) cells.push_back(cell);
    if (!line.empty() && line.back() == '\t') cells.emplace_back();
    return cells;
  };
  Table t;
  std::string line;
  if (!std::getline(in, line)) return t;
  t.columns = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.columns.size()) {
      throw SchemaError(path.filename().string() + " line " + std::to_string(lineno), {}, {});
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

ReportResult render_report(const std::filesystem::path& from, const std::filesystem::path& out) {
  if (!std::filesystem::is_directory(from)) throw std::ios_base::failure("not a directory: " + from.string());
  auto has = [&](const char* name) { return std::filesystem::is_regular_file(from / name); };
  ReportResult result;
  const bool any = has("stats.tsv") || has("impact_curve.tsv") || has("decay_path.tsv") || has("train_log.tsv") ||
                   has("inventory_hist.tsv") || has("eval_report.json");
  if (!any) {
    result.nothing_to_report = true;
    return result;
  }

  // Validate everything before writing anything.
  std::optional<Table> stats, summary, impact, decay, train, inv_hist, inv_rho, sharpe, slippage;
  if (has("stats.tsv")) {
    stats = read_tsv(from / "stats.tsv");
    std::vector<std::string> known = stats_columns();
    known.insert(known.end(), stats_extra_columns().begin(), stats_extra_columns().end());
    std::vector<std::string> missing;
    std::vector<std::string> unexpected;
    for (const auto& c : stats_columns()) {
      if (std::find(stats->columns.begin(), stats->columns.end(), c) == stats->columns.end()) missing.push_back(c);
    }
    for (const auto& c : stats->columns) {
      if (std::find(known.begin(), known.end(), c) == known.end()) unexpected.push_back(c);
    }
    if (!missing.empty() || !unexpected.empty()) throw SchemaError("stats.tsv", missing, unexpected);
  }
  if (has("summary.tsv")) summary = read_tsv(from / "summary.tsv");
  if (has("impact_curve.tsv")) {
    impact = read_tsv(from / "impact_curve.tsv");
    require_exact(*impact, "impact_curve.tsv", {"quantity", "impact"});
  }
  if (has("decay_path.tsv")) {
    decay = read_tsv(from / "decay_path.tsv");
    require_exact(*decay, "decay_path.tsv", {"z", "impact", "fitted"});
  }
  if (has("train_log.tsv")) {
    train = read_tsv(from / "train_log.tsv");
    require_exact(*train, "train_log.tsv",
                  {"update", "episodes", "mean_return", "clip_fraction", "value_loss", "policy_loss", "entropy",
                   "mean_ratio", "sil_contributions", "sil_buffer", "samples"});
  }
  if (has("inventory_hist.tsv")) {
    inv_hist = read_tsv(from / "inventory_hist.tsv");
    require_exact(*inv_hist, "inventory_hist.tsv", {"rho", "inventory", "count"});
  }
  if (has("inventory_by_rho.tsv")) inv_rho = read_tsv(from / "inventory_by_rho.tsv");
  if (has("sharpe_table.tsv")) {
    sharpe = read_tsv(from / "sharpe_table.tsv");
    require_exact(*sharpe, "sharpe_table.tsv", {"window", "buy", "sell"});
  }
  if (has("slippage_table.tsv")) {
    slippage = read_tsv(from / "slippage_table.tsv");
    require_exact(*slippage, "slippage_table.tsv", {"agent", "buy", "sell"});
  }
  nlohmann::json fits;
  if (has("fits.json")) {
    std::ifstream f(from / "fits.json");
    fits = nlohmann::json::parse(f, nullptr, false);
    if (fits.is_discarded()) throw SchemaError("fits.json", {"(unparseable)"}, {});
  }

  std::filesystem::create_directories(out);
  Writer w(out);
  std::ostringstream md;
  md << "# Simulation report\n\n";

  if (summary) {
    md << "## Summary\n\n";
    markdown_table(md, *summary);
  }
  if (stats) {
    const auto agent_col = std::find(stats->columns.begin(), stats->columns.end(), "agent");
    std::map<std::string, std::size_t> per_agent;
    for (const auto& r : stats->rows) {
      ++per_agent[agent_col == stats->columns.end() ? "all" : r[agent_col - stats->columns.begin()]];
    }
    md << "## Episodes\n\n| agent | rows |\n|---|---|\n";
    for (const auto& [a, n] : per_agent) md << "| " << a << " | " << n << " |\n";
    md << '\n';
    Table head;
    head.columns = stats_columns();
    for (const auto& r : stats->rows) head.rows.emplace_back(r.begin(), r.begin() + static_cast<long>(head.columns.size()));
    markdown_table(md, head);
  }

  if (impact) {
    Plot p{"TWAP executed quantity vs price impact", "executed quantity", "impact (fraction of arrival mid)", {}};
    Series pts{"binned impact", {}, Series::Style::points, kPalette[0]};
    for (const auto& r : impact->rows) {
      const auto q = parse_number(r[impact->column("quantity")]);
      const auto y = parse_number(r[impact->column("impact")]);
      if (q && y) pts.xy.emplace_back(*q, *y);
    }
    p.series.push_back(pts);
    md << "## Impact curve\n\n";
    if (fits.contains("sql") && fits["sql"].value("ok", false)) {
      const double delta = fits["sql"].value("delta", 0.0);
      const double c = fits["sql"].value("coefficient", 0.0);
      Series fit{"fit c*q^delta", {}, Series::Style::line, kPalette[1]};
      for (const auto& [q, y] : pts.xy) {
        if (q > 0.0) fit.xy.emplace_back(q, c * std::pow(q, delta));
      }
      p.series.push_back(fit);
      md << "Fitted exponent delta = " << num(delta) << ", R^2 = " << num(fits["sql"].value("r2", 0.0)) << ".\n\n";
    } else {
      md << "No valid power-law fit.\n\n";
    }
    markdown_table(md, *impact);
    w.write("impact_curve.svg", render_svg(p));
    md << "![impact curve](impact_curve.svg)\n\n";
  }

  if (decay) {
    Plot p{"TWAP price impact decay post execution", "z = t / T", "normalized impact", {}};
    Series pts{"normalized path", {}, Series::Style::points, kPalette[0]};
    Series fit{"propagator fit", {}, Series::Style::line, kPalette[1]};
    for (const auto& r : decay->rows) {
      const auto z = parse_number(r[decay->column("z")]);
      const auto y = parse_number(r[decay->column("impact")]);
      const auto f = parse_number(r[decay->column("fitted")]);
      if (z && y) pts.xy.emplace_back(*z, *y);
      if (z && f) fit.xy.emplace_back(*z, *f);
    }
    p.series.push_back(pts);
    if (!fit.xy.empty()) p.series.push_back(fit);
    md << "## Impact decay\n\n";
    if (fits.contains("decay") && fits["decay"].value("ok", false)) {
      md << "Fitted beta = " << num(fits["decay"].value("beta", 0.0)) << " (reference 0.168), RMSE = "
         << num(fits["decay"].value("rmse", 0.0)) << ".\n\n";
    } else {
      md << "No valid decay fit.\n\n";
    }
    markdown_table(md, *decay);
    w.write("decay_curve.svg", render_svg(p));
    md << "![decay curve](decay_curve.svg)\n\n";
  }

  if (sharpe || slippage) {
    md << "## Evaluation\n\n";
    if (sharpe) {
      md << "Annualized Sharpe ratio of the market maker (mean over episodes):\n\n";
      markdown_table(md, *sharpe);
    }
    if (slippage) {
      md << "TWAP slippage against arrival mid, bps:\n\n";
      markdown_table(md, *slippage);
    }
  }

  if (train) {
    Plot p{"Training mean episode return", "update", "mean return", {}};
    Series s{"mean return", {}, Series::Style::line, kPalette[0]};
    for (const auto& r : train->rows) {
      const auto u = parse_number(r[train->column("update")]);
      const auto y = parse_number(r[train->column("mean_return")]);
      if (u && y) s.xy.emplace_back(*u, *y);
    }
    p.series.push_back(s);
    w.write("training_curve.svg", render_svg(p));
    md << "## Training\n\n" << train->rows.size() << " updates.\n\n![training curve](training_curve.svg)\n\n";
  }

  if (inv_hist || (stats && std::find(stats->columns.begin(), stats->columns.end(), "final_inventory") !=
                                stats->columns.end())) {
    Plot p{"Market maker inventory", "inventory (units)", "count", {}};
    if (inv_hist) {
      std::map<int, Series> by_rho;
      for (const auto& r : inv_hist->rows) {
        const auto rho = parse_number(r[inv_hist->column("rho")]);
        const auto x = parse_number(r[inv_hist->column("inventory")]);
        const auto c = parse_number(r[inv_hist->column("count")]);
        if (!rho || !x || !c) continue;
        const int key = static_cast<int>(*rho);
        auto& s = by_rho[key];
        s.name = "rho = " + std::to_string(key);
        s.style = Series::Style::bars;
        s.color = kPalette[(key + 1) % 3];
        s.xy.emplace_back(*x, *c);
      }
      for (auto& [rho, s] : by_rho) p.series.push_back(std::move(s));
    } else {
      std::map<double, double> counts;
      for (const auto x : numeric_column(*stats, "final_inventory")) counts[x] += 1.0;
      Series s{"final inventory", {}, Series::Style::bars, kPalette[0]};
      for (const auto& [x, c] : counts) s.xy.emplace_back(x, c);
      p.series.push_back(s);
    }
    if (!p.series.empty() && !p.series.front().xy.empty()) {
      w.write("inventory_hist.svg", render_svg(p));
      md << "## Inventory\n\n";
      if (inv_rho) markdown_table(md, *inv_rho);
      md << "![inventory histogram](inventory_hist.svg)\n\n";
    }
  }

  w.write("report.md", md.str());
  result.files = w.files;
  return result;
}

}  // namespace hlob::report

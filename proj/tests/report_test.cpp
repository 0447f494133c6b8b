#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "hlob/metrics.hpp"
#include "hlob/report.hpp"
#include "hlob/runner.hpp"
#include "test_util.hpp"

using namespace hlob;

namespace {

/// A small impact run, shared by the report tests.
std::filesystem::path impact_run() {
  static const std::filesystem::path dir = [] {
    const auto d = test::scratch_dir("report_source");
    const auto c = ScenarioConfig::from_json(
        {{"name", "report_source"},
         {"seeds", 4},
         {"trading_seconds", 360},
         {"sample_interval", 2},
         {"write_logs", false},
         {"twap", {{"side", "buy"}, {"Q", 120}, {"T", 120}, {"window", 20}, {"period", 1}, {"start_time", 0}}}},
        std::filesystem::path(HLOB_TEST_CONFIG_DIR) / "scenarios");
    RunOptions o;
    o.out_dir = d;
    run_scenario(c, o);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("an empty directory has nothing to report") {
  const auto from = test::scratch_dir("report_empty");
  const auto out = from / "report";
  const auto r = report::render_report(from, out);
  CHECK(r.nothing_to_report);
  CHECK(r.files.empty());
  CHECK_FALSE(std::filesystem::exists(out / "report.md"));
}

TEST_CASE("a stats table with the wrong header is a schema error") {
  const auto from = test::scratch_dir("report_schema");
  std::string header;
  for (const auto& c : stats_columns()) {
    if (c == "slippage_bps") continue;
    header += (header.empty() ? "" : "\t") + c;
  }
  header += "\tmystery";
  test::write_file(from / "stats.tsv", header + "\n");
  try {
    report::render_report(from, from / "report");
    FAIL("expected a schema error");
  } catch (const report::SchemaError& e) {
    CHECK(e.missing() == std::vector<std::string>{"slippage_bps"});
    CHECK(e.unexpected() == std::vector<std::string>{"mystery"});
  }
  CHECK_FALSE(std::filesystem::exists(from / "report" / "report.md"));
}

TEST_CASE("ragged rows are rejected") {
  const auto from = test::scratch_dir("report_ragged");
  test::write_file(from / "impact_curve.tsv", "quantity\timpact\n1\t2\n3\n");
  CHECK_THROWS(report::render_report(from, from / "report"));
}

TEST_CASE("reports are byte-identical across reruns") {
  const auto from = impact_run();
  const auto a = test::scratch_dir("report_a");
  const auto b = test::scratch_dir("report_b");
  const auto ra = report::render_report(from, a);
  const auto rb = report::render_report(from, b);
  REQUIRE_FALSE(ra.nothing_to_report);
  REQUIRE(ra.files.size() == rb.files.size());
  for (std::size_t i = 0; i < ra.files.size(); ++i) {
    CHECK(ra.files[i].filename() == rb.files[i].filename());
    CHECK(test::slurp(ra.files[i]) == test::slurp(rb.files[i]));
  }
}

TEST_CASE("an impact run renders both curves") {
  const auto from = impact_run();
  const auto out = test::scratch_dir("report_curves");
  const auto r = report::render_report(from, out);
  auto has = [&](const char* name) {
    return std::any_of(r.files.begin(), r.files.end(), [&](const auto& f) { return f.filename() == name; });
  };
  CHECK(has("report.md"));
  CHECK(has("impact_curve.svg"));
  CHECK(has("decay_curve.svg"));
}

TEST_CASE("a fitted decay is drawn over the measured path") {
  const auto from = test::scratch_dir("report_overlay_source");
  std::string decay = "z\timpact\tfitted\n";
  for (int k = 1; k <= 10; ++k) {
    const double z = 1.0 + 0.2 * k;
    const double fit = metrics::propagator_decay(z, 0.2);
    decay += std::to_string(z) + "\t" + std::to_string(fit + 0.01 * (k % 3 - 1)) + "\t" + std::to_string(fit) + "\n";
  }
  test::write_file(from / "decay_path.tsv", decay);
  test::write_file(from / "fits.json", R"({"decay": {"ok": true, "beta": 0.2, "rmse": 0.01, "points": 10}})");
  const auto out = test::scratch_dir("report_overlay");
  const auto r = report::render_report(from, out);
  auto has = [&](const char* name) {
    return std::any_of(r.files.begin(), r.files.end(), [&](const auto& f) { return f.filename() == name; });
  };
  CHECK(has("report.md"));
  CHECK(has("decay_curve.svg"));
  const auto svg = test::slurp(out / "decay_curve.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("propagator fit") != std::string::npos);
  CHECK(svg.find("normalized path") != std::string::npos);
  const auto md = test::slurp(out / "report.md");
  CHECK(md.find("reference 0.168") != std::string::npos);
}

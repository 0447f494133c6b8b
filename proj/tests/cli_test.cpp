#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "test_util.hpp"

using namespace hlob;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run hlob_cli(const std::string& args, const std::string& tag) {
  const auto dir = test::scratch_dir("cli_run_" + tag);
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("HLOB_CONFIG_DIR='") + HLOB_TEST_CONFIG_DIR + "' '" + HLOB_BIN + "' " + args +
                          " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = test::slurp(out);
  r.err = test::slurp(err);
  return r;
}

}  // namespace

TEST_CASE("help exits cleanly") {
  const auto r = hlob_cli("--help", "help");
  CHECK(r.code == 0);
  CHECK(r.out.find("simulate") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(hlob_cli("", "none").code == 2);
  CHECK(hlob_cli("fly", "unknown").code == 2);
  const auto r = hlob_cli("simulate", "missing");
  CHECK(r.code == 2);
  CHECK(r.err.find("error[usage]") != std::string::npos);
  CHECK(hlob_cli("train --config url_solo --episodes 0", "episodes").code == 2);
}

TEST_CASE("configuration errors") {
  const auto r = hlob_cli("simulate --config no_such_scenario --quiet", "noscenario");
  CHECK(r.code == 3);
  CHECK(r.err.find("error[config]") != std::string::npos);
  CHECK(hlob_cli("simulate --config twap_alone_hpov --seeds x --quiet", "badseeds").code == 3);
  CHECK(hlob_cli("impact --config market_only --quiet", "impactnotwap").code == 3);
  const auto dir = test::scratch_dir("cli_badkey");
  test::write_file(dir / "bad.json", R"({"name": "bad", "seeds": 1, "volume": 3})");
  CHECK(hlob_cli("simulate --config '" + (dir / "bad.json").string() + "' --quiet", "badkey").code == 3);
}

TEST_CASE("simulate writes its outputs") {
  const auto out = test::scratch_dir("cli_sim_out");
  const auto r = hlob_cli("simulate --config market_only --seeds 2 --quiet --out '" + out.string() + "'", "sim");
  CHECK(r.code == 0);
  CHECK(r.out.find("2/2 episodes completed") != std::string::npos);
  CHECK(std::filesystem::is_regular_file(out / "stats.tsv"));
  CHECK(std::filesystem::is_regular_file(out / "manifest.json"));
}

TEST_CASE("report exit codes") {
  const auto empty = test::scratch_dir("cli_report_empty");
  const auto r = hlob_cli("report --from '" + empty.string() + "'", "report_empty");
  CHECK(r.code == 0);
  CHECK(r.out.find("nothing to report") != std::string::npos);

  const auto bad = test::scratch_dir("cli_report_bad");
  test::write_file(bad / "stats.tsv", "scenario\tstrange\n");
  const auto s = hlob_cli("report --from '" + bad.string() + "'", "report_bad");
  CHECK(s.code == 6);
  CHECK(s.err.find("error[schema]") != std::string::npos);

  CHECK(hlob_cli("report --from /nonexistent/hlob_dir", "report_missing").code == 4);
}

TEST_CASE("evaluate refuses a missing checkpoint and zero episodes") {
  CHECK(hlob_cli("evaluate --config frl_eval_buy --checkpoint /nonexistent/policy.bin --quiet", "eval_missing").code ==
        3);
  CHECK(hlob_cli("evaluate --config frl_eval_buy --episodes 0 --quiet", "eval_zero").code == 2);
}

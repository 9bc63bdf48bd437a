#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;  ///< stdout and stderr
};

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cmc_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Run cli(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "cmc_test_cli_log.txt";
  const std::string cmd = std::string(CMC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(log);
  return r;
}

std::string graph(const std::string& name) { return std::string(CMC_GRAPH_DIR) + "/" + name + ".json"; }

bool contains(const std::string& text, const std::string& what) { return text.find(what) != std::string::npos; }

}  // namespace

TEST_CASE("cli: profile table and files") {
  const fs::path dir = scratch("profile");
  const Run r = cli("profile --n 3 --tau 0.01 --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(contains(r.out, "3.40684"));
  const fs::path csv = dir / "profile_n3_tau0.01.csv";
  REQUIRE(fs::exists(csv));
  CHECK(slurp(csv).rfind("t,", 0) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "profile_summary.json"));
  CHECK(j[0]["p"].get<double>() == doctest::Approx(3.4068371278).epsilon(1e-9));
  fs::remove_all(dir);
}

TEST_CASE("cli: profile asymptotics sweep") {
  const Run r = cli("profile --n 3 --sweep 1e-4,1e-6,1e-8 --check-asymptotics");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "period ratio approaches 1: yes"));
  CHECK(contains(r.out, "T_n laws within 10% at |tau| = 1e-08: yes"));
  CHECK(cli("profile --n 3 --tau 1e-4 --check-asymptotics").code == 2);
}

TEST_CASE("cli: configuration errors exit with 2") {
  Run r = cli("profile --n 2 --tau 0.01");
  CHECK(r.code == 2);
  CHECK(contains(r.out, "n > 2"));
  CHECK(cli("profile --n 3 --tau 0.5").code == 2);
  CHECK(cli("profile --n 3").code == 2);
  CHECK(cli("profile --n 3 --sweep 1e-4,x").code == 2);
  CHECK(cli("profile --bogus").code == 2);
  CHECK(cli("").code == 2);
  r = cli("build --graph " + graph("antipodal") + " --tau-bar 0.01");
  CHECK(r.code == 2);
  CHECK(contains(r.out, "too few periods"));
  CHECK(cli("build --graph " + graph("antipodal") + " --tau-bar 1e-9 --gamma 2.5").code == 2);
  CHECK(cli("build --graph " + graph("antipodal") + " --tau-bar 1e-9 --zeta 1e-3").code == 3);
}

TEST_CASE("cli: graph check") {
  Run r = cli("graph check --graph " + graph("star120"));
  CHECK(r.code == 0);
  CHECK(contains(r.out, "balanced: yes, central: yes"));

  const fs::path dir = scratch("graphs");
  fs::create_directories(dir);
  std::ofstream(dir / "half.json") << R"({"n":3,"vertices":[{"id":"p","pos":[0,0,0,0]},{"id":"q","pos":[3,0,0,0]}],
    "edges":[{"id":"e","from":"p","to":"q","tau_hat":1.0}],
    "rays":[{"id":"rp","from":"p","dir":[-1,0,0,0],"tau_hat":1.0},{"id":"rq","from":"q","dir":[1,0,0,0],"tau_hat":1.0}]})";
  r = cli("graph check --graph " + (dir / "half.json").string() + " --out " + dir.string());
  CHECK(r.code == 1);
  CHECK(contains(r.out, "central: no (non-integer half-length"));
  CHECK(nlohmann::json::parse(slurp(dir / "balance.json"))["central"] == false);

  std::ofstream(dir / "bad.json") << "{\"n\":3,\n\"vertices\": [\n{\"id\":\"p\" \"pos\":[0,0,0,0]}]}";
  r = cli("graph check --graph " + (dir / "bad.json").string());
  CHECK(r.code == 2);
  CHECK(contains(r.out, "line 3"));
  CHECK(cli("graph check --graph " + (dir / "missing.json").string()).code == 3);
  fs::remove_all(dir);
}

TEST_CASE("cli: graph family") {
  const fs::path dir = scratch("family");
  Run r = cli("graph family --graph " + graph("dumbbell") + " --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(contains(r.out, "identity family point"));
  const auto j = nlohmann::json::parse(slurp(dir / "family.json"));
  CHECK(j["realized"]["vertices"][1]["pos"][0].get<double>() == 4.0);
  r = cli("graph family --graph " + graph("dumbbell") + " --elltilde '{\"e\":0.01}'");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "deformed family point"));
  CHECK(cli("graph family --graph " + graph("dumbbell") + " --elltilde '{\"nope\":0.01}'").code == 2);
  fs::remove_all(dir);
}

TEST_CASE("cli: build with and without dislocations") {
  Run r = cli("build --graph " + graph("antipodal") + " --tau-bar 1e-9 --zeta 0");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "max|H_dislocation| 0,"));
  CHECK(contains(r.out, "invariants: pass"));
  CHECK(contains(r.out, "max|H-1| outside the windows"));
  r = cli("build --graph " + graph("antipodal") + " --tau-bar 1e-9 --zeta auto");
  CHECK(r.code == 0);
  CHECK_FALSE(contains(r.out, "max|H_dislocation| 0,"));
  r = cli("build --graph " + graph("antipodal") + " --tau-bar 1e-9 --zeta '{\"r1\":{\"plus\":[0,1e-9,0,0]}}'");
  CHECK(r.code == 0);
  CHECK_FALSE(contains(r.out, "max|H_dislocation| 0,"));
  CHECK(cli("build --graph " + graph("antipodal") + " --tau-bar 1e-9 --zeta '{\"x\":{\"plus\":[0,0,0,0]}}'").code == 2);
  CHECK(cli("build --graph " + graph("antipodal") + " --tau-bar 1e-9 --zeta '{\"r1\":{\"plus\":[0,1,0,0]}}'").code == 2);
}

TEST_CASE("cli: identical configuration gives byte-identical bundles") {
  const fs::path d1 = scratch("det1"), d2 = scratch("det2");
  const std::string args = "build --graph " + graph("dumbbell") + " --tau-bar 1e-9 --zeta auto --grid 6,3 --out ";
  REQUIRE(cli(args + d1.string()).code == 0);
  REQUIRE(cli(args + d2.string()).code == 0);
  std::size_t files = 0;
  for (const auto& f : fs::directory_iterator(d1)) {
    ++files;
    CHECK(slurp(f.path()) == slurp(d2 / f.path().filename()));
  }
  CHECK(files > 5);
  CHECK(fs::exists(d1 / "manifest.json"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("cli: I/O errors exit with 3") {
  const fs::path blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  CHECK(cli("profile --tau 0.01 --out " + (blocker / "sub").string()).code == 3);
  fs::remove_all(blocker);
}

TEST_CASE("cli: configuration file, flags take precedence") {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "run.ini") << "n=2\ntau=0.01\n";
  CHECK(cli("profile --config " + (dir / "run.ini").string()).code == 2);
  CHECK(cli("profile --config " + (dir / "run.ini").string() + " --n 3").code == 0);
  fs::remove_all(dir);
}

TEST_CASE("cli: linear experiments") {
  Run r = cli("linear kernel --n 3 --tau 0.01");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "count in [-epsilon, epsilon]: 4"));
  r = cli("linear coercivity --tau 0.01 --seed 7");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "over 100 trials"));
  CHECK(cli("linear annulus --gamma 1.5").code == 0);
  CHECK(cli("linear annulus --gamma 2.0").code == 2);
  const fs::path dir = scratch("decay");
  r = cli("linear decay --tau 1e-12 --b-bar 4 --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "decay_mode1_in.csv"));
  fs::remove_all(dir);
}

TEST_CASE("cli: verify runs acceptance criteria") {
  Run r = cli("--verify --only 4,5");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "PASS [ 4]"));
  CHECK(contains(r.out, "PASS [ 5]"));
  CHECK(contains(r.out, "2 of 2 criteria passed"));
  r = cli("--verify --only 3");
  CHECK(r.code == 1);
  CHECK(contains(r.out, "FAIL [ 3]"));
  CHECK(cli("--verify --only 16").code == 2);
}

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "qpos/json_io.hpp"
#include "support/fields.hpp"

#ifndef QPOS_CLI_PATH
#error "QPOS_CLI_PATH must point at the qpos executable"
#endif

using namespace qpos;
using io::Json;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("qpos_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (scratch() / name).string(); }

int run(const std::string& args) {
  const std::string cmd = std::string(QPOS_CLI_PATH) + " " + args + " >/dev/null 2>" + at("stderr.txt");
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

// Every point strictly 2-positive w.r.t. g0 = I.
FormField positive_field() {
  qtest::Rng rng(5);
  std::vector<SamplePoint> pts(20);
  for (int i = 0; i < 20; ++i) {
    pts[i].id = "p" + std::to_string(i);
    RVector e(4);
    e << -0.4, 1.0, 1.5, 2.0;
    pts[i].forms.emplace("S", HermitianMatrix(qtest::with_spectrum(rng, e)));
  }
  return FormField(4, std::move(pts));
}

}  // namespace

TEST_CASE("check: pass, planted violation, malformed input") {
  FormField f = positive_field();
  io::write_file(at("ok.json"), io::field_to_json(f));
  CHECK(run("check --input " + at("ok.json") + " --q 2 --out " + at("ok_report.json")) == 0);
  const Json ok = io::read_file(at("ok_report.json"));
  CHECK(ok["passed"] == true);
  CHECK(ok["seed"] == 0);
  CHECK(ok["points"].size() == 20);
  CHECK(ok["points"][0]["inertia"].size() == 3);

  Json bad = io::field_to_json(f);
  bad["points"][7]["forms"]["S"] = io::matrix_to_json(HermitianMatrix::diagonal({-3.0, 1.0, 1.0, 1.0}).matrix());
  io::write_file(at("bad.json"), bad);
  CHECK(run("check --input " + at("bad.json") + " --q 2 --out " + at("bad_report.json")) == 2);
  const Json br = io::read_file(at("bad_report.json"));
  CHECK(br["failing_points"] == Json::array({"p7"}));

  save(at("broken.json"), "{\"dim\": 4, \"points\": [");
  CHECK(run("check --input " + at("broken.json") + " --q 2") == 1);
  CHECK(slurp(at("stderr.txt")).find("SchemaError") != std::string::npos);

  save(at("nodim.json"), R"({"points": []})");
  CHECK(run("check --input " + at("nodim.json") + " --q 2") == 1);
  CHECK(slurp(at("stderr.txt")).find("$.dim") != std::string::npos);

  CHECK(run("check --q 2") == 1);  // missing --input
  CHECK(run("frobnicate") == 1);
}

TEST_CASE("synthesize single then check against the new metrics") {
  qtest::Rng rng(9);
  const FormField f = qtest::planted_single_field(rng, 40, 5, 3);
  io::write_file(at("single.json"), io::field_to_json(f));
  CHECK(run("synthesize single --input " + at("single.json") + " --form S --q 3 --margin 0.1 --out " +
            at("single_metric.json") + " --cert " + at("single_cert.json") + " --report " + at("single_rep.json")) ==
        0);
  const Json cert = io::read_file(at("single_cert.json"));
  CHECK(cert["passed"] == true);
  CHECK(cert["entries"].size() == 40);
  CHECK(run("check --input " + at("single.json") + " --q 3 --metrics " + at("single_metric.json")) == 0);
  // The same field fails against g0.
  CHECK(run("check --input " + at("single.json") + " --q 3") == 2);
}

TEST_CASE("synthesize subbundle and two-forms") {
  qtest::Rng rng(4);
  const FormField f = qtest::planted_subbundle_field(rng, 15, 4, 2, 2);
  io::write_file(at("sub.json"), io::field_to_json(f));
  CHECK(run("synthesize subbundle --input " + at("sub.json") + " --forms Q1,Q2 --q 2 --out " + at("sub_m.json") +
            " --cert " + at("sub_c.json") + " --report " + at("sub_r.json")) == 0);
  const Json r = io::read_file(at("sub_r.json"));
  CHECK(r["kappa"].get<double>() > 0.0);
  CHECK(r["constants"].size() == 2);
  CHECK(r["constants"][0].contains("A3"));
  CHECK(run("synthesize subbundle --input " + at("sub.json") + " --forms Q1,nope --q 2") == 1);

  std::vector<SamplePoint> pts(3);
  for (int i = 0; i < 3; ++i) {
    pts[i].id = "t" + std::to_string(i);
    pts[i].forms.emplace("A", HermitianMatrix::identity(2));
    pts[i].forms.emplace("B", HermitianMatrix::identity(2));
  }
  io::write_file(at("two.json"), io::field_to_json(FormField(2, std::move(pts))));
  CHECK(run("synthesize two-forms --input " + at("two.json") + " --forms A,B --angles 512 --report " +
            at("two_r.json")) == 0);
  const Json t = io::read_file(at("two_r.json"));
  const double c = 1.0 - std::exp(-0.5);
  CHECK(std::abs(t["points"][0]["gamma"][0].get<double>() - c / 2) < 1e-6);
  CHECK(run("synthesize two-forms --input " + at("two.json") + " --forms A") == 1);
}

TEST_CASE("project") {
  save(at("t.json"), R"({"dim": 3, "re": [[1, 0, 0], [0, 2, 0], [0, 0, 5]]})");
  CHECK(run("project --input " + at("t.json") + " --center 1.5 --radius 1 --nodes 64 --out " + at("p.json")) == 0);
  const Json p = io::read_file(at("p.json"));
  CHECK(p["rank"] == 2);
  CHECK(p["oracle_gap"].get<double>() < 1e-12);
  // Eigenvalue on the circle.
  CHECK(run("project --input " + at("t.json") + " --center 0 --radius 1") == 2);
}

TEST_CASE("geometry commands and byte-identical reruns") {
  const std::string quadric = R"('{"type":"quadric","n":3,"q":2,"mu":[2,2,-0.5,-0.5]}')";
  CHECK(run("geometry zq --domain " + quadric + " --samples 150 --seed 3 --out " + at("zq.json") + " --csv " +
            at("zq.csv")) == 0);
  CHECK(slurp(at("zq.csv")).rfind("id,component,n_plus,n_minus,branch\n", 0) == 0);
  for (const char* cmd : {"levi", "pipeline", "bump"}) {
    const std::string a = at(std::string(cmd) + "_a.json"), b = at(std::string(cmd) + "_b.json");
    CHECK(run(std::string("geometry ") + cmd + " --domain " + quadric + " --samples 150 --seed 3 --out " + a) == 0);
    CHECK(run(std::string("geometry ") + cmd + " --domain " + quadric + " --samples 150 --seed 3 --threads 3 --out " +
              b) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(io::read_file(a)["seed"] == 3);
  }
  // Levi-flat cylinder: Z(1) fails at every sample.
  save(at("cyl.json"), R"({"type": "custom", "A": {"dim": 2, "re": [[1, 0], [0, 0]]}, "c": -1})");
  CHECK(run("geometry zq --domain " + at("cyl.json") + " --samples 50 --out " + at("cyl_zq.json")) == 2);
  CHECK_FALSE(io::read_file(at("cyl_zq.json"))["zq"]["failing"].empty());
  CHECK(run("geometry zq --domain '{\"type\": \"torus\"}'") == 1);
  CHECK(run("geometry counterexample --radius 2 --nodes 16 --out " + at("ce.json")) == 0);
  CHECK(io::read_file(at("ce.json"))["fields"].size() == 20);
}

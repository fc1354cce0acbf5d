#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kSrc = SPD_SOURCE_DIR;

struct Run {
  int rc = -1;
  std::string out;  // stdout and stderr together
};

Run spdc(const std::string& args) {
  const std::string cmd = std::string(SPDC_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t k;
  while ((k = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, k);
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Like spdc() but parses stdout only as JSON.
json spdc_json(const std::string& args, int* rc = nullptr) {
  const std::string cmd = std::string(SPDC_PATH) + " --json " + args + " 2>/dev/null";
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t k;
  while ((k = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, k);
  const int status = pclose(p);
  if (rc) *rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return json::parse(out);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("spdc_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

const std::string kModels = "--kernel " + kSrc + "/configs/lbm_kernel.json --device " + kSrc +
                            "/configs/stratix_v.json --measured " + kSrc + "/configs/lbm_measured.json";

}  // namespace

TEST_CASE("compile emits DOT for the core example") {
  Run r = spdc("compile " + kSrc + "/corpus/core.spd --emit dot");
  CHECK(r.rc == 0);
  CHECK(r.out.find("digraph") != std::string::npos);
  CHECK(r.out.find("depth 29") != std::string::npos);
}

TEST_CASE("compile reports the source line of an error") {
  const fs::path d = scratch("bad");
  std::ofstream(d / "bad.spd") << "Name bad;\nMain_In {i::a};\nMain_Out {o::y};\nEQU n1, y = a +;\n";
  Run r = spdc("compile " + (d / "bad.spd").string());
  CHECK(r.rc == 1);
  CHECK(r.out.find("bad.spd:4") != std::string::npos);

  std::ofstream(d / "undriven.spd") << "Name u;\nMain_In {i::a};\nMain_Out {o::y};\nEQU n1, t = a;\n";
  r = spdc("compile " + (d / "undriven.spd").string());
  CHECK(r.rc == 1);
  CHECK(r.out.find("y undriven") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("bad command lines exit with 1") {
  CHECK(spdc("").rc == 1);
  CHECK(spdc("compile --emit pdf x.spd").rc == 1);
  CHECK(spdc("frobnicate").rc == 1);
  CHECK(spdc("--help").rc == 0);
}

TEST_CASE("census of the flattened one-lane PE") {
  int rc = -1;
  json j = spdc_json("compile -L " + kSrc + "/corpus --top PEx1 --census", &rc);
  CHECK(rc == 0);
  CHECK(j["schema"] == "spd-compile/1");
  CHECK(j["census"]["adders"] == 70);
  CHECK(j["census"]["multipliers"] == 60);
  CHECK(j["census"]["dividers"] == 1);
  CHECK(j["census"]["n_flops"] == 131);
  CHECK(j["depth"] == 855);
}

TEST_CASE("netlist export is written to a file") {
  const fs::path d = scratch("netlist");
  Run r = spdc("compile " + kSrc + "/corpus/core.spd --emit netlist -o " + (d / "core.json").string());
  CHECK(r.rc == 0);
  json n = json::parse(slurp(d / "core.json"));
  CHECK(n.contains("vertices"));
  fs::remove_all(d);
}

TEST_CASE("explore with measurements ranks (1,4) first per watt") {
  json j = spdc_json("explore " + kModels + " --n 1,2,4 --m 1,2,4");
  REQUIRE(j["by_perf_per_watt"].size() == 6);
  const json& top = j["by_perf_per_watt"][0];
  CHECK(top["n"] == 1);
  CHECK(top["m"] == 4);
  CHECK(std::abs(top["gflops_per_watt"].get<double>() - 2.416) <= 0.001);
  CHECK(j["infeasible"].size() == 3);
}

TEST_CASE("calibrate writes models that explore accepts") {
  const fs::path d = scratch("cal");
  int rc = -1;
  json c = spdc_json("calibrate " + kModels + " --write-kernel " + (d / "k.json").string() + " --write-device " +
                         (d / "d.json").string(),
                     &rc);
  CHECK(rc == 0);
  CHECK(c["schema"] == "spd-calibration/1");
  CHECK(c["eff_bw_gbs"].get<double>() == doctest::Approx(8.0371).epsilon(1e-4));
  Run r = spdc("explore --kernel " + (d / "k.json").string() + " --device " + (d / "d.json").string());
  CHECK(r.rc == 0);
  CHECK(r.out.find("(1,4)") != std::string::npos);
  fs::remove_all(d);
}

TEST_CASE("verify checks a kernel bit-exactly") {
  Run r = spdc("verify --n 1 --m 2 --steps 2 --width 16 --height 12");
  CHECK(r.rc == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(spdc("verify --n 1 --m 2 --steps 3 --width 16 --height 12").rc == 1);
}

TEST_CASE("sim passes words through an identity core") {
  const fs::path d = scratch("ident");
  std::ofstream(d / "ident.spd") << "Name ident;\nMain_In {i::a,b};\nMain_Out {o::a,b};\nDRCT (o::a, o::b) = (i::a, i::b);\n";
  {
    std::ofstream a(d / "a.bin", std::ios::binary), b(d / "b.bin", std::ios::binary);
    for (std::uint32_t w = 0; w < 1000; ++w) {
      const std::uint32_t x = w * 2654435761u, y = ~w;
      a.write(reinterpret_cast<const char*>(&x), 4);
      b.write(reinterpret_cast<const char*>(&y), 4);
    }
    std::ofstream(d / "m.json") << R"({"inputs": {"a": "a.bin", "b": "b.bin"}})";
  }
  int rc = -1;
  json j = spdc_json("sim " + (d / "ident.spd").string() + " -i " + (d / "m.json").string() + " -o " +
                         (d / "out").string(),
                     &rc);
  CHECK(rc == 0);
  CHECK(j["schema"] == "spd-sim/1");
  CHECK(j["elements"] == 1000);
  CHECK(slurp(d / "out" / "a.bin") == slurp(d / "a.bin"));
  CHECK(slurp(d / "out" / "b.bin") == slurp(d / "b.bin"));
  fs::remove_all(d);
}

TEST_CASE("grid and sim of the two-lane kernel under the calibrated memory model") {
  const fs::path d = scratch("x2");
  CHECK(spdc("calibrate " + kModels + " --write-device " + (d / "dev.json").string()).rc == 0);
  CHECK(spdc("grid --n 2 --width 720 --height 300 -o " + (d / "g").string()).rc == 0);
  int rc = -1;
  json j = spdc_json("sim -L " + kSrc + "/corpus --top mQsys_Corex2_1 -i " + (d / "g" / "manifest.json").string() +
                         " --device " + (d / "dev.json").string(),
                     &rc);
  CHECK(rc == 0);
  CHECK(j["elements"] == 108000);
  CHECK(std::abs(j["u"].get<double>() - 0.557) <= 0.01);
  fs::remove_all(d);
}

TEST_CASE("corpus command reproduces the shipped sources") {
  const fs::path d = scratch("corpus");
  CHECK(spdc("corpus -o " + d.string()).rc == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(kSrc + "/corpus")) {
    CAPTURE(e.path().filename().string());
    CHECK(slurp(e.path()) == slurp(d / e.path().filename()));
    ++files;
  }
  CHECK(files == 16);
  fs::remove_all(d);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "spd/frontend.hpp"
#include "spd/perf.hpp"

using namespace spd;

namespace {

const std::string kDir = std::string(SPD_SOURCE_DIR) + "/configs/";

DeviceModel device() { return load_device(kDir + "stratix_v.json"); }
KernelModel kernel() { return load_kernel(kDir + "lbm_kernel.json"); }
std::vector<MeasuredRow> measured() { return load_measurements(kDir + "lbm_measured.json"); }

const DesignPoint kPoints[] = {{1, 1}, {1, 2}, {1, 4}, {2, 1}, {2, 2}, {4, 1}};

// Calibrated models as the CLI builds them.
std::pair<KernelModel, DeviceModel> calibrated(double T = 720.0 * 300.0) {
  KernelModel k = kernel();
  DeviceModel d = device();
  Calibration c = calibrate(measured(), k, d, T);
  k.cost = c.cost;
  k.fill_depth = c.fill_depth;
  d.eff_bw_gbs = c.eff_bw_gbs;
  return {k, d};
}

}  // namespace

TEST_CASE("peak performance is n * m * flops * f") {
  const KernelModel k = kernel();
  const DeviceModel d = device();
  const double want[] = {23.58, 47.16, 94.32, 47.16, 94.32, 94.32};
  for (int i = 0; i < 6; ++i) {
    CAPTURE(kPoints[i].str());
    CHECK(peak_perf(kPoints[i], k, d) == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("bandwidth demand of one pipeline") {
  const KernelModel k = kernel();
  const DeviceModel d = device();
  CHECK(bandwidth_demand({1, 1}, k, d) == doctest::Approx(7.20));
  CHECK(bandwidth_demand({1, 8}, k, d) == doctest::Approx(7.20));
  CHECK(bandwidth_demand({4, 1}, k, d, true) == doctest::Approx(28.80));
}

TEST_CASE("utilization model terms") {
  KernelModel k;
  k.n_flops = 10;
  k.words_in = 2;
  k.words_out = 1;
  k.fill_depth = 50;
  DeviceModel d;
  d.f_ghz = 0.25;
  d.eff_bw_gbs = 1.0;  // demand 2 GB/s read, 1 GB/s write per lane
  double ub = 0, up = 0;
  const double u = model_utilization({1, 2}, k, d, 1000, &ub, &up);
  CHECK(ub == doctest::Approx(0.5));
  CHECK(up == doctest::Approx(1000.0 / 1100.0));
  CHECK(u == doctest::Approx(ub * up));
  model_utilization({2, 1}, k, d, 1000, &ub, &up);
  CHECK(ub == doctest::Approx(0.25));
  CHECK(up == doctest::Approx(500.0 / 550.0));
  d.eff_bw_gbs = 100;
  model_utilization({1, 1}, k, d, 1e9, &ub, &up);
  CHECK(ub == 1.0);
  CHECK(up == doctest::Approx(1.0));
}

TEST_CASE("calibration recovers known synthetic parameters") {
  // Rows generated from a known model; the fit must return it.
  KernelModel truth;
  truth.n_flops = 100;
  truth.words_in = truth.words_out = 8;
  truth.fill_depth = 300;
  truth.cost.fixed = {1000, 2000, 50000, 2};
  truth.cost.per_pipeline = {20000, 40000, 0, 32};
  truth.cost.buf_base_bits = 600000;
  truth.cost.buf_lane_bits = 40000;
  DeviceModel d;
  d.f_ghz = 0.2;
  d.eff_bw_gbs = 9.0;
  d.available = {1e9, 1e9, 1e12, 1e6};
  const double T = 100000;

  std::vector<MeasuredRow> rows;
  for (const auto& dp : kPoints) {
    MeasuredRow r;
    r.dp = dp;
    r.used = resource_usage(dp, truth, d);
    r.u = model_utilization(dp, truth, d, T);
    rows.push_back(r);
  }
  KernelModel k = truth;
  k.fill_depth = 0;
  k.cost = {};
  Calibration c = calibrate(rows, k, d, T);
  CHECK(c.cost.fixed.alms == doctest::Approx(1000));
  CHECK(c.cost.per_pipeline.alms == doctest::Approx(20000));
  CHECK(c.cost.per_pipeline.regs == doctest::Approx(40000));
  CHECK(c.cost.per_pipeline.dsps == doctest::Approx(32));
  CHECK(c.cost.fixed.bram_bits == doctest::Approx(50000));
  CHECK(c.cost.buf_base_bits == doctest::Approx(600000));
  CHECK(c.cost.buf_lane_bits == doctest::Approx(40000));
  // demand 6.4 GB/s per lane: n=1 is unbound, n=2,4 are bound
  CHECK(c.fill_depth == doctest::Approx(300).epsilon(1e-6));
  CHECK(c.eff_bw_gbs == doctest::Approx(9.0).epsilon(1e-6));
  REQUIRE(c.bandwidth_bound.size() == 3);
  for (double r : c.u_residuals) CHECK(std::abs(r) < 1e-9);

  CHECK_THROWS_AS(calibrate({rows[0], rows[0]}, k, d, T), SpdError);
  CHECK_THROWS_AS(calibrate({rows[0]}, k, d, T), SpdError);
}

TEST_CASE("calibration against the measured rows") {
  const auto rows = measured();
  Calibration c = calibrate(rows, kernel(), device(), 720.0 * 300.0);
  CHECK(c.eff_bw_gbs == doctest::Approx(8.0371).epsilon(1e-4));
  CHECK(c.fill_depth == doctest::Approx(72.07).epsilon(1e-3));
  CHECK(c.cost.per_pipeline.dsps == doctest::Approx(48));
  REQUIRE(c.u_residuals.size() == rows.size());
  for (double r : c.u_residuals) CHECK(std::abs(r) < 0.01);
  for (const auto& r : c.resource_residuals) CHECK(std::abs(r.dsps) < 1e-6);
}

TEST_CASE("modeled sustained performance and utilization") {
  auto [k, d] = calibrated();
  const double gflops[] = {23.5, 47.1, 94.2, 26.3, 52.6, 26.3};
  const double u[] = {0.999, 0.999, 0.999, 0.557, 0.558, 0.279};
  for (int i = 0; i < 6; ++i) {
    CAPTURE(kPoints[i].str());
    PerfReport r = evaluate(kPoints[i], k, d, 720.0 * 300.0);
    CHECK(r.feasible);
    CHECK(std::abs(r.sustained_gflops / gflops[i] - 1.0) <= 0.01);
    CHECK(std::abs(r.u - u[i]) <= 0.01);
  }
}

TEST_CASE("exploration ranks by sustained and by perf per watt") {
  auto [k, d] = calibrated();
  const auto rows = measured();
  Exploration e = explore(k, d, {1, 2, 4, 8}, {1, 2, 4, 8}, 720.0 * 300.0, power_table(rows));
  REQUIRE(e.by_perf_per_watt.size() == 6);
  CHECK(e.by_perf_per_watt[0].dp == DesignPoint{1, 4});
  CHECK(std::abs(*e.by_perf_per_watt[0].gflops_per_watt - 2.416) <= 0.001);
  const double ppw[] = {0.837, 1.542, 2.416, 0.812, 1.405, 0.792};
  for (int i = 0; i < 6; ++i) {
    for (const auto& r : e.by_perf_per_watt)
      if (r.dp == kPoints[i]) CHECK(std::abs(*r.gflops_per_watt - ppw[i]) <= 0.01);
  }
  CHECK(e.by_sustained[0].dp == DesignPoint{1, 4});
  for (std::size_t i = 1; i < e.by_sustained.size(); ++i)
    CHECK(e.by_sustained[i - 1].sustained_gflops >= e.by_sustained[i].sustained_gflops);

  // (1,8) and friends exceed the ALMs; 8 lanes do not exist at all
  bool saw_alms = false, saw_lanes = false;
  for (const auto& r : e.infeasible) {
    CHECK_FALSE(r.feasible);
    saw_alms |= r.dp == DesignPoint{1, 8} && r.violation.rfind("ALMs", 0) == 0;
    saw_lanes |= r.dp.n == 8 && r.violation.find("8-lane") != std::string::npos;
  }
  CHECK(saw_alms);
  CHECK(saw_lanes);
  CHECK(e.infeasible.size() == 10);
}

TEST_CASE("without bandwidth limits the widest feasible design wins") {
  KernelModel k = calibrated().first;
  DeviceModel d = device();
  d.eff_bw_gbs = 1e6;
  d.mem_read_gbs = d.mem_write_gbs = 1e6;
  Exploration e = explore(k, d, {1, 2, 4}, {1, 2, 4}, 720.0 * 300.0);
  REQUIRE_FALSE(e.by_sustained.empty());
  CHECK(e.by_sustained[0].peak_gflops == doctest::Approx(94.32));
  CHECK(e.by_sustained[0].dp == DesignPoint{1, 4});  // ties go to the smaller n
  CHECK(e.by_perf_per_watt.empty());

  d.eff_bw_gbs = 1.0;
  e = explore(k, d, {1, 2, 4}, {1}, 720.0 * 300.0);
  // equal bandwidth-bound throughput; smaller n first
  CHECK(e.by_sustained[0].dp == DesignPoint{1, 1});
  CHECK_THROWS_AS(explore(k, d, {}, {1}, 1), SpdError);
  CHECK_THROWS_AS(evaluate({0, 1}, k, d, 1), SpdError);
}

TEST_CASE("reports and loaders") {
  auto [k, d] = calibrated();
  Exploration e = explore(k, d, {1, 2}, {1, 2}, 720.0 * 300.0, power_table(measured()));
  auto j = nlohmann::json::parse(report_json(e));
  REQUIRE(j["by_sustained"].size() == 4);
  CHECK(j["by_sustained"][0]["n"] == 2);
  CHECK(j["by_sustained"][0]["m"] == 2);
  CHECK(j["by_perf_per_watt"][0]["n"] == 1);
  CHECK(j["by_perf_per_watt"][0].contains("gflops_per_watt"));
  CHECK(report_table(e).find("(1,2)") != std::string::npos);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "spd_perf_test";
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_device((dir / "bad.json").string()), SpdError);
  CHECK_THROWS_AS(load_device((dir / "none.json").string()), SpdError);
  std::ofstream(dir / "fast.json")
      << R"({"available": {}, "f_ghz": 0.2, "mem_read_gbs": 10, "mem_write_gbs": 10, "eff_bw_gbs": 11})";
  CHECK_THROWS_AS(load_device((dir / "fast.json").string()), SpdError);
  std::ofstream(dir / "k.json") << R"({"n_flops": 3, "words_in": 2})";
  KernelModel kk = load_kernel((dir / "k.json").string());
  CHECK(kk.words_out == 2);
  CHECK(kk.legal_n(16));
  CHECK_FALSE(kernel().legal_n(8));
  fs::remove_all(dir);
}

// Acceptance checks: one PASS/FAIL line each, nonzero exit if any fails.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "dag_oracle.hpp"
#include "spd/frontend.hpp"
#include "spd/lbm.hpp"
#include "spd/perf.hpp"
#include "spd/sim.hpp"

using namespace spd;
namespace fs = std::filesystem;

namespace {

const std::string kSrc = SPD_SOURCE_DIR;
const double kT = 720.0 * 300.0;
const DesignPoint kPoints[] = {{1, 1}, {1, 2}, {1, 4}, {2, 1}, {2, 2}, {4, 1}};

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

void fail(Outcome& o, const std::string& why) {
  if (o.pass) o.detail.clear();
  o.pass = false;
  o.detail += (o.detail.empty() ? "" : "; ") + why;
}

std::pair<KernelModel, DeviceModel> calibrated_models() {
  KernelModel k = load_kernel(kSrc + "/configs/lbm_kernel.json");
  DeviceModel d = load_device(kSrc + "/configs/stratix_v.json");
  Calibration c = calibrate(load_measurements(kSrc + "/configs/lbm_measured.json"), k, d, kT);
  k.cost = c.cost;
  k.fill_depth = c.fill_depth;
  d.eff_bw_gbs = c.eff_bw_gbs;
  return {k, d};
}

Outcome peak() {
  Outcome o;
  const KernelModel k = load_kernel(kSrc + "/configs/lbm_kernel.json");
  const DeviceModel d = load_device(kSrc + "/configs/stratix_v.json");
  const double want[] = {23.58, 47.16, 94.32, 47.16, 94.32, 94.32};
  std::string got;
  for (int i = 0; i < 6; ++i) {
    const double p = peak_perf(kPoints[i], k, d);
    got += fmt("%.2f ", p);
    if (std::abs(p - want[i]) > 1e-9) fail(o, kPoints[i].str() + fmt(" peak %.4f, want %.2f", p, want[i]));
  }
  if (o.pass) o.detail = "peak GFlop/s " + got;
  return o;
}

Outcome sustained() {
  Outcome o;
  auto [k, d] = calibrated_models();
  const double gf[] = {23.5, 47.1, 94.2, 26.3, 52.6, 26.3};
  const double u[] = {0.999, 0.999, 0.999, 0.557, 0.558, 0.279};
  double worst_gf = 0, worst_u = 0;
  for (int i = 0; i < 6; ++i) {
    PerfReport r = evaluate(kPoints[i], k, d, kT);
    const double eg = std::abs(r.sustained_gflops / gf[i] - 1.0), eu = std::abs(r.u - u[i]);
    worst_gf = std::max(worst_gf, eg);
    worst_u = std::max(worst_u, eu);
    if (eg > 0.01) fail(o, kPoints[i].str() + fmt(" sustained %.2f vs %.1f", r.sustained_gflops, gf[i]));
    if (eu > 0.01) fail(o, kPoints[i].str() + fmt(" u %.4f vs %.3f", r.u, u[i]));
  }
  if (o.pass) o.detail = fmt("worst relative GFlop/s error %.4f, worst |du| %.4f", worst_gf, worst_u);
  return o;
}

Outcome ranking() {
  Outcome o;
  auto [k, d] = calibrated_models();
  const PowerTable power = power_table(load_measurements(kSrc + "/configs/lbm_measured.json"));
  Exploration e = explore(k, d, {1, 2, 4}, {1, 2, 4}, kT, power);
  if (e.by_perf_per_watt.size() != 6) {
    fail(o, "expected 6 ranked points, got " + std::to_string(e.by_perf_per_watt.size()));
    return o;
  }
  const PerfReport& top = e.by_perf_per_watt[0];
  if (!(top.dp == DesignPoint{1, 4})) fail(o, "best point " + top.dp.str());
  if (std::abs(*top.gflops_per_watt - 2.416) > 0.001) fail(o, fmt("best perf/W %.4f", *top.gflops_per_watt));
  const double want[] = {0.837, 1.542, 2.416, 0.812, 1.405, 0.792};
  for (int i = 0; i < 6; ++i)
    for (const auto& r : e.by_perf_per_watt)
      if (r.dp == kPoints[i] && std::abs(*r.gflops_per_watt - want[i]) > 0.01)
        fail(o, r.dp.str() + fmt(" perf/W %.3f vs %.3f", *r.gflops_per_watt, want[i]));
  if (o.pass) o.detail = "best " + top.dp.str() + fmt(" at %.4f GFlop/s/W", *top.gflops_per_watt);
  return o;
}

Dfg delay_pe(int d) {
  ModuleLibrary lib;
  lib.add_source("Name syn;\nMain_In {i::x};\nMain_Out {o::x};\nHDL d0, " + std::to_string(d) +
                 ", (o::x) = Delay(i::x), " + std::to_string(d) + ";\n");
  ElabOptions opts;
  opts.io_register_stages = 0;
  return elaborate(*lib.find("syn"), lib, opts);
}

StreamSet words(std::size_t T) {
  StreamSet s;
  s.streams["x"].assign(T, 0x3f800000u);
  return s;
}

Outcome cycles() {
  Outcome o;
  const Dfg pe = delay_pe(100);
  const std::uint64_t T = 1000;
  std::string got;
  for (std::uint64_t m : {1, 2, 4, 8}) {
    const std::uint64_t cas = run_iterations(pe, words(T), static_cast<int>(m), IterationMode::Cascaded);
    const std::uint64_t rep = run_iterations(pe, words(T), static_cast<int>(m), IterationMode::Repeated);
    const std::int64_t c = static_cast<std::int64_t>(cas) - static_cast<std::int64_t>(T + m * 100);
    const std::int64_t c2 = static_cast<std::int64_t>(rep) - static_cast<std::int64_t>(m * (T + 100));
    got += "m=" + std::to_string(m) + " " + std::to_string(cas) + "/" + std::to_string(rep) + " ";
    if (c < 0 || c > 4) fail(o, "cascaded m=" + std::to_string(m) + " took " + std::to_string(cas));
    if (c2 < 0 || c2 > 4 * static_cast<std::int64_t>(m))
      fail(o, "repeated m=" + std::to_string(m) + " took " + std::to_string(rep));
  }
  const Dfg shallow = delay_pe(10);
  const double rep = static_cast<double>(run_iterations(shallow, words(1000000), 8, IterationMode::Repeated));
  const double cas = static_cast<double>(run_iterations(shallow, words(1000000), 8, IterationMode::Cascaded));
  const double speedup = rep / cas;
  if (std::abs(speedup / 8.0 - 1.0) > 0.01) fail(o, fmt("speedup %.4f", speedup));
  if (o.pass) o.detail = "cycles cascaded/repeated " + got + fmt("speedup %.4f", speedup);
  return o;
}

// The demand is measured: at exactly 7.20 GB/s the kernel never waits on
// memory; at 10% less every element takes 1/0.9 cycles to read.
Outcome bandwidth() {
  Outcome o;
  ModuleLibrary lib;
  lib.add_directory(kSrc + "/corpus");
  const Dfg g = elaborate(*lib.find(lbm_top_name(1, 1)), lib);
  const StreamSet in = lbm_to_streams(lbm_channel_grid(720, 20), 1);
  const double T = static_cast<double>(in.length());
  auto u_at = [&](double gbs) {
    SimOptions opts;
    opts.mem = MemoryModel{};
    opts.mem->read_gbs = gbs;
    return measure_utilization(simulate(g, in, opts).counters);
  };
  const double fill = T / (T + static_cast<double>(g.depth));
  const double u_full = u_at(7.20), u_short = u_at(7.20 * 0.9);
  const double from_model = bandwidth_demand({1, 1}, load_kernel(kSrc + "/configs/lbm_kernel.json"),
                                             load_device(kSrc + "/configs/stratix_v.json"));
  if (std::abs(u_full - fill) > 1e-9) fail(o, fmt("u %.5f at 7.20 GB/s, fill alone gives %.5f", u_full, fill));
  const double starved = T / (T / 0.9 + static_cast<double>(g.depth));
  if (std::abs(u_short - starved) > 1e-3) fail(o, fmt("u %.4f at 6.48 GB/s, want %.4f", u_short, starved));
  if (std::abs(from_model - 7.20) > 1e-9) fail(o, fmt("model reports %.3f GB/s", from_model));
  if (o.pass) o.detail = fmt("model %.2f GB/s; simulated u %.4f at 7.20 GB/s, %.4f at 6.48 GB/s", from_model, u_full, u_short);
  return o;
}

Outcome op_census() {
  Outcome o;
  ModuleLibrary lib;
  lib.add_directory(kSrc + "/corpus");
  const OpCensus c = census(elaborate(*lib.find("PEx1"), lib));
  const std::string got = std::to_string(c.adders) + "/" + std::to_string(c.multipliers) + "/" +
                          std::to_string(c.dividers) + "/" + std::to_string(c.n_flops);
  if (c.adders != 70 || c.multipliers != 60 || c.dividers != 1 || c.n_flops != 131) fail(o, "census " + got);
  if (o.pass) o.detail = "adders/multipliers/dividers/total " + got;
  return o;
}

Outcome random_graphs() {
  Outcome o;
  oracle::Lcg rng(20240611);
  int checked = 0;
  for (int i = 0; i < 1000 && o.pass; ++i) {
    const Dfg g = equalize_delays(oracle::random_dag(rng));
    std::string why;
    if (!oracle::balanced(g, &why)) fail(o, "graph " + std::to_string(i) + ": " + why);
    if (!(equalize_delays(g) == g)) fail(o, "graph " + std::to_string(i) + " changed on re-equalization");
    if (oracle::output_depth(g) != g.depth) fail(o, "graph " + std::to_string(i) + " depth disagrees");

    const int io = static_cast<int>(g.inputs.size());
    const Dfg h = equalize_delays(oracle::random_dag(rng, 50, io));
    const Dfg gh = equalize_delays(oracle::compose(g, h));
    if (gh.depth != g.depth + h.depth)
      fail(o, "graph " + std::to_string(i) + ": composed depth " + std::to_string(gh.depth) + " != " +
                  std::to_string(g.depth) + " + " + std::to_string(h.depth));
    if (!oracle::balanced(gh, &why)) fail(o, "composition " + std::to_string(i) + ": " + why);
    const Dfg gg = cascade(g, 2);
    if (gg.depth != 2 * g.depth) fail(o, "graph " + std::to_string(i) + " cascade depth");
    ++checked;
  }
  if (o.pass) o.detail = std::to_string(checked) + " graphs balanced, idempotent, composition depths add";
  return o;
}

Outcome lbm_exact() {
  Outcome o;
  const ModuleLibrary lib = corpus_library(32);
  const LbmGrid g = lbm_channel_grid(32, 32);
  for (auto [n, m] : {std::pair{1, 1}, {1, 2}, {2, 1}}) {
    VerifyReport r = verify_kernel(lib, n, m, g, 4);
    if (!r.pass) fail(o, DesignPoint{n, m}.str() + ": " + r.message);
  }
  const LbmGrid p = lbm_interior_grid(32, 32);
  const double m0 = lbm_mass(p);
  const double drift = std::abs(lbm_mass(lbm_oracle(p, 100, Topology::Periodic)) / m0 - 1.0);
  if (drift > 1e-4) fail(o, fmt("periodic mass drift %.3g", drift));
  if (o.pass) o.detail = fmt("(1,1) (1,2) (2,1) bit-exact over 4 steps; periodic mass drift %.2g", drift);
  return o;
}

Outcome corpus_round_trip() {
  Outcome o;
  int files = 0;
  for (const auto& e : fs::directory_iterator(kSrc + "/corpus")) {
    if (e.path().extension() != ".spd") continue;
    ++files;
    const std::string name = e.path().filename().string();
    std::ifstream in(e.path());
    std::ostringstream os;
    os << in.rdbuf();
    try {
      SpdModule m = parse_module(os.str(), name);
      const auto diags = validate(m);
      if (!diags.empty()) fail(o, name + ": " + diags[0].message);
      const std::string once = print_module(m);
      SpdModule again = parse_module(once, name);
      if (!structurally_equal(m, again) || print_module(again) != once) fail(o, name + " does not round trip");
    } catch (const SpdError& err) {
      fail(o, err.what());
    }
  }
  if (files == 0) fail(o, "no corpus files");
  if (o.pass) o.detail = std::to_string(files) + " files, zero diagnostics, round trip stable";
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> checks[] = {
      {"peak performance", peak},
      {"sustained performance and utilization", sustained},
      {"design space ranking", ranking},
      {"cascaded and repeated cycle counts", cycles},
      {"single pipeline bandwidth", bandwidth},
      {"operator census", op_census},
      {"random graph equalization", random_graphs},
      {"LBM kernels against the oracle", lbm_exact},
      {"corpus parse and round trip", corpus_round_trip},
  };
  int failed = 0, i = 0;
  for (const auto& [name, run] : checks) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", ++i, name, o.detail.c_str());
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}

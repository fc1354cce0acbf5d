// spdc: SPD compiler, simulator and design-space explorer.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spd/dfg.hpp"
#include "spd/frontend.hpp"
#include "spd/lbm.hpp"
#include "spd/perf.hpp"
#include "spd/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spd;

namespace {

constexpr int kInputError = 1;
constexpr int kInternalError = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpdError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpdError("cannot write " + path);
  out << text;
}

struct Sources {
  std::vector<std::string> files;
  std::vector<std::string> lib_dirs;
  std::string top;
  std::string flatten = "full";
  int io_stages = 1;
};

void add_source_options(CLI::App* cmd, Sources& s) {
  cmd->add_option("files", s.files, "SPD source files")->check(CLI::ExistingFile);
  cmd->add_option("-L,--lib", s.lib_dirs, "directory of SPD modules to load")->check(CLI::ExistingDirectory);
  cmd->add_option("--top", s.top, "top module (default: first module of the last file)");
  cmd->add_option("--flatten", s.flatten, "module levels to flatten: 'full' or a count");
  cmd->add_option("--io-stages", s.io_stages, "register stages at the top's outputs")->check(CLI::NonNegativeNumber);
}

// Parses every source, reports all diagnostics and returns false when any.
bool load(const Sources& s, ModuleLibrary& lib, std::string& top) {
  bool ok = true;
  for (const auto& d : s.lib_dirs) lib.add_directory(d);
  std::string last;
  for (const auto& f : s.files) {
    SpdModule m;
    try {
      m = parse_module(slurp(f), f);
    } catch (const SpdError& e) {
      std::cerr << "error: " << e.what() << "\n";
      ok = false;
      continue;
    }
    for (const auto& d : validate(m)) {
      std::cerr << (d.loc.file.empty() ? f : d.loc.file) << ":" << d.loc.line << ": error: " << d.message << "\n";
      ok = false;
    }
    last = m.name;
    lib.add(std::move(m));
  }
  top = s.top.empty() ? last : s.top;
  if (ok && top.empty()) throw SpdError("no top module: give source files or --top");
  if (ok && !lib.find(top)) throw SpdError("top module '" + top + "' not found");
  return ok;
}

ElabOptions elab_options(const Sources& s) {
  ElabOptions o;
  if (s.flatten == "full") {
    o.flatten_depth = ElabOptions::kFull;
  } else {
    try {
      o.flatten_depth = std::stoi(s.flatten);
    } catch (const std::exception&) {
      throw SpdError("--flatten expects 'full' or a level count, got '" + s.flatten + "'");
    }
    if (o.flatten_depth < 0) throw SpdError("--flatten level count must be non-negative");
  }
  o.io_register_stages = s.io_stages;
  return o;
}

void print_warnings(const Dfg& g) {
  for (const auto& w : g.warnings) std::cerr << "warning: " << w << "\n";
}

json counters_json(const SimCounters& c) {
  return {{"n_c", c.n_c},         {"n_s", c.n_s},
          {"total_cycles", c.total_cycles}, {"steps", c.steps},
          {"window_begin", c.window_begin}, {"window_end", c.window_end}};
}

std::vector<int> parse_list(const std::string& text) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw SpdError("bad list element '" + item + "' in '" + text + "'");
    }
    if (v.back() < 1) throw SpdError("list elements must be positive: '" + text + "'");
  }
  if (v.empty()) throw SpdError("empty list");
  return v;
}

LbmGrid make_grid(const std::string& kind, int w, int h) {
  if (kind == "channel") return lbm_channel_grid(w, h);
  if (kind == "interior") return lbm_interior_grid(w, h);
  if (kind == "equilibrium") return lbm_equilibrium_grid(w, h, 1.0f, 0.05f, 0.0f, 1.25f);
  throw SpdError("unknown grid kind '" + kind + "' (channel, interior, equilibrium)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPD stream-processing compiler and tools"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "machine-readable output");

  // compile
  Sources csrc;
  std::string emit_kind = "none", out_path;
  bool want_census = false;
  auto* compile = app.add_subcommand("compile", "parse, validate, elaborate and equalize a design");
  add_source_options(compile, csrc);
  compile->add_option("--emit", emit_kind, "artifact to write")->check(CLI::IsMember({"none", "dot", "netlist"}));
  compile->add_option("-o,--output", out_path, "artifact path (default stdout)");
  compile->add_flag("--census", want_census, "print the floating-point operator census");

  // sim
  Sources ssrc;
  std::string manifest, out_dir, device_path;
  double read_gbs = 0, write_gbs = 0, clock_ghz = 0.18;
  auto* sim = app.add_subcommand("sim", "cycle-accurate simulation of a design");
  add_source_options(sim, ssrc);
  sim->add_option("-i,--manifest", manifest, "input stream manifest")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--out", out_dir, "write output streams and manifest here");
  sim->add_option("--device", device_path, "device model; memory limited to its effective bandwidth")
      ->check(CLI::ExistingFile);
  sim->add_option("--read-gbs", read_gbs, "read bandwidth limit in GB/s")->check(CLI::PositiveNumber);
  sim->add_option("--write-gbs", write_gbs, "write bandwidth limit in GB/s")->check(CLI::PositiveNumber);
  sim->add_option("--clock-ghz", clock_ghz, "core clock for the memory model")->check(CLI::PositiveNumber);

  // explore
  std::string kernel_path, xdevice_path, measured_path, n_list = "1,2,4", m_list = "1,2,4";
  double T = 216000;
  auto* explore_cmd = app.add_subcommand("explore", "rank (n, m) design points");
  explore_cmd->add_option("--kernel", kernel_path)->required()->check(CLI::ExistingFile);
  explore_cmd->add_option("--device", xdevice_path)->required()->check(CLI::ExistingFile);
  explore_cmd->add_option("--measured", measured_path, "measurements: calibrate first and use their power")
      ->check(CLI::ExistingFile);
  explore_cmd->add_option("--n", n_list, "lane counts, comma separated");
  explore_cmd->add_option("--m", m_list, "cascade lengths, comma separated");
  explore_cmd->add_option("-T,--elements", T, "stream length in cells")->check(CLI::PositiveNumber);

  // calibrate
  std::string ckernel, cdevice, cmeasured, write_kernel, write_device;
  double cT = 0;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "fit the performance model to measurements");
  calibrate_cmd->add_option("--kernel", ckernel)->required()->check(CLI::ExistingFile);
  calibrate_cmd->add_option("--device", cdevice)->required()->check(CLI::ExistingFile);
  calibrate_cmd->add_option("--measured", cmeasured)->required()->check(CLI::ExistingFile);
  calibrate_cmd->add_option("-T,--elements", cT, "stream length (default: measurement grid)");
  calibrate_cmd->add_option("--write-kernel", write_kernel, "save the calibrated kernel model");
  calibrate_cmd->add_option("--write-device", write_device, "save the device model with the fitted bandwidth");

  // verify
  int vn = 1, vm = 1, vsteps = 4, vw = 32, vh = 32;
  std::string vgrid = "channel", vcorpus;
  auto* verify = app.add_subcommand("verify", "check an LBM kernel bit-exactly against the software oracle");
  verify->add_option("--n", vn, "lanes")->check(CLI::IsMember({1, 2, 4}));
  verify->add_option("--m", vm, "cascaded PEs")->check(CLI::PositiveNumber);
  verify->add_option("--steps", vsteps, "time steps (multiple of m)")->check(CLI::PositiveNumber);
  verify->add_option("--width", vw)->check(CLI::PositiveNumber);
  verify->add_option("--height", vh)->check(CLI::PositiveNumber);
  verify->add_option("--grid", vgrid, "channel, interior or equilibrium");
  verify->add_option("-L,--lib", vcorpus, "kernel sources (default: generated for --width)")
      ->check(CLI::ExistingDirectory);

  // grid
  int gn = 1, gw = 720, gh = 300;
  std::string gkind = "channel", gout;
  auto* grid = app.add_subcommand("grid", "write an LBM grid as input streams for sim");
  grid->add_option("--n", gn, "lanes")->check(CLI::PositiveNumber);
  grid->add_option("--width", gw)->check(CLI::PositiveNumber);
  grid->add_option("--height", gh)->check(CLI::PositiveNumber);
  grid->add_option("--grid", gkind, "channel, interior or equilibrium");
  grid->add_option("-o,--out", gout, "output directory")->required();

  // corpus
  int corpus_w = 720;
  std::string corpus_out;
  auto* corpus = app.add_subcommand("corpus", "write the example and LBM kernel SPD sources");
  corpus->add_option("--width", corpus_w, "grid width of the LBM kernels")->check(CLI::PositiveNumber);
  corpus->add_option("-o,--out", corpus_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kInputError;
  }

  try {
    if (*compile) {
      ModuleLibrary lib;
      std::string top;
      if (!load(csrc, lib, top)) return kInputError;
      Dfg g = elaborate(*lib.find(top), lib, elab_options(csrc));
      print_warnings(g);
      if (emit_kind == "dot") emit(export_dot(g), out_path);
      if (emit_kind == "netlist") emit(export_netlist(g), out_path);
      const bool to_stdout = emit_kind != "none" && (out_path.empty() || out_path == "-");
      std::ostream& info = to_stdout ? std::cerr : std::cout;
      if (as_json) {
        json j = {{"schema", "spd-compile/1"},
                  {"top", g.name},
                  {"depth", g.depth},
                  {"vertices", g.vertices.size()},
                  {"edges", g.edges.size()},
                  {"warnings", g.warnings}};
        if (want_census) {
          OpCensus c = census(g);
          j["census"] = {{"adders", c.adders}, {"multipliers", c.multipliers}, {"dividers", c.dividers},
                         {"sqrts", c.sqrts}, {"n_flops", c.n_flops}};
        }
        info << j.dump(2) << "\n";
      } else {
        info << g.name << ": depth " << g.depth << ", " << g.vertices.size() << " vertices, " << g.edges.size()
             << " edges\n";
        if (want_census) {
          OpCensus c = census(g);
          info << "adders " << c.adders << ", multipliers " << c.multipliers << ", dividers " << c.dividers
               << ", sqrt " << c.sqrts << ", total " << c.n_flops << " FLOPs\n";
        }
      }
      return 0;
    }

    if (*sim) {
      ModuleLibrary lib;
      std::string top;
      if (!load(ssrc, lib, top)) return kInputError;
      Dfg g = elaborate(*lib.find(top), lib, elab_options(ssrc));
      print_warnings(g);
      SimOptions opts;
      if (!device_path.empty() || read_gbs > 0 || write_gbs > 0) {
        MemoryModel mem;
        mem.clock_ghz = clock_ghz;
        if (!device_path.empty()) {
          DeviceModel d = load_device(device_path);
          mem.read_gbs = mem.write_gbs = d.eff_bw_gbs;
          mem.clock_ghz = d.f_ghz;
        }
        if (read_gbs > 0) mem.read_gbs = read_gbs;
        if (write_gbs > 0) mem.write_gbs = write_gbs;
        opts.mem = mem;
      }
      SimResult r = simulate(g, load_manifest(manifest), opts);
      if (!out_dir.empty()) emit(save_streams(r.outputs, out_dir), (fs::path(out_dir) / "manifest.json").string());
      const double u = measure_utilization(r.counters);
      if (as_json) {
        json j = {{"schema", "spd-sim/1"},    {"top", g.name},
                  {"depth", g.depth},         {"elements", r.outputs.streams.empty() ? 0 : r.outputs.length()},
                  {"counters", counters_json(r.counters)}, {"u", u},
                  {"nonfinite_outputs", r.nonfinite.size()}, {"nonfinite_ops", r.nonfinite_ops}};
        std::cout << j.dump(2) << "\n";
      } else {
        const auto& c = r.counters;
        std::cout << g.name << ": depth " << g.depth << "\n";
        std::cout << "n_c " << c.n_c << ", n_s " << c.n_s << ", window " << c.total_cycles << " cycles\n";
        std::cout << std::fixed << std::setprecision(4) << "u " << u << "\n";
        if (!r.nonfinite.empty())
          std::cout << "non-finite output words: " << r.nonfinite.size() << " (first at " << r.nonfinite[0].port
                    << "[" << r.nonfinite[0].index << "])\n";
      }
      return 0;
    }

    if (*explore_cmd) {
      KernelModel k = load_kernel(kernel_path);
      DeviceModel d = load_device(xdevice_path);
      std::optional<PowerTable> power;
      if (!measured_path.empty()) {
        auto rows = load_measurements(measured_path);
        Calibration cal = calibrate(rows, k, d, T);
        k.cost = cal.cost;
        k.fill_depth = cal.fill_depth;
        d.eff_bw_gbs = cal.eff_bw_gbs;
        power = power_table(rows);
      }
      Exploration e = explore(k, d, parse_list(n_list), parse_list(m_list), T, power);
      std::cout << (as_json ? report_json(e) : report_table(e));
      return 0;
    }

    if (*calibrate_cmd) {
      KernelModel k = load_kernel(ckernel);
      DeviceModel d = load_device(cdevice);
      auto rows = load_measurements(cmeasured);
      if (cT <= 0) {
        json mj = json::parse(slurp(cmeasured));
        if (!mj.contains("grid")) throw SpdError(cmeasured + ": no grid; pass -T");
        cT = mj["grid"][0].get<double>() * mj["grid"][1].get<double>();
      }
      Calibration cal = calibrate(rows, k, d, cT);
      auto res_json = [](const Resources& r) {
        return json{{"alms", r.alms}, {"regs", r.regs}, {"bram_bits", r.bram_bits}, {"dsps", r.dsps}};
      };
      json j = {{"schema", "spd-calibration/1"},
                {"eff_bw_gbs", cal.eff_bw_gbs},
                {"fill_depth", cal.fill_depth},
                {"fixed", res_json(cal.cost.fixed)},
                {"per_pipeline", res_json(cal.cost.per_pipeline)},
                {"buf_base_bits", cal.cost.buf_base_bits},
                {"buf_lane_bits", cal.cost.buf_lane_bits}};
      for (const auto& dp : cal.bandwidth_bound) j["bandwidth_bound"].push_back(dp.str());
      for (std::size_t i = 0; i < rows.size(); ++i)
        j["rows"].push_back({{"dp", rows[i].dp.str()},
                             {"u_residual", cal.u_residuals[i]},
                             {"resource_residual", res_json(cal.resource_residuals[i])}});
      if (!write_kernel.empty() || !write_device.empty()) {
        if (!write_kernel.empty()) {
          json kj = json::parse(slurp(ckernel));
          kj["fill_depth"] = cal.fill_depth;
          kj["cost"] = {{"fixed", res_json(cal.cost.fixed)},
                        {"per_pipeline", res_json(cal.cost.per_pipeline)},
                        {"buf_base_bits", cal.cost.buf_base_bits},
                        {"buf_lane_bits", cal.cost.buf_lane_bits}};
          emit(kj.dump(2) + "\n", write_kernel);
        }
        if (!write_device.empty()) {
          json dj = json::parse(slurp(cdevice));
          dj["eff_bw_gbs"] = cal.eff_bw_gbs;
          emit(dj.dump(2) + "\n", write_device);
        }
      }
      if (as_json) {
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << std::fixed << std::setprecision(4) << "effective bandwidth " << cal.eff_bw_gbs
                  << " GB/s, effective fill " << std::setprecision(2) << cal.fill_depth << " cycles/PE\n";
        std::cout << "per pipeline: ALMs " << std::setprecision(0) << cal.cost.per_pipeline.alms << ", regs "
                  << cal.cost.per_pipeline.regs << ", DSPs " << cal.cost.per_pipeline.dsps << "\n";
        std::cout << "fixed: ALMs " << cal.cost.fixed.alms << ", regs " << cal.cost.fixed.regs << ", BRAM bits "
                  << cal.cost.fixed.bram_bits << ", DSPs " << cal.cost.fixed.dsps << "\n";
        std::cout << "stencil buffer: " << cal.cost.buf_base_bits << " bits + " << cal.cost.buf_lane_bits
                  << " bits per extra lane\n";
        std::cout << std::setprecision(4);
        for (std::size_t i = 0; i < rows.size(); ++i)
          std::cout << rows[i].dp.str() << " u residual " << cal.u_residuals[i] << "\n";
      }
      return 0;
    }

    if (*verify) {
      ModuleLibrary lib;
      if (vcorpus.empty())
        lib = corpus_library(vw);
      else
        lib.add_directory(vcorpus);
      VerifyReport r = verify_kernel(lib, vn, vm, make_grid(vgrid, vw, vh), vsteps);
      if (as_json) {
        json j = {{"schema", "spd-verify/1"}, {"top", lbm_top_name(vn, vm)}, {"pass", r.pass},
                  {"passes", r.passes},       {"cycles", r.cycles},            {"message", r.message}};
        if (!r.pass) j["mismatch"] = {{"step", r.step}, {"cell", r.cell}, {"field", r.field}};
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << lbm_top_name(vn, vm) << " " << vw << "x" << vh << ": " << (r.pass ? "PASS" : "FAIL") << " ("
                  << r.message << ")\n";
      }
      return r.pass ? 0 : kInputError;
    }

    if (*grid) {
      LbmGrid g = make_grid(gkind, gw, gh);
      StreamSet s = lbm_to_streams(g, gn);
      json j = json::parse(save_streams(s, gout));
      j["constants_as_words"] = true;
      for (const auto& [port, word] : s.constants) j["constants"][port] = word;
      emit(j.dump(2) + "\n", (fs::path(gout) / "manifest.json").string());
      std::cout << gw << "x" << gh << " " << gkind << " grid, " << gn << " lane(s): " << (fs::path(gout) / "manifest.json").string()
                << "\n";
      return 0;
    }

    if (*corpus) {
      fs::create_directories(corpus_out);
      for (const auto& f : build_corpus(corpus_w)) emit(f.source, (fs::path(corpus_out) / f.file).string());
      return 0;
    }
  } catch (const SpdError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return 0;
}

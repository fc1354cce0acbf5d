#include "spd/perf.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"
#include "spd/frontend.hpp"

namespace spd {

using nlohmann::json;

double peak_perf(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d) {
  return dp.n * dp.m * k.n_flops * d.f_ghz;
}

double bandwidth_demand(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d, bool write) {
  return dp.n * (write ? k.words_out : k.words_in) * 4.0 * d.f_ghz;
}

double model_utilization(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d, double T, double* u_bw,
                         double* u_pipe) {
  double bw = 1.0;
  for (bool write : {false, true}) {
    const double demand = bandwidth_demand(dp, k, d, write);
    if (demand > 0) bw = std::min(bw, d.eff_bw_gbs / demand);
  }
  // n lanes stream T elements in T/n cycles.
  const double cycles = T / dp.n;
  const double pipe = cycles / (cycles + dp.m * k.fill_depth);
  if (u_bw) *u_bw = bw;
  if (u_pipe) *u_pipe = pipe;
  return bw * pipe;
}

Resources resource_usage(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d, std::string* violation) {
  const CostModel& c = k.cost;
  Resources core = c.fixed + c.per_pipeline * (dp.n * dp.m);
  core.bram_bits = c.fixed.bram_bits + dp.m * c.buffer_bits(dp.n);
  Resources total = core + d.soc_overhead;
  if (violation) {
    violation->clear();
    const std::pair<const char*, std::pair<double, double>> checks[] = {
        {"ALMs", {total.alms, d.available.alms}},
        {"registers", {total.regs, d.available.regs}},
        {"BRAM bits", {total.bram_bits, d.available.bram_bits}},
        {"DSPs", {total.dsps, d.available.dsps}},
    };
    for (const auto& [name, v] : checks)
      if (v.first > v.second) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s %.0f > %.0f", name, v.first, v.second);
        *violation = buf;
        break;
      }
  }
  return total;
}

PerfReport evaluate(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d, double T) {
  if (dp.n < 1 || dp.m < 1) throw SpdError("design point " + dp.str() + " needs n >= 1 and m >= 1");
  PerfReport r;
  r.dp = dp;
  r.peak_gflops = peak_perf(dp, k, d);
  r.u = model_utilization(dp, k, d, T, &r.u_bw, &r.u_pipe);
  r.sustained_gflops = r.u * r.peak_gflops;
  r.bw_read_gbs = bandwidth_demand(dp, k, d, false);
  r.bw_write_gbs = bandwidth_demand(dp, k, d, true);
  r.used = resource_usage(dp, k, d, &r.violation);
  if (!k.legal_n(dp.n)) r.violation = "no " + std::to_string(dp.n) + "-lane variant of " + k.name;
  r.feasible = r.violation.empty();
  return r;
}

Exploration explore(const KernelModel& k, const DeviceModel& d, const std::vector<int>& n_range,
                    const std::vector<int>& m_range, double T, const std::optional<PowerTable>& power) {
  if (n_range.empty() || m_range.empty()) throw SpdError("explore: empty design range");
  Exploration e;
  for (int n : std::set<int>(n_range.begin(), n_range.end()))
    for (int m : std::set<int>(m_range.begin(), m_range.end())) {
      PerfReport r = evaluate({n, m}, k, d, T);
      if (power)
        if (auto it = power->find(r.dp); it != power->end() && it->second > 0) {
          r.watts = it->second;
          r.gflops_per_watt = r.sustained_gflops / it->second;
        }
      (r.feasible ? e.by_sustained : e.infeasible).push_back(r);
    }
  // Ties go to the smaller n, then the smaller m.
  auto order = [](auto key) {
    return [key](const PerfReport& a, const PerfReport& b) {
      const double ka = key(a), kb = key(b);
      if (ka != kb) return ka > kb;
      return a.dp < b.dp;
    };
  };
  std::stable_sort(e.by_sustained.begin(), e.by_sustained.end(),
                   order([](const PerfReport& r) { return r.sustained_gflops; }));
  for (const auto& r : e.by_sustained)
    if (r.gflops_per_watt) e.by_perf_per_watt.push_back(r);
  std::stable_sort(e.by_perf_per_watt.begin(), e.by_perf_per_watt.end(),
                   order([](const PerfReport& r) { return *r.gflops_per_watt; }));
  return e;
}

namespace {

Eigen::VectorXd least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  return A.colPivHouseholderQr().solve(b);
}

}  // namespace

Calibration calibrate(const std::vector<MeasuredRow>& rows, const KernelModel& k, const DeviceModel& d, double T) {
  std::set<DesignPoint> distinct;
  for (const auto& r : rows) distinct.insert(r.dp);
  if (rows.size() < 2 || distinct.size() < 2)
    throw SpdError("calibration impossible: need at least two rows with different (n, m)");

  Calibration cal;
  const int R = static_cast<int>(rows.size());

  // alms/regs/dsps = fixed + nm * per_pipeline
  Eigen::MatrixXd A(R, 2);
  Eigen::MatrixXd B(R, 3);
  for (int i = 0; i < R; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = rows[i].dp.n * rows[i].dp.m;
    B(i, 0) = rows[i].used.alms;
    B(i, 1) = rows[i].used.regs;
    B(i, 2) = rows[i].used.dsps;
  }
  Eigen::MatrixXd X = A.colPivHouseholderQr().solve(B);
  cal.cost.fixed = {X(0, 0), X(0, 1), 0, X(0, 2)};
  cal.cost.per_pipeline = {X(1, 0), X(1, 1), 0, X(1, 2)};

  // bram = fixed + m * (base + lane * (n - 1)); drop the lane column when all n agree.
  std::set<int> ns;
  for (const auto& r : rows) ns.insert(r.dp.n);
  const int cols = ns.size() > 1 ? 3 : 2;
  Eigen::MatrixXd Ab(R, cols);
  Eigen::VectorXd bb(R);
  for (int i = 0; i < R; ++i) {
    Ab(i, 0) = 1.0;
    Ab(i, 1) = rows[i].dp.m;
    if (cols == 3) Ab(i, 2) = rows[i].dp.m * (rows[i].dp.n - 1);
    bb(i) = rows[i].used.bram_bits;
  }
  Eigen::VectorXd xb = least_squares(Ab, bb);
  cal.cost.fixed.bram_bits = xb(0);
  cal.cost.buf_base_bits = xb(1);
  cal.cost.buf_lane_bits = cols == 3 ? xb(2) : 0.0;

  // Rows well below full utilization are bandwidth-bound; the rest fix the
  // fill depth through 1/u - 1 = m * d * n / T.
  std::vector<const MeasuredRow*> bound, unbound;
  for (const auto& r : rows) (r.u < 0.95 ? bound : unbound).push_back(&r);
  double sxy = 0, sxx = 0;
  for (const auto* r : unbound) {
    if (r->u <= 0) continue;
    const double x = r->dp.m * r->dp.n / T, y = 1.0 / r->u - 1.0;
    sxy += x * y;
    sxx += x * x;
  }
  cal.fill_depth = sxx > 0 ? std::max(0.0, sxy / sxx) : k.fill_depth;

  KernelModel km = k;
  km.cost = cal.cost;
  km.fill_depth = cal.fill_depth;
  // u = eff_bw * (u_pipe / demand) on bound rows; closed-form least squares.
  double num = 0, den = 0;
  for (const auto* r : bound) {
    double u_pipe = 0;
    model_utilization(r->dp, km, d, T, nullptr, &u_pipe);
    const double demand = std::max(bandwidth_demand(r->dp, km, d, false), bandwidth_demand(r->dp, km, d, true));
    const double a = u_pipe / demand;
    num += r->u * a;
    den += a * a;
    cal.bandwidth_bound.push_back(r->dp);
  }
  cal.eff_bw_gbs = den > 0 ? num / den : std::min(d.mem_read_gbs, d.mem_write_gbs);

  DeviceModel dm = d;
  dm.eff_bw_gbs = cal.eff_bw_gbs;
  dm.soc_overhead = {};
  for (const auto& r : rows) {
    Resources model = resource_usage(r.dp, km, dm);
    cal.resource_residuals.push_back(r.used + model * -1.0);
    cal.u_residuals.push_back(r.u - model_utilization(r.dp, km, dm, T));
  }
  return cal;
}

// ---------------------------------------------------------------------------
// Configuration files

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpdError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SpdError(path + ": " + e.what());
  }
}

Resources resources_of(const json& j) {
  return {j.value("alms", 0.0), j.value("regs", 0.0), j.value("bram_bits", 0.0), j.value("dsps", 0.0)};
}

json to_json(const Resources& r) {
  return {{"alms", r.alms}, {"regs", r.regs}, {"bram_bits", r.bram_bits}, {"dsps", r.dsps}};
}

template <class F>
auto guarded(const std::string& path, F f) {
  try {
    return f(read_json(path));
  } catch (const json::exception& e) {
    throw SpdError(path + ": " + e.what());
  }
}

}  // namespace

DeviceModel load_device(const std::string& path) {
  return guarded(path, [](const json& j) {
    DeviceModel d;
    d.name = j.value("name", "");
    d.available = resources_of(j.at("available"));
    d.f_ghz = j.at("f_ghz").get<double>();
    d.mem_read_gbs = j.at("mem_read_gbs").get<double>();
    d.mem_write_gbs = j.at("mem_write_gbs").get<double>();
    d.eff_bw_gbs = j.value("eff_bw_gbs", std::min(d.mem_read_gbs, d.mem_write_gbs));
    if (j.contains("soc_overhead")) d.soc_overhead = resources_of(j["soc_overhead"]);
    if (d.eff_bw_gbs > std::min(d.mem_read_gbs, d.mem_write_gbs) + 1e-12)
      throw SpdError("effective bandwidth exceeds peak bandwidth");
    return d;
  });
}

KernelModel load_kernel(const std::string& path) {
  return guarded(path, [](const json& j) {
    KernelModel k;
    k.name = j.value("name", "");
    k.n_flops = j.at("n_flops").get<double>();
    k.words_in = j.at("words_in").get<double>();
    k.words_out = j.value("words_out", k.words_in);
    k.fill_depth = j.value("fill_depth", 0.0);
    if (j.contains("depth_by_n"))
      for (const auto& [n, depth] : j["depth_by_n"].items()) k.depth_by_n[std::stoi(n)] = depth.get<double>();
    if (j.contains("cost")) {
      const json& c = j["cost"];
      k.cost.fixed = resources_of(c.value("fixed", json::object()));
      k.cost.per_pipeline = resources_of(c.value("per_pipeline", json::object()));
      k.cost.buf_base_bits = c.value("buf_base_bits", 0.0);
      k.cost.buf_lane_bits = c.value("buf_lane_bits", 0.0);
    }
    return k;
  });
}

std::vector<MeasuredRow> load_measurements(const std::string& path) {
  return guarded(path, [](const json& j) {
    std::vector<MeasuredRow> rows;
    for (const auto& x : j.at("rows")) {
      MeasuredRow r;
      r.dp = {x.at("n").get<int>(), x.at("m").get<int>()};
      r.used = resources_of(x.at("used"));
      r.u = x.at("u").get<double>();
      if (x.contains("watts")) r.watts = x["watts"].get<double>();
      if (x.contains("gflops")) r.gflops = x["gflops"].get<double>();
      rows.push_back(r);
    }
    return rows;
  });
}

PowerTable power_table(const std::vector<MeasuredRow>& rows) {
  PowerTable p;
  for (const auto& r : rows)
    if (r.watts) p[r.dp] = *r.watts;
  return p;
}

namespace {

json to_json(const PerfReport& r) {
  json j{{"n", r.dp.n},
         {"m", r.dp.m},
         {"peak_gflops", r.peak_gflops},
         {"u_bw", r.u_bw},
         {"u_pipe", r.u_pipe},
         {"u", r.u},
         {"sustained_gflops", r.sustained_gflops},
         {"bw_read_gbs", r.bw_read_gbs},
         {"bw_write_gbs", r.bw_write_gbs},
         {"used", to_json(r.used)},
         {"feasible", r.feasible}};
  if (!r.violation.empty()) j["violation"] = r.violation;
  if (r.watts) j["watts"] = *r.watts;
  if (r.gflops_per_watt) j["gflops_per_watt"] = *r.gflops_per_watt;
  return j;
}

}  // namespace

std::string report_json(const Exploration& e) {
  json j;
  for (const auto& [key, list] : {std::pair{"by_sustained", &e.by_sustained},
                                  std::pair{"by_perf_per_watt", &e.by_perf_per_watt},
                                  std::pair{"infeasible", &e.infeasible}}) {
    j[key] = json::array();
    for (const auto& r : *list) j[key].push_back(to_json(r));
  }
  return j.dump(2) + "\n";
}

std::string report_table(const Exploration& e) {
  std::string out;
  char line[256];
  auto row = [&](const PerfReport& r) {
    std::snprintf(line, sizeof line, "%-7s %8.2f %6.3f %9.2f %7.2f", r.dp.str().c_str(), r.peak_gflops, r.u,
                  r.sustained_gflops, r.bw_read_gbs);
    out += line;
    if (r.gflops_per_watt) {
      std::snprintf(line, sizeof line, " %6.1f %7.3f", *r.watts, *r.gflops_per_watt);
      out += line;
    }
    if (!r.violation.empty()) out += "  infeasible: " + r.violation;
    out += "\n";
  };
  out += "(n,m)      peak      u  sustained  GB/s     W  GF/s/W\n";
  for (const auto& r : e.by_sustained) row(r);
  if (!e.by_perf_per_watt.empty()) {
    out += "\nranked by GFlop/s/W\n";
    for (const auto& r : e.by_perf_per_watt) row(r);
  }
  if (!e.infeasible.empty()) {
    out += "\ninfeasible\n";
    for (const auto& r : e.infeasible) row(r);
  }
  return out;
}

}  // namespace spd

#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spd {

struct DesignPoint {
  int n = 1;  // pipelines per PE
  int m = 1;  // cascaded PEs

  auto operator<=>(const DesignPoint&) const = default;
  std::string str() const { return "(" + std::to_string(n) + "," + std::to_string(m) + ")"; }
};

struct Resources {
  double alms = 0, regs = 0, bram_bits = 0, dsps = 0;

  Resources operator+(const Resources& o) const {
    return {alms + o.alms, regs + o.regs, bram_bits + o.bram_bits, dsps + o.dsps};
  }
  Resources operator*(double k) const { return {alms * k, regs * k, bram_bits * k, dsps * k}; }
};

struct DeviceModel {
  std::string name;
  Resources available;
  double f_ghz = 0.18;
  double mem_read_gbs = 12.8, mem_write_gbs = 12.8;
  double eff_bw_gbs = 12.8;
  Resources soc_overhead;
};

struct CostModel {
  Resources fixed;         // core overhead independent of (n, m)
  Resources per_pipeline;  // alms/regs/dsps per pipeline (bram unused)
  double buf_base_bits = 0;  // stencil buffer of a one-lane PE
  double buf_lane_bits = 0;  // extra buffer per additional lane

  double buffer_bits(int n) const { return buf_base_bits + buf_lane_bits * (n - 1); }
};

struct KernelModel {
  std::string name;
  double n_flops = 0;  // per pipeline
  double words_in = 0, words_out = 0;  // 32-bit words per element per pipeline
  /// Effective pipeline fill per PE used by the utilization model (cycles).
  double fill_depth = 0;
  /// Structural depth per PE for each legal lane count; keys are the legal n.
  std::map<int, double> depth_by_n;
  CostModel cost;

  bool legal_n(int n) const { return depth_by_n.empty() || depth_by_n.count(n) != 0; }
};

struct PerfReport {
  DesignPoint dp;
  double peak_gflops = 0;
  double u_bw = 0, u_pipe = 0, u = 0;
  double sustained_gflops = 0;
  double bw_read_gbs = 0, bw_write_gbs = 0;
  Resources used;
  bool feasible = true;
  std::string violation;  // first violated constraint when infeasible
  std::optional<double> watts, gflops_per_watt;
};

double peak_perf(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d);
/// Read-side demand in GB/s (write side uses words_out); independent of m.
double bandwidth_demand(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d, bool write = false);
double model_utilization(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d, double T,
                         double* u_bw = nullptr, double* u_pipe = nullptr);
/// Core + SoC usage; sets `violation` to the first exceeded resource.
Resources resource_usage(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d,
                         std::string* violation = nullptr);
PerfReport evaluate(const DesignPoint& dp, const KernelModel& k, const DeviceModel& d, double T);

using PowerTable = std::map<DesignPoint, double>;

struct Exploration {
  std::vector<PerfReport> by_sustained;  // feasible points, best first
  std::vector<PerfReport> by_perf_per_watt;  // feasible points with a power entry
  std::vector<PerfReport> infeasible;
};

Exploration explore(const KernelModel& k, const DeviceModel& d, const std::vector<int>& n_range,
                    const std::vector<int>& m_range, double T, const std::optional<PowerTable>& power = {});

struct MeasuredRow {
  DesignPoint dp;
  Resources used;  // core only, SoC excluded
  double u = 0;
  std::optional<double> watts;
  std::optional<double> gflops;
};

struct Calibration {
  CostModel cost;
  double eff_bw_gbs = 0;
  double fill_depth = 0;
  std::vector<DesignPoint> bandwidth_bound;  // rows used for the bandwidth fit
  std::vector<Resources> resource_residuals;  // measured - model, per row
  std::vector<double> u_residuals;
};

/// Fits cost parameters, the effective bandwidth and the effective fill depth
/// to measured rows. `k` supplies n_flops/words, `d` the clock.
Calibration calibrate(const std::vector<MeasuredRow>& rows, const KernelModel& k, const DeviceModel& d, double T);

// JSON configuration files.
DeviceModel load_device(const std::string& path);
KernelModel load_kernel(const std::string& path);
std::vector<MeasuredRow> load_measurements(const std::string& path);
PowerTable power_table(const std::vector<MeasuredRow>& rows);
std::string report_json(const Exploration& e);
std::string report_table(const Exploration& e);

}  // namespace spd

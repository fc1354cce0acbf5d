#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spd/dfg.hpp"

namespace spd {

/// Per-port input (or output) words plus constant-register values.
struct StreamSet {
  std::map<std::string, std::vector<std::uint32_t>> streams;
  std::map<std::string, std::uint32_t> constants;

  /// Common stream length; throws SpdError when ports disagree.
  std::size_t length() const;
  void set_floats(const std::string& port, const std::vector<float>& v);
  std::vector<float> floats(const std::string& port) const;
  void set_constant(const std::string& port, float v);
};

struct SimCounters {
  std::uint64_t n_c = 0;  // cycles that accepted a valid input element
  std::uint64_t n_s = 0;  // remaining cycles of the window
  std::uint64_t total_cycles = 0;  // window length, n_c + n_s
  std::uint64_t steps = 0;         // cycles in which the pipeline advanced
  std::int64_t window_begin = -1, window_end = -1;
};

/// Memory bandwidth seen by the core. Budgets are in 32-bit words per cycle.
struct MemoryModel {
  double read_gbs = 12.8;
  double write_gbs = 12.8;
  double clock_ghz = 0.18;
  /// Words moved per element; default counts data ports (sop/eop excluded).
  std::optional<double> words_in, words_out;

  double read_budget() const { return read_gbs / (4.0 * clock_ghz); }
  double write_budget() const { return write_gbs / (4.0 * clock_ghz); }
};

struct SimOptions {
  std::optional<MemoryModel> mem;  // unconstrained when empty
  /// Hard cap on simulated cycles; 0 picks a bound from T and the depth.
  std::uint64_t max_cycles = 0;
};

struct NonFinite {
  std::string port;
  std::size_t index = 0;
};

struct SimResult {
  StreamSet outputs;  // valid output words per Output port, in arrival order
  SimCounters counters;
  std::vector<NonFinite> nonfinite;  // non-finite float words leaving the core
  std::uint64_t nonfinite_ops = 0;   // operator results that were NaN/Inf on valid data
};

/// Cycle-accurate run. Each input port streams its words as consecutive valid
/// elements, sop on the first and eop on the last; ports named `sop`/`eop`
/// without a supplied stream are driven as 1/0 words.
SimResult simulate(const Dfg& g, const StreamSet& inputs, const SimOptions& opts = {});

double measure_utilization(const SimCounters& c);

enum class IterationMode { Cascaded, Repeated };

/// Cycles to push `inputs` through m iterations of `pe`: one pass over m
/// chained copies, or m passes over a single copy (outputs fed back by name).
std::uint64_t run_iterations(const Dfg& pe, const StreamSet& inputs, int m, IterationMode mode,
                             SimResult* last = nullptr);

// Binary stream files: little-endian 32-bit words.
std::vector<std::uint32_t> read_words(const std::string& path);
void write_words(const std::string& path, const std::vector<std::uint32_t>& words);

/// JSON manifest: {"inputs": {port: file}, "constants": {port: number},
/// "T": n}. Relative file names are resolved against the manifest directory.
StreamSet load_manifest(const std::string& path);
/// Writes one `<port>.bin` per output stream into `dir` and returns the
/// manifest text describing them.
std::string save_streams(const StreamSet& s, const std::string& dir);

}  // namespace spd

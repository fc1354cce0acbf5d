#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spd/frontend.hpp"

namespace spd {

/// One 32-bit word on a stream port in one cycle.
struct StreamElement {
  std::uint32_t word = 0;
  bool valid = false;
  bool sop = false;
  bool eop = false;

  float as_float() const { return std::bit_cast<float>(word); }
  static StreamElement of_float(float v, bool valid = true) { return {std::bit_cast<std::uint32_t>(v), valid}; }
  bool operator==(const StreamElement&) const = default;
};

/// Cycle-stepped behaviour of one graph vertex. The simulator calls
/// `absorb` once per advancing cycle with that cycle's inputs and `emit` once
/// to obtain that cycle's outputs. Combinational behaviours are absorbed
/// before they emit; registered ones (latency >= 1 with no same-cycle path)
/// emit first.
class Behavior {
 public:
  virtual ~Behavior() = default;
  virtual void absorb(std::span<const StreamElement> in) = 0;
  virtual void emit(std::span<StreamElement> out) = 0;
};

/// Fixed-length FIFO of per-cycle output vectors realizing a pure latency.
class LatencyRing {
 public:
  LatencyRing(std::int64_t latency, std::size_t width);
  /// Registered use: value pushed `latency` pushes ago (latency >= 1).
  std::span<const StreamElement> front() const;
  void push(std::span<const StreamElement> v);
  std::int64_t latency() const { return latency_; }

 private:
  std::int64_t latency_;
  std::size_t width_;
  std::vector<StreamElement> data_;
  std::size_t head_ = 0;
};

/// Named compile-time parameters of an HDL node, keyed by name; positional
/// entries are stored as "#0", "#1", ...
class ParamMap {
 public:
  ParamMap() = default;
  explicit ParamMap(const std::vector<HdlParam>& params);

  bool has(const std::string& name) const { return values_.count(name) != 0; }
  std::int64_t get_int(const std::string& name, std::int64_t fallback) const;
  double get_real(const std::string& name, double fallback) const;
  std::string get_str(const std::string& name, const std::string& fallback) const;
  std::vector<std::int64_t> get_int_list(const std::string& name) const;

 private:
  std::map<std::string, std::vector<std::string>> values_;
};

struct PrimitiveSpec {
  std::string name;
  int main_in = 0, main_out = 0, brch_in = 0, brch_out = 0;
  std::int64_t latency = 0;
  /// Outputs depend on the same cycle's inputs.
  bool combinational = false;
  ParamMap params;
  std::function<std::unique_ptr<Behavior>()> make;
};

/// Wraps a behaviour so its outputs appear `extra` cycles later.
std::unique_ptr<Behavior> pad_behavior(std::unique_ptr<Behavior> inner, bool inner_combinational,
                                       std::int64_t extra, std::size_t out_width);

// Factories. `lanes` counts parallel element streams handled by one instance.

PrimitiveSpec delay_prim(std::int64_t k, int width = 1);
PrimitiveSpec stream_forward_prim(std::int64_t k, std::uint32_t pad_word = 0);
PrimitiveSpec stream_backward_prim(std::int64_t k, std::uint32_t pad_word = 0);

struct StencilConfig {
  std::vector<std::int64_t> offsets;  // element offsets relative to the centre
  std::int64_t row_len = 1;
  int lanes = 1;
  std::uint32_t pad_word = 0;
  /// Maximum number of buffered rows; offsets beyond row_len * max_rows are rejected.
  std::int64_t max_rows = 4;
};
/// Inputs: one per lane. Outputs: offset-major, out[k * lanes + lane] is the
/// tap `offsets[k]` for that lane. Taps are located by cycle, so a pass must
/// arrive without valid gaps; taps that straddle a gap read the pad word.
PrimitiveSpec stencil2d_prim(const StencilConfig& cfg);
/// Words of line-buffer storage needed by a stencil (shared across lanes).
std::int64_t stencil_buffer_words(const StencilConfig& cfg);

enum class CompareOp { Lt, Le, Gt, Ge, Eq, Ne };
enum class WordType { Float, Int };
inline constexpr std::uint32_t kTrueWord = 1;
inline constexpr std::uint32_t kFalseWord = 0;

/// Two inputs, or one input compared against `imm` when `use_imm`.
PrimitiveSpec comparator_prim(CompareOp op, WordType type, bool use_imm = false, double imm = 0.0);
/// Inputs: select word then `n_data` data inputs; output the input selected
/// by the select word's integer value (clamped to the last input).
PrimitiveSpec sync_mux_prim(int n_data);
/// Inputs: enable word then `width` data inputs. Data elements whose enable
/// is false leave as invalid (valid gap).
PrimitiveSpec eliminator_prim(int width = 1);

/// Resolves a module-call against the primitive library; `n_in`/`n_out` are
/// the call arities, used by width-polymorphic primitives. Throws SpdError on
/// unknown names or bad parameters.
bool is_primitive(const std::string& module_name);
PrimitiveSpec make_primitive(const std::string& module_name, const ParamMap& params, int n_in, int n_out);
std::vector<std::string> primitive_names();

}  // namespace spd

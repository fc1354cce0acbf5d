#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spd/frontend.hpp"
#include "spd/primitives.hpp"

namespace spd {

enum class VertexKind {
  Input,      // top-level interface input (main, branch or constant register)
  Output,     // top-level interface output
  Constant,   // literal from an EQU formula
  Operator,   // one floating-point operator lowered from an EQU formula
  Primitive,  // instance of a library primitive
  Module,     // opaque instance of an SPD module (not flattened)
  Port,       // boundary pass-through of a flattened sub-module
};

enum class OpKind { Add, Sub, Mul, Div, Sqrt };
enum class EdgeKind { Main, Branch };

const char* to_string(VertexKind k);
const char* to_string(OpKind k);

struct Vertex {
  std::string name;
  VertexKind kind = VertexKind::Operator;
  std::int64_t latency = 0;
  int n_in = 0, n_out = 1;

  OpKind op = OpKind::Add;       // Operator
  std::uint32_t const_word = 0;  // Constant
  bool constant_input = false;   // Input fed by an Append_Reg register
  bool branch_port = false;      // Input/Output/Port belonging to a branch interface
  std::string module;            // Primitive / Module callee name
  std::vector<HdlParam> params;  // Primitive / Module parameter list
  std::int64_t natural_latency = 0;  // Primitive latency before padding to the declared delay
  // Ports sharing a non-empty key are scheduled to one common arrival; a
  // flattened instance keeps one key for its inputs and one for its outputs.
  std::string align;

  bool operator==(const Vertex&) const = default;
};

struct Edge {
  int src = 0, src_port = 0;
  int dst = 0, dst_port = 0;
  std::int64_t delay = 0;  // inserted register stages
  EdgeKind kind = EdgeKind::Main;

  bool operator==(const Edge&) const = default;
};

struct Dfg {
  std::string name;
  std::vector<Vertex> vertices;
  std::vector<Edge> edges;
  std::int64_t depth = 0;
  /// Input/Output vertex ids in interface declaration order.
  std::vector<int> inputs, outputs;
  std::vector<std::string> warnings;

  int add_vertex(Vertex v);
  void connect(int src, int src_port, int dst, int dst_port, EdgeKind kind = EdgeKind::Main);
  int find(const std::string& name) const;  // -1 when absent

  bool operator==(const Dfg& o) const {
    return name == o.name && vertices == o.vertices && edges == o.edges && depth == o.depth && inputs == o.inputs &&
           outputs == o.outputs;
  }
};

struct OpLatencies {
  std::int64_t add = 7, sub = 7, mul = 5, div = 14, sqrt = 14;
  std::int64_t of(OpKind k) const;
};

struct ElabOptions {
  static constexpr int kFull = -1;
  /// Levels of SPD-module HDL nodes to expand; kFull expands everything.
  int flatten_depth = kFull;
  /// Register stages appended at the top's output interface.
  std::int64_t io_register_stages = 1;
  OpLatencies latencies;
};

/// Loaded SPD modules by name. Primitives are resolved through the
/// primitive library; an SPD module may not shadow a primitive name.
class ModuleLibrary {
 public:
  void add(SpdModule m);
  void add_source(const std::string& source, const std::string& file = {});
  void add_file(const std::string& path);
  /// Loads every `*.spd` file in a directory (non-recursive, sorted).
  void add_directory(const std::string& dir);

  const SpdModule* find(const std::string& name) const;
  const std::map<std::string, SpdModule>& modules() const { return modules_; }

 private:
  std::map<std::string, SpdModule> modules_;
};

Dfg elaborate(const SpdModule& top, const ModuleLibrary& lib, const ElabOptions& opts = {});

/// Assigns inserted delays so every main-edge join is aligned and all
/// aligned outputs leave at the same cycle; recomputes depth. Throws SpdError
/// naming a cycle when main edges are cyclic or a zero-latency loop exists.
Dfg equalize_delays(Dfg g);

/// Arrival cycle of each vertex's inputs along main edges (constants: 0).
std::vector<std::int64_t> arrival_times(const Dfg& g);

/// Chains m copies of an elaborated design. An input of copy k+1 is fed by
/// the output of copy k with the same port name; other inputs of later
/// copies are shared with the first copy.
Dfg cascade(const Dfg& pe, int m);

struct OpCensus {
  int adders = 0, multipliers = 0, dividers = 0, sqrts = 0, n_flops = 0;
  bool operator==(const OpCensus&) const = default;
};

OpCensus census(const Dfg& g);

std::string export_dot(const Dfg& g);
std::string export_netlist(const Dfg& g);
Dfg import_netlist(const std::string& text);

inline constexpr const char* kNetlistSchema = "spd-netlist/1";

}  // namespace spd

#include "json.hpp"
#include <sstream>

#include "spd/dfg.hpp"

namespace spd {

using nlohmann::json;

namespace {

const VertexKind kKinds[] = {VertexKind::Input,     VertexKind::Output, VertexKind::Constant, VertexKind::Operator,
                             VertexKind::Primitive, VertexKind::Module, VertexKind::Port};
const OpKind kOps[] = {OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div, OpKind::Sqrt};

template <class E, std::size_t N>
E parse_enum(const E (&all)[N], const std::string& s, const char* what) {
  for (E e : all)
    if (s == to_string(e)) return e;
  throw SpdError(std::string("netlist: unknown ") + what + " '" + s + "'");
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string export_dot(const Dfg& g) {
  std::ostringstream os;
  os << "digraph \"" << dot_escape(g.name) << "\" {\n  rankdir=LR;\n";
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const Vertex& v = g.vertices[i];
    std::string label = dot_escape(v.name) + "\\n";
    const char* shape = "box";
    switch (v.kind) {
      case VertexKind::Operator: label += to_string(v.op); shape = "ellipse"; break;
      case VertexKind::Primitive:
      case VertexKind::Module: label += v.module; break;
      case VertexKind::Constant: label += "const"; shape = "plaintext"; break;
      default: label += to_string(v.kind); shape = "cds"; break;
    }
    label += " L=" + std::to_string(v.latency);
    os << "  v" << i << " [shape=" << shape << ", label=\"" << label << "\"];\n";
  }
  for (const auto& e : g.edges) {
    os << "  v" << e.src << " -> v" << e.dst << " [label=\"" << e.src_port << ":" << e.dst_port;
    if (e.delay) os << " d=" << e.delay;
    os << "\"";
    if (e.kind == EdgeKind::Branch) os << ", style=dashed";
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

std::string export_netlist(const Dfg& g) {
  json j;
  j["schema"] = kNetlistSchema;
  j["name"] = g.name;
  j["depth"] = g.depth;
  j["inputs"] = g.inputs;
  j["outputs"] = g.outputs;
  j["warnings"] = g.warnings;
  json vs = json::array();
  for (const auto& v : g.vertices) {
    json x{{"name", v.name}, {"kind", to_string(v.kind)}, {"latency", v.latency}, {"n_in", v.n_in}, {"n_out", v.n_out}};
    if (v.kind == VertexKind::Operator) x["op"] = to_string(v.op);
    if (v.kind == VertexKind::Constant) x["word"] = v.const_word;
    if (v.constant_input) x["constant_input"] = true;
    if (v.branch_port) x["branch"] = true;
    if (!v.module.empty()) x["module"] = v.module;
    if (v.natural_latency) x["natural_latency"] = v.natural_latency;
    if (!v.align.empty()) x["align"] = v.align;
    if (!v.params.empty()) {
      json ps = json::array();
      for (const auto& p : v.params) ps.push_back({{"name", p.name}, {"values", p.values}, {"list", p.is_list}});
      x["params"] = ps;
    }
    vs.push_back(std::move(x));
  }
  j["vertices"] = std::move(vs);
  json es = json::array();
  for (const auto& e : g.edges)
    es.push_back({e.src, e.src_port, e.dst, e.dst_port, e.delay, e.kind == EdgeKind::Branch ? "branch" : "main"});
  j["edges"] = std::move(es);
  return j.dump(1) + "\n";
}

Dfg import_netlist(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SpdError(std::string("netlist: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != kNetlistSchema)
    throw SpdError(std::string("netlist: expected schema ") + kNetlistSchema);
  Dfg g;
  try {
    g.name = j.at("name").get<std::string>();
    g.depth = j.at("depth").get<std::int64_t>();
    g.inputs = j.at("inputs").get<std::vector<int>>();
    g.outputs = j.at("outputs").get<std::vector<int>>();
    g.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& x : j.at("vertices")) {
      Vertex v;
      v.name = x.at("name").get<std::string>();
      v.kind = parse_enum(kKinds, x.at("kind").get<std::string>(), "vertex kind");
      v.latency = x.at("latency").get<std::int64_t>();
      v.n_in = x.at("n_in").get<int>();
      v.n_out = x.at("n_out").get<int>();
      if (x.contains("op")) v.op = parse_enum(kOps, x["op"].get<std::string>(), "operator");
      v.const_word = x.value("word", std::uint32_t{0});
      v.constant_input = x.value("constant_input", false);
      v.branch_port = x.value("branch", false);
      v.module = x.value("module", "");
      v.natural_latency = x.value("natural_latency", std::int64_t{0});
      v.align = x.value("align", std::string{});
      if (x.contains("params"))
        for (const auto& p : x["params"])
          v.params.push_back({p.at("name").get<std::string>(), p.at("values").get<std::vector<std::string>>(),
                              p.at("list").get<bool>()});
      g.vertices.push_back(std::move(v));
    }
    for (const auto& x : j.at("edges")) {
      Edge e{x.at(0).get<int>(), x.at(1).get<int>(), x.at(2).get<int>(), x.at(3).get<int>(),
             x.at(4).get<std::int64_t>(), x.at(5).get<std::string>() == "branch" ? EdgeKind::Branch : EdgeKind::Main};
      g.edges.push_back(e);
    }
  } catch (const json::exception& e) {
    throw SpdError(std::string("netlist: ") + e.what());
  }
  const int n = static_cast<int>(g.vertices.size());
  auto in_range = [&](int v) { return v >= 0 && v < n; };
  for (const auto& e : g.edges)
    if (!in_range(e.src) || !in_range(e.dst) || e.src_port < 0 || e.src_port >= g.vertices[e.src].n_out ||
        e.dst_port < 0 || e.dst_port >= g.vertices[e.dst].n_in)
      throw SpdError("netlist: edge endpoint out of range");
  for (int v : g.inputs)
    if (!in_range(v)) throw SpdError("netlist: input id out of range");
  for (int v : g.outputs)
    if (!in_range(v)) throw SpdError("netlist: output id out of range");
  return g;
}

}  // namespace spd

#include <algorithm>
#include <bit>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "spd/dfg.hpp"
#include "spd/signals.hpp"

namespace spd {

const char* to_string(VertexKind k) {
  switch (k) {
    case VertexKind::Input: return "input";
    case VertexKind::Output: return "output";
    case VertexKind::Constant: return "constant";
    case VertexKind::Operator: return "operator";
    case VertexKind::Primitive: return "primitive";
    case VertexKind::Module: return "module";
    case VertexKind::Port: return "port";
  }
  return "?";
}

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::Sqrt: return "sqrt";
  }
  return "?";
}

std::int64_t OpLatencies::of(OpKind k) const {
  switch (k) {
    case OpKind::Add: return add;
    case OpKind::Sub: return sub;
    case OpKind::Mul: return mul;
    case OpKind::Div: return div;
    case OpKind::Sqrt: return sqrt;
  }
  return 0;
}

int Dfg::add_vertex(Vertex v) {
  vertices.push_back(std::move(v));
  return static_cast<int>(vertices.size()) - 1;
}

void Dfg::connect(int src, int src_port, int dst, int dst_port, EdgeKind kind) {
  edges.push_back({src, src_port, dst, dst_port, 0, kind});
}

int Dfg::find(const std::string& n) const {
  for (std::size_t i = 0; i < vertices.size(); ++i)
    if (vertices[i].name == n) return static_cast<int>(i);
  return -1;
}

// ---------------------------------------------------------------------------
// Library

void ModuleLibrary::add(SpdModule m) {
  if (is_primitive(m.name)) throw SpdError("module " + m.name + " shadows a primitive", {m.file, 1});
  if (modules_.count(m.name)) throw SpdError("duplicate module " + m.name, {m.file, 1});
  std::string name = m.name;
  modules_.emplace(name, std::move(m));
}

void ModuleLibrary::add_source(const std::string& source, const std::string& file) {
  add(parse_module(source, file));
}

void ModuleLibrary::add_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpdError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  add_source(ss.str(), path);
}

void ModuleLibrary::add_directory(const std::string& dir) {
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".spd") files.push_back(e.path().string());
  if (ec) throw SpdError("cannot read directory " + dir + ": " + ec.message());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) add_file(f);
}

const SpdModule* ModuleLibrary::find(const std::string& name) const {
  auto it = modules_.find(name);
  return it == modules_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Elaboration

namespace {

struct Slot {
  int v = -1, port = 0;
  bool branch = false;
};

struct Pending {
  SignalId sig;
  int dst, port;
  bool branch;
  SourceLoc loc;
};

class Builder {
 public:
  Builder(const ModuleLibrary& lib, const ElabOptions& opts) : lib_(lib), opts_(opts) {}

  Dfg build(const SpdModule& m, int depth_left, bool top) {
    if (auto diags = validate(m); !diags.empty()) throw SpdError(diags.front().message, diags.front().loc);
    stack_.push_back(m.name);

    Dfg g;
    g.name = m.name;
    SignalTable table(m);
    std::map<SignalId, Slot> producers;
    std::map<SignalId, std::pair<SignalId, SourceLoc>> aliases;
    std::vector<Pending> pending;

    auto add_inputs = [&](const InterfaceDecl& d, InputClass cls) {
      for (const auto& p : d.ports) {
        Vertex v;
        v.name = p;
        v.kind = VertexKind::Input;
        v.n_in = 0;
        v.constant_input = cls == InputClass::Constant;
        v.branch_port = cls == InputClass::Branch;
        int id = g.add_vertex(std::move(v));
        g.inputs.push_back(id);
        producers[{SignalSpace::Input, p}] = {id, 0, !top && cls == InputClass::Branch};
      }
    };
    if (m.main_in) add_inputs(*m.main_in, InputClass::Main);
    for (const auto& d : m.brch_in) add_inputs(d, InputClass::Branch);
    for (const auto& d : m.append_regs) add_inputs(d, InputClass::Constant);

    auto consumer = [&](const PortRef& r, const SourceLoc& loc) {
      std::string err;
      auto id = table.resolve_consumer(r, &err);
      if (!id) throw SpdError(err, loc);
      return *id;
    };
    auto producer = [&](const PortRef& r, const SourceLoc& loc) {
      std::string err;
      auto id = table.resolve_producer(r, &err);
      if (!id) throw SpdError(err, loc);
      return *id;
    };

    for (const auto& nd : m.nodes) {
      if (auto* e = std::get_if<EquNode>(&nd.node)) {
        lower_equ(g, *e, nd.loc, producer(e->output, nd.loc), consumer, producers, aliases, pending);
      } else if (auto* h = std::get_if<HdlNode>(&nd.node)) {
        lower_hdl(g, *h, nd.loc, depth_left, consumer, producer, producers, pending);
      } else {
        const auto& d = std::get<DrctLink>(nd.node);
        for (std::size_t i = 0; i < d.dst.size(); ++i)
          aliases[producer(d.dst[i], nd.loc)] = {consumer(d.src[i], nd.loc), nd.loc};
      }
    }

    auto add_outputs = [&](const InterfaceDecl& d, OutputClass cls) {
      for (const auto& p : d.ports) {
        Vertex v;
        v.name = p;
        v.kind = VertexKind::Output;
        v.n_in = 1;
        v.n_out = 0;
        v.latency = top ? opts_.io_register_stages : 0;
        v.branch_port = cls == OutputClass::Branch;
        int id = g.add_vertex(std::move(v));
        g.outputs.push_back(id);
        pending.push_back({{SignalSpace::Output, p}, id, 0, !top && cls == OutputClass::Branch, {m.file, 0}});
      }
    };
    if (m.main_out) add_outputs(*m.main_out, OutputClass::Main);
    for (const auto& d : m.brch_out) add_outputs(d, OutputClass::Branch);

    for (const auto& p : pending) {
      SignalId sig = p.sig;
      SourceLoc loc = p.loc;
      std::set<SignalId> seen;
      for (;;) {
        if (auto it = producers.find(sig); it != producers.end()) {
          const Slot& s = it->second;
          g.connect(s.v, s.port, p.dst, p.port, p.branch || s.branch ? EdgeKind::Branch : EdgeKind::Main);
          break;
        }
        auto a = aliases.find(sig);
        if (a == aliases.end()) throw SpdError(sig.name + " undriven", loc);
        if (!seen.insert(sig).second) throw SpdError("DRCT loop through " + sig.name, loc);
        sig = a->second.first;
        loc = a->second.second;
      }
    }

    stack_.pop_back();
    return g;
  }

 private:
  template <class Consumer>
  void lower_equ(Dfg& g, const EquNode& e, const SourceLoc& loc, const SignalId& out, Consumer& consumer,
                 std::map<SignalId, Slot>& producers, std::map<SignalId, std::pair<SignalId, SourceLoc>>& aliases,
                 std::vector<Pending>& pending) {
    int counter = 0;
    // Returns the producing slot, or -1 in .v for a bare port (recorded in *port_sig).
    std::function<Slot(const Expr&, bool, SignalId*)> lower = [&](const Expr& x, bool root,
                                                                   SignalId* port_sig) -> Slot {
      auto vname = [&](const char* tag) {
        return root ? e.name : e.name + "." + tag + std::to_string(counter++);
      };
      if (auto* lit = std::get_if<Expr::Literal>(&x.node)) {
        Vertex v;
        v.name = vname("c");
        v.kind = VertexKind::Constant;
        v.n_in = 0;
        v.const_word = std::bit_cast<std::uint32_t>(lit->value);
        return {g.add_vertex(std::move(v)), 0, false};
      }
      if (auto* p = std::get_if<Expr::Port>(&x.node)) {
        *port_sig = consumer(p->ref, loc);
        return {};
      }
      Vertex v;
      v.name = vname("t");
      v.kind = VertexKind::Operator;
      std::vector<const Expr*> args;
      if (auto* b = std::get_if<Expr::Binary>(&x.node)) {
        v.op = b->op == BinOp::Add   ? OpKind::Add
               : b->op == BinOp::Sub ? OpKind::Sub
               : b->op == BinOp::Mul ? OpKind::Mul
                                     : OpKind::Div;
        args = {b->lhs.get(), b->rhs.get()};
      } else {
        v.op = OpKind::Sqrt;
        args = {std::get<Expr::Sqrt>(x.node).arg.get()};
      }
      v.latency = opts_.latencies.of(v.op);
      v.n_in = static_cast<int>(args.size());
      int id = g.add_vertex(std::move(v));
      for (std::size_t i = 0; i < args.size(); ++i) {
        SignalId sig;
        Slot s = lower(*args[i], false, &sig);
        if (s.v < 0)
          pending.push_back({sig, id, static_cast<int>(i), false, loc});
        else
          g.connect(s.v, s.port, id, static_cast<int>(i));
      }
      return {id, 0, false};
    };
    SignalId sig;
    Slot s = lower(*e.expr, true, &sig);
    if (s.v < 0)
      aliases[out] = {sig, loc};
    else
      producers[out] = s;
  }

  template <class Consumer, class Producer>
  void lower_hdl(Dfg& g, const HdlNode& h, const SourceLoc& loc, int depth_left, Consumer& consumer,
                 Producer& producer, std::map<SignalId, Slot>& producers, std::vector<Pending>& pending) {
    const int n_main_in = static_cast<int>(h.main_ins.size());
    const int n_main_out = static_cast<int>(h.main_outs.size());
    auto bind = [&](const std::vector<int>& in_vertex, const std::vector<int>& in_port,
                    const std::vector<int>& out_vertex, const std::vector<int>& out_port) {
      for (int i = 0; i < static_cast<int>(h.main_ins.size() + h.brch_ins.size()); ++i) {
        const PortRef& r = i < n_main_in ? h.main_ins[i] : h.brch_ins[i - n_main_in];
        pending.push_back({consumer(r, loc), in_vertex[i], in_port[i], i >= n_main_in, loc});
      }
      // callee branch inputs the call leaves out read a constant 0
      for (std::size_t i = h.main_ins.size() + h.brch_ins.size(); i < in_vertex.size(); ++i) {
        Vertex v;
        v.name = h.name + ".tie" + std::to_string(i);
        v.kind = VertexKind::Constant;
        v.n_in = 0;
        g.connect(g.add_vertex(std::move(v)), 0, in_vertex[i], in_port[i], EdgeKind::Branch);
      }
      for (int i = 0; i < static_cast<int>(h.main_outs.size() + h.brch_outs.size()); ++i) {
        const PortRef& r = i < n_main_out ? h.main_outs[i] : h.brch_outs[i - n_main_out];
        producers[producer(r, loc)] = {out_vertex[i], out_port[i], i >= n_main_out};
      }
    };
    const int n_in = static_cast<int>(h.main_ins.size() + h.brch_ins.size());
    const int n_out = static_cast<int>(h.main_outs.size() + h.brch_outs.size());

    if (is_primitive(h.module_name)) {
      PrimitiveSpec spec;
      try {
        spec = make_primitive(h.module_name, ParamMap(h.params), n_in, n_out);
      } catch (const SpdError& err) {
        throw SpdError(h.name + ": " + err.bare(), loc);
      }
      if (spec.main_in != n_main_in || spec.brch_in != static_cast<int>(h.brch_ins.size()) ||
          spec.main_out != n_main_out || spec.brch_out != static_cast<int>(h.brch_outs.size()))
        throw SpdError(h.name + ": arity mismatch calling " + h.module_name, loc);
      Vertex v;
      v.name = h.name;
      v.kind = VertexKind::Primitive;
      v.module = h.module_name;
      v.params = h.params;
      v.n_in = n_in;
      v.n_out = n_out;
      v.natural_latency = spec.latency;
      v.latency = std::max(h.delay, spec.latency);
      if (h.delay < spec.latency)
        g.warnings.push_back(h.name + ": declared delay " + std::to_string(h.delay) + " below primitive latency " +
                             std::to_string(spec.latency));
      int id = g.add_vertex(std::move(v));
      std::vector<int> iv(n_in, id), ip(n_in), ov(n_out, id), op(n_out);
      for (int i = 0; i < n_in; ++i) ip[i] = i;
      for (int i = 0; i < n_out; ++i) op[i] = i;
      bind(iv, ip, ov, op);
      return;
    }

    const SpdModule* callee = lib_.find(h.module_name);
    if (!callee) throw SpdError(h.name + ": unknown module " + h.module_name, loc);
    if (std::find(stack_.begin(), stack_.end(), callee->name) != stack_.end())
      throw SpdError("recursive instantiation of " + callee->name, loc);

    auto count = [](const std::vector<InterfaceDecl>& ds) {
      int n = 0;
      for (const auto& d : ds) n += static_cast<int>(d.ports.size());
      return n;
    };
    int c_main_in = (callee->main_in ? static_cast<int>(callee->main_in->ports.size()) : 0) +
                    count(callee->append_regs);
    int c_main_out = callee->main_out ? static_cast<int>(callee->main_out->ports.size()) : 0;
    // A call may omit a whole branch group; its ports are tied off / left open.
    const int c_brch_in = count(callee->brch_in), c_brch_out = count(callee->brch_out);
    if (c_main_in != n_main_in || (!h.brch_ins.empty() && c_brch_in != static_cast<int>(h.brch_ins.size())) ||
        c_main_out != n_main_out || (!h.brch_outs.empty() && c_brch_out != static_cast<int>(h.brch_outs.size())))
      throw SpdError(h.name + ": arity mismatch calling " + h.module_name + " (expects " + std::to_string(c_main_in) +
                         " main inputs, " + std::to_string(c_main_out) + " main outputs)",
                     loc);

    if (depth_left == 0) {
      Vertex v;
      v.name = h.name;
      v.kind = VertexKind::Module;
      v.module = h.module_name;
      v.params = h.params;
      v.n_in = n_main_in + c_brch_in;
      v.n_out = n_main_out + c_brch_out;
      v.latency = h.delay;
      const int in_all = v.n_in, out_all = v.n_out;
      int id = g.add_vertex(std::move(v));
      std::vector<int> iv(in_all, id), ip(in_all), ov(out_all, id), op(out_all);
      for (int i = 0; i < in_all; ++i) ip[i] = i;
      for (int i = 0; i < out_all; ++i) op[i] = i;
      bind(iv, ip, ov, op);
      return;
    }

    Dfg sub;
    try {
      sub = equalize_delays(build(*callee, depth_left < 0 ? depth_left : depth_left - 1, false));
    } catch (const SpdError& err) {
      if (err.loc().line > 0) throw;
      throw SpdError(h.name + " (" + callee->name + "): " + err.bare(), loc);
    }
    std::int64_t pad = h.delay - sub.depth;
    if (pad < 0) {
      g.warnings.push_back(h.name + ": " + callee->name + " depth " + std::to_string(sub.depth) +
                           " exceeds declared delay " + std::to_string(h.delay));
      pad = 0;
    }
    for (const auto& w : sub.warnings) g.warnings.push_back(h.name + "/" + w);

    const int base = static_cast<int>(g.vertices.size());
    for (auto v : sub.vertices) {
      v.name = h.name + "/" + v.name;
      if (!v.align.empty()) v.align = h.name + "/" + v.align;
      if (v.kind == VertexKind::Input) {
        if (!v.branch_port && !v.constant_input) v.align = h.name + "/<in>";
        v.kind = VertexKind::Port;
        v.n_in = 1;
        v.constant_input = false;
      } else if (v.kind == VertexKind::Output) {
        if (!v.branch_port) v.align = h.name + "/<out>";
        v.kind = VertexKind::Port;
        v.n_out = 1;
        v.latency = v.branch_port ? 0 : pad;
      }
      g.add_vertex(std::move(v));
    }
    for (auto e : sub.edges) {
      e.src += base;
      e.dst += base;
      g.edges.push_back(e);
    }
    // Callee inputs in call order: Main_In ports, Append_Reg ports, then Brch_In ports.
    std::vector<int> in_order, out_order;
    auto by_name = [&](const std::vector<int>& ids, const std::string& name) {
      for (int id : ids)
        if (sub.vertices[id].name == name) return id + base;
      return -1;
    };
    if (callee->main_in)
      for (const auto& p : callee->main_in->ports) in_order.push_back(by_name(sub.inputs, p));
    for (const auto& p : callee->append_reg_ports()) in_order.push_back(by_name(sub.inputs, p));
    for (const auto& d : callee->brch_in)
      for (const auto& p : d.ports) in_order.push_back(by_name(sub.inputs, p));
    if (callee->main_out)
      for (const auto& p : callee->main_out->ports) out_order.push_back(by_name(sub.outputs, p));
    for (const auto& d : callee->brch_out)
      for (const auto& p : d.ports) out_order.push_back(by_name(sub.outputs, p));
    bind(in_order, std::vector<int>(in_order.size(), 0), out_order, std::vector<int>(out_order.size(), 0));
  }

  const ModuleLibrary& lib_;
  const ElabOptions& opts_;
  std::vector<std::string> stack_;
};

struct Schedule {
  std::vector<std::int64_t> arrival;
  std::vector<bool> is_static;
  std::int64_t depth = 0;
};

std::string describe_cycle(const Dfg& g, const std::vector<int>& cyc) {
  std::string s;
  for (int v : cyc) s += g.vertices[v].name + " -> ";
  return s + g.vertices[cyc.front()].name;
}

// Finds a cycle in the subgraph of edges accepted by `use`; empty when acyclic.
std::vector<int> find_cycle(const Dfg& g, const std::function<bool(const Edge&)>& use) {
  const int n = static_cast<int>(g.vertices.size());
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : g.edges)
    if (use(e)) adj[e.src].push_back(e.dst);
  std::vector<int> state(n, 0), parent(n, -1);
  for (int root = 0; root < n; ++root) {
    if (state[root]) continue;
    std::vector<std::pair<int, std::size_t>> st{{root, 0}};
    state[root] = 1;
    while (!st.empty()) {
      auto& [v, i] = st.back();
      if (i < adj[v].size()) {
        int w = adj[v][i++];
        if (state[w] == 1) {
          std::vector<int> cyc{w};
          for (int u = v; u != w; u = parent[u]) cyc.push_back(u);
          std::reverse(cyc.begin() + 1, cyc.end());
          return cyc;
        }
        if (state[w] == 0) {
          state[w] = 1;
          parent[w] = v;
          st.push_back({w, 0});
        }
      } else {
        state[v] = 2;
        st.pop_back();
      }
    }
  }
  return {};
}

Schedule schedule(const Dfg& g) {
  const int n = static_cast<int>(g.vertices.size());
  std::vector<std::vector<const Edge*>> in_main(n);
  std::vector<int> indeg(n, 0);
  for (const auto& e : g.edges) {
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) throw SpdError("edge references a missing vertex");
    if (e.kind == EdgeKind::Main) {
      in_main[e.dst].push_back(&e);
      ++indeg[e.dst];
    }
  }
  std::vector<int> order, ready;
  for (int v = 0; v < n; ++v)
    if (!indeg[v]) ready.push_back(v);
  std::vector<std::vector<int>> succ(n);
  for (const auto& e : g.edges)
    if (e.kind == EdgeKind::Main) succ[e.src].push_back(e.dst);
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int w : succ[v])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  if (static_cast<int>(order.size()) != n) {
    auto cyc = find_cycle(g, [](const Edge& e) { return e.kind == EdgeKind::Main; });
    throw SpdError("unschedulable: main edges form a cycle " + describe_cycle(g, cyc));
  }

  // ASAP arrivals; aligned port groups are raised to their group maximum and
  // the pass repeats until no group moves.
  Schedule s;
  std::vector<std::int64_t> floor(n, 0);
  std::map<std::string, std::vector<int>> groups;
  for (int v = 0; v < n; ++v)
    if (!g.vertices[v].align.empty()) groups[g.vertices[v].align].push_back(v);
  for (bool moved = true; moved;) {
    s.arrival.assign(n, 0);
    s.is_static.assign(n, false);
    for (int v : order) {
      const Vertex& x = g.vertices[v];
      if (x.kind == VertexKind::Constant || (x.kind == VertexKind::Input && x.constant_input)) {
        s.is_static[v] = true;
        continue;
      }
      bool all_static = !in_main[v].empty() && x.kind != VertexKind::Primitive && x.kind != VertexKind::Module;
      std::int64_t a = floor[v];
      for (const Edge* e : in_main[v]) {
        if (s.is_static[e->src]) continue;
        all_static = false;
        a = std::max(a, s.arrival[e->src] + g.vertices[e->src].latency);
      }
      s.is_static[v] = all_static;
      s.arrival[v] = all_static ? 0 : a;
    }
    moved = false;
    for (const auto& [key, members] : groups) {
      std::int64_t top = 0;
      for (int v : members)
        if (!s.is_static[v]) top = std::max(top, s.arrival[v]);
      for (int v : members)
        if (!s.is_static[v] && s.arrival[v] < top) {
          floor[v] = top;
          moved = true;
        }
    }
  }

  std::int64_t target = -1, out_lat = 0;
  for (int v = 0; v < n; ++v) {
    const Vertex& x = g.vertices[v];
    if (x.kind != VertexKind::Output || s.is_static[v]) continue;
    if (in_main[v].empty()) continue;
    target = std::max(target, s.arrival[v]);
    out_lat = std::max(out_lat, x.latency);
  }
  if (target >= 0) {
    for (int v = 0; v < n; ++v)
      if (g.vertices[v].kind == VertexKind::Output && !s.is_static[v] && !in_main[v].empty()) s.arrival[v] = target;
    s.depth = target + out_lat;
  } else {
    for (int v = 0; v < n; ++v)
      if (!s.is_static[v]) s.depth = std::max(s.depth, s.arrival[v] + g.vertices[v].latency);
  }
  return s;
}

}  // namespace

Dfg elaborate(const SpdModule& top, const ModuleLibrary& lib, const ElabOptions& opts) {
  Builder b(lib, opts);
  return equalize_delays(b.build(top, opts.flatten_depth, true));
}

std::vector<std::int64_t> arrival_times(const Dfg& g) { return schedule(g).arrival; }

Dfg equalize_delays(Dfg g) {
  Schedule s = schedule(g);
  for (auto& e : g.edges) {
    if (e.kind == EdgeKind::Main && !s.is_static[e.src])
      e.delay = s.arrival[e.dst] - s.arrival[e.src] - g.vertices[e.src].latency;
    else
      e.delay = 0;
  }
  auto zero = find_cycle(g, [&](const Edge& e) { return g.vertices[e.src].latency + e.delay == 0; });
  if (!zero.empty()) throw SpdError("zero-latency cycle " + describe_cycle(g, zero));
  g.depth = s.depth;
  return g;
}

Dfg cascade(const Dfg& pe, int m) {
  if (m < 1) throw SpdError("cascade length must be at least 1");
  if (m == 1) return pe;
  Dfg g;
  g.name = pe.name + "_x" + std::to_string(m);
  g.warnings = pe.warnings;
  std::vector<int> prev_out;  // output vertex ids of the previous copy
  std::vector<int> first_in;
  for (int k = 0; k < m; ++k) {
    const int base = static_cast<int>(g.vertices.size());
    for (auto v : pe.vertices) {
      v.name = "s" + std::to_string(k) + "/" + v.name;
      if (!v.align.empty()) v.align = "s" + std::to_string(k) + "/" + v.align;
      g.vertices.push_back(std::move(v));
    }
    for (auto e : pe.edges) {
      e.src += base;
      e.dst += base;
      g.edges.push_back(e);
    }
    if (k == 0) {
      for (int id : pe.inputs) first_in.push_back(id + base);
    } else {
      for (std::size_t i = 0; i < pe.inputs.size(); ++i) {
        const int id = pe.inputs[i] + base;
        const std::string& port = pe.vertices[pe.inputs[i]].name;
        int src = -1;
        for (int o : prev_out)
          if (g.vertices[o].name == "s" + std::to_string(k - 1) + "/" + port) src = o;
        Vertex& v = g.vertices[id];
        if (!v.branch_port && !v.constant_input) v.align = "s" + std::to_string(k) + "/<in>";
        v.kind = VertexKind::Port;
        v.n_in = 1;
        v.constant_input = false;
        g.connect(src >= 0 ? src : first_in[i], 0, id, 0, v.branch_port ? EdgeKind::Branch : EdgeKind::Main);
      }
      for (int o : prev_out) {
        Vertex& v = g.vertices[o];
        if (!v.branch_port) v.align = "s" + std::to_string(k - 1) + "/<out>";
        v.kind = VertexKind::Port;
        v.n_out = 1;
      }
    }
    prev_out.clear();
    for (int id : pe.outputs) prev_out.push_back(id + base);
  }
  g.inputs = first_in;
  g.outputs = prev_out;
  for (std::size_t i = 0; i < pe.inputs.size(); ++i) g.vertices[first_in[i]].name = pe.vertices[pe.inputs[i]].name;
  for (std::size_t i = 0; i < pe.outputs.size(); ++i) g.vertices[prev_out[i]].name = pe.vertices[pe.outputs[i]].name;
  return equalize_delays(std::move(g));
}

OpCensus census(const Dfg& g) {
  OpCensus c;
  std::vector<std::string> opaque;
  for (const auto& v : g.vertices) {
    if (v.kind == VertexKind::Module) opaque.push_back(v.name);
    if (v.kind != VertexKind::Operator) continue;
    switch (v.op) {
      case OpKind::Add:
      case OpKind::Sub: ++c.adders; break;
      case OpKind::Mul: ++c.multipliers; break;
      case OpKind::Div: ++c.dividers; break;
      case OpKind::Sqrt: ++c.sqrts; break;
    }
  }
  if (!opaque.empty()) {
    std::string list;
    for (const auto& n : opaque) list += (list.empty() ? "" : ", ") + n;
    throw SpdError("incomplete census: opaque module instances " + list);
  }
  c.n_flops = c.adders + c.multipliers + c.dividers + c.sqrts;
  return c;
}

}  // namespace spd

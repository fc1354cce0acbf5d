#include "spd/sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace spd {

std::size_t StreamSet::length() const {
  std::optional<std::size_t> n;
  for (const auto& [port, words] : streams) {
    if (n && *n != words.size())
      throw SpdError("stream " + port + " has " + std::to_string(words.size()) + " elements, expected " +
                     std::to_string(*n));
    n = words.size();
  }
  return n.value_or(0);
}

void StreamSet::set_floats(const std::string& port, const std::vector<float>& v) {
  auto& w = streams[port];
  w.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::bit_cast<std::uint32_t>(v[i]);
}

std::vector<float> StreamSet::floats(const std::string& port) const {
  auto it = streams.find(port);
  if (it == streams.end()) throw SpdError("no stream " + port);
  std::vector<float> v(it->second.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::bit_cast<float>(it->second[i]);
  return v;
}

void StreamSet::set_constant(const std::string& port, float v) { constants[port] = std::bit_cast<std::uint32_t>(v); }

namespace {

class ConstBehavior final : public Behavior {
 public:
  explicit ConstBehavior(std::uint32_t w) : w_(w) {}
  void absorb(std::span<const StreamElement>) override {}
  void emit(std::span<StreamElement> out) override { out[0] = {w_, true, false, false}; }

 private:
  std::uint32_t w_;
};

class OperatorBehavior final : public Behavior {
 public:
  OperatorBehavior(OpKind op, std::int64_t latency, std::uint64_t* nonfinite)
      : op_(op), ring_(latency, 1), nonfinite_(nonfinite) {}

  void absorb(std::span<const StreamElement> in) override {
    StreamElement r;
    r.valid = true;
    for (const auto& x : in) {
      r.valid = r.valid && x.valid;
      r.sop = r.sop || x.sop;
      r.eop = r.eop || x.eop;
    }
    float a = in[0].as_float(), v = 0.0f;
    switch (op_) {
      case OpKind::Add: v = a + in[1].as_float(); break;
      case OpKind::Sub: v = a - in[1].as_float(); break;
      case OpKind::Mul: v = a * in[1].as_float(); break;
      case OpKind::Div: v = a / in[1].as_float(); break;
      case OpKind::Sqrt: v = std::sqrt(a); break;
    }
    if (r.valid && !std::isfinite(v)) ++*nonfinite_;
    r.word = std::bit_cast<std::uint32_t>(v);
    if (ring_.latency() == 0)
      current_ = r;
    else
      ring_.push({&r, 1});
  }
  void emit(std::span<StreamElement> out) override { out[0] = ring_.latency() == 0 ? current_ : ring_.front()[0]; }

 private:
  OpKind op_;
  LatencyRing ring_;
  StreamElement current_;
  std::uint64_t* nonfinite_;
};

// Output history of one vertex port, indexed by advancing step.
struct History {
  std::vector<StreamElement> ring;
  StreamElement at(std::int64_t step) const {
    if (step < 0) return {};
    return ring[static_cast<std::size_t>(step) % ring.size()];
  }
  void set(std::int64_t step, const StreamElement& e) { ring[static_cast<std::size_t>(step) % ring.size()] = e; }
};

struct InEdge {
  int slot = -1;
  std::int64_t delay = 0;
};

struct Node {
  std::unique_ptr<Behavior> behavior;
  bool comb = false;
  int first_slot = 0;
  std::vector<InEdge> ins;
  std::vector<StreamElement> in_buf, out_buf;
};

bool is_flag_port(const std::string& name) { return name == "sop" || name == "eop"; }

}  // namespace

SimResult simulate(const Dfg& g, const StreamSet& inputs, const SimOptions& opts) {
  const int n = static_cast<int>(g.vertices.size());
  const std::size_t T = inputs.length();
  SimResult res;

  std::vector<Node> nodes(n);
  int n_slots = 0;
  for (int v = 0; v < n; ++v) {
    nodes[v].first_slot = n_slots;
    n_slots += std::max(g.vertices[v].n_out, 1);
  }
  std::vector<std::int64_t> max_delay(n_slots, 0);
  for (int v = 0; v < n; ++v) nodes[v].ins.resize(g.vertices[v].n_in);
  for (const auto& e : g.edges) {
    int slot = nodes[e.src].first_slot + e.src_port;
    nodes[e.dst].ins.at(e.dst_port) = {slot, e.delay};
    max_delay[slot] = std::max(max_delay[slot], e.delay);
  }
  std::vector<History> hist(n_slots);
  for (int s = 0; s < n_slots; ++s) hist[s].ring.resize(static_cast<std::size_t>(max_delay[s]) + 1);

  // Input streams, resolved per Input vertex.
  std::vector<const std::vector<std::uint32_t>*> in_stream(n, nullptr);
  std::vector<int> flag_kind(n, 0);  // 1 = sop word, 2 = eop word
  std::vector<std::uint32_t> const_word(n, 0);
  double words_in = 0, words_out = 0;

  for (int v = 0; v < n; ++v) {
    const Vertex& x = g.vertices[v];
    Node& nd = nodes[v];
    nd.in_buf.resize(nd.ins.size());
    nd.out_buf.resize(std::max(x.n_out, 1));
    switch (x.kind) {
      case VertexKind::Input:
        if (x.constant_input) {
          auto it = inputs.constants.find(x.name);
          if (it == inputs.constants.end()) throw SpdError("no value for constant register " + x.name);
          const_word[v] = it->second;
        } else if (auto it = inputs.streams.find(x.name); it != inputs.streams.end()) {
          in_stream[v] = &it->second;
          if (!is_flag_port(x.name)) words_in += 1;
        } else if (x.name == "sop" || x.name == "eop") {
          flag_kind[v] = x.name == "sop" ? 1 : 2;
        } else {
          throw SpdError("no input stream for port " + x.name);
        }
        break;
      case VertexKind::Output:
        if (!is_flag_port(x.name) && !x.branch_port) words_out += 1;
        nd.behavior = delay_prim(x.latency, 1).make();
        nd.comb = x.latency == 0;
        break;
      case VertexKind::Port:
        nd.behavior = delay_prim(x.latency, 1).make();
        nd.comb = x.latency == 0;
        break;
      case VertexKind::Constant:
        nd.behavior = std::make_unique<ConstBehavior>(x.const_word);
        nd.comb = true;
        break;
      case VertexKind::Operator:
        nd.behavior = std::make_unique<OperatorBehavior>(x.op, x.latency, &res.nonfinite_ops);
        nd.comb = x.latency == 0;
        break;
      case VertexKind::Primitive: {
        PrimitiveSpec spec = make_primitive(x.module, ParamMap(x.params), x.n_in, x.n_out);
        const std::int64_t extra = x.latency - spec.latency;
        if (extra < 0) throw SpdError(x.name + ": latency below primitive latency");
        nd.behavior = pad_behavior(spec.make(), spec.combinational, extra, static_cast<std::size_t>(x.n_out));
        nd.comb = spec.combinational && extra == 0;
        break;
      }
      case VertexKind::Module:
        throw SpdError("cannot simulate opaque module instance " + x.name + " (" + x.module + "); flatten it first");
    }
    for (std::size_t p = 0; p < nd.ins.size(); ++p)
      if (nd.ins[p].slot < 0 && x.kind != VertexKind::Input)
        throw SpdError("input " + std::to_string(p) + " of " + x.name + " is unconnected");
  }

  // Same-step evaluation order: sources first, then combinational vertices
  // in dependency order along zero-delay edges.
  std::vector<int> sources, comb_order, registered;
  {
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<int>> succ(n);
    for (const auto& e : g.edges)
      if (e.delay == 0 && nodes[e.src].comb && nodes[e.dst].comb) {
        succ[e.src].push_back(e.dst);
        ++indeg[e.dst];
      }
    std::vector<int> ready;
    for (int v = 0; v < n; ++v) {
      if (g.vertices[v].kind == VertexKind::Input)
        sources.push_back(v);
      else if (!nodes[v].comb)
        registered.push_back(v);
      else if (!indeg[v])
        ready.push_back(v);
    }
    std::reverse(ready.begin(), ready.end());
    while (!ready.empty()) {
      int v = ready.back();
      ready.pop_back();
      comb_order.push_back(v);
      for (int w : succ[v])
        if (--indeg[w] == 0) ready.push_back(w);
    }
    std::size_t n_comb = 0;
    for (int v = 0; v < n; ++v) n_comb += nodes[v].comb && g.vertices[v].kind != VertexKind::Input;
    if (comb_order.size() != n_comb) throw SpdError("combinational loop in " + g.name);
  }

  auto gather = [&](int v, std::int64_t step) {
    Node& nd = nodes[v];
    for (std::size_t p = 0; p < nd.ins.size(); ++p) nd.in_buf[p] = hist[nd.ins[p].slot].at(step - nd.ins[p].delay);
  };
  auto publish = [&](int v, std::int64_t step) {
    Node& nd = nodes[v];
    for (std::size_t p = 0; p < nd.out_buf.size(); ++p) hist[nd.first_slot + p].set(step, nd.out_buf[p]);
  };

  std::vector<int> main_outputs;
  for (int v : g.outputs) res.outputs.streams[g.vertices[v].name];
  for (int v : g.outputs)
    if (!g.vertices[v].branch_port) main_outputs.push_back(v);

  // Memory gating.
  double budget_r = 0, budget_w = 0, credit_r = 0, credit_w = 0, cap_r = 0, cap_w = 0;
  if (opts.mem) {
    words_in = opts.mem->words_in.value_or(words_in);
    words_out = opts.mem->words_out.value_or(words_out);
    budget_r = opts.mem->read_budget();
    budget_w = opts.mem->write_budget();
    if (budget_r <= 0 && words_in > 0) throw SpdError("read bandwidth budget is zero");
    if (budget_w <= 0 && words_out > 0) throw SpdError("write bandwidth budget is zero");
    // Room for one element on top of a cycle's refill, so fractional credit
    // carries over and the long-run rate is exactly budget / words.
    cap_r = budget_r + words_in;
    cap_w = budget_w + words_out;
  }

  const std::uint64_t drain = static_cast<std::uint64_t>(std::max<std::int64_t>(g.depth, 0)) + 2;
  std::uint64_t max_cycles = opts.max_cycles;
  if (!max_cycles) {
    double slow = 1.0;
    if (opts.mem) {
      if (words_in > 0) slow = std::max(slow, words_in / budget_r);
      if (words_out > 0) slow = std::max(slow, words_out / budget_w);
    }
    max_cycles = static_cast<std::uint64_t>(std::ceil((T + drain) * (slow + 1.0))) + 64;
  }

  SimCounters& c = res.counters;
  std::int64_t step = 0;
  std::uint64_t cycle = 0;
  bool eop_seen = false;
  std::uint64_t steps_after_input = 0;
  std::vector<std::uint64_t> accepted_cycles;  // real cycle of each accepted input element
  std::int64_t last_valid_out = -1;

  while (true) {
    if (cycle >= max_cycles)
      throw SpdError("simulation exceeded " + std::to_string(max_cycles) + " cycles before eop drained");
    const bool reading = static_cast<std::size_t>(step) < T;
    if (!reading && (eop_seen || T == 0) && steps_after_input >= drain) break;

    bool advance = true;
    if (opts.mem) {
      credit_r = std::min(cap_r, credit_r + budget_r);
      credit_w = std::min(cap_w, credit_w + budget_w);
      if (reading && credit_r + 1e-9 < words_in) advance = false;
      if (credit_w < -1e-9) advance = false;
    }

    if (advance) {
      if (reading) {
        if (opts.mem) credit_r -= words_in;
        if (c.window_begin < 0) c.window_begin = static_cast<std::int64_t>(cycle);
        accepted_cycles.push_back(cycle);
      } else {
        ++steps_after_input;
      }
      for (int v : registered) nodes[v].behavior->emit(nodes[v].out_buf), publish(v, step);
      for (int v : sources) {
        StreamElement e;
        if (g.vertices[v].constant_input) {
          e = {const_word[v], true, false, false};
        } else if (reading) {
          const std::size_t k = static_cast<std::size_t>(step);
          e.valid = true;
          e.sop = k == 0;
          e.eop = k + 1 == T;
          if (in_stream[v])
            e.word = (*in_stream[v])[k];
          else
            e.word = flag_kind[v] == 1 ? (e.sop ? kTrueWord : kFalseWord) : (e.eop ? kTrueWord : kFalseWord);
        }
        nodes[v].out_buf[0] = e;
        publish(v, step);
      }
      for (int v : comb_order) {
        gather(v, step);
        nodes[v].behavior->absorb(nodes[v].in_buf);
        nodes[v].behavior->emit(nodes[v].out_buf);
        publish(v, step);
      }
      for (int v : registered) gather(v, step), nodes[v].behavior->absorb(nodes[v].in_buf);

      int valid_main = 0;
      for (int v : g.outputs) {
        const StreamElement& e = nodes[v].out_buf[0];
        if (!e.valid) continue;
        const Vertex& x = g.vertices[v];
        auto& dst = res.outputs.streams[x.name];
        if (!is_flag_port(x.name) && !std::isfinite(e.as_float())) res.nonfinite.push_back({x.name, dst.size()});
        dst.push_back(e.word);
        if (!x.branch_port) {
          ++valid_main;
          last_valid_out = static_cast<std::int64_t>(cycle);
          if (e.eop && !eop_seen) {
            eop_seen = true;
            c.window_end = static_cast<std::int64_t>(cycle);
          }
        }
      }
      if (opts.mem && valid_main) credit_w -= words_out;
      ++step;
    }
    ++cycle;
  }

  c.steps = static_cast<std::uint64_t>(step);
  if (c.window_end < 0) c.window_end = last_valid_out;
  if (c.window_begin >= 0 && c.window_end >= c.window_begin) {
    c.total_cycles = static_cast<std::uint64_t>(c.window_end - c.window_begin + 1);
    for (auto cy : accepted_cycles) c.n_c += static_cast<std::int64_t>(cy) <= c.window_end;
    c.n_s = c.total_cycles - c.n_c;
  }
  return res;
}

double measure_utilization(const SimCounters& c) {
  if (c.n_c + c.n_s == 0) throw SpdError("utilization undefined: empty measurement window");
  return static_cast<double>(c.n_c) / static_cast<double>(c.n_c + c.n_s);
}

std::uint64_t run_iterations(const Dfg& pe, const StreamSet& inputs, int m, IterationMode mode, SimResult* last) {
  if (m < 1) throw SpdError("iteration count must be at least 1");
  if (mode == IterationMode::Cascaded) {
    SimResult r = simulate(cascade(pe, m), inputs);
    std::uint64_t cycles = r.counters.total_cycles;
    if (last) *last = std::move(r);
    return cycles;
  }
  std::uint64_t cycles = 0;
  StreamSet cur = inputs;
  SimResult r;
  for (int k = 0; k < m; ++k) {
    r = simulate(pe, cur);
    cycles += r.counters.total_cycles;
    for (const auto& [port, words] : r.outputs.streams)
      if (auto it = cur.streams.find(port); it != cur.streams.end() && words.size() == it->second.size())
        it->second = words;
  }
  if (last) *last = std::move(r);
  return cycles;
}

std::vector<std::uint32_t> read_words(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpdError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4) throw SpdError(path + ": size is not a multiple of 4 bytes");
  std::vector<std::uint32_t> w(bytes.size() / 4);
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = bytes[4 * i] | bytes[4 * i + 1] << 8 | bytes[4 * i + 2] << 16 | std::uint32_t(bytes[4 * i + 3]) << 24;
  return w;
}

void write_words(const std::string& path, const std::vector<std::uint32_t>& words) {
  std::vector<unsigned char> bytes(words.size() * 4);
  for (std::size_t i = 0; i < words.size(); ++i)
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(words[i] >> (8 * b));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpdError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

StreamSet load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpdError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SpdError(path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  StreamSet s;
  try {
    for (const auto& [port, file] : j.at("inputs").items()) {
      std::filesystem::path p = file.get<std::string>();
      if (p.is_relative()) p = dir / p;
      s.streams[port] = read_words(p.string());
    }
    if (j.contains("constants"))
      for (const auto& [port, val] : j["constants"].items()) {
        if (val.is_number_unsigned() && j.value("constants_as_words", false))
          s.constants[port] = val.get<std::uint32_t>();
        else
          s.set_constant(port, val.get<float>());
      }
  } catch (const nlohmann::json::exception& e) {
    throw SpdError(path + ": " + e.what());
  }
  std::size_t T = s.length();
  if (j.contains("T") && j["T"].get<std::size_t>() != T)
    throw SpdError(path + ": streams have " + std::to_string(T) + " elements but T = " +
                   std::to_string(j["T"].get<std::size_t>()));
  return s;
}

std::string save_streams(const StreamSet& s, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["inputs"] = nlohmann::json::object();
  std::size_t T = 0;
  for (const auto& [port, words] : s.streams) {
    write_words((std::filesystem::path(dir) / (port + ".bin")).string(), words);
    j["inputs"][port] = port + ".bin";
    T = std::max(T, words.size());
  }
  j["T"] = T;
  return j.dump(2) + "\n";
}

}  // namespace spd

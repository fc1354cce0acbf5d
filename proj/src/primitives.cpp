#include "spd/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace spd {

// ---------------------------------------------------------------------------
// LatencyRing

LatencyRing::LatencyRing(std::int64_t latency, std::size_t width)
    : latency_(latency), width_(width), data_(static_cast<std::size_t>(std::max<std::int64_t>(latency, 1)) * width) {}

std::span<const StreamElement> LatencyRing::front() const {
  return std::span<const StreamElement>(data_).subspan(head_ * width_, width_);
}

void LatencyRing::push(std::span<const StreamElement> v) {
  std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(head_ * width_));
  head_ = (head_ + 1) % static_cast<std::size_t>(std::max<std::int64_t>(latency_, 1));
}

// ---------------------------------------------------------------------------
// ParamMap

ParamMap::ParamMap(const std::vector<HdlParam>& params) {
  int positional = 0;
  for (const auto& p : params) {
    std::string key = p.name.empty() ? "#" + std::to_string(positional++) : p.name;
    values_[key] = p.values;
  }
}

std::int64_t ParamMap::get_int(const std::string& name, std::int64_t fallback) const {
  auto it = values_.find(name);
  if (it == values_.end() || it->second.empty()) return fallback;
  char* end = nullptr;
  long long v = std::strtoll(it->second[0].c_str(), &end, 10);
  if (*end != '\0') throw SpdError("parameter " + name + " must be an integer, got '" + it->second[0] + "'");
  return v;
}

double ParamMap::get_real(const std::string& name, double fallback) const {
  auto it = values_.find(name);
  if (it == values_.end() || it->second.empty()) return fallback;
  char* end = nullptr;
  double v = std::strtod(it->second[0].c_str(), &end);
  if (*end != '\0') throw SpdError("parameter " + name + " must be numeric, got '" + it->second[0] + "'");
  return v;
}

std::string ParamMap::get_str(const std::string& name, const std::string& fallback) const {
  auto it = values_.find(name);
  if (it == values_.end() || it->second.empty()) return fallback;
  return it->second[0];
}

std::vector<std::int64_t> ParamMap::get_int_list(const std::string& name) const {
  std::vector<std::int64_t> out;
  auto it = values_.find(name);
  if (it == values_.end()) return out;
  for (const auto& s : it->second) {
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (*end != '\0') throw SpdError("parameter " + name + " must list integers, got '" + s + "'");
    out.push_back(v);
  }
  return out;
}

namespace {

StreamElement merge_flags(std::span<const StreamElement> in) {
  StreamElement e;
  e.valid = true;
  for (const auto& x : in) {
    e.valid = e.valid && x.valid;
    e.sop = e.sop || x.sop;
    e.eop = e.eop || x.eop;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Pure latency

class DelayBehavior final : public Behavior {
 public:
  DelayBehavior(std::int64_t k, std::size_t width) : ring_(k, width), width_(width), current_(width) {}
  void absorb(std::span<const StreamElement> in) override {
    if (ring_.latency() == 0) {
      std::copy(in.begin(), in.end(), current_.begin());
    } else {
      ring_.push(in);
    }
  }
  void emit(std::span<StreamElement> out) override {
    auto src = ring_.latency() == 0 ? std::span<const StreamElement>(current_) : ring_.front();
    std::copy(src.begin(), src.end(), out.begin());
  }

 private:
  LatencyRing ring_;
  std::size_t width_;
  std::vector<StreamElement> current_;
};

class PaddedBehavior final : public Behavior {
 public:
  PaddedBehavior(std::unique_ptr<Behavior> inner, bool inner_comb, std::int64_t extra, std::size_t width)
      : inner_(std::move(inner)), inner_comb_(inner_comb), ring_(extra, width), scratch_(width) {}
  void absorb(std::span<const StreamElement> in) override {
    if (inner_comb_) {
      inner_->absorb(in);
      inner_->emit(scratch_);
    } else {
      inner_->emit(scratch_);
      inner_->absorb(in);
    }
    ring_.push(scratch_);
  }
  void emit(std::span<StreamElement> out) override {
    auto f = ring_.front();
    std::copy(f.begin(), f.end(), out.begin());
  }

 private:
  std::unique_ptr<Behavior> inner_;
  bool inner_comb_;
  LatencyRing ring_;
  std::vector<StreamElement> scratch_;
};

// ---------------------------------------------------------------------------
// 2D stencil buffer. Elements are stored per absorbed cycle together with
// their pass number and lane-group index; a tap is served only when the
// referenced position belongs to the same pass as the centre element.

class StencilBehavior final : public Behavior {
 public:
  StencilBehavior(StencilConfig cfg, std::int64_t latency) : cfg_(std::move(cfg)), latency_(latency) {
    const std::int64_t n = cfg_.lanes;
    std::int64_t min_off = 0;
    for (auto o : cfg_.offsets) min_off = std::min(min_off, o);
    back_groups_ = (-min_off + n - 1) / n + 1;
    cap_ = static_cast<std::size_t>(latency_ + back_groups_ + 2);
    slots_.resize(cap_);
    for (auto& s : slots_) s.lanes.resize(static_cast<std::size_t>(n));
  }

  void absorb(std::span<const StreamElement> in) override {
    Slot& s = slots_[static_cast<std::size_t>(cycle_ % static_cast<std::int64_t>(cap_))];
    std::copy(in.begin(), in.end(), s.lanes.begin());
    const StreamElement& lead = in[0];
    if (lead.valid && lead.sop) {
      ++pass_;
      group_ = 0;
    } else if (lead.valid) {
      ++group_;
    }
    s.cycle = cycle_;
    s.pass = pass_;
    s.group = group_;
    s.valid = lead.valid;
    ++cycle_;
  }

  void emit(std::span<StreamElement> out) override {
    const std::int64_t n = cfg_.lanes;
    // the last absorbed cycle is cycle_ - 1; the centre lags it by the latency
    const std::int64_t centre_cycle = cycle_ - 1 - latency_;
    const Slot* centre = slot_at(centre_cycle);
    for (std::size_t k = 0; k < cfg_.offsets.size(); ++k) {
      for (std::int64_t l = 0; l < n; ++l) {
        StreamElement& o = out[k * static_cast<std::size_t>(n) + static_cast<std::size_t>(l)];
        if (!centre) {
          o = StreamElement{cfg_.pad_word, false, false, false};
          continue;
        }
        const StreamElement& c = centre->lanes[static_cast<std::size_t>(l)];
        o = c;
        o.word = cfg_.pad_word;
        if (!c.valid || !centre->valid) continue;
        std::int64_t q = centre->group * n + l + cfg_.offsets[k];
        if (q < 0) continue;
        std::int64_t gq = q / n;
        std::int64_t lq = q % n;
        const Slot* t = slot_at(centre_cycle + (gq - centre->group));
        if (t && t->valid && t->pass == centre->pass && t->group == gq && t->lanes[static_cast<std::size_t>(lq)].valid)
          o.word = t->lanes[static_cast<std::size_t>(lq)].word;
      }
    }
  }

 private:
  struct Slot {
    std::vector<StreamElement> lanes;
    std::int64_t cycle = -1, pass = -1, group = -1;
    bool valid = false;
  };

  const Slot* slot_at(std::int64_t cycle) const {
    if (cycle < 0 || cycle >= cycle_) return nullptr;
    const Slot& s = slots_[static_cast<std::size_t>(cycle % static_cast<std::int64_t>(cap_))];
    return s.cycle == cycle ? &s : nullptr;
  }

  StencilConfig cfg_;
  std::int64_t latency_;
  std::int64_t back_groups_ = 0;
  std::size_t cap_ = 0;
  std::vector<Slot> slots_;
  std::int64_t cycle_ = 0, pass_ = -1, group_ = -1;
};

// ---------------------------------------------------------------------------
// Registered single-cycle primitives

class ComparatorBehavior final : public Behavior {
 public:
  ComparatorBehavior(CompareOp op, WordType type, bool use_imm, double imm)
      : op_(op), type_(type), use_imm_(use_imm), imm_(imm), ring_(1, 1) {}
  void absorb(std::span<const StreamElement> in) override {
    StreamElement r = merge_flags(in);
    bool v;
    if (type_ == WordType::Float) {
      float a = in[0].as_float();
      float b = use_imm_ ? static_cast<float>(imm_) : in[1].as_float();
      v = compare(a, b);
    } else {
      auto a = static_cast<std::int32_t>(in[0].word);
      auto b = use_imm_ ? static_cast<std::int32_t>(imm_) : static_cast<std::int32_t>(in[1].word);
      v = compare(a, b);
    }
    r.word = v ? kTrueWord : kFalseWord;
    ring_.push(std::span<const StreamElement>(&r, 1));
  }
  void emit(std::span<StreamElement> out) override { out[0] = ring_.front()[0]; }

 private:
  template <typename T>
  bool compare(T a, T b) const {
    switch (op_) {
      case CompareOp::Lt: return a < b;
      case CompareOp::Le: return a <= b;
      case CompareOp::Gt: return a > b;
      case CompareOp::Ge: return a >= b;
      case CompareOp::Eq: return a == b;
      case CompareOp::Ne: return a != b;
    }
    return false;
  }
  CompareOp op_;
  WordType type_;
  bool use_imm_;
  double imm_;
  LatencyRing ring_;
};

class MuxBehavior final : public Behavior {
 public:
  explicit MuxBehavior(int n_data) : n_data_(n_data), ring_(1, 1) {}
  void absorb(std::span<const StreamElement> in) override {
    StreamElement r = merge_flags(in);
    std::uint32_t sel = std::min<std::uint32_t>(in[0].word, static_cast<std::uint32_t>(n_data_ - 1));
    r.word = in[1 + sel].word;
    ring_.push(std::span<const StreamElement>(&r, 1));
  }
  void emit(std::span<StreamElement> out) override { out[0] = ring_.front()[0]; }

 private:
  int n_data_;
  LatencyRing ring_;
};

class EliminatorBehavior final : public Behavior {
 public:
  explicit EliminatorBehavior(int width) : width_(width), ring_(1, static_cast<std::size_t>(width)), tmp_(static_cast<std::size_t>(width)) {}
  void absorb(std::span<const StreamElement> in) override {
    bool keep = in[0].word != 0;
    for (int i = 0; i < width_; ++i) {
      tmp_[static_cast<std::size_t>(i)] = in[static_cast<std::size_t>(1 + i)];
      tmp_[static_cast<std::size_t>(i)].valid = in[static_cast<std::size_t>(1 + i)].valid && in[0].valid && keep;
    }
    ring_.push(tmp_);
  }
  void emit(std::span<StreamElement> out) override {
    auto f = ring_.front();
    std::copy(f.begin(), f.end(), out.begin());
  }

 private:
  int width_;
  LatencyRing ring_;
  std::vector<StreamElement> tmp_;
};

std::uint32_t pad_from(const ParamMap& p) {
  return std::bit_cast<std::uint32_t>(static_cast<float>(p.get_real("pad", 0.0)));
}

CompareOp parse_compare_op(const std::string& s) {
  if (s == "lt") return CompareOp::Lt;
  if (s == "le") return CompareOp::Le;
  if (s == "gt") return CompareOp::Gt;
  if (s == "ge") return CompareOp::Ge;
  if (s == "eq") return CompareOp::Eq;
  if (s == "ne") return CompareOp::Ne;
  throw SpdError("Comparator: unknown relation '" + s + "' (lt, le, gt, ge, eq, ne)");
}

}  // namespace

std::unique_ptr<Behavior> pad_behavior(std::unique_ptr<Behavior> inner, bool inner_combinational, std::int64_t extra,
                                       std::size_t out_width) {
  if (extra <= 0) return inner;
  return std::make_unique<PaddedBehavior>(std::move(inner), inner_combinational, extra, out_width);
}

PrimitiveSpec delay_prim(std::int64_t k, int width) {
  if (k < 0) throw SpdError("Delay: negative delay");
  PrimitiveSpec s;
  s.name = "Delay";
  s.main_in = s.main_out = width;
  s.latency = k;
  s.combinational = k == 0;
  s.make = [k, width] { return std::make_unique<DelayBehavior>(k, static_cast<std::size_t>(width)); };
  return s;
}

PrimitiveSpec stream_forward_prim(std::int64_t k, std::uint32_t pad_word) {
  if (k < 0) throw SpdError("StreamForward: negative distance");
  auto s = stencil2d_prim({{k}, std::max<std::int64_t>(k, 1), 1, pad_word, 1});
  s.name = "StreamForward";
  return s;
}

PrimitiveSpec stream_backward_prim(std::int64_t k, std::uint32_t pad_word) {
  if (k < 0) throw SpdError("StreamBackward: negative distance");
  auto s = stencil2d_prim({{-k}, std::max<std::int64_t>(k, 1), 1, pad_word, 1});
  s.name = "StreamBackward";
  return s;
}

std::int64_t stencil_buffer_words(const StencilConfig& cfg) {
  std::int64_t lo = 0, hi = 0;
  for (auto o : cfg.offsets) {
    lo = std::min(lo, o);
    hi = std::max(hi, o);
  }
  // one span of history plus one extra word per additional lane
  return (hi - lo) + (cfg.lanes - 1);
}

PrimitiveSpec stencil2d_prim(const StencilConfig& cfg) {
  if (cfg.row_len < 1) throw SpdError("Stencil2D: row length must be >= 1");
  if (cfg.lanes < 1) throw SpdError("Stencil2D: lanes must be >= 1");
  if (cfg.offsets.empty()) throw SpdError("Stencil2D: no offsets");
  const std::int64_t capacity = cfg.row_len * cfg.max_rows;
  std::int64_t max_pos = 0;
  for (auto o : cfg.offsets) {
    if (std::abs(o) > capacity)
      throw SpdError("Stencil2D: offset " + std::to_string(o) + " exceeds buffer capacity " + std::to_string(capacity));
    max_pos = std::max(max_pos, o);
  }
  PrimitiveSpec s;
  s.name = "Stencil2D";
  s.main_in = cfg.lanes;
  s.main_out = cfg.lanes * static_cast<int>(cfg.offsets.size());
  s.latency = (max_pos + cfg.lanes - 1) / cfg.lanes;
  s.combinational = true;
  s.make = [cfg, lat = s.latency] { return std::make_unique<StencilBehavior>(cfg, lat); };
  return s;
}

PrimitiveSpec comparator_prim(CompareOp op, WordType type, bool use_imm, double imm) {
  PrimitiveSpec s;
  s.name = "Comparator";
  s.main_in = use_imm ? 1 : 2;
  s.main_out = 1;
  s.latency = 1;
  s.make = [=] { return std::make_unique<ComparatorBehavior>(op, type, use_imm, imm); };
  return s;
}

PrimitiveSpec sync_mux_prim(int n_data) {
  if (n_data < 1) throw SpdError("SyncMux: needs at least one data input");
  PrimitiveSpec s;
  s.name = "SyncMux";
  s.main_in = 1 + n_data;
  s.main_out = 1;
  s.latency = 1;
  s.make = [n_data] { return std::make_unique<MuxBehavior>(n_data); };
  return s;
}

PrimitiveSpec eliminator_prim(int width) {
  if (width < 1) throw SpdError("Eliminator: needs at least one data input");
  PrimitiveSpec s;
  s.name = "Eliminator";
  s.main_in = 1 + width;
  s.main_out = width;
  s.latency = 1;
  s.make = [width] { return std::make_unique<EliminatorBehavior>(width); };
  return s;
}

std::vector<std::string> primitive_names() {
  return {"Comparator", "Delay", "Eliminator", "Stencil2D", "StreamBackward", "StreamForward", "SyncMux"};
}

bool is_primitive(const std::string& module_name) {
  auto names = primitive_names();
  return std::find(names.begin(), names.end(), module_name) != names.end();
}

PrimitiveSpec make_primitive(const std::string& name, const ParamMap& p, int n_in, int n_out) {
  PrimitiveSpec s;
  if (name == "Delay") {
    s = delay_prim(p.get_int("k", p.get_int("#0", 0)), n_in);
  } else if (name == "StreamForward") {
    s = stream_forward_prim(p.get_int("k", p.get_int("#0", 0)), pad_from(p));
  } else if (name == "StreamBackward") {
    s = stream_backward_prim(p.get_int("k", p.get_int("#0", 0)), pad_from(p));
  } else if (name == "Stencil2D") {
    StencilConfig cfg;
    cfg.offsets = p.get_int_list("offsets");
    cfg.row_len = p.get_int("row", 1);
    cfg.lanes = static_cast<int>(p.get_int("lanes", n_in));
    cfg.pad_word = pad_from(p);
    cfg.max_rows = p.get_int("rows", 4);
    s = stencil2d_prim(cfg);
  } else if (name == "Comparator") {
    auto type = p.get_str("type", "float") == "int" ? WordType::Int : WordType::Float;
    s = comparator_prim(parse_compare_op(p.get_str("op", "lt")), type, p.has("imm"), p.get_real("imm", 0.0));
  } else if (name == "SyncMux") {
    s = sync_mux_prim(n_in - 1);
  } else if (name == "Eliminator") {
    s = eliminator_prim(n_in - 1);
  } else {
    throw SpdError("unknown primitive module '" + name + "'");
  }
  if (s.main_in != n_in || s.main_out != n_out)
    throw SpdError(name + ": call has " + std::to_string(n_in) + " inputs / " + std::to_string(n_out) +
                   " outputs, primitive expects " + std::to_string(s.main_in) + " / " + std::to_string(s.main_out));
  s.params = p;
  return s;
}

}  // namespace spd

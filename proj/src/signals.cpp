#include "spd/signals.hpp"

#include <algorithm>
#include <set>

namespace spd {

std::string SignalId::str() const {
  switch (space) {
    case SignalSpace::Input: return "in:" + name;
    case SignalSpace::Output: return "out:" + name;
    case SignalSpace::Wire: return name;
  }
  return name;
}

SignalTable::SignalTable(const SpdModule& m) : m_(m) {
  auto add_iface = [&](const InterfaceDecl& d, bool input, auto cls) {
    auto [it, fresh] = iface_is_input_.emplace(d.if_name, input);
    if (!fresh && it->second != input)
      errors_.push_back("interface " + d.if_name + " declared as both input and output");
    auto& ports = iface_ports_[d.if_name];
    for (const auto& p : d.ports) {
      ports.push_back(p);
      if constexpr (std::is_same_v<decltype(cls), InputClass>) {
        if (!inputs_.emplace(p, cls).second) errors_.push_back("duplicate input port " + p);
      } else {
        if (!outputs_.emplace(p, cls).second) errors_.push_back("duplicate output port " + p);
      }
    }
  };
  if (m.main_in) add_iface(*m.main_in, true, InputClass::Main);
  for (const auto& d : m.brch_in) add_iface(d, true, InputClass::Branch);
  for (const auto& d : m.append_regs) add_iface(d, true, InputClass::Constant);
  if (m.main_out) add_iface(*m.main_out, false, OutputClass::Main);
  for (const auto& d : m.brch_out) add_iface(d, false, OutputClass::Branch);

  auto note_producer = [&](const PortRef& r) {
    std::string err;
    if (auto id = resolve_producer(r, &err)) produced_[id->name] = true;
  };
  for (const auto& nd : m.nodes) {
    if (auto* e = std::get_if<EquNode>(&nd.node)) {
      note_producer(e->output);
    } else if (auto* h = std::get_if<HdlNode>(&nd.node)) {
      for (const auto& r : h->main_outs) note_producer(r);
      for (const auto& r : h->brch_outs) note_producer(r);
    } else {
      for (const auto& r : std::get<DrctLink>(nd.node).dst) note_producer(r);
    }
  }
}

std::optional<SignalId> SignalTable::resolve_producer(const PortRef& ref, std::string* err) const {
  if (!ref.iface.empty()) {
    auto it = iface_is_input_.find(ref.iface);
    if (it == iface_is_input_.end()) {
      *err = "unknown interface " + ref.iface + " in " + ref.str();
      return std::nullopt;
    }
    if (it->second) {
      *err = "cannot drive input port " + ref.str();
      return std::nullopt;
    }
    const auto& ports = iface_ports_.at(ref.iface);
    if (std::find(ports.begin(), ports.end(), ref.name) == ports.end()) {
      *err = ref.str() + " unresolved";
      return std::nullopt;
    }
    return SignalId{SignalSpace::Output, ref.name};
  }
  if (outputs_.count(ref.name)) return SignalId{SignalSpace::Output, ref.name};
  if (inputs_.count(ref.name)) {
    *err = "cannot drive input port " + ref.name;
    return std::nullopt;
  }
  return SignalId{SignalSpace::Wire, ref.name};
}

std::optional<SignalId> SignalTable::resolve_consumer(const PortRef& ref, std::string* err) const {
  if (!ref.iface.empty()) {
    auto it = iface_is_input_.find(ref.iface);
    if (it == iface_is_input_.end()) {
      *err = "unknown interface " + ref.iface + " in " + ref.str();
      return std::nullopt;
    }
    const auto& ports = iface_ports_.at(ref.iface);
    if (std::find(ports.begin(), ports.end(), ref.name) == ports.end()) {
      *err = ref.str() + " unresolved";
      return std::nullopt;
    }
    return SignalId{it->second ? SignalSpace::Input : SignalSpace::Output, ref.name};
  }
  bool in = inputs_.count(ref.name) != 0;
  bool prod = produced_.count(ref.name) != 0;
  if (in && prod) {
    *err = ref.name + " ambiguous (qualify with an interface name)";
    return std::nullopt;
  }
  if (in) return SignalId{SignalSpace::Input, ref.name};
  if (prod) return SignalId{outputs_.count(ref.name) ? SignalSpace::Output : SignalSpace::Wire, ref.name};
  *err = ref.name + " unresolved";
  return std::nullopt;
}

namespace {

void collect_expr_ports(const Expr& e, std::vector<PortRef>& out) {
  if (auto* p = std::get_if<Expr::Port>(&e.node)) {
    out.push_back(p->ref);
  } else if (auto* b = std::get_if<Expr::Binary>(&e.node)) {
    collect_expr_ports(*b->lhs, out);
    collect_expr_ports(*b->rhs, out);
  } else if (auto* s = std::get_if<Expr::Sqrt>(&e.node)) {
    collect_expr_ports(*s->arg, out);
  }
}

}  // namespace

std::vector<Diagnostic> validate(const SpdModule& m) {
  std::vector<Diagnostic> diags;
  SignalTable table(m);
  for (const auto& e : table.errors()) diags.push_back({{m.file, 0}, e});

  std::map<SignalId, int> drive_count;
  std::set<std::string> reported;
  auto produce = [&](const PortRef& r, const SourceLoc& loc) {
    std::string err;
    if (auto id = table.resolve_producer(r, &err)) {
      if (++drive_count[*id] == 2) diags.push_back({loc, r.str() + " driven more than once"});
    } else {
      diags.push_back({loc, err});
    }
  };
  auto consume = [&](const PortRef& r, const SourceLoc& loc) {
    std::string err;
    if (!table.resolve_consumer(r, &err) && reported.insert(err).second) diags.push_back({loc, err});
  };

  for (const auto& nd : m.nodes) {
    if (auto* e = std::get_if<EquNode>(&nd.node)) {
      produce(e->output, nd.loc);
      std::vector<PortRef> refs;
      collect_expr_ports(*e->expr, refs);
      for (const auto& r : refs) consume(r, nd.loc);
    } else if (auto* h = std::get_if<HdlNode>(&nd.node)) {
      if (h->delay < 0) diags.push_back({nd.loc, "HDL " + h->name + " has a negative delay"});
      for (const auto& r : h->main_outs) produce(r, nd.loc);
      for (const auto& r : h->brch_outs) produce(r, nd.loc);
      for (const auto& r : h->main_ins) consume(r, nd.loc);
      for (const auto& r : h->brch_ins) consume(r, nd.loc);
    } else {
      const auto& d = std::get<DrctLink>(nd.node);
      for (const auto& r : d.dst) produce(r, nd.loc);
      for (const auto& r : d.src) consume(r, nd.loc);
    }
  }

  auto check_driven = [&](const InterfaceDecl& d) {
    for (const auto& p : d.ports)
      if (!drive_count.count(SignalId{SignalSpace::Output, p})) diags.push_back({{m.file, 0}, p + " undriven"});
  };
  if (m.main_out) check_driven(*m.main_out);
  for (const auto& d : m.brch_out) check_driven(d);
  return diags;
}

}  // namespace spd

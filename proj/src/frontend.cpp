#include "spd/frontend.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <set>
#include <sstream>

#include "lexer.hpp"

namespace spd {

using detail::Tok;
using detail::TokenCursor;

// ---------------------------------------------------------------------------
// Expr helpers

ExprPtr Expr::literal(float v, std::string text) {
  return std::make_shared<const Expr>(Expr{Literal{v, std::move(text)}});
}
ExprPtr Expr::port(PortRef ref) { return std::make_shared<const Expr>(Expr{Port{std::move(ref)}}); }
ExprPtr Expr::binary(BinOp op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(Expr{Binary{op, std::move(lhs), std::move(rhs)}});
}
ExprPtr Expr::sqrt(ExprPtr arg) { return std::make_shared<const Expr>(Expr{Sqrt{std::move(arg)}}); }

char binop_symbol(BinOp op) {
  switch (op) {
    case BinOp::Add: return '+';
    case BinOp::Sub: return '-';
    case BinOp::Mul: return '*';
    case BinOp::Div: return '/';
  }
  return '?';
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  if (auto* la = std::get_if<Expr::Literal>(&a.node)) {
    // bitwise, so -0.0 and NaN spellings stay distinguishable
    const auto& lb = std::get<Expr::Literal>(b.node);
    return std::memcmp(&la->value, &lb.value, sizeof(float)) == 0;
  }
  if (auto* pa = std::get_if<Expr::Port>(&a.node)) return pa->ref == std::get<Expr::Port>(b.node).ref;
  if (auto* ba = std::get_if<Expr::Binary>(&a.node)) {
    const auto& bb = std::get<Expr::Binary>(b.node);
    return ba->op == bb.op && structurally_equal(*ba->lhs, *bb.lhs) && structurally_equal(*ba->rhs, *bb.rhs);
  }
  return structurally_equal(*std::get<Expr::Sqrt>(a.node).arg, *std::get<Expr::Sqrt>(b.node).arg);
}

namespace {

int precedence(BinOp op) { return (op == BinOp::Add || op == BinOp::Sub) ? 1 : 2; }

void print_expr_into(const Expr& e, std::string& out, int parent_prec, bool right_side) {
  if (auto* l = std::get_if<Expr::Literal>(&e.node)) {
    out += l->text;
  } else if (auto* p = std::get_if<Expr::Port>(&e.node)) {
    out += p->ref.str();
  } else if (auto* s = std::get_if<Expr::Sqrt>(&e.node)) {
    out += "sqrt(";
    print_expr_into(*s->arg, out, 0, false);
    out += ")";
  } else {
    const auto& b = std::get<Expr::Binary>(e.node);
    int prec = precedence(b.op);
    // left associativity: a right operand of equal precedence needs parentheses
    bool paren = prec < parent_prec || (right_side && prec == parent_prec);
    if (paren) out += "(";
    print_expr_into(*b.lhs, out, prec, false);
    out += ' ';
    out += binop_symbol(b.op);
    out += ' ';
    print_expr_into(*b.rhs, out, prec, true);
    if (paren) out += ")";
  }
}

}  // namespace

std::string print_expr(const Expr& e) {
  std::string out;
  print_expr_into(e, out, 0, false);
  return out;
}

// ---------------------------------------------------------------------------
// Preprocessor

namespace {

bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string strip_comments(const std::string& src) {
  std::string out;
  out.reserve(src.size());
  size_t i = 0;
  while (i <= src.size()) {
    size_t eol = src.find('\n', i);
    bool last = eol == std::string::npos;
    std::string line = src.substr(i, last ? std::string::npos : eol - i);
    size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
      while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.pop_back();
    }
    out += line;
    if (last) break;
    out += '\n';
    i = eol + 1;
  }
  return out;
}

std::string first_word(const std::string& s) {
  size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  size_t j = i;
  while (j < s.size() && is_ident_char(s[j])) ++j;
  return s.substr(i, j - i);
}

std::string substitute_params(const std::string& text, const std::map<std::string, std::string>& params) {
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      std::string word = text.substr(i, j - i);
      // qualified names (`IF::x`) and qualifiers are never parameters
      bool qualified = (i >= 2 && text.compare(i - 2, 2, "::") == 0) ||
                       (j + 1 < text.size() && text.compare(j, 2, "::") == 0);
      auto it = params.find(word);
      out += (it != params.end() && !qualified) ? it->second : word;
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      // keep number spellings intact (e.g. the `5` in `1.5`)
      size_t j = i;
      while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.')) ++j;
      out += text.substr(i, j - i);
      i = j;
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

}  // namespace

std::string preprocess(const std::string& source, std::map<std::string, std::string>* params_out,
                       const std::string& file) {
  std::string text = strip_comments(source);
  std::map<std::string, std::string> params;
  std::string out;
  out.reserve(text.size());
  size_t start = 0;
  int line = 1;
  while (start < text.size()) {
    size_t semi = text.find(';', start);
    bool terminated = semi != std::string::npos;
    size_t end = terminated ? semi : text.size();
    std::string stmt = text.substr(start, end - start);
    std::string kw = first_word(stmt);
    if (kw == "Param") {
      auto toks = detail::tokenize(stmt, file, line);
      TokenCursor cur(toks, file);
      cur.next();
      std::string name = cur.expect_ident("parameter name");
      cur.expect('=', "after parameter name");
      std::string value;
      if (cur.accept('-')) value = "-";
      if (cur.peek().kind != Tok::Number) cur.fail("expected a constant value for Param " + name);
      value += cur.next().text;
      if (!cur.at_end()) cur.fail("trailing tokens after Param " + name);
      if (params.count(name)) throw SpdError("duplicate parameter '" + name + "'", {file, line});
      params[name] = value;
      for (char c : stmt)
        if (c == '\n') out += '\n';
    } else {
      if (kw == "EQU") {
        size_t eq = stmt.find('=');
        if (eq != std::string::npos) stmt = stmt.substr(0, eq + 1) + substitute_params(stmt.substr(eq + 1), params);
      }
      out += stmt;
      if (terminated) out += ';';
    }
    for (size_t k = start; k < end; ++k)
      if (text[k] == '\n') ++line;
    start = terminated ? semi + 1 : text.size();
  }
  if (params_out) *params_out = std::move(params);
  return out;
}

// ---------------------------------------------------------------------------
// Expression parser (precedence climbing)

namespace {

PortRef parse_port_ref(TokenCursor& cur, const char* what) {
  PortRef ref;
  ref.name = cur.expect_ident(what);
  if (cur.peek().kind == Tok::Scope) {
    cur.next();
    ref.iface = ref.name;
    ref.name = cur.expect_ident("port name after '::'");
  }
  return ref;
}

float parse_float_literal(const std::string& text, TokenCursor& cur) {
  char* end = nullptr;
  float v = std::strtof(text.c_str(), &end);
  if (end != text.c_str() + text.size()) cur.fail("malformed number '" + text + "'");
  return v;
}

ExprPtr parse_binary(TokenCursor& cur, int min_prec);

ExprPtr parse_primary(TokenCursor& cur) {
  const auto& t = cur.peek();
  if (t.kind == Tok::Number) {
    std::string text = cur.next().text;
    return Expr::literal(parse_float_literal(text, cur), text);
  }
  if (cur.is_punct('-') && cur.peek(1).kind == Tok::Number) {
    cur.next();
    std::string text = "-" + cur.next().text;
    return Expr::literal(parse_float_literal(text, cur), text);
  }
  if (t.kind == Tok::Ident) {
    if (cur.is_punct('(', 1)) {
      std::string fn = cur.next().text;
      if (fn != "sqrt") cur.fail("unknown function '" + fn + "'");
      cur.next();
      auto arg = parse_binary(cur, 1);
      cur.expect(')', "to close sqrt(");
      return Expr::sqrt(arg);
    }
    return Expr::port(parse_port_ref(cur, "operand"));
  }
  if (cur.accept('(')) {
    auto inner = parse_binary(cur, 1);
    if (!cur.accept(')')) cur.fail("unbalanced parentheses: expected ')'");
    return inner;
  }
  cur.fail("empty operand");
}

std::optional<BinOp> peek_binop(const TokenCursor& cur) {
  if (cur.peek().kind != Tok::Punct) return std::nullopt;
  switch (cur.peek().text[0]) {
    case '+': return BinOp::Add;
    case '-': return BinOp::Sub;
    case '*': return BinOp::Mul;
    case '/': return BinOp::Div;
    default: return std::nullopt;
  }
}

ExprPtr parse_binary(TokenCursor& cur, int min_prec) {
  ExprPtr lhs = parse_primary(cur);
  while (auto op = peek_binop(cur)) {
    int prec = precedence(*op);
    if (prec < min_prec) break;
    cur.next();
    ExprPtr rhs = parse_binary(cur, prec + 1);
    lhs = Expr::binary(*op, lhs, rhs);
  }
  return lhs;
}

}  // namespace

ExprPtr parse_expr(const std::string& text) {
  TokenCursor cur(detail::tokenize(text, {}), {});
  if (cur.at_end()) cur.fail("empty operand");
  auto e = parse_binary(cur, 1);
  if (cur.is_punct(')')) cur.fail("unbalanced parentheses: unexpected ')'");
  if (!cur.at_end()) cur.fail("unexpected token in formula");
  return e;
}

// ---------------------------------------------------------------------------
// Module parser

std::vector<std::string> SpdModule::append_reg_ports() const {
  std::vector<std::string> out;
  for (const auto& r : append_regs) out.insert(out.end(), r.ports.begin(), r.ports.end());
  return out;
}

namespace {

InterfaceDecl parse_interface(TokenCursor& cur) {
  InterfaceDecl d;
  cur.expect('{', "to open an interface port list");
  d.if_name = cur.expect_ident("interface name");
  if (cur.peek().kind != Tok::Scope) cur.fail("expected '::' after interface name");
  cur.next();
  do {
    d.ports.push_back(cur.expect_ident("port name"));
  } while (cur.accept(','));
  cur.expect('}', "to close an interface port list");
  return d;
}

std::vector<PortRef> parse_ref_list(TokenCursor& cur) {
  std::vector<PortRef> refs;
  cur.expect('(', "to open a port list");
  if (cur.accept(')')) return refs;
  do {
    refs.push_back(parse_port_ref(cur, "port name"));
  } while (cur.accept(','));
  cur.expect(')', "to close a port list");
  return refs;
}

std::string parse_param_value(TokenCursor& cur) {
  std::string v;
  if (cur.accept('-')) v = "-";
  const auto& t = cur.peek();
  if (t.kind != Tok::Number && t.kind != Tok::Ident) cur.fail("expected a parameter value");
  return v + cur.next().text;
}

HdlParam parse_hdl_param(TokenCursor& cur) {
  HdlParam p;
  if (cur.peek().kind == Tok::Ident && cur.is_punct('=', 1)) {
    p.name = cur.next().text;
    cur.next();
  }
  if (cur.accept('{')) {
    p.is_list = true;
    if (!cur.is_punct('}')) {
      do {
        p.values.push_back(parse_param_value(cur));
      } while (cur.accept(','));
    }
    cur.expect('}', "to close a parameter list value");
  } else {
    p.values.push_back(parse_param_value(cur));
  }
  return p;
}

}  // namespace

SpdModule parse_module(const std::string& source, const std::string& file) {
  SpdModule m;
  m.file = file;
  std::string text = preprocess(source, &m.params, file);
  TokenCursor cur(detail::tokenize(text, file), file);
  bool have_name = false;
  std::set<std::string> node_names;

  auto add_node_name = [&](const std::string& name, int line) {
    if (!node_names.insert(name).second) throw SpdError("duplicate node name '" + name + "'", {file, line});
  };

  while (!cur.at_end()) {
    if (cur.accept(';')) continue;  // empty statement
    SourceLoc loc = cur.loc();
    if (cur.peek().kind != Tok::Ident) cur.fail("expected a function keyword");
    std::string kw = cur.next().text;
    if (kw == "Name") {
      if (have_name) throw SpdError("duplicate Name declaration", loc);
      m.name = cur.expect_ident("core name");
      have_name = true;
    } else if (kw == "Main_In" || kw == "Main_Out") {
      auto& slot = kw == "Main_In" ? m.main_in : m.main_out;
      if (slot) throw SpdError("duplicate " + kw + " declaration", loc);
      slot = parse_interface(cur);
    } else if (kw == "Brch_In") {
      m.brch_in.push_back(parse_interface(cur));
    } else if (kw == "Brch_Out") {
      m.brch_out.push_back(parse_interface(cur));
    } else if (kw == "Append_Reg") {
      m.append_regs.push_back(parse_interface(cur));
    } else if (kw == "EQU") {
      EquNode n;
      n.name = cur.expect_ident("node name");
      add_node_name(n.name, loc.line);
      cur.expect(',', "after EQU node name");
      n.output = parse_port_ref(cur, "output port");
      cur.expect('=', "after EQU output port");
      n.expr = parse_binary(cur, 1);
      if (cur.is_punct('=')) throw SpdError("EQU " + n.name + " has multiple assignments", loc);
      if (cur.is_punct(')')) cur.fail("unbalanced parentheses: unexpected ')'");
      m.nodes.push_back({std::move(n), loc});
    } else if (kw == "HDL") {
      HdlNode n;
      n.name = cur.expect_ident("node name");
      add_node_name(n.name, loc.line);
      cur.expect(',', "after HDL node name");
      if (cur.peek().kind != Tok::Number || cur.peek().text.find('.') != std::string::npos)
        cur.fail("HDL delay must be a non-negative integer constant");
      n.delay = std::stoll(cur.next().text);
      cur.expect(',', "after HDL delay");
      n.main_outs = parse_ref_list(cur);
      if (cur.is_punct('(')) n.brch_outs = parse_ref_list(cur);
      cur.expect('=', "in module call");
      n.module_name = cur.expect_ident("module name");
      n.main_ins = parse_ref_list(cur);
      if (cur.is_punct('(')) n.brch_ins = parse_ref_list(cur);
      while (cur.accept(',')) n.params.push_back(parse_hdl_param(cur));
      m.nodes.push_back({std::move(n), loc});
    } else if (kw == "DRCT") {
      DrctLink d;
      d.dst = parse_ref_list(cur);
      cur.expect('=', "in DRCT");
      d.src = parse_ref_list(cur);
      if (d.dst.size() != d.src.size())
        throw SpdError("DRCT port lists differ in length (" + std::to_string(d.dst.size()) + " vs " +
                           std::to_string(d.src.size()) + ")",
                       loc);
      m.nodes.push_back({std::move(d), loc});
    } else {
      throw SpdError("unknown function keyword '" + kw + "'", loc);
    }
    if (!cur.accept(';')) cur.fail("expected ';' to terminate " + kw);
  }
  if (!have_name) throw SpdError("missing Name declaration", {file, 1});
  return m;
}

// ---------------------------------------------------------------------------
// Printer

namespace {

std::string join_refs(const std::vector<PortRef>& refs) {
  std::string s = "(";
  for (size_t i = 0; i < refs.size(); ++i) {
    if (i) s += ", ";
    s += refs[i].str();
  }
  return s + ")";
}

std::string print_iface(const char* kw, const InterfaceDecl& d) {
  std::string s = std::string(kw) + " {" + d.if_name + "::";
  for (size_t i = 0; i < d.ports.size(); ++i) {
    if (i) s += ", ";
    s += d.ports[i];
  }
  return s + "};\n";
}

}  // namespace

std::string print_module(const SpdModule& m) {
  std::ostringstream os;
  os << "Name " << m.name << ";\n";
  if (m.main_in) os << print_iface("Main_In", *m.main_in);
  if (m.main_out) os << print_iface("Main_Out", *m.main_out);
  for (const auto& d : m.brch_in) os << print_iface("Brch_In", d);
  for (const auto& d : m.brch_out) os << print_iface("Brch_Out", d);
  for (const auto& d : m.append_regs) os << print_iface("Append_Reg", d);
  for (const auto& [k, v] : m.params) os << "Param " << k << " = " << v << ";\n";
  for (const auto& nd : m.nodes) {
    if (auto* e = std::get_if<EquNode>(&nd.node)) {
      os << "EQU " << e->name << ", " << e->output.str() << " = " << print_expr(*e->expr) << ";\n";
    } else if (auto* h = std::get_if<HdlNode>(&nd.node)) {
      os << "HDL " << h->name << ", " << h->delay << ", " << join_refs(h->main_outs);
      if (!h->brch_outs.empty()) os << join_refs(h->brch_outs);
      os << " = " << h->module_name << join_refs(h->main_ins);
      if (!h->brch_ins.empty()) os << join_refs(h->brch_ins);
      for (const auto& p : h->params) {
        os << ", ";
        if (!p.name.empty()) os << p.name << " = ";
        if (p.is_list) os << "{";
        for (size_t i = 0; i < p.values.size(); ++i) os << (i ? ", " : "") << p.values[i];
        if (p.is_list) os << "}";
      }
      os << ";\n";
    } else {
      const auto& d = std::get<DrctLink>(nd.node);
      os << "DRCT " << join_refs(d.dst) << " = " << join_refs(d.src) << ";\n";
    }
  }
  return os.str();
}

bool structurally_equal(const SpdModule& a, const SpdModule& b) {
  if (a.name != b.name || a.main_in != b.main_in || a.main_out != b.main_out || a.brch_in != b.brch_in ||
      a.brch_out != b.brch_out || a.append_regs != b.append_regs || a.params != b.params ||
      a.nodes.size() != b.nodes.size())
    return false;
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& x = a.nodes[i].node;
    const auto& y = b.nodes[i].node;
    if (x.index() != y.index()) return false;
    if (auto* e = std::get_if<EquNode>(&x)) {
      const auto& f = std::get<EquNode>(y);
      if (e->name != f.name || !(e->output == f.output) || !structurally_equal(*e->expr, *f.expr)) return false;
    } else if (auto* h = std::get_if<HdlNode>(&x)) {
      const auto& g = std::get<HdlNode>(y);
      if (h->name != g.name || h->delay != g.delay || h->module_name != g.module_name ||
          h->main_outs != g.main_outs || h->brch_outs != g.brch_outs || h->main_ins != g.main_ins ||
          h->brch_ins != g.brch_ins || h->params != g.params)
        return false;
    } else {
      const auto& d = std::get<DrctLink>(x);
      const auto& e2 = std::get<DrctLink>(y);
      if (d.dst != e2.dst || d.src != e2.src) return false;
    }
  }
  return true;
}

}  // namespace spd

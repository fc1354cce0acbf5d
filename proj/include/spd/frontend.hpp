#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace spd {

/// Source position (1-based line) attached to diagnostics and errors.
struct SourceLoc {
  std::string file;
  int line = 0;
};

class SpdError : public std::runtime_error {
 public:
  SpdError(const std::string& msg, SourceLoc loc = {})
      : std::runtime_error(format(msg, loc)), loc_(std::move(loc)), bare_(msg) {}

  const SourceLoc& loc() const { return loc_; }
  const std::string& bare() const { return bare_; }

 private:
  static std::string format(const std::string& msg, const SourceLoc& loc) {
    if (loc.line <= 0) return msg;
    return (loc.file.empty() ? std::string("<input>") : loc.file) + ":" + std::to_string(loc.line) +
           ": " + msg;
  }
  SourceLoc loc_;
  std::string bare_;
};

/// A port reference as written in source: optional `IF::` qualifier.
struct PortRef {
  std::string iface;  // empty when unqualified
  std::string name;

  std::string str() const { return iface.empty() ? name : iface + "::" + name; }
  bool operator==(const PortRef&) const = default;
};

// ---------------------------------------------------------------------------
// Expressions

enum class BinOp { Add, Sub, Mul, Div };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  struct Literal {
    float value;
    std::string text;  // original spelling, kept for printing
  };
  struct Port {
    PortRef ref;
  };
  struct Binary {
    BinOp op;
    ExprPtr lhs, rhs;
  };
  struct Sqrt {
    ExprPtr arg;
  };

  std::variant<Literal, Port, Binary, Sqrt> node;

  static ExprPtr literal(float v, std::string text);
  static ExprPtr port(PortRef ref);
  static ExprPtr binary(BinOp op, ExprPtr lhs, ExprPtr rhs);
  static ExprPtr sqrt(ExprPtr arg);
};

bool structurally_equal(const Expr& a, const Expr& b);
std::string print_expr(const Expr& e);
char binop_symbol(BinOp op);

// ---------------------------------------------------------------------------
// Module AST

struct InterfaceDecl {
  std::string if_name;
  std::vector<std::string> ports;
  bool operator==(const InterfaceDecl&) const = default;
};

/// One entry of an HDL node's parameter list: `name = value`, `name = {v, ...}`
/// or a bare positional value (name empty).
struct HdlParam {
  std::string name;
  std::vector<std::string> values;  // literal spellings
  bool is_list = false;
  bool operator==(const HdlParam&) const = default;
};

struct EquNode {
  std::string name;
  PortRef output;
  ExprPtr expr;
};

struct HdlNode {
  std::string name;
  std::int64_t delay = 0;
  std::string module_name;
  std::vector<PortRef> main_outs, brch_outs, main_ins, brch_ins;
  std::vector<HdlParam> params;
};

struct DrctLink {
  std::vector<PortRef> dst, src;
};

struct NodeDecl {
  std::variant<EquNode, HdlNode, DrctLink> node;
  SourceLoc loc;
};

struct SpdModule {
  std::string name;
  std::optional<InterfaceDecl> main_in, main_out;
  std::vector<InterfaceDecl> brch_in, brch_out;
  std::vector<InterfaceDecl> append_regs;  // constant-input registers
  std::map<std::string, std::string> params;
  std::vector<NodeDecl> nodes;
  std::string file;

  std::vector<std::string> append_reg_ports() const;
};

bool structurally_equal(const SpdModule& a, const SpdModule& b);

// ---------------------------------------------------------------------------
// Operations

/// Strips `#` comments and replaces Param names inside EQU formulae by their
/// values. Param lines are consumed (replaced by empty lines so line numbers
/// survive). `params_out` receives the definitions in order.
std::string preprocess(const std::string& source,
                       std::map<std::string, std::string>* params_out = nullptr,
                       const std::string& file = {});

ExprPtr parse_expr(const std::string& text);

SpdModule parse_module(const std::string& source, const std::string& file = {});

/// Canonical printer; parse_module(print_module(m)) is structurally equal to m.
std::string print_module(const SpdModule& m);

struct Diagnostic {
  SourceLoc loc;
  std::string message;
};

/// Empty iff every consumed port resolves to exactly one producer and every
/// output-interface port is driven.
std::vector<Diagnostic> validate(const SpdModule& m);

}  // namespace spd

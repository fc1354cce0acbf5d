#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spd/frontend.hpp"

namespace spd {

/// Where a signal lives in a module's namespace. Input and output interface
/// ports form separate namespaces (`sop` commonly appears on both sides).
enum class SignalSpace { Input, Output, Wire };

struct SignalId {
  SignalSpace space = SignalSpace::Wire;
  std::string name;

  auto operator<=>(const SignalId&) const = default;
  std::string str() const;
};

enum class InputClass { Main, Branch, Constant };
enum class OutputClass { Main, Branch };

/// Name resolution for one module: which signal each port reference denotes
/// and which node slot drives each produced signal.
class SignalTable {
 public:
  explicit SignalTable(const SpdModule& m);

  /// Resolve a reference in a producing position (EQU lhs, HDL outs, DRCT dst).
  std::optional<SignalId> resolve_producer(const PortRef& ref, std::string* err) const;
  /// Resolve a reference in a consuming position (expr, HDL ins, DRCT src).
  std::optional<SignalId> resolve_consumer(const PortRef& ref, std::string* err) const;

  bool is_input(const std::string& name) const { return inputs_.count(name) != 0; }
  bool is_output(const std::string& name) const { return outputs_.count(name) != 0; }
  InputClass input_class(const std::string& name) const { return inputs_.at(name); }
  OutputClass output_class(const std::string& name) const { return outputs_.at(name); }

  /// Errors found while building the table (duplicate interface ports, ...).
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  const SpdModule& m_;
  std::map<std::string, InputClass> inputs_;
  std::map<std::string, OutputClass> outputs_;
  std::map<std::string, std::vector<std::string>> iface_ports_;  // if name -> ports
  std::map<std::string, bool> iface_is_input_;
  std::map<std::string, bool> produced_;  // names produced by some node (bare)
  std::vector<std::string> errors_;
};

}  // namespace spd

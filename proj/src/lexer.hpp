#pragma once

#include <string>
#include <vector>

#include "spd/frontend.hpp"

namespace spd::detail {

enum class Tok { Ident, Number, Punct, Scope, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 0;
};

/// Splits preprocessed SPD text. Punctuation tokens are single characters;
/// `::` is its own token.
std::vector<Token> tokenize(const std::string& text, const std::string& file, int first_line = 1);

class TokenCursor {
 public:
  TokenCursor(std::vector<Token> toks, std::string file) : toks_(std::move(toks)), file_(std::move(file)) {}

  const Token& peek(size_t ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& next() {
    const Token& t = peek();
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Tok::End; }
  bool is_punct(char c, size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Tok::Punct && t.text[0] == c;
  }
  bool accept(char c) {
    if (!is_punct(c)) return false;
    next();
    return true;
  }
  void expect(char c, const char* what);
  std::string expect_ident(const char* what);

  [[noreturn]] void fail(const std::string& msg) const;
  SourceLoc loc() const { return {file_, peek().line}; }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  std::string file_;
};

}  // namespace spd::detail

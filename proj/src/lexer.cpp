#include "lexer.hpp"

#include <cctype>

namespace spd::detail {

std::vector<Token> tokenize(const std::string& text, const std::string& file, int first_line) {
  std::vector<Token> out;
  int line = first_line;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      out.push_back({Tok::Ident, text.substr(i, j - i), line});
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      size_t j = i;
      while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      if (j < n && text[j] == '.') {
        ++j;
        while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      if (j < n && (text[j] == 'e' || text[j] == 'E')) {
        size_t k = j + 1;
        if (k < n && (text[k] == '+' || text[k] == '-')) ++k;
        if (k < n && std::isdigit(static_cast<unsigned char>(text[k]))) {
          while (k < n && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
          j = k;
        }
      }
      if (j < n && (std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '_'))
        throw SpdError("malformed number '" + text.substr(i, j - i + 1) + "'", {file, line});
      out.push_back({Tok::Number, text.substr(i, j - i), line});
      i = j;
      continue;
    }
    if (c == ':' && i + 1 < n && text[i + 1] == ':') {
      out.push_back({Tok::Scope, "::", line});
      i += 2;
      continue;
    }
    static const std::string punct = "{}(),;=+-*/";
    if (punct.find(c) != std::string::npos) {
      out.push_back({Tok::Punct, std::string(1, c), line});
      ++i;
      continue;
    }
    throw SpdError(std::string("unexpected character '") + c + "'", {file, line});
  }
  out.push_back({Tok::End, "", line});
  return out;
}

void TokenCursor::expect(char c, const char* what) {
  if (!accept(c)) fail(std::string("expected '") + c + "' " + what);
}

std::string TokenCursor::expect_ident(const char* what) {
  if (peek().kind != Tok::Ident) fail(std::string("expected ") + what);
  return next().text;
}

void TokenCursor::fail(const std::string& msg) const {
  const Token& t = peek();
  std::string near = t.kind == Tok::End ? "end of statement" : "'" + t.text + "'";
  throw SpdError(msg + " near " + near, {file_, t.line});
}

}  // namespace spd::detail

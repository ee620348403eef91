#include "segmod/segment_dsl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "segmod/detail/strings.hpp"

namespace segmod {

SegmentQuery SegmentQuery::eq(Field f, std::string token) {
  SegmentQuery q;
  q.kind = Kind::eq;
  q.field = f;
  q.token = std::move(token);
  return q;
}

SegmentQuery SegmentQuery::ge(Field f, double v) {
  SegmentQuery q;
  q.kind = Kind::ge;
  q.field = f;
  q.value = v;
  return q;
}

SegmentQuery SegmentQuery::le(Field f, double v) {
  SegmentQuery q;
  q.kind = Kind::le;
  q.field = f;
  q.value = v;
  return q;
}

SegmentQuery SegmentQuery::range(Field f, double lo, double hi) {
  SegmentQuery q;
  q.kind = Kind::range;
  q.field = f;
  q.lo = lo;
  q.hi = hi;
  return q;
}

SegmentQuery SegmentQuery::all_of(std::vector<SegmentQuery> cs) {
  SegmentQuery q;
  q.kind = Kind::and_;
  q.children = std::move(cs);
  return q;
}

SegmentQuery SegmentQuery::any_of(std::vector<SegmentQuery> cs) {
  SegmentQuery q;
  q.kind = Kind::or_;
  q.children = std::move(cs);
  return q;
}

SegmentQuery SegmentQuery::negate(SegmentQuery c) {
  SegmentQuery q;
  q.kind = Kind::not_;
  q.children.push_back(std::move(c));
  return q;
}

namespace {

struct Token {
  enum class Type { word, quoted, number, op_eq, op_ge, op_le, lparen, rparen, lbracket, rbracket, comma, newline, end };
  Type type;
  std::string text;
  double number = 0;
  int line;
  int col;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      if (c == '\n') {
        out.push_back(make(Token::Type::newline, "\n"));
        advance();
        ++line_;
        col_ = 1;
        continue;
      }
      if (c == '(') { out.push_back(take(Token::Type::lparen)); continue; }
      if (c == ')') { out.push_back(take(Token::Type::rparen)); continue; }
      if (c == '[') { out.push_back(take(Token::Type::lbracket)); continue; }
      if (c == ']') { out.push_back(take(Token::Type::rbracket)); continue; }
      if (c == ',') { out.push_back(take(Token::Type::comma)); continue; }
      if (c == '=') { out.push_back(take(Token::Type::op_eq)); continue; }
      if (c == '>' || c == '<') {
        Token t = make(c == '>' ? Token::Type::op_ge : Token::Type::op_le, std::string(1, c) + "=");
        advance();
        if (pos_ >= text_.size() || text_[pos_] != '=')
          throw SyntaxError("expected '=' after '" + std::string(1, c) + "' at " + at(t));
        advance();
        out.push_back(t);
        continue;
      }
      if (c == '"') {
        Token t = make(Token::Type::quoted, "");
        advance();
        while (pos_ < text_.size() && text_[pos_] != '"' && text_[pos_] != '\n') {
          t.text += text_[pos_];
          advance();
        }
        if (pos_ >= text_.size() || text_[pos_] != '"') throw SyntaxError("unterminated string at " + at(t));
        advance();
        out.push_back(t);
        continue;
      }
      if (is_word_char(c)) {
        Token t = make(Token::Type::word, "");
        while (pos_ < text_.size() && is_word_char(text_[pos_])) {
          t.text += text_[pos_];
          advance();
        }
        char* end = nullptr;
        const double v = std::strtod(t.text.c_str(), &end);
        if (end == t.text.c_str() + t.text.size() && !t.text.empty()) {
          t.type = Token::Type::number;
          t.number = v;
        }
        out.push_back(t);
        continue;
      }
      throw SyntaxError("unexpected character '" + std::string(1, c) + "' at line " + std::to_string(line_) +
                        " col " + std::to_string(col_));
    }
    out.push_back(make(Token::Type::end, ""));
    return out;
  }

  static std::string at(const Token& t) {
    return "line " + std::to_string(t.line) + " col " + std::to_string(t.col);
  }

 private:
  static bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.' || c == ':' || c == '/' || c == '+';
  }

  Token make(Token::Type type, std::string text) const { return Token{type, std::move(text), 0, line_, col_}; }

  Token take(Token::Type type) {
    Token t = make(type, std::string(1, text_[pos_]));
    advance();
    return t;
  }

  void advance() {
    ++pos_;
    ++col_;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  SegmentQuery parse() {
    std::vector<SegmentQuery> lines;
    skip_newlines();
    while (!at(Token::Type::end)) {
      lines.push_back(parse_or());
      if (!at(Token::Type::end) && !at(Token::Type::newline))
        throw SyntaxError("unexpected token '" + cur().text + "' at " + Lexer::at(cur()));
      skip_newlines();
    }
    if (lines.empty()) throw SyntaxError("query has no predicates");
    if (lines.size() == 1) return std::move(lines.front());
    return SegmentQuery::all_of(std::move(lines));
  }

 private:
  SegmentQuery parse_or() {
    std::vector<SegmentQuery> parts;
    parts.push_back(parse_and());
    while (at_keyword("or")) {
      ++pos_;
      parts.push_back(parse_and());
    }
    if (parts.size() == 1) return std::move(parts.front());
    return SegmentQuery::any_of(std::move(parts));
  }

  SegmentQuery parse_and() {
    std::vector<SegmentQuery> parts;
    parts.push_back(parse_unary());
    while (at_keyword("and")) {
      ++pos_;
      parts.push_back(parse_unary());
    }
    if (parts.size() == 1) return std::move(parts.front());
    return SegmentQuery::all_of(std::move(parts));
  }

  SegmentQuery parse_unary() {
    if (at_keyword("not")) {
      ++pos_;
      return SegmentQuery::negate(parse_unary());
    }
    // same-visit conjunction is reserved syntax, not yet implemented
    if (at_keyword("visit") && pos_ + 1 < tokens_.size() && tokens_[pos_ + 1].type == Token::Type::lparen)
      throw SyntaxError("visit(...) grouping is reserved but not implemented, at " + Lexer::at(cur()));
    if (at(Token::Type::lparen)) {
      ++pos_;
      SegmentQuery inner = parse_or();
      expect(Token::Type::rparen, "')'");
      return inner;
    }
    return parse_clause();
  }

  SegmentQuery parse_clause() {
    if (!at(Token::Type::word) && !at(Token::Type::number))
      throw SyntaxError("expected field name at " + Lexer::at(cur()));
    const Token field_tok = cur();
    ++pos_;
    const auto field = field_from_string(field_tok.text);
    if (!field) throw UnknownField("unknown field '" + field_tok.text + "' at " + Lexer::at(field_tok));

    if (at(Token::Type::op_eq)) {
      ++pos_;
      const Token value = value_token();
      if (is_numeric(*field)) {
        if (value.type != Token::Type::number)
          throw TypeMismatch("field " + field_tok.text + " is numeric; '=' needs a number at " + Lexer::at(value));
        return SegmentQuery::range(*field, value.number, value.number);
      }
      return SegmentQuery::eq(*field, value.text);
    }
    if (at(Token::Type::op_ge) || at(Token::Type::op_le)) {
      const bool ge = at(Token::Type::op_ge);
      const Token op = cur();
      ++pos_;
      require_numeric(*field, field_tok, op);
      const Token value = number_token();
      return ge ? SegmentQuery::ge(*field, value.number) : SegmentQuery::le(*field, value.number);
    }
    if (at_keyword("in")) {
      const Token op = cur();
      ++pos_;
      require_numeric(*field, field_tok, op);
      expect(Token::Type::lbracket, "'['");
      const Token lo = number_token();
      expect(Token::Type::comma, "','");
      const Token hi = number_token();
      expect(Token::Type::rbracket, "']'");
      if (lo.number > hi.number) throw SyntaxError("empty interval at " + Lexer::at(lo));
      return SegmentQuery::range(*field, lo.number, hi.number);
    }
    throw SyntaxError("expected '=', '>=', '<=' or 'in' after field '" + field_tok.text + "' at " +
                      Lexer::at(cur()));
  }

  void require_numeric(Field f, const Token& field_tok, const Token& op) const {
    if (!is_numeric(f))
      throw TypeMismatch("numeric comparator on categorical field '" + field_tok.text + "' at " + Lexer::at(op));
  }

  Token value_token() {
    if (!at(Token::Type::word) && !at(Token::Type::quoted) && !at(Token::Type::number))
      throw SyntaxError("expected value at " + Lexer::at(cur()));
    Token t = cur();
    ++pos_;
    return t;
  }

  Token number_token() {
    if (!at(Token::Type::number)) throw SyntaxError("expected number at " + Lexer::at(cur()));
    Token t = cur();
    ++pos_;
    return t;
  }

  void expect(Token::Type type, const char* what) {
    if (!at(type)) throw SyntaxError(std::string("expected ") + what + " at " + Lexer::at(cur()));
    ++pos_;
  }

  void skip_newlines() {
    while (at(Token::Type::newline)) ++pos_;
  }

  bool at(Token::Type type) const { return cur().type == type; }

  bool at_keyword(const char* kw) const {
    return cur().type == Token::Type::word && detail::to_lower(cur().text) == kw;
  }

  const Token& cur() const { return tokens_[pos_]; }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

int count_leaves(const SegmentQuery& q) {
  switch (q.kind) {
    case SegmentQuery::Kind::and_:
    case SegmentQuery::Kind::or_:
    case SegmentQuery::Kind::not_: {
      int n = 0;
      for (const auto& c : q.children) n += count_leaves(c);
      return n;
    }
    default:
      return 1;
  }
}

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  return format_scalar(v);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find(' ') != std::string::npos || s.empty()) return "\"" + s + "\"";
  return s;
}

}  // namespace

SegmentQuery parse_query(const std::string& text) {
  Lexer lexer(text);
  Parser parser(lexer.run());
  SegmentQuery q = parser.parse();
  if (count_leaves(q) == 0) throw SyntaxError("query has no predicates");
  return q;
}

std::string describe(const SegmentQuery& q) {
  switch (q.kind) {
    case SegmentQuery::Kind::eq:
      return std::string(to_string(q.field)) + " = " + quote_if_needed(q.token);
    case SegmentQuery::Kind::ge:
      return std::string(to_string(q.field)) + " >= " + format_number(q.value);
    case SegmentQuery::Kind::le:
      return std::string(to_string(q.field)) + " <= " + format_number(q.value);
    case SegmentQuery::Kind::range:
      return std::string(to_string(q.field)) + " in [" + format_number(q.lo) + "," + format_number(q.hi) + "]";
    case SegmentQuery::Kind::not_:
      return "NOT (" + describe(q.children.front()) + ")";
    case SegmentQuery::Kind::and_:
    case SegmentQuery::Kind::or_: {
      std::string out;
      for (std::size_t i = 0; i < q.children.size(); ++i) {
        if (i) out += q.kind == SegmentQuery::Kind::and_ ? " AND " : " OR ";
        out += "(" + describe(q.children[i]) + ")";
      }
      return out;
    }
  }
  return {};
}

namespace {

UserSet evaluate_node(const SegmentQuery& q, const UserStore& store) {
  switch (q.kind) {
    case SegmentQuery::Kind::eq:
      return store.postings(q.field, q.token);
    case SegmentQuery::Kind::ge:
      return store.range(q.field, q.value, std::numeric_limits<double>::infinity());
    case SegmentQuery::Kind::le:
      return store.range(q.field, -std::numeric_limits<double>::infinity(), q.value);
    case SegmentQuery::Kind::range:
      return store.range(q.field, q.lo, q.hi);
    case SegmentQuery::Kind::not_:
      return set_difference(store.all_users(), evaluate_node(q.children.front(), store));
    case SegmentQuery::Kind::and_: {
      std::vector<UserSet> parts;
      parts.reserve(q.children.size());
      for (const auto& c : q.children) parts.push_back(evaluate_node(c, store));
      // smallest list first keeps intersections cheap
      std::sort(parts.begin(), parts.end(),
                [](const UserSet& a, const UserSet& b) { return a.size() < b.size(); });
      UserSet acc = std::move(parts.front());
      for (std::size_t i = 1; i < parts.size() && !acc.empty(); ++i) acc = set_intersect(acc, parts[i]);
      return acc;
    }
    case SegmentQuery::Kind::or_: {
      UserSet acc;
      for (const auto& c : q.children) acc = set_union(acc, evaluate_node(c, store));
      return acc;
    }
  }
  return {};
}

}  // namespace

UserSet evaluate(const SegmentQuery& q, const UserStore& store) { return evaluate_node(q, store); }

}  // namespace segmod

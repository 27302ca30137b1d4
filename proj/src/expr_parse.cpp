#include <algorithm>
#include <cctype>

#include "bg2phs/expr.hpp"

namespace bg2phs {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Syntax: return "syntax";
    case ErrorCode::UnknownSymbol: return "unknown-symbol";
    case ErrorCode::DivisionByZero: return "division-by-zero";
    case ErrorCode::DomainError: return "domain-error";
    case ErrorCode::SampleExhausted: return "sample-exhausted";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::PivotAmbiguity: return "pivot-ambiguity";
    case ErrorCode::Singular: return "singular";
    case ErrorCode::Json: return "json";
    case ErrorCode::DuplicateId: return "duplicate-id";
    case ErrorCode::UnknownElement: return "unknown-element";
    case ErrorCode::SelfLoop: return "self-loop";
    case ErrorCode::Payload: return "payload";
    case ErrorCode::NotConnected: return "not-connected";
    case ErrorCode::ExteriorAdjacency: return "exterior-adjacency";
    case ErrorCode::Orientation: return "orientation";
    case ErrorCode::TwoPortArity: return "two-port-arity";
    case ErrorCode::ModulationSymbol: return "modulation-symbol";
    case ErrorCode::CrossStorageCoupling: return "cross-storage-coupling";
    case ErrorCode::NonSymmetricResistor: return "non-symmetric-resistor";
    case ErrorCode::RankDeficientModulation: return "rank-deficient-modulation";
    case ErrorCode::NonOrthogonal: return "non-orthogonal";
    case ErrorCode::DegenerateInterconnection: return "degenerate-interconnection";
    case ErrorCode::InternalConsistency: return "internal-consistency";
    case ErrorCode::ResistiveSplitting: return "resistive-splitting";
    case ErrorCode::StageUnreachable: return "stage-unreachable";
    case ErrorCode::Simulation: return "simulation";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, const SymbolTable& symbols)
      : text_(text), symbols_(symbols) {}

  Expr parse() {
    Expr e = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::Syntax,
                "syntax error at byte " + std::to_string(pos_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' before end of input");
      fail(std::string("expected '") + c + "'");
    }
  }

  Expr expr() {
    Expr acc = term();
    for (;;) {
      if (accept('+')) {
        acc = acc + term();
      } else if (accept('-')) {
        acc = acc - term();
      } else {
        return acc;
      }
    }
  }

  Expr term() {
    Expr acc = factor();
    for (;;) {
      if (accept('*')) {
        acc = acc * factor();
      } else if (accept('/')) {
        const std::size_t at = pos_;
        Expr d = factor();
        if (d.is_zero_constant()) {
          pos_ = at;
          throw Error(ErrorCode::DivisionByZero,
                      "division by the constant 0 at byte " + std::to_string(at));
        }
        acc = acc / d;
      } else {
        return acc;
      }
    }
  }

  Expr factor() {
    Expr b = base();
    if (accept('^')) {
      skip_space();
      bool negative = false;
      if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
        negative = text_[pos_] == '-';
        ++pos_;
      }
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (start == pos_) fail("expected integer exponent");
      if (pos_ - start > 9) fail("exponent too large");
      int n = std::stoi(std::string(text_.substr(start, pos_ - start)));
      if (negative) n = -n;
      return pow(b, n);
    }
    return b;
  }

  Expr number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::string digits(text_.substr(start, pos_ - start));
    std::size_t frac = 0;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      const std::size_t fs = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      frac = pos_ - fs;
      digits += std::string(text_.substr(fs, frac));
    }
    if (digits.empty()) fail("malformed number");
    digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
    boost::multiprecision::cpp_int num(digits);
    boost::multiprecision::cpp_int den = boost::multiprecision::pow(boost::multiprecision::cpp_int(10),
                                                                    static_cast<unsigned>(frac));
    return Expr::constant(Rational(num, den));
  }

  Expr base() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      return -base();
    }
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string_view name = text_.substr(start, pos_ - start);
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        auto f = function_from_name(name);
        if (!f) {
          pos_ = start;
          fail("unknown function '" + std::string(name) + "'");
        }
        ++pos_;
        Expr arg = expr();
        expect(')');
        return Expr::apply(*f, arg);
      }
      auto id = symbols_.find(name);
      if (!id) throw Error(ErrorCode::UnknownSymbol, "unknown symbol '" + std::string(name) + "'");
      return Expr::symbol(*id, std::string(name));
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  std::string_view text_;
  const SymbolTable& symbols_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, const SymbolTable& symbols) {
  return Parser(text, symbols).parse();
}

}  // namespace bg2phs

#ifndef SPLCMAP_CONDITION_HPP
#define SPLCMAP_CONDITION_HPP

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "splcmap/error.hpp"
#include "splcmap/text.hpp"

namespace splcmap {

/// Boolean presence condition over feature names. Conjunctions and
/// disjunctions are kept flat, so `A AND (B AND C)` and `(A AND B) AND C`
/// are the same value.
class Condition {
 public:
  enum class Op { name, negation, conjunction, disjunction };

  static Condition feature(std::string name) {
    Condition c(Op::name);
    c.name_ = std::move(name);
    return c;
  }

  static Condition negate(Condition inner) {
    Condition c(Op::negation);
    c.operands_.push_back(std::move(inner));
    return c;
  }

  static Condition all_of(std::vector<Condition> parts) {
    return combine(Op::conjunction, std::move(parts));
  }

  static Condition any_of(std::vector<Condition> parts) {
    return combine(Op::disjunction, std::move(parts));
  }

  Op op() const { return op_; }
  const std::string& name() const { return name_; }
  const std::vector<Condition>& operands() const { return operands_; }

  /// Canonical text; parses back to an equal value.
  std::string str() const {
    switch (op_) {
      case Op::name:
        return name_;
      case Op::negation: {
        const Condition& inner = operands_.front();
        if (inner.op_ == Op::name || inner.op_ == Op::negation)
          return "NOT " + inner.str();
        return "NOT (" + inner.str() + ")";
      }
      case Op::conjunction: {
        std::vector<std::string> parts;
        for (const auto& o : operands_)
          parts.push_back(o.op_ == Op::disjunction ? "(" + o.str() + ")"
                                                   : o.str());
        return join(parts, " AND ");
      }
      case Op::disjunction: {
        std::vector<std::string> parts;
        for (const auto& o : operands_) parts.push_back(o.str());
        return join(parts, " OR ");
      }
    }
    return {};
  }

  /// Names occurring under an even number of negations.
  std::set<std::string> positive_features() const {
    std::set<std::string> pos, all;
    collect(false, pos, all);
    return pos;
  }

  std::set<std::string> mentioned_features() const {
    std::set<std::string> pos, all;
    collect(false, pos, all);
    return all;
  }

  template <typename Pred>
  bool evaluate(const Pred& selected) const {
    switch (op_) {
      case Op::name: return selected(name_);
      case Op::negation: return !operands_.front().evaluate(selected);
      case Op::conjunction:
        for (const auto& o : operands_)
          if (!o.evaluate(selected)) return false;
        return true;
      case Op::disjunction:
        for (const auto& o : operands_)
          if (o.evaluate(selected)) return true;
        return false;
    }
    return false;
  }

  friend bool operator==(const Condition&, const Condition&) = default;

 private:
  explicit Condition(Op op) : op_(op) {}

  static Condition combine(Op op, std::vector<Condition> parts) {
    if (parts.empty()) throw Error("empty condition");
    if (parts.size() == 1) return std::move(parts.front());
    Condition c(op);
    for (auto& p : parts) {
      if (p.op_ == op) {
        for (auto& inner : p.operands_) c.operands_.push_back(std::move(inner));
      } else {
        c.operands_.push_back(std::move(p));
      }
    }
    return c;
  }

  void collect(bool negated, std::set<std::string>& pos,
               std::set<std::string>& all) const {
    if (op_ == Op::name) {
      all.insert(name_);
      if (!negated) pos.insert(name_);
      return;
    }
    const bool flip = op_ == Op::negation;
    for (const auto& o : operands_) o.collect(negated != flip, pos, all);
  }

  Op op_;
  std::string name_;
  std::vector<Condition> operands_;
};

namespace detail {

class ConditionParser {
 public:
  explicit ConditionParser(std::string_view text) : text_(text) { advance(); }

  Condition parse() {
    Condition c = disjunction();
    if (!token_.empty())
      throw ParseError("unexpected '" + token_ + "' in condition", 0);
    return c;
  }

 private:
  Condition disjunction() {
    std::vector<Condition> parts{conjunction()};
    while (token_ == "OR") {
      advance();
      parts.push_back(conjunction());
    }
    return Condition::any_of(std::move(parts));
  }

  Condition conjunction() {
    std::vector<Condition> parts{unary()};
    while (token_ == "AND") {
      advance();
      parts.push_back(unary());
    }
    return Condition::all_of(std::move(parts));
  }

  Condition unary() {
    if (token_ == "NOT") {
      advance();
      return Condition::negate(unary());
    }
    if (token_ == "(") {
      advance();
      Condition inner = disjunction();
      if (token_ != ")") throw ParseError("missing ')' in condition", 0);
      advance();
      return inner;
    }
    if (token_.empty()) throw ParseError("condition ends unexpectedly", 0);
    if (!is_identifier(token_) || token_ == "AND" || token_ == "OR" ||
        token_ == ")")
      throw ParseError("expected feature name, got '" + token_ + "'", 0);
    Condition c = Condition::feature(token_);
    advance();
    return c;
  }

  void advance() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
    token_.clear();
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (c == '(' || c == ')') {
      token_ = c;
      ++pos_;
      return;
    }
    if (!is_word_char(c))
      throw ParseError(std::string("unexpected character '") + c +
                           "' in condition",
                       0);
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_word_char(text_[pos_])) ++pos_;
    token_ = std::string(text_.substr(start, pos_ - start));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::string token_;
};

}  // namespace detail

/// `expr := NAME | expr AND expr | expr OR expr | NOT expr | ( expr )`,
/// AND binding tighter than OR.
inline Condition parse_condition(std::string_view text) {
  return detail::ConditionParser(text).parse();
}

}  // namespace splcmap

#endif

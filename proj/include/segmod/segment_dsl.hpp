#pragma once

#include <string>
#include <vector>

#include "segmod/fields.hpp"
#include "segmod/types.hpp"
#include "segmod/user_store.hpp"

namespace segmod {

// Predicate AST over the Figure-1 style field vocabulary.
struct SegmentQuery {
  enum class Kind { eq, ge, le, range, and_, or_, not_ };

  Kind kind = Kind::and_;
  Field field = Field::domain;            // leaves only
  std::string token;                      // eq
  double value = 0;                       // ge / le
  double lo = 0, hi = 0;                  // range
  std::vector<SegmentQuery> children;     // and_ / or_ / not_

  static SegmentQuery eq(Field f, std::string token);
  static SegmentQuery ge(Field f, double v);
  static SegmentQuery le(Field f, double v);
  static SegmentQuery range(Field f, double lo, double hi);
  static SegmentQuery all_of(std::vector<SegmentQuery> cs);
  static SegmentQuery any_of(std::vector<SegmentQuery> cs);
  static SegmentQuery negate(SegmentQuery c);
};

// Grammar, one predicate language for analysts:
//
//   query   := line (NEWLINE line)*          -- lines are implicit AND
//   line    := or
//   or      := and (OR and)*
//   and     := unary (AND unary)*
//   unary   := NOT unary | '(' or ')' | clause
//   clause  := field '=' value
//            | field '>=' number | field '<=' number
//            | field IN '[' number ',' number ']'
//
// Field names are case-insensitive; values keep their case and are quoted
// when they contain spaces. Throws SyntaxError (with position), UnknownField,
// or TypeMismatch (numeric comparator on a categorical field, and vice versa
// a non-numeric value equated to a numeric field).
SegmentQuery parse_query(const std::string& text);

// Canonical textual form; parse_query(describe(q)) reproduces q.
std::string describe(const SegmentQuery& q);

// Set semantics over the store universe. Profile predicates test the
// registration fields; visit-level predicates hold iff some visit satisfies
// them, each leaf quantified independently. Absent profile fields fail every
// comparison, so NOT includes users with the field unknown.
UserSet evaluate(const SegmentQuery& q, const UserStore& store);

}  // namespace segmod

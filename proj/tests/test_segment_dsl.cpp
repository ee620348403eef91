#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "segmod/segment_dsl.hpp"

using namespace segmod;
using segmod::testing::filter_users;
using segmod::testing::random_query;
using segmod::testing::random_store;

TEST_CASE("the figure-style query parses to an implicit AND") {
  const SegmentQuery q = parse_query("gender = female\nincome >= 100000\ncategory = style");
  REQUIRE(q.kind == SegmentQuery::Kind::and_);
  REQUIRE(q.children.size() == 3);
  CHECK(q.children[0].kind == SegmentQuery::Kind::eq);
  CHECK(q.children[0].field == Field::gender);
  CHECK(q.children[0].token == "female");
  CHECK(q.children[1].kind == SegmentQuery::Kind::ge);
  CHECK(q.children[1].field == Field::income);
  CHECK(q.children[1].value == 100000);
  CHECK(q.children[2].kind == SegmentQuery::Kind::eq);
  CHECK(q.children[2].field == Field::category);
}

TEST_CASE("interval, boolean and quoting forms") {
  const SegmentQuery range = parse_query("age in [21,30]");
  CHECK(range.kind == SegmentQuery::Kind::range);
  CHECK(range.lo == 21);
  CHECK(range.hi == 30);

  const SegmentQuery boolean = parse_query("gender = female AND (country = us OR country = de)");
  REQUIRE(boolean.kind == SegmentQuery::Kind::and_);
  CHECK(boolean.children[1].kind == SegmentQuery::Kind::or_);

  const SegmentQuery quoted = parse_query("job_title = \"staff engineer\"");
  CHECK(quoted.token == "staff engineer");

  const SegmentQuery negated = parse_query("NOT gender = female");
  CHECK(negated.kind == SegmentQuery::Kind::not_);

  const SegmentQuery numeric_eq = parse_query("hour_of_day = 13");
  CHECK(numeric_eq.kind == SegmentQuery::Kind::range);
  CHECK(numeric_eq.lo == 13);
  CHECK(numeric_eq.hi == 13);
}

TEST_CASE("parser reports errors with positions and types") {
  CHECK_THROWS_AS(parse_query("gender >= 3"), TypeMismatch);
  CHECK_THROWS_AS(parse_query("age = young"), TypeMismatch);
  CHECK_THROWS_AS(parse_query("age in [30,21]"), SyntaxError);
  CHECK_THROWS_AS(parse_query("flavor = vanilla"), UnknownField);
  CHECK_THROWS_AS(parse_query("gender ="), SyntaxError);
  CHECK_THROWS_AS(parse_query(""), SyntaxError);
  CHECK_THROWS_AS(parse_query("(gender = female"), SyntaxError);

  try {
    parse_query("gender = female\nincome >");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  // same-visit grouping is reserved
  CHECK_THROWS_AS(parse_query("visit(category = style AND day_of_week = mon)"), SyntaxError);
}

TEST_CASE("describe round-trips through the parser") {
  Rng rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const SegmentQuery q = random_query(rng, 3);
    const std::string text = describe(q);
    const SegmentQuery reparsed = parse_query(text);
    CHECK(describe(reparsed) == text);
  }
}

TEST_CASE("evaluation follows profile and visit semantics") {
  StoreBundle bundle;
  bundle.pages = std::make_unique<ContentStore>();
  bundle.users = std::make_unique<UserStore>();

  PageRecord style;
  style.url = "https://site.example.com/style/1";
  style.categories = {"Style"};
  bundle.pages->upsert_page(style);
  PageRecord sports;
  sports.url = "https://site.example.com/sports/1";
  sports.categories = {"Sports"};
  bundle.pages->upsert_page(sports);

  UserProfile rich_female{"f1", Gender::female, 35, 150000, std::nullopt};
  UserProfile poor_female{"f2", Gender::female, 35, 50000, std::nullopt};
  UserProfile rich_male{"m1", Gender::male, 35, 150000, std::nullopt};
  bundle.users->set_profile(rich_female);
  bundle.users->set_profile(poor_female);
  bundle.users->set_profile(rich_male);

  using segmod::testing::make_event;
  bundle.add_event(make_event("f1", 1704100000, "https://site.example.com/style/1"));
  bundle.add_event(make_event("f2", 1704100000, "https://site.example.com/style/1"));
  bundle.add_event(make_event("m1", 1704100000, "https://site.example.com/sports/1"));
  bundle.add_event(make_event("anon", 1704100000, "https://site.example.com/style/1"));

  const SegmentQuery figure2 = parse_query("gender = female\nincome >= 100000\ncategory = style");
  CHECK(evaluate(figure2, *bundle.users) == UserSet{0});

  // complement includes users with unknown gender
  const SegmentQuery not_female = parse_query("NOT gender = female");
  const UserSet complement = evaluate(not_female, *bundle.users);
  CHECK(complement == UserSet{2, 3});

  CHECK(evaluate(parse_query("category = cooking"), *bundle.users).empty());

  // visit-level leaves quantify independently across visits
  bundle.add_event(make_event("m1", 1704200000, "https://site.example.com/style/1"));
  const SegmentQuery both = parse_query("category = style AND category = sports");
  CHECK(evaluate(both, *bundle.users) == UserSet{2});
}

TEST_CASE("evaluate equals brute-force filtering on random stores and queries") {
  Rng rng(59);
  for (int trial = 0; trial < 60; ++trial) {
    const StoreBundle bundle = random_store(rng);
    for (int q = 0; q < 10; ++q) {
      const SegmentQuery query = random_query(rng, 4);
      CHECK(evaluate(query, *bundle.users) == filter_users(query, *bundle.users));
    }
  }
}

TEST_CASE("De Morgan and monotonicity laws hold") {
  Rng rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    const StoreBundle bundle = random_store(rng);
    const UserStore& store = *bundle.users;
    const SegmentQuery a = random_query(rng, 2);
    const SegmentQuery b = random_query(rng, 2);

    const UserSet lhs = evaluate(SegmentQuery::negate(SegmentQuery::all_of({a, b})), store);
    const UserSet rhs =
        evaluate(SegmentQuery::any_of({SegmentQuery::negate(a), SegmentQuery::negate(b)}), store);
    CHECK(lhs == rhs);

    const UserSet set_a = evaluate(a, store);
    const UserSet set_and = evaluate(SegmentQuery::all_of({a, b}), store);
    const UserSet set_or = evaluate(SegmentQuery::any_of({a, b}), store);
    CHECK(set_intersect(set_and, set_a) == set_and);  // And(a,b) contained in a
    CHECK(set_intersect(set_a, set_or) == set_a);     // a contained in Or(a,b)
  }
}

#include <random>

#include <gtest/gtest.h>

#include "clustcube/codq.hpp"
#include "clustcube/tourism_gen.hpp"
#include "codq_oracle.hpp"
#include "support.hpp"

using namespace clustcube;

TEST(Parse, SingleJoinSingleFeature) {
  auto q = parse_codq("SELECT t.age AS age:feature FROM Reservation r JOIN Tourist t ON r.tourist_id = t.id");
  EXPECT_EQ(q.fact, "Reservation");
  EXPECT_EQ(q.fact_alias, "r");
  ASSERT_EQ(q.joins.size(), 1u);
  EXPECT_EQ(q.joins[0].table, "Tourist");
  EXPECT_EQ(q.joins[0].own_side(), (ColumnRef{"t", "id"}));
  EXPECT_EQ(q.joins[0].bound_side(), (ColumnRef{"r", "tourist_id"}));
  ASSERT_EQ(q.projections.size(), 1u);
  EXPECT_EQ(q.projections[0].name, "age");
  EXPECT_EQ(q.projections[0].role, Role::kFeature);
}

TEST(Parse, MisspelledSelectFailsAtOffsetZero) {
  try {
    parse_codq("SELEC x FROM y");
    FAIL() << "expected CodqSyntaxError";
  } catch (const CodqSyntaxError& e) {
    EXPECT_EQ(e.offset(), 0u);
    EXPECT_EQ(e.expected(), std::vector<std::string>{"SELECT"});
  }
}

TEST(Parse, ThreeJoinsKeepSourceOrder) {
  auto q = parse_codq(
      "select g.city as city:coordinate, t.age as age:feature "
      "from Reservation r "
      "join Tourist t on r.tourist_id = t.id "
      "JOIN Ferry f ON f.id = r.ferry_id "
      "Join GeographicalArea g On r.geographical_area_id = g.id");
  ASSERT_EQ(q.joins.size(), 3u);
  EXPECT_EQ(q.joins[0].table, "Tourist");
  EXPECT_EQ(q.joins[1].table, "Ferry");
  EXPECT_EQ(q.joins[1].own_side(), (ColumnRef{"f", "id"}));
  EXPECT_EQ(q.joins[2].table, "GeographicalArea");
}

TEST(Parse, ErrorsCarryOffsets) {
  std::string text = "SELECT t.age AS age:weight FROM R r";
  try {
    parse_codq(text);
    FAIL();
  } catch (const CodqSyntaxError& e) {
    EXPECT_EQ(e.offset(), text.find("weight"));
    EXPECT_EQ(e.expected().size(), 4u);
  }
  EXPECT_THROW(parse_codq("SELECT t.age AS age:feature FROM R r JOIN T t ON r.x"), CodqSyntaxError);
  EXPECT_THROW(parse_codq("SELECT t.age AS age:feature FROM R r trailing"), CodqSyntaxError);
  EXPECT_THROW(parse_codq(""), CodqSyntaxError);
}

TEST(Parse, StructuralErrors) {
  // undeclared alias, alias declared twice, duplicate output name, join not touching its alias
  EXPECT_THROW(parse_codq("SELECT x.a AS a:carry FROM R r"), ReferenceError);
  EXPECT_THROW(parse_codq("SELECT r.a AS a:carry FROM R r JOIN T r ON r.x = r.y"), ReferenceError);
  EXPECT_THROW(parse_codq("SELECT r.a AS a:carry, r.b AS a:carry FROM R r"), ReferenceError);
  EXPECT_THROW(parse_codq("SELECT r.a AS a:carry FROM R r JOIN T t ON r.x = r.y"), ReferenceError);
  EXPECT_THROW(parse_codq("SELECT r.a AS a:carry FROM R r JOIN T t ON t.x = u.y"), ReferenceError);
}

TEST(Parse, PrintParseIsIdempotentOnPresets) {
  for (const auto& p : tourism::presets()) {
    CodqSpec q = parse_codq(p.codq);
    EXPECT_EQ(parse_codq(print_codq(q)), q) << p.name;
  }
}

TEST(Parse, PrintParseIsIdempotentOnRandomSpecs) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    auto inst = testing_support::random_join_instance(rng, 5, 4);
    EXPECT_EQ(parse_codq(print_codq(inst.spec)), inst.spec);
  }
}

TEST(Compose, SingletonKeepsThePart) {
  auto q = parse_codq("SELECT t.age AS age:feature FROM Reservation r JOIN Tourist t ON r.tourist_id = t.id");
  auto g = compose_global({q});
  ASSERT_EQ(g.parts.size(), 1u);
  EXPECT_EQ(g.parts[0], q);
  EXPECT_EQ(g.as_spec(), q);
}

TEST(Compose, SharedJoinEdgeIsDeduplicated) {
  auto a = parse_codq("SELECT t.age AS age:feature FROM Reservation r JOIN Tourist t ON r.tourist_id = t.id");
  auto b = parse_codq("SELECT x.generation AS gen:coordinate FROM Reservation q JOIN Tourist x ON x.id = q.tourist_id");
  auto g = compose_global({a, b});
  ASSERT_EQ(g.joins.size(), 1u);
  ASSERT_EQ(g.projections.size(), 2u);
  EXPECT_EQ(g.projections[0].name, "age");
  EXPECT_EQ(g.projections[1].name, "gen");
  EXPECT_EQ(g.projections[1].source, (ColumnRef{"t", "generation"}));
  EXPECT_EQ(g.projections[1].role, Role::kCoordinate);
}

TEST(Compose, DistinctEdgesOnTheSameAliasAreRenamed) {
  auto a = parse_codq("SELECT t.age AS age:feature FROM Reservation r JOIN Tourist t ON r.tourist_id = t.id");
  auto b = parse_codq("SELECT t.age AS age2:feature FROM Reservation r JOIN Tourist t ON r.other_id = t.id");
  auto g = compose_global({a, b});
  ASSERT_EQ(g.joins.size(), 2u);
  EXPECT_NE(g.joins[0].alias, g.joins[1].alias);
  EXPECT_EQ(g.projections[1].source.alias, g.joins[1].alias);
}

TEST(Compose, Errors) {
  auto a = parse_codq("SELECT t.age AS age:feature FROM Reservation r JOIN Tourist t ON r.tourist_id = t.id");
  auto b = parse_codq("SELECT t.age AS age:feature FROM Reservation r JOIN Tourist t ON r.tourist_id = t.id");
  auto c = parse_codq("SELECT s.x AS x:feature FROM Sale s");
  EXPECT_THROW(compose_global({a, b}), DomainError);
  EXPECT_THROW(compose_global({a, c}), DomainError);
  EXPECT_THROW(compose_global({}), DomainError);
}

TEST(ObjectSchema, TypesAndRolesFromSources) {
  auto db = testing_support::tiny_db();
  auto q = compose_global({parse_codq(
      "SELECT t.age AS age:feature, r.price AS price:feature, t.age_band AS band:coordinate "
      "FROM Reservation r JOIN Tourist t ON r.tourist_id = t.id")});
  auto s = derive_object_schema(q, db->schema);
  ASSERT_EQ(s.attributes.size(), 3u);
  EXPECT_EQ(s.attributes[0].type, ColumnType::kInteger);
  EXPECT_EQ(s.attributes[1].type, ColumnType::kReal);
  EXPECT_EQ(s.attributes[2].type, ColumnType::kText);
  EXPECT_EQ(s.attributes[2].role, Role::kCoordinate);
  EXPECT_EQ(s.attributes[0].source_table, "Tourist");
}

TEST(ObjectSchema, UnresolvedColumnIsNamed) {
  auto db = testing_support::tiny_db();
  auto q = compose_global({parse_codq("SELECT t.shoe_size AS s:feature FROM Reservation r JOIN Tourist t ON r.tourist_id = t.id")});
  try {
    derive_object_schema(q, db->schema);
    FAIL();
  } catch (const ReferenceError& e) {
    EXPECT_NE(std::string(e.what()).find("Tourist.shoe_size"), std::string::npos);
  }
  auto q2 = compose_global({parse_codq("SELECT t.x AS s:feature FROM Reservation r JOIN Nowhere t ON r.tourist_id = t.id")});
  EXPECT_THROW(derive_object_schema(q2, db->schema), ReferenceError);
}

TEST(ObjectSchema, FerryPresetCoordinatesComeFromTheFigureDimensions) {
  auto db = testing_support::tiny_db();
  auto s = derive_object_schema(compose_global({parse_codq(tourism::find_preset("FerryInformationCube")->codq)}),
                                db->schema);
  std::set<std::string> tables;
  for (std::size_t i : s.with_role(Role::kCoordinate)) tables.insert(s.attributes[i].source_table);
  for (const char* t : {"Ferry", "GeographicalArea", "Tourist", "Accommodation"}) EXPECT_TRUE(tables.count(t)) << t;
  EXPECT_FALSE(s.with_role(Role::kFeature).empty());
  EXPECT_EQ(s.with_role(Role::kTarget).size(), 1u);
}

TEST(Materialize, EmptyFactGivesNoObjects) {
  std::mt19937_64 rng(1);
  auto inst = testing_support::random_join_instance(rng, 0, 2);
  EXPECT_EQ(materialize_objects(compose_global({inst.spec}), inst.db).size(), 0u);
}

TEST(Materialize, EveryFactRowMatchingGivesOneObjectEach) {
  auto db = testing_support::tiny_db();
  auto q = compose_global({parse_codq(
      "SELECT r.id AS id:carry, t.age AS age:feature FROM Reservation r JOIN Tourist t ON r.tourist_id = t.id")});
  auto os = materialize_objects(q, *db);
  ASSERT_EQ(os.size(), db->table("Reservation").rows.size());
  for (std::size_t i = 0; i < os.size(); ++i) EXPECT_EQ(os.objects[i][0], db->table("Reservation").rows[i][0]);
}

TEST(Materialize, MatchesNestedLoopOracleOnRandomInstances) {
  std::mt19937_64 rng(20240517);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = testing_support::random_join_instance(rng, 200, 4);
    auto got = materialize_objects(compose_global({inst.spec}), inst.db);
    auto want = testing_support::nested_loop_join(inst.spec, inst.db);
    ASSERT_EQ(testing_support::render_multiset(got.objects), testing_support::render_multiset(want))
        << "trial " << trial << "\n"
        << print_codq(inst.spec);
  }
}

TEST(Materialize, UniqueKeysNeverMultiplyObjects) {
  auto db = testing_support::tiny_db();
  for (const auto& p : tourism::presets()) {
    auto os = materialize_objects(compose_global({parse_codq(p.codq)}), *db);
    EXPECT_LE(os.size(), db->table("Reservation").rows.size()) << p.name;
  }
}

#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "recloop/dataset.hpp"
#include "recloop/rng.hpp"

using namespace recloop;

namespace {

RatingDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_ratings(in);
}

GroupMapping parse_groups(const std::string& text, const ItemIndex& index) {
  std::istringstream in(text);
  return parse_item_groups(in, index);
}

}  // namespace

TEST_CASE("single record parses to a 1x1 dataset", "[dataset]") {
  RatingDataset d = parse("1::1193::5::978300760\n");
  REQUIRE(d.num_users == 1);
  REQUIRE(d.num_items == 1);
  REQUIRE(d.observations.size() == 1);
  CHECK(d.observations[0].user == 0);
  CHECK(d.observations[0].item == 0);
  CHECK(d.observations[0].rating == 5.0);
  CHECK(d.observations[0].timestamp == 978300760);
  CHECK(d.user_ids == std::vector<std::int64_t>{1});
  CHECK(d.item_ids == std::vector<std::int64_t>{1193});
}

TEST_CASE("out-of-range rating is rejected", "[dataset]") {
  CHECK_THROWS_AS(parse("1::2::9::0\n"), ParseError);
  CHECK_THROWS_AS(parse("1::2::0.5::0\n"), ParseError);
  CHECK_THROWS_AS(parse("1::2::nan::0\n"), ParseError);
}

TEST_CASE("malformed ratings lines carry the line number", "[dataset]") {
  try {
    parse("1::2::5::0\n1::3::abc::0\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("1::2::5\n"), ParseError);        // field count
  CHECK_THROWS_AS(parse("1::2::5::0::9\n"), ParseError);  // field count
  CHECK_THROWS_AS(parse("x::2::5::0\n"), ParseError);     // non-numeric id
}

TEST_CASE("duplicate (user, item) pair is rejected", "[dataset]") {
  CHECK_THROWS_AS(parse("1::2::5::0\n1::2::3::0\n"), ParseError);
}

TEST_CASE("external ids remap densely in sorted order", "[dataset]") {
  RatingDataset d = parse("9::20::3::0\n4::10::2::1\n9::10::4::2\n");
  REQUIRE(d.num_users == 2);
  REQUIRE(d.num_items == 2);
  CHECK(d.user_ids == std::vector<std::int64_t>{4, 9});
  CHECK(d.item_ids == std::vector<std::int64_t>{10, 20});
  // observation order is preserved; ids are remapped
  CHECK(d.observations[0].user == 1);
  CHECK(d.observations[0].item == 1);
  CHECK(d.observations[1].user == 0);
  CHECK(d.observations[1].item == 0);
}

TEST_CASE("ratings round-trip through serialization", "[dataset]") {
  RatingDataset d =
      parse("7::3::4.5::100\n2::3::1::5\n7::11::3::42\n2::11::5::0\n");
  std::ostringstream out;
  serialize_ratings(d, out);
  RatingDataset again = parse(out.str());
  CHECK(again == d);
}

TEST_CASE("item groups parse by field split", "[dataset]") {
  RatingDataset d = parse("1::1::5::0\n");
  GroupMapping m =
      parse_groups("1::Toy Story (1995)::Animation|Children's|Comedy\n",
                   d.item_index());
  REQUIRE(m.num_groups == 3);
  CHECK(m.groups_of(0) == std::vector<GroupId>{0, 1, 2});
  CHECK(m.group_names ==
        std::vector<std::string>{"Animation", "Children's", "Comedy"});
}

TEST_CASE("genre vocabulary deduplicates across items", "[dataset]") {
  RatingDataset d = parse("1::1::5::0\n1::2::4::0\n");
  GroupMapping m = parse_groups(
      "1::A::Comedy|Drama\n"
      "2::B::Comedy\n",
      d.item_index());
  REQUIRE(m.num_groups == 2);
  CHECK(m.groups_of(0) == std::vector<GroupId>{0, 1});
  CHECK(m.groups_of(1) == std::vector<GroupId>{0});
}

TEST_CASE("groups file errors", "[dataset]") {
  RatingDataset d = parse("1::1::5::0\n1::2::4::0\n");
  // empty genre field
  CHECK_THROWS_AS(parse_groups("1::A::\n2::B::Comedy\n", d.item_index()),
                  ParseError);
  // rated item missing from the groups file
  try {
    parse_groups("1::A::Comedy\n", d.item_index());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  // asking for groups of an unmapped item
  GroupMapping m = parse_groups("1::A::Comedy\n2::B::Drama\n",
                                d.item_index());
  CHECK_THROWS_AS(m.groups_of(99), DataError);
}

TEST_CASE("movies absent from the ratings are ignored", "[dataset]") {
  RatingDataset d = parse("1::1::5::0\n");
  GroupMapping m = parse_groups(
      "1::A::Comedy\n"
      "2::Unrated movie::Horror|Sci-Fi\n",
      d.item_index());
  // vocabulary still comes from the whole file
  CHECK(m.num_groups == 3);
  REQUIRE(m.membership.size() == 1);
  CHECK(m.groups_of(0) == std::vector<GroupId>{0});
}

TEST_CASE("seen_groups unions membership sets", "[dataset]") {
  RatingDataset d = parse("1::1::5::0\n1::2::4::0\n");
  GroupMapping m = parse_groups("1::A::G0|G1\n2::B::G1|G2\n",
                                d.item_index());
  CHECK(seen_groups(m, std::vector<ItemId>{}) == GroupSet{});
  CHECK(seen_groups(m, std::vector<ItemId>{0}) == GroupSet{0, 1});
  CHECK(seen_groups(m, std::vector<ItemId>{0, 1}) == GroupSet{0, 1, 2});
}

TEST_CASE("user rating every genre sees all 18 groups", "[dataset]") {
  // MovieLens-style fixture: 18 genres, one movie per genre, one user who
  // rated them all.
  const std::vector<std::string> genres = {
      "Action",      "Adventure", "Animation", "Children's", "Comedy",
      "Crime",       "Documentary", "Drama",   "Fantasy",    "Film-Noir",
      "Horror",      "Musical",   "Mystery",   "Romance",    "Sci-Fi",
      "Thriller",    "War",       "Western"};
  std::string ratings_text;
  std::string groups_text;
  for (std::size_t i = 0; i < genres.size(); ++i) {
    ratings_text += "1::" + std::to_string(i + 1) + "::4::0\n";
    groups_text +=
        std::to_string(i + 1) + "::Movie " + std::to_string(i + 1) +
        "::" + genres[i] + "\n";
  }
  RatingDataset d = parse(ratings_text);
  GroupMapping m = parse_groups(groups_text, d.item_index());
  REQUIRE(m.num_groups == 18);

  // independent oracle: scan the fixture text for the user's genres
  std::set<std::string> expected;
  for (std::size_t i = 0; i < genres.size(); ++i) {
    expected.insert(genres[i]);
  }
  std::vector<ItemId> rated;
  for (const auto& obs : d.observations) {
    rated.push_back(obs.item);
  }
  GroupSet seen = seen_groups(m, rated);
  std::set<std::string> got;
  for (GroupId g : seen) {
    got.insert(m.group_names[g]);
  }
  CHECK(got == expected);
  CHECK(seen.size() == 18);
}

TEST_CASE("seen_groups is monotone and distributes over unions",
          "[dataset]") {
  Rng rng(7);
  RatingDataset d;
  std::string ratings_text;
  std::string groups_text;
  for (int i = 1; i <= 30; ++i) {
    ratings_text += "1::" + std::to_string(i) + "::3::0\n";
    groups_text += std::to_string(i) + "::M::G" +
                   std::to_string(i % 7) + "|G" + std::to_string((i * 3) % 7) +
                   "\n";
  }
  d = parse(ratings_text);
  GroupMapping m = parse_groups(groups_text, d.item_index());

  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ItemId> s;
    std::vector<ItemId> t;
    for (ItemId i = 0; i < 30; ++i) {
      if (uniform_index(rng, 2)) {
        s.push_back(i);
      }
      if (uniform_index(rng, 2)) {
        t.push_back(i);
      }
    }
    GroupSet gs = seen_groups(m, s);
    GroupSet gt = seen_groups(m, t);
    std::vector<ItemId> both = s;
    both.insert(both.end(), t.begin(), t.end());
    GroupSet gboth = seen_groups(m, both);

    GroupSet unioned = gs;
    unioned.insert(gt.begin(), gt.end());
    CHECK(gboth == unioned);
    // monotone: S subset of S union T implies seen(S) subset of seen(both)
    CHECK(std::includes(gboth.begin(), gboth.end(), gs.begin(), gs.end()));
  }
}

TEST_CASE("vocabulary dump is one id-name pair per line", "[dataset]") {
  RatingDataset d = parse("1::1::5::0\n");
  GroupMapping m = parse_groups("1::A::Drama|Comedy\n", d.item_index());
  std::ostringstream out;
  m.write_vocabulary(out);
  CHECK(out.str() == "0\tDrama\n1\tComedy\n");
}

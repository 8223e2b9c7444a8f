#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "recloop/errors.hpp"
#include "recloop/text.hpp"

namespace recloop {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;
using GroupId = std::uint32_t;
using GroupSet = std::set<GroupId>;

struct RatingObservation {
  UserId user = 0;
  ItemId item = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;

  bool operator==(const RatingObservation&) const = default;
};

/// Maps external (file) ids to dense 0-based internal ids.
using ItemIndex = std::map<std::int64_t, ItemId>;

/// Sparse (user, item, rating) observations with dense 0-based ids.
///
/// External ids are remapped in ascending order, so the same input file
/// yields the same internal ids on every machine. `user_ids`/`item_ids` hold
/// the external id of each internal id.
struct RatingDataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<RatingObservation> observations;
  std::vector<std::int64_t> user_ids;
  std::vector<std::int64_t> item_ids;

  bool operator==(const RatingDataset&) const = default;

  ItemIndex item_index() const {
    ItemIndex index;
    for (ItemId i = 0; i < item_ids.size(); ++i) {
      index.emplace(item_ids[i], i);
    }
    return index;
  }
};

/// Item -> non-empty set of groups (genres). Group ids are assigned in
/// first-seen file order; `group_names` keeps the external names for
/// reporting.
struct GroupMapping {
  std::size_t num_groups = 0;
  std::vector<std::string> group_names;
  std::vector<std::vector<GroupId>> membership;  // item id -> sorted group ids

  bool operator==(const GroupMapping&) const = default;

  const std::vector<GroupId>& groups_of(ItemId item) const {
    if (item >= membership.size()) {
      throw DataError("no group mapping for item " + std::to_string(item));
    }
    return membership[item];
  }

  /// True when the item belongs to at least one group in `groups`.
  bool shares_group(ItemId item, const GroupSet& groups) const {
    for (GroupId g : groups_of(item)) {
      if (groups.count(g)) {
        return true;
      }
    }
    return false;
  }

  /// One `group_id<TAB>name` line per group.
  void write_vocabulary(std::ostream& out) const {
    for (std::size_t g = 0; g < group_names.size(); ++g) {
      out << g << '\t' << group_names[g] << '\n';
    }
  }
};

namespace detail {

struct RawRating {
  std::int64_t user;
  std::int64_t item;
  double rating;
  std::int64_t timestamp;
};

}  // namespace detail

/// Parses `UserID::MovieID::Rating::Timestamp` lines into a densely indexed
/// dataset. Blank lines are ignored; anything else malformed is an error
/// carrying the 1-based line number.
inline RatingDataset parse_ratings(std::istream& in) {
  std::vector<detail::RawRating> raw;
  std::unordered_set<std::uint64_t> seen_pairs;
  std::set<std::int64_t> users;
  std::set<std::int64_t> items;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = trim(line);
    if (text.empty()) {
      continue;
    }
    auto fields = split(text, "::");
    if (fields.size() != 4) {
      throw ParseError("expected 4 '::'-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    std::int64_t user = parse_int(fields[0], line_no);
    std::int64_t item = parse_int(fields[1], line_no);
    double rating = parse_double(fields[2], line_no);
    std::int64_t timestamp = parse_int(fields[3], line_no);
    if (user < 0 || item < 0 || user > 0x7fffffff || item > 0x7fffffff) {
      throw ParseError("id out of supported range", line_no);
    }
    if (!(rating >= 1.0 && rating <= 5.0)) {
      throw ParseError("rating " + std::string(fields[2]) +
                           " outside [1, 5]",
                       line_no);
    }
    std::uint64_t key = (static_cast<std::uint64_t>(user) << 32) |
                        static_cast<std::uint64_t>(item);
    if (!seen_pairs.insert(key).second) {
      throw ParseError("duplicate rating for user " + std::to_string(user) +
                           ", item " + std::to_string(item),
                       line_no);
    }
    raw.push_back({user, item, rating, timestamp});
    users.insert(user);
    items.insert(item);
  }

  RatingDataset dataset;
  dataset.user_ids.assign(users.begin(), users.end());
  dataset.item_ids.assign(items.begin(), items.end());
  dataset.num_users = dataset.user_ids.size();
  dataset.num_items = dataset.item_ids.size();

  std::map<std::int64_t, UserId> user_index;
  for (UserId u = 0; u < dataset.user_ids.size(); ++u) {
    user_index.emplace(dataset.user_ids[u], u);
  }
  ItemIndex item_index;
  for (ItemId i = 0; i < dataset.item_ids.size(); ++i) {
    item_index.emplace(dataset.item_ids[i], i);
  }

  dataset.observations.reserve(raw.size());
  for (const auto& r : raw) {
    dataset.observations.push_back({user_index.at(r.user),
                                    item_index.at(r.item), r.rating,
                                    r.timestamp});
  }
  return dataset;
}

/// Writes the dataset back in the `::` format with external ids, preserving
/// observation order. parse_ratings(serialize_ratings(d)) == d.
inline void serialize_ratings(const RatingDataset& dataset,
                              std::ostream& out) {
  for (const auto& obs : dataset.observations) {
    out << dataset.user_ids[obs.user] << "::" << dataset.item_ids[obs.item]
        << "::" << format_double(obs.rating) << "::" << obs.timestamp << '\n';
  }
}

/// Parses `MovieID::Title::Genre1|Genre2|...` lines. The genre vocabulary is
/// collected from the whole file (first-seen order); membership is recorded
/// for the items present in `index`. Items of the index missing from the
/// file are a hard error: every recommendable item must map to groups.
///
/// Titles are treated as opaque bytes; they never enter any computation.
inline GroupMapping parse_item_groups(std::istream& in,
                                      const ItemIndex& index) {
  GroupMapping mapping;
  mapping.membership.resize(index.size());
  std::map<std::string, GroupId, std::less<>> group_ids;
  std::vector<char> covered(index.size(), 0);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = trim(line);
    if (text.empty()) {
      continue;
    }
    std::size_t first = text.find("::");
    std::size_t last = text.rfind("::");
    if (first == std::string_view::npos || last == first) {
      throw ParseError("expected 3 '::'-separated fields", line_no);
    }
    std::int64_t external = parse_int(text.substr(0, first), line_no);
    std::string_view genres = text.substr(last + 2);
    if (genres.empty()) {
      throw ParseError("empty genre field", line_no);
    }

    std::vector<GroupId> groups;
    for (std::string_view name : split(genres, "|")) {
      if (name.empty()) {
        throw ParseError("empty genre name", line_no);
      }
      auto it = group_ids.find(name);
      if (it == group_ids.end()) {
        GroupId id = static_cast<GroupId>(mapping.group_names.size());
        it = group_ids.emplace(std::string(name), id).first;
        mapping.group_names.emplace_back(name);
      }
      groups.push_back(it->second);
    }
    std::sort(groups.begin(), groups.end());
    groups.erase(std::unique(groups.begin(), groups.end()), groups.end());

    auto item_it = index.find(external);
    if (item_it == index.end()) {
      continue;  // movie was never rated
    }
    if (covered[item_it->second]) {
      throw ParseError("duplicate entry for item " + std::to_string(external),
                       line_no);
    }
    covered[item_it->second] = 1;
    mapping.membership[item_it->second] = std::move(groups);
  }

  std::string missing;
  std::size_t missing_count = 0;
  for (const auto& [external, internal] : index) {
    if (!covered[internal]) {
      ++missing_count;
      if (missing_count <= 10) {
        missing += (missing.empty() ? "" : ", ") + std::to_string(external);
      }
    }
  }
  if (missing_count > 0) {
    throw DataError("items rated but absent from the groups file: " + missing +
                    (missing_count > 10 ? ", ..." : "") + " (" +
                    std::to_string(missing_count) + " total)");
  }

  mapping.num_groups = mapping.group_names.size();
  return mapping;
}

/// Union of the membership sets of the rated items (the seen-group set S).
template <typename ItemRange>
GroupSet seen_groups(const GroupMapping& mapping, const ItemRange& rated) {
  GroupSet seen;
  for (ItemId item : rated) {
    for (GroupId g : mapping.groups_of(item)) {
      seen.insert(g);
    }
  }
  return seen;
}

}  // namespace recloop

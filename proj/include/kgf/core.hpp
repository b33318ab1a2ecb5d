#pragma once

// Integer-indexed triple storage shared by every stage of the pipeline.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgf/error.hpp"

namespace kgf {

struct EntityId {
  std::uint32_t value = 0;
  auto operator<=>(const EntityId&) const = default;
};

struct RelationId {
  std::uint32_t value = 0;
  auto operator<=>(const RelationId&) const = default;
};

struct Triple {
  EntityId subject;
  RelationId predicate;
  EntityId object;
  auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = (static_cast<std::uint64_t>(t.subject.value) << 32) | t.object.value;
    h ^= static_cast<std::uint64_t>(t.predicate.value) * 0x9E3779B97F4A7C15ULL;
    h ^= h >> 31;
    h *= 0xBF58476D1CE4E5B9ULL;
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

/// Ordered, unique entity and relation names with reverse lookup.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds from explicit name lists; the list position becomes the index.
  static Vocabulary from_names(std::vector<std::string> entities, std::vector<std::string> relations) {
    Vocabulary v;
    for (auto& name : entities) {
      if (v.entity_index_.contains(name)) fail(ErrorKind::CorruptDataset, "duplicate entity name '" + name + "'");
      v.add_entity(name);
    }
    for (auto& name : relations) {
      if (v.relation_index_.contains(name)) fail(ErrorKind::CorruptDataset, "duplicate relation name '" + name + "'");
      v.add_relation(name);
    }
    return v;
  }

  EntityId add_entity(std::string_view name) {
    auto [it, inserted] = entity_index_.try_emplace(std::string(name), static_cast<std::uint32_t>(entities_.size()));
    if (inserted) entities_.emplace_back(name);
    return EntityId{it->second};
  }

  RelationId add_relation(std::string_view name) {
    auto [it, inserted] = relation_index_.try_emplace(std::string(name), static_cast<std::uint32_t>(relations_.size()));
    if (inserted) relations_.emplace_back(name);
    return RelationId{it->second};
  }

  std::optional<EntityId> find_entity(const std::string& name) const {
    auto it = entity_index_.find(name);
    if (it == entity_index_.end()) return std::nullopt;
    return EntityId{it->second};
  }

  std::optional<RelationId> find_relation(const std::string& name) const {
    auto it = relation_index_.find(name);
    if (it == relation_index_.end()) return std::nullopt;
    return RelationId{it->second};
  }

  const std::string& entity_name(EntityId id) const {
    if (id.value >= entities_.size()) fail(ErrorKind::IdOutOfRange, "entity " + std::to_string(id.value));
    return entities_[id.value];
  }

  const std::string& relation_name(RelationId id) const {
    if (id.value >= relations_.size()) fail(ErrorKind::IdOutOfRange, "relation " + std::to_string(id.value));
    return relations_[id.value];
  }

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  const std::vector<std::string>& entity_names() const { return entities_; }
  const std::vector<std::string>& relation_names() const { return relations_; }

  bool operator==(const Vocabulary& other) const {
    return entities_ == other.entities_ && relations_ == other.relations_;
  }

 private:
  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, std::uint32_t> entity_index_;
  std::unordered_map<std::string, std::uint32_t> relation_index_;
};

struct NamedTriple {
  std::string subject;
  std::string predicate;
  std::string object;
};

struct VocabularyBuild {
  Vocabulary vocabulary;
  std::vector<Triple> triples;
  std::size_t duplicates_removed = 0;
};

/// Indexes entities and relations in first-appearance order (subject, then
/// object, row by row) and drops repeated rows, keeping first occurrences.
inline VocabularyBuild build_vocabulary(std::span<const NamedTriple> rows) {
  if (rows.empty()) fail(ErrorKind::EmptyGraph, "no triples supplied");
  VocabularyBuild out;
  std::unordered_set<Triple, TripleHash> seen;
  seen.reserve(rows.size());
  out.triples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.subject.empty() || row.predicate.empty() || row.object.empty()) {
      fail(ErrorKind::MalformedTriple, "row " + std::to_string(i) + " has an empty name field");
    }
    const EntityId s = out.vocabulary.add_entity(row.subject);
    const EntityId o = out.vocabulary.add_entity(row.object);
    const RelationId p = out.vocabulary.add_relation(row.predicate);
    const Triple t{s, p, o};
    if (seen.insert(t).second) {
      out.triples.push_back(t);
    } else {
      ++out.duplicates_removed;
    }
  }
  return out;
}

/// Immutable, deduplicated triple set with (s,p)->objects and (p,o)->subjects
/// completion indexes.
class TripleStore {
 public:
  TripleStore() = default;

  TripleStore(std::size_t entity_count, std::size_t relation_count, std::vector<Triple> triples)
      : entity_count_(entity_count), relation_count_(relation_count) {
    std::unordered_set<Triple, TripleHash> seen;
    seen.reserve(triples.size());
    triples_.reserve(triples.size());
    for (const auto& t : triples) {
      check(t);
      if (seen.insert(t).second) {
        triples_.push_back(t);
      } else {
        ++duplicates_removed_;
      }
    }
    by_predicate_.assign(relation_count_, {});
    for (std::uint32_t i = 0; i < triples_.size(); ++i) {
      const auto& t = triples_[i];
      by_sp_[key(t.subject.value, t.predicate.value)].push_back(t.object);
      by_po_[key(t.object.value, t.predicate.value)].push_back(t.subject);
      by_predicate_[t.predicate.value].push_back(i);
    }
    for (auto& [k, list] : by_sp_) std::sort(list.begin(), list.end());
    for (auto& [k, list] : by_po_) std::sort(list.begin(), list.end());
  }

  std::span<const Triple> triples() const { return triples_; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }
  std::size_t entity_count() const { return entity_count_; }
  std::size_t relation_count() const { return relation_count_; }
  std::size_t duplicates_removed() const { return duplicates_removed_; }

  bool exists(const Triple& t) const {
    check(t);
    auto objects = completions(by_sp_, t.subject.value, t.predicate.value);
    return std::binary_search(objects.begin(), objects.end(), t.object);
  }

  /// Sorted objects o with (s,p,o) stored.
  std::span<const EntityId> objects_of(EntityId s, RelationId p) const {
    check_entity(s);
    check_relation(p);
    return completions(by_sp_, s.value, p.value);
  }

  /// Sorted subjects s with (s,p,o) stored.
  std::span<const EntityId> subjects_of(RelationId p, EntityId o) const {
    check_entity(o);
    check_relation(p);
    return completions(by_po_, o.value, p.value);
  }

  std::size_t count_of(RelationId p) const {
    check_relation(p);
    return by_predicate_[p.value].size();
  }

  /// Positions into triples() of every triple with predicate p, in storage order.
  std::span<const std::uint32_t> positions_of(RelationId p) const {
    check_relation(p);
    return by_predicate_[p.value];
  }

  std::size_t subject_predicate_keys() const { return by_sp_.size(); }
  std::size_t predicate_object_keys() const { return by_po_.size(); }

 private:
  static std::uint64_t key(std::uint32_t entity, std::uint32_t relation) {
    return (static_cast<std::uint64_t>(entity) << 32) | relation;
  }

  using CompletionIndex = std::unordered_map<std::uint64_t, std::vector<EntityId>>;

  static std::span<const EntityId> completions(const CompletionIndex& index, std::uint32_t entity, std::uint32_t relation) {
    auto it = index.find(key(entity, relation));
    if (it == index.end()) return {};
    return it->second;
  }

  void check_entity(EntityId e) const {
    if (e.value >= entity_count_) {
      fail(ErrorKind::IdOutOfRange, "entity " + std::to_string(e.value) + " >= " + std::to_string(entity_count_));
    }
  }
  void check_relation(RelationId r) const {
    if (r.value >= relation_count_) {
      fail(ErrorKind::IdOutOfRange, "relation " + std::to_string(r.value) + " >= " + std::to_string(relation_count_));
    }
  }
  void check(const Triple& t) const {
    check_entity(t.subject);
    check_relation(t.predicate);
    check_entity(t.object);
  }

  std::size_t entity_count_ = 0;
  std::size_t relation_count_ = 0;
  std::size_t duplicates_removed_ = 0;
  std::vector<Triple> triples_;
  CompletionIndex by_sp_;
  CompletionIndex by_po_;
  std::vector<std::vector<std::uint32_t>> by_predicate_;
};

struct ValidationReport {
  std::size_t train_valid_overlap = 0;
  std::size_t train_holdout_overlap = 0;
  std::size_t valid_holdout_overlap = 0;
  std::size_t out_of_range = 0;

  /// The holdout protocol is broken if any held-out fact is also trained on.
  bool blocking() const { return train_holdout_overlap > 0 || out_of_range > 0; }
};

inline ValidationReport validate_splits(const TripleStore& train, const TripleStore& valid, const TripleStore& holdout) {
  ValidationReport report;
  const auto in_range = [&](const Triple& t) {
    return t.subject.value < train.entity_count() && t.object.value < train.entity_count() &&
           t.predicate.value < train.relation_count();
  };
  const auto overlap = [&](const TripleStore& a, const TripleStore& b) {
    std::size_t n = 0;
    for (const auto& t : b.triples()) {
      if (!in_range(t) || t.subject.value >= a.entity_count() || t.object.value >= a.entity_count() ||
          t.predicate.value >= a.relation_count()) {
        continue;
      }
      if (a.exists(t)) ++n;
    }
    return n;
  };
  for (const TripleStore* store : {&valid, &holdout}) {
    for (const auto& t : store->triples()) {
      if (!in_range(t)) ++report.out_of_range;
    }
  }
  report.train_valid_overlap = overlap(train, valid);
  report.train_holdout_overlap = overlap(train, holdout);
  report.valid_holdout_overlap = overlap(valid, holdout);
  return report;
}

}  // namespace kgf

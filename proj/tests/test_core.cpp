#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "kgf/core.hpp"
#include "kgf/rng.hpp"
#include "kgf/text.hpp"

namespace kgf {
namespace {

Triple T(std::uint32_t s, std::uint32_t p, std::uint32_t o) { return {EntityId{s}, RelationId{p}, EntityId{o}}; }

std::vector<std::uint32_t> values(std::span<const EntityId> ids) {
  std::vector<std::uint32_t> out;
  for (auto e : ids) out.push_back(e.value);
  return out;
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::Io;
}

TEST(BuildVocabulary, SingleEdge) {
  const std::vector<NamedTriple> rows{{"a", "r", "b"}};
  const auto built = build_vocabulary(rows);
  EXPECT_EQ(built.vocabulary.entity_names(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(built.vocabulary.relation_names(), (std::vector<std::string>{"r"}));
  ASSERT_EQ(built.triples.size(), 1u);
  EXPECT_EQ(built.triples[0], T(0, 0, 1));
}

TEST(BuildVocabulary, DuplicateRowsCollapse) {
  const std::vector<NamedTriple> rows{{"a", "r", "b"}, {"a", "r", "b"}};
  const auto built = build_vocabulary(rows);
  EXPECT_EQ(built.triples.size(), 1u);
  EXPECT_EQ(built.duplicates_removed, 1u);
}

TEST(BuildVocabulary, FirstAppearanceOrder) {
  const std::vector<NamedTriple> rows{{"a", "r", "b"}, {"b", "s", "a"}, {"a", "s", "a"}};
  const auto built = build_vocabulary(rows);
  EXPECT_EQ(built.vocabulary.entity_names(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(built.vocabulary.relation_names(), (std::vector<std::string>{"r", "s"}));
  EXPECT_EQ(built.triples, (std::vector<Triple>{T(0, 0, 1), T(1, 1, 0), T(0, 1, 0)}));
}

TEST(BuildVocabulary, SubjectBeforeObjectWithinRow) {
  const std::vector<NamedTriple> rows{{"x", "r", "y"}, {"z", "r", "w"}};
  EXPECT_EQ(build_vocabulary(rows).vocabulary.entity_names(), (std::vector<std::string>{"x", "y", "z", "w"}));
}

TEST(BuildVocabulary, Errors) {
  EXPECT_EQ(kind_of([] { build_vocabulary({}); }), ErrorKind::EmptyGraph);
  const std::vector<NamedTriple> rows{{"a", "r", "b"}, {"a", "", "b"}};
  EXPECT_EQ(kind_of([&] { build_vocabulary(rows); }), ErrorKind::MalformedTriple);
}

TEST(BuildVocabulary, Deterministic) {
  Rng rng(5);
  std::vector<NamedTriple> rows;
  for (int i = 0; i < 200; ++i) {
    rows.push_back({"e" + std::to_string(rng.index(30)), "r" + std::to_string(rng.index(4)),
                    "e" + std::to_string(rng.index(30))});
  }
  const auto a = build_vocabulary(rows);
  const auto b = build_vocabulary(rows);
  EXPECT_EQ(a.vocabulary, b.vocabulary);
  EXPECT_EQ(a.triples, b.triples);
}

TEST(Vocabulary, RoundTripAndLookup) {
  auto v = Vocabulary::from_names({"a", "b", "c"}, {"r"});
  for (std::uint32_t i = 0; i < 3; ++i) {
    EXPECT_EQ(v.find_entity(v.entity_name(EntityId{i}))->value, i);
  }
  EXPECT_FALSE(v.find_entity("zz"));
  EXPECT_EQ(v.add_entity("b").value, 1u);
  EXPECT_EQ(v.add_entity("d").value, 3u);
  EXPECT_EQ(kind_of([&] { v.entity_name(EntityId{9}); }), ErrorKind::IdOutOfRange);
  EXPECT_EQ(kind_of([&] { v.relation_name(RelationId{1}); }), ErrorKind::IdOutOfRange);
  EXPECT_EQ(kind_of([] { Vocabulary::from_names({"a", "a"}, {}); }), ErrorKind::CorruptDataset);
}

TEST(TripleStore, Lookups) {
  const TripleStore one(3, 1, {T(0, 0, 1)});
  EXPECT_TRUE(one.exists(T(0, 0, 1)));
  EXPECT_FALSE(one.exists(T(1, 0, 0)));
  EXPECT_EQ(values(one.objects_of(EntityId{0}, RelationId{0})), (std::vector<std::uint32_t>{1}));
  EXPECT_TRUE(one.objects_of(EntityId{1}, RelationId{0}).empty());

  const TripleStore three(3, 1, {T(0, 0, 1), T(0, 0, 2), T(0, 0, 0)});
  EXPECT_EQ(values(three.objects_of(EntityId{0}, RelationId{0})), (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(values(three.subjects_of(RelationId{0}, EntityId{2})), (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(three.count_of(RelationId{0}), 3u);
}

TEST(TripleStore, RangeChecks) {
  EXPECT_EQ(kind_of([] { TripleStore(2, 1, {T(0, 0, 2)}); }), ErrorKind::IdOutOfRange);
  const TripleStore s(2, 1, {T(0, 0, 1)});
  EXPECT_EQ(kind_of([&] { s.exists(T(0, 1, 1)); }), ErrorKind::IdOutOfRange);
  EXPECT_EQ(kind_of([&] { s.objects_of(EntityId{2}, RelationId{0}); }), ErrorKind::IdOutOfRange);
  EXPECT_EQ(kind_of([&] { s.subjects_of(RelationId{0}, EntityId{5}); }), ErrorKind::IdOutOfRange);
}

TEST(TripleStore, DeduplicatesAndCounts) {
  const TripleStore s(3, 2, {T(0, 0, 1), T(0, 0, 1), T(1, 1, 2)});
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.duplicates_removed(), 1u);
}

TEST(TripleStoreProperty, BruteForceAgreement) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::uint32_t n = 3 + static_cast<std::uint32_t>(rng.index(12));
    const std::uint32_t m = 1 + static_cast<std::uint32_t>(rng.index(4));
    std::vector<Triple> raw;
    const std::size_t count = rng.index(300);
    for (std::size_t i = 0; i < count; ++i) {
      raw.push_back(T(static_cast<std::uint32_t>(rng.index(n)), static_cast<std::uint32_t>(rng.index(m)),
                      static_cast<std::uint32_t>(rng.index(n))));
    }
    const std::set<Triple> truth(raw.begin(), raw.end());
    const TripleStore store(n, m, raw);
    ASSERT_EQ(store.size(), truth.size());
    std::size_t by_sp = 0, by_po = 0, by_p = 0;
    for (std::uint32_t s = 0; s < n; ++s) {
      for (std::uint32_t p = 0; p < m; ++p) {
        std::vector<std::uint32_t> objects, subjects;
        for (std::uint32_t o = 0; o < n; ++o) {
          ASSERT_EQ(store.exists(T(s, p, o)), truth.contains(T(s, p, o)));
          if (truth.contains(T(s, p, o))) objects.push_back(o);
          if (truth.contains(T(o, p, s))) subjects.push_back(o);
        }
        EXPECT_EQ(values(store.objects_of(EntityId{s}, RelationId{p})), objects);
        EXPECT_EQ(values(store.subjects_of(RelationId{p}, EntityId{s})), subjects);
        by_sp += objects.size();
        by_po += subjects.size();
      }
    }
    for (std::uint32_t p = 0; p < m; ++p) by_p += store.count_of(RelationId{p});
    EXPECT_EQ(by_sp, store.size());
    EXPECT_EQ(by_po, store.size());
    EXPECT_EQ(by_p, store.size());
  }
}

TEST(ValidateSplits, Overlaps) {
  const TripleStore train(3, 1, {T(0, 0, 1), T(1, 0, 2)});
  const TripleStore holdout(3, 1, {T(1, 0, 2)});
  const TripleStore none(3, 1, {});
  auto r = validate_splits(train, none, holdout);
  EXPECT_EQ(r.train_holdout_overlap, 1u);
  EXPECT_TRUE(r.blocking());

  const TripleStore disjoint(3, 1, {T(2, 0, 0)});
  r = validate_splits(train, none, disjoint);
  EXPECT_EQ(r.train_valid_overlap + r.train_holdout_overlap + r.valid_holdout_overlap, 0u);
  EXPECT_FALSE(r.blocking());

  r = validate_splits(train, none, train);
  EXPECT_EQ(r.train_holdout_overlap, train.size());
}

TEST(ValidateSplits, OutOfRangeIsBlocking) {
  const TripleStore train(2, 1, {T(0, 0, 1)});
  const TripleStore wide(4, 1, {T(3, 0, 0)});
  const auto r = validate_splits(train, TripleStore(2, 1, {}), wide);
  EXPECT_EQ(r.out_of_range, 1u);
  EXPECT_TRUE(r.blocking());
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
  Rng c(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = c.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(c.index(7), 7u);
  }
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(0, 1), mix_seed(1, 0));
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(3);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(std::span(w));
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Rng, NormalMoments) {
  Rng rng(9);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(Text, CsvAndNumbers) {
  EXPECT_EQ(text::split_csv(R"(a,"b,c","d""e",)"), (std::vector<std::string>{"a", "b,c", "d\"e", ""}));
  EXPECT_EQ(text::parse_int<int>("12"), 12);
  EXPECT_FALSE(text::parse_int<int>("12x"));
  EXPECT_FALSE(text::parse_int<int>(""));
  EXPECT_FALSE(text::parse_double("1.5e"));
  for (double v : {0.011, 1.0 / 3.0, 1e-300, -2.5}) EXPECT_EQ(*text::parse_double(text::exact(v)), v);
  EXPECT_EQ(text::exact(0.011), "0.011");
  EXPECT_EQ(text::fixed6(0.5), "0.500000");
  EXPECT_EQ(text::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Text, AtomicWrite) {
  const auto dir = std::filesystem::temp_directory_path() / "kgf_text_test";
  std::filesystem::create_directories(dir);
  text::write_file_atomic(dir / "f.txt", "hello\n");
  EXPECT_EQ(text::read_file(dir / "f.txt"), "hello\n");
  EXPECT_FALSE(std::filesystem::exists(dir / "f.txt.tmp"));
  EXPECT_EQ(kind_of([&] { text::read_file(dir / "missing"); }), ErrorKind::FileNotFound);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace kgf

#pragma once

// Source-table parsing, graph-variant construction, holdout splitting,
// monopharmacy feature reduction and the dataset directory format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Eigenvalues>

#include "kgf/core.hpp"
#include "kgf/error.hpp"
#include "kgf/matrix.hpp"
#include "kgf/rng.hpp"
#include "kgf/text.hpp"

namespace kgf {

struct ComboRecord {
  std::string drug_a, drug_b, side_effect_id, side_effect_name;
};
struct MonoRecord {
  std::string drug, side_effect_id, side_effect_name;
};
struct TargetRecord {
  std::string drug, gene;
};
struct PpiRecord {
  std::string gene_a, gene_b;
};

struct RowError {
  std::string file;
  std::size_t row = 0;  // 1-based line number; the header is line 1
  std::string message;
};

struct RawRecords {
  std::vector<ComboRecord> combo;
  std::vector<MonoRecord> mono;
  std::vector<TargetRecord> targets;
  std::vector<PpiRecord> ppi;
  std::vector<RowError> errors;
};

struct SourcePaths {
  std::filesystem::path combo, mono, targets, ppi;
};

namespace detail {

template <typename Record, typename Make>
void parse_table(const std::filesystem::path& path, std::size_t arity, Make make, std::vector<Record>& out,
                 std::vector<RowError>& errors) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::FileNotFound, path.string());
  const auto lines = text::read_lines(path);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    auto fields = text::split_csv(lines[i]);
    if (fields.size() != arity) {
      errors.push_back({path.string(), i + 1,
                        "expected " + std::to_string(arity) + " columns, found " + std::to_string(fields.size())});
      continue;
    }
    bool empty_id = false;
    for (auto& f : fields) {
      f = std::string(text::trim(f));
    }
    // The trailing name column of combo/mono tables is descriptive and may be blank.
    const std::size_t id_columns = arity > 2 ? arity - 1 : arity;
    for (std::size_t c = 0; c < id_columns; ++c) empty_id |= fields[c].empty();
    if (empty_id) {
      errors.push_back({path.string(), i + 1, "empty identifier"});
      continue;
    }
    out.push_back(make(std::move(fields)));
  }
}

}  // namespace detail

/// Reads the four comma-separated source tables (one header row each).
/// With `strict`, any malformed row raises MalformedRow listing every bad row;
/// otherwise bad rows are skipped and reported in RawRecords::errors.
inline RawRecords parse_source_tables(const SourcePaths& paths, bool strict = true) {
  RawRecords records;
  detail::parse_table(
      paths.combo, 4,
      [](std::vector<std::string> f) {
        return ComboRecord{std::move(f[0]), std::move(f[1]), std::move(f[2]), std::move(f[3])};
      },
      records.combo, records.errors);
  detail::parse_table(
      paths.mono, 3,
      [](std::vector<std::string> f) { return MonoRecord{std::move(f[0]), std::move(f[1]), std::move(f[2])}; },
      records.mono, records.errors);
  detail::parse_table(
      paths.targets, 2, [](std::vector<std::string> f) { return TargetRecord{std::move(f[0]), std::move(f[1])}; },
      records.targets, records.errors);
  detail::parse_table(
      paths.ppi, 2, [](std::vector<std::string> f) { return PpiRecord{std::move(f[0]), std::move(f[1])}; },
      records.ppi, records.errors);
  if (strict && !records.errors.empty()) {
    std::string message;
    for (const auto& e : records.errors) {
      if (!message.empty()) message += "; ";
      message += e.file + ":" + std::to_string(e.row) + " " + e.message;
    }
    fail(ErrorKind::MalformedRow, message);
  }
  return records;
}

enum class GraphVariant { Selfloops, NonNaive };

inline const char* to_string(GraphVariant v) { return v == GraphVariant::Selfloops ? "selfloops" : "nonnaive"; }

/// Binary drug x mono-side-effect incidence, stored sparsely.
struct FeatureMatrix {
  std::vector<EntityId> rows;                      // drug entities, ascending
  std::vector<std::string> column_names;           // empty after import
  std::size_t column_count = 0;
  std::vector<std::vector<std::uint32_t>> hot;     // per row, sorted column indices

  std::size_t hot_cells() const {
    std::size_t n = 0;
    for (const auto& h : hot) n += h.size();
    return n;
  }

  Matrix<double> dense() const {
    Matrix<double> out(rows.size(), column_count);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (auto c : hot[r]) out(r, c) = 1.0;
    }
    return out;
  }
};

using Ledger = std::map<std::string, std::int64_t>;

struct DatasetBundle {
  Vocabulary vocabulary;
  TripleStore train;
  TripleStore valid;
  TripleStore holdout;
  std::vector<RelationId> pse_relations;  // ascending
  std::optional<FeatureMatrix> features;
  Ledger ledger;
};

namespace relation_names {
inline constexpr const char* kTarget = "target";
inline constexpr const char* kPpi = "ppi";
inline std::string pse(const std::string& id) { return "pse:" + id; }
inline std::string mono(const std::string& id) { return "mono:" + id; }
}  // namespace relation_names

/// Builds one graph variant. Drug pairs are stored once with the
/// lexicographically smaller drug as subject; PPI is stored in both
/// directions; side effects with fewer than `min_pse_count` pairs are dropped.
/// Polypharmacy relations and their drugs come first in the index order, so
/// both variants assign them identical ids.
inline DatasetBundle build_graph(const RawRecords& records, GraphVariant variant, std::size_t min_pse_count) {
  Ledger ledger;
  ledger["raw_combo_rows"] = static_cast<std::int64_t>(records.combo.size());
  ledger["raw_mono_rows"] = static_cast<std::int64_t>(records.mono.size());
  ledger["raw_target_rows"] = static_cast<std::int64_t>(records.targets.size());
  ledger["raw_ppi_rows"] = static_cast<std::int64_t>(records.ppi.size());
  ledger["min_pse_count"] = static_cast<std::int64_t>(min_pse_count);

  // Polypharmacy pairs per side effect, first-appearance order throughout.
  std::vector<std::string> se_order;
  std::unordered_map<std::string, std::size_t> se_slot;
  std::vector<std::vector<std::pair<std::string, std::string>>> se_pairs;
  std::vector<std::set<std::pair<std::string, std::string>>> se_seen;
  std::int64_t combo_duplicates = 0;
  std::int64_t combo_self_pairs = 0;
  for (const auto& rec : records.combo) {
    if (rec.drug_a == rec.drug_b) {
      ++combo_self_pairs;
      continue;
    }
    auto [it, inserted] = se_slot.try_emplace(rec.side_effect_id, se_order.size());
    if (inserted) {
      se_order.push_back(rec.side_effect_id);
      se_pairs.emplace_back();
      se_seen.emplace_back();
    }
    auto pair = rec.drug_a < rec.drug_b ? std::pair{rec.drug_a, rec.drug_b} : std::pair{rec.drug_b, rec.drug_a};
    if (se_seen[it->second].insert(pair).second) {
      se_pairs[it->second].push_back(std::move(pair));
    } else {
      ++combo_duplicates;
    }
  }
  ledger["combo_self_pairs_skipped"] = combo_self_pairs;
  ledger["combo_duplicates_removed"] = combo_duplicates;

  // Interleave kept side effects in combo-row order so entity numbering
  // follows the source table rather than the grouping.
  std::vector<bool> kept(se_order.size());
  std::int64_t kept_count = 0;
  for (std::size_t i = 0; i < se_order.size(); ++i) {
    kept[i] = se_pairs[i].size() >= min_pse_count;
    kept_count += kept[i];
  }
  ledger["pse_relations_kept"] = kept_count;
  ledger["pse_relations_dropped"] = static_cast<std::int64_t>(se_order.size()) - kept_count;

  std::vector<NamedTriple> rows;
  std::int64_t pse_edges = 0;
  {
    std::vector<std::set<std::pair<std::string, std::string>>> emitted(se_order.size());
    for (const auto& rec : records.combo) {
      if (rec.drug_a == rec.drug_b) continue;
      const std::size_t slot = se_slot.at(rec.side_effect_id);
      if (!kept[slot]) continue;
      auto pair = rec.drug_a < rec.drug_b ? std::pair{rec.drug_a, rec.drug_b} : std::pair{rec.drug_b, rec.drug_a};
      if (!emitted[slot].insert(pair).second) continue;
      rows.push_back({pair.first, relation_names::pse(rec.side_effect_id), pair.second});
      ++pse_edges;
    }
  }
  ledger["pse_edges"] = pse_edges;

  std::unordered_set<std::string> drugs;
  std::unordered_set<std::string> genes;
  for (const auto& r : rows) {
    drugs.insert(r.subject);
    drugs.insert(r.object);
  }

  for (const auto& rec : records.targets) {
    rows.push_back({rec.drug, relation_names::kTarget, rec.gene});
    drugs.insert(rec.drug);
    genes.insert(rec.gene);
  }
  for (const auto& rec : records.ppi) {
    rows.push_back({rec.gene_a, relation_names::kPpi, rec.gene_b});
    if (rec.gene_a != rec.gene_b) rows.push_back({rec.gene_b, relation_names::kPpi, rec.gene_a});
    genes.insert(rec.gene_a);
    genes.insert(rec.gene_b);
  }

  std::optional<FeatureMatrix> features;
  std::vector<std::pair<std::string, std::string>> mono_cells;  // (drug, se) for NonNaive
  std::int64_t orphans = 0;
  if (variant == GraphVariant::Selfloops) {
    for (const auto& rec : records.mono) {
      rows.push_back({rec.drug, relation_names::mono(rec.side_effect_id), rec.drug});
      drugs.insert(rec.drug);
    }
  } else {
    std::unordered_set<std::string> orphan_names;
    for (const auto& rec : records.mono) {
      if (!drugs.contains(rec.drug)) {
        orphan_names.insert(rec.drug);
        continue;
      }
      mono_cells.emplace_back(rec.drug, rec.side_effect_id);
    }
    orphans = static_cast<std::int64_t>(orphan_names.size());
  }
  ledger["feature_only_orphan_drugs"] = orphans;

  if (rows.empty()) fail(ErrorKind::EmptyGraph, "no edges after filtering");
  auto built = build_vocabulary(rows);
  const auto& vocab = built.vocabulary;

  // Edge counts per meta-edge after deduplication.
  std::int64_t target_edges = 0, ppi_edges = 0, mono_edges = 0;
  for (const auto& t : built.triples) {
    const auto& name = vocab.relation_name(t.predicate);
    if (name == relation_names::kTarget) {
      ++target_edges;
    } else if (name == relation_names::kPpi) {
      ++ppi_edges;
    } else if (name.starts_with("mono:")) {
      ++mono_edges;
    }
  }

  std::vector<RelationId> pse;
  std::int64_t mono_relations = 0;
  for (std::uint32_t r = 0; r < vocab.relation_count(); ++r) {
    const auto& name = vocab.relation_name(RelationId{r});
    if (name.starts_with("pse:")) pse.push_back(RelationId{r});
    if (name.starts_with("mono:")) ++mono_relations;
  }

  if (variant == GraphVariant::NonNaive) {
    FeatureMatrix fm;
    std::unordered_map<std::string, std::uint32_t> column_of;
    for (const auto& [drug, se] : mono_cells) {
      if (column_of.try_emplace(se, static_cast<std::uint32_t>(fm.column_names.size())).second) {
        fm.column_names.push_back(se);
      }
    }
    fm.column_count = fm.column_names.size();
    std::vector<std::uint32_t> drug_ids;
    for (const auto& name : drugs) drug_ids.push_back(vocab.find_entity(name)->value);
    std::sort(drug_ids.begin(), drug_ids.end());
    std::unordered_map<std::uint32_t, std::size_t> row_of;
    for (auto id : drug_ids) {
      row_of[id] = fm.rows.size();
      fm.rows.push_back(EntityId{id});
    }
    fm.hot.assign(fm.rows.size(), {});
    for (const auto& [drug, se] : mono_cells) {
      fm.hot[row_of.at(vocab.find_entity(drug)->value)].push_back(column_of.at(se));
    }
    for (auto& h : fm.hot) {
      std::sort(h.begin(), h.end());
      h.erase(std::unique(h.begin(), h.end()), h.end());
    }
    ledger["mono_feature_columns"] = static_cast<std::int64_t>(fm.column_count);
    ledger["mono_feature_cells"] = static_cast<std::int64_t>(fm.hot_cells());
    features = std::move(fm);
  }

  ledger["target_edges"] = target_edges;
  ledger["ppi_edges"] = ppi_edges;
  ledger["mono_selfloop_edges"] = mono_edges;
  ledger["mono_relations"] = mono_relations;
  ledger["duplicates_removed"] = combo_duplicates + static_cast<std::int64_t>(built.duplicates_removed);
  ledger["drugs"] = static_cast<std::int64_t>(drugs.size());
  ledger["genes"] = static_cast<std::int64_t>(genes.size());
  ledger["entities"] = static_cast<std::int64_t>(vocab.entity_count());
  ledger["relations"] = static_cast<std::int64_t>(vocab.relation_count());
  ledger["triples"] = static_cast<std::int64_t>(built.triples.size());

  DatasetBundle bundle;
  const auto n = vocab.entity_count();
  const auto m = vocab.relation_count();
  bundle.train = TripleStore(n, m, std::move(built.triples));
  bundle.valid = TripleStore(n, m, {});
  bundle.holdout = TripleStore(n, m, {});
  bundle.vocabulary = std::move(built.vocabulary);
  bundle.pse_relations = std::move(pse);
  bundle.features = std::move(features);
  bundle.ledger = std::move(ledger);
  return bundle;
}

namespace detail {

// Moves round(n * fraction) seeded-uniform polypharmacy edges per relation
// from `bundle.train` into `target`. Returns the number of relations kept whole.
inline std::int64_t carve_split(DatasetBundle& bundle, double fraction, std::uint64_t seed, std::uint64_t stream,
                                TripleStore& target, const char* label) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    fail(ErrorKind::InvalidConfig, std::string(label) + " fraction must lie in (0, 1)");
  }
  if (!target.empty()) fail(ErrorKind::InvalidConfig, std::string(label) + " split already populated");
  const auto train = bundle.train.triples();
  std::vector<bool> moved(train.size(), false);
  std::int64_t kept_whole = 0;
  std::int64_t moved_count = 0;
  for (const RelationId r : bundle.pse_relations) {
    const auto positions = bundle.train.positions_of(r);
    const std::size_t n = positions.size();
    const auto k = static_cast<std::size_t>(std::nearbyint(static_cast<double>(n) * fraction));
    if (k == 0) {
      ++kept_whole;
      continue;
    }
    std::vector<std::uint32_t> pool(positions.begin(), positions.end());
    Rng rng(mix_seed(mix_seed(seed, stream), r.value));
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(pool[i], pool[i + rng.index(n - i)]);
      moved[pool[i]] = true;
    }
    moved_count += static_cast<std::int64_t>(k);
  }
  std::vector<Triple> remaining, selected;
  remaining.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) (moved[i] ? selected : remaining).push_back(train[i]);
  const auto n = bundle.vocabulary.entity_count();
  const auto m = bundle.vocabulary.relation_count();
  bundle.train = TripleStore(n, m, std::move(remaining));
  target = TripleStore(n, m, std::move(selected));
  bundle.ledger[std::string(label) + "_edges"] = moved_count;
  bundle.ledger[std::string(label) + "_relations_kept_whole"] = kept_whole;
  return kept_whole;
}

}  // namespace detail

/// Holds out round(n * fraction) edges of every polypharmacy relation
/// (round half to even). Relations where that rounds to zero stay whole and
/// are counted in the ledger.
inline DatasetBundle holdout_split(DatasetBundle bundle, double fraction, std::uint64_t seed) {
  detail::carve_split(bundle, fraction, seed, 0, bundle.holdout, "holdout");
  return bundle;
}

/// Same protocol on what remains in train, populating the validation split.
inline DatasetBundle validation_split(DatasetBundle bundle, double fraction, std::uint64_t seed) {
  detail::carve_split(bundle, fraction, seed, 1, bundle.valid, "valid");
  return bundle;
}

/// Entities that take part in any polypharmacy edge, across all splits.
inline std::vector<EntityId> drug_entities(const DatasetBundle& bundle) {
  std::vector<bool> flag(bundle.vocabulary.entity_count(), false);
  for (const TripleStore* store : {&bundle.train, &bundle.valid, &bundle.holdout}) {
    for (const RelationId r : bundle.pse_relations) {
      for (auto pos : store->positions_of(r)) {
        const auto& t = store->triples()[pos];
        flag[t.subject.value] = true;
        flag[t.object.value] = true;
      }
    }
  }
  std::vector<EntityId> out;
  for (std::uint32_t i = 0; i < flag.size(); ++i) {
    if (flag[i]) out.push_back(EntityId{i});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature reduction

struct ReduceOptions {
  bool center = true;
  /// Element-wise standard deviation of the output; nullopt leaves the raw
  /// projections untouched.
  std::optional<double> target_std;
};

struct ReducedFeatures {
  std::vector<EntityId> rows;
  Matrix<double> values;                // rows x d
  Matrix<double> directions;            // d x columns, unit right singular vectors
  std::vector<double> singular_values;
  std::size_t zero_filled = 0;
};

/// Centered truncated SVD through the eigendecomposition of the smaller Gram
/// matrix. Each direction is sign-normalised so its largest-magnitude entry is
/// positive; row i of the output is the projection of centered row i onto the
/// directions. Components below the numerical rank are zero-filled.
inline ReducedFeatures reduce_features(const FeatureMatrix& features, std::size_t d, const ReduceOptions& options = {}) {
  const std::size_t m = features.rows.size();
  const std::size_t n = features.column_count;
  if (d == 0 || d > std::min(m, n)) {
    fail(ErrorKind::DimensionMismatch,
         "reduced dimension " + std::to_string(d) + " exceeds min(rows, columns) = " + std::to_string(std::min(m, n)));
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (options.center) {
    for (const auto& h : features.hot) {
      for (auto c : h) mean[c] += 1.0;
    }
    mean /= static_cast<double>(m);
  }

  // y = C x with C = F - 1 mean^T, applied sparsely.
  const auto apply = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), -mean.dot(x));
    for (std::size_t r = 0; r < m; ++r) {
      for (auto c : features.hot[r]) y[r] += x[c];
    }
    return y;
  };
  // x = C^T y.
  const auto apply_t = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd x = -mean * y.sum();
    for (std::size_t r = 0; r < m; ++r) {
      for (auto c : features.hot[r]) x[c] += y[r];
    }
    return x;
  };

  // Left Gram C C^T when m <= n, otherwise C^T C.
  const bool left = m <= n;
  const auto len = static_cast<Eigen::Index>(left ? m : n);
  Eigen::MatrixXd gram(len, len);
  for (Eigen::Index i = 0; i < len; ++i) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(len, i);
    gram.col(i) = left ? apply(apply_t(e)) : apply_t(apply(e));
  }
  gram = 0.5 * (gram + gram.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  const Eigen::VectorXd& lambda = solver.eigenvalues();  // ascending
  const double leading = std::sqrt(std::max(lambda[len - 1], 0.0));

  ReducedFeatures out;
  out.rows = features.rows;
  out.values = Matrix<double>(m, d);
  out.directions = Matrix<double>(d, n);
  for (std::size_t k = 0; k < d; ++k) {
    const Eigen::Index idx = len - 1 - static_cast<Eigen::Index>(k);
    const double sigma = std::sqrt(std::max(lambda[idx], 0.0));
    if (leading == 0.0 || sigma <= 1e-6 * leading) {
      out.zero_filled = d - k;
      out.singular_values.resize(d, 0.0);
      break;
    }
    Eigen::VectorXd direction = left ? apply_t(solver.eigenvectors().col(idx)) : solver.eigenvectors().col(idx);
    direction.normalize();
    Eigen::Index argmax = 0;
    direction.cwiseAbs().maxCoeff(&argmax);
    if (direction[argmax] < 0.0) direction = -direction;
    const Eigen::VectorXd projection = apply(direction);
    for (std::size_t c = 0; c < n; ++c) out.directions(k, c) = direction[static_cast<Eigen::Index>(c)];
    for (std::size_t r = 0; r < m; ++r) out.values(r, k) = projection[static_cast<Eigen::Index>(r)];
    out.singular_values.push_back(projection.norm());
  }

  if (options.target_std) {
    const auto data = out.values.data();
    const double count = static_cast<double>(data.size());
    const double mu = std::accumulate(data.begin(), data.end(), 0.0) / count;
    double var = 0.0;
    for (double x : data) var += (x - mu) * (x - mu);
    const double sd = std::sqrt(var / count);
    if (sd > 0.0) {
      const double scale = *options.target_std / sd;
      for (auto& x : out.values.data()) x *= scale;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset directory

namespace detail {

inline std::string triples_tsv(const TripleStore& store) {
  std::string out;
  for (const auto& t : store.triples()) {
    out += std::to_string(t.subject.value) + '\t' + std::to_string(t.predicate.value) + '\t' +
           std::to_string(t.object.value) + '\n';
  }
  return out;
}

inline std::string names_tsv(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].find_first_of("\t\n\r") != std::string::npos) {
      fail(ErrorKind::CorruptDataset, "name contains a tab or newline: '" + names[i] + "'");
    }
    out += std::to_string(i) + '\t' + names[i] + '\n';
  }
  return out;
}

inline std::vector<std::string> read_required(const std::filesystem::path& dir, const char* file) {
  const auto path = dir / file;
  if (!std::filesystem::is_regular_file(path)) fail(ErrorKind::CorruptDataset, "missing " + path.string());
  return text::read_lines(path);
}

[[noreturn]] inline void corrupt(const char* file, std::size_t line, const std::string& what) {
  fail(ErrorKind::CorruptDataset, std::string(file) + ":" + std::to_string(line) + " " + what);
}

inline std::vector<std::string> read_names(const std::filesystem::path& dir, const char* file) {
  std::vector<std::string> names;
  const auto lines = read_required(dir, file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = text::split(lines[i], '\t');
    if (fields.size() != 2) corrupt(file, i + 1, "expected <index>\\t<name>");
    const auto index = text::parse_int<std::size_t>(fields[0]);
    if (!index || *index != i) corrupt(file, i + 1, "index must ascend from 0");
    names.emplace_back(fields[1]);
  }
  return names;
}

inline TripleStore read_triples(const std::filesystem::path& dir, const char* file, std::size_t n, std::size_t m) {
  std::vector<Triple> triples;
  const auto lines = read_required(dir, file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = text::split(lines[i], '\t');
    if (fields.size() != 3) corrupt(file, i + 1, "expected <s>\\t<p>\\t<o>");
    const auto s = text::parse_int<std::uint32_t>(fields[0]);
    const auto p = text::parse_int<std::uint32_t>(fields[1]);
    const auto o = text::parse_int<std::uint32_t>(fields[2]);
    if (!s || !p || !o) corrupt(file, i + 1, "non-integer id");
    if (*s >= n || *o >= n || *p >= m) corrupt(file, i + 1, "id out of range");
    triples.push_back({EntityId{*s}, RelationId{*p}, EntityId{*o}});
  }
  TripleStore store(n, m, std::move(triples));
  if (store.duplicates_removed() > 0) corrupt(file, 0, "duplicate triples");
  return store;
}

}  // namespace detail

/// Writes the TSV dataset directory (LF endings, no trailing blank line).
inline void export_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  text::write_file_atomic(dir / "entities.tsv", detail::names_tsv(bundle.vocabulary.entity_names()));
  text::write_file_atomic(dir / "relations.tsv", detail::names_tsv(bundle.vocabulary.relation_names()));
  text::write_file_atomic(dir / "train.tsv", detail::triples_tsv(bundle.train));
  text::write_file_atomic(dir / "valid.tsv", detail::triples_tsv(bundle.valid));
  text::write_file_atomic(dir / "holdout.tsv", detail::triples_tsv(bundle.holdout));
  std::string pse;
  for (auto r : bundle.pse_relations) pse += std::to_string(r.value) + '\n';
  text::write_file_atomic(dir / "pse_relations.tsv", pse);
  std::string ledger;
  for (const auto& [name, value] : bundle.ledger) ledger += name + '\t' + std::to_string(value) + '\n';
  text::write_file_atomic(dir / "ledger.tsv", ledger);
  const auto features_path = dir / "features.tsv";
  if (bundle.features) {
    std::string cells;
    const auto& fm = *bundle.features;
    for (std::size_t r = 0; r < fm.rows.size(); ++r) {
      for (auto c : fm.hot[r]) cells += std::to_string(fm.rows[r].value) + '\t' + std::to_string(c) + "\t1\n";
    }
    text::write_file_atomic(features_path, cells);
  } else {
    std::filesystem::remove(features_path);
  }
}

inline DatasetBundle import_dataset(const std::filesystem::path& dir) {
  DatasetBundle bundle;
  bundle.vocabulary =
      Vocabulary::from_names(detail::read_names(dir, "entities.tsv"), detail::read_names(dir, "relations.tsv"));
  const auto n = bundle.vocabulary.entity_count();
  const auto m = bundle.vocabulary.relation_count();
  bundle.train = detail::read_triples(dir, "train.tsv", n, m);
  bundle.valid = detail::read_triples(dir, "valid.tsv", n, m);
  bundle.holdout = detail::read_triples(dir, "holdout.tsv", n, m);

  const auto pse_lines = detail::read_required(dir, "pse_relations.tsv");
  for (std::size_t i = 0; i < pse_lines.size(); ++i) {
    const auto r = text::parse_int<std::uint32_t>(pse_lines[i]);
    if (!r || *r >= m) detail::corrupt("pse_relations.tsv", i + 1, "relation id out of range");
    bundle.pse_relations.push_back(RelationId{*r});
  }
  if (!std::is_sorted(bundle.pse_relations.begin(), bundle.pse_relations.end())) {
    detail::corrupt("pse_relations.tsv", 0, "relation ids must ascend");
  }

  const auto ledger_lines = detail::read_required(dir, "ledger.tsv");
  for (std::size_t i = 0; i < ledger_lines.size(); ++i) {
    const auto fields = text::split(ledger_lines[i], '\t');
    const auto value = fields.size() == 2 ? text::parse_int<std::int64_t>(fields[1]) : std::nullopt;
    if (!value) detail::corrupt("ledger.tsv", i + 1, "expected <name>\\t<integer>");
    bundle.ledger[std::string(fields[0])] = *value;
  }

  const auto features_path = dir / "features.tsv";
  if (std::filesystem::exists(features_path)) {
    std::map<std::uint32_t, std::vector<std::uint32_t>> cells;
    std::size_t columns = 0;
    const auto lines = text::read_lines(features_path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const auto fields = text::split(lines[i], '\t');
      if (fields.size() != 3 || fields[2] != "1") detail::corrupt("features.tsv", i + 1, "expected <drug>\\t<column>\\t1");
      const auto e = text::parse_int<std::uint32_t>(fields[0]);
      const auto c = text::parse_int<std::uint32_t>(fields[1]);
      if (!e || !c || *e >= n) detail::corrupt("features.tsv", i + 1, "id out of range");
      cells[*e].push_back(*c);
      columns = std::max<std::size_t>(columns, *c + 1);
    }
    for (auto d : drug_entities(bundle)) cells.try_emplace(d.value);
    FeatureMatrix fm;
    fm.column_count = columns;
    for (auto& [e, hot] : cells) {
      std::sort(hot.begin(), hot.end());
      fm.rows.push_back(EntityId{e});
      fm.hot.push_back(std::move(hot));
    }
    bundle.features = std::move(fm);
  }
  return bundle;
}

}  // namespace kgf

#pragma once

// Filtered entity ranking and per-relation classification assessment.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgf/core.hpp"
#include "kgf/error.hpp"
#include "kgf/ingest.hpp"
#include "kgf/models.hpp"
#include "kgf/rng.hpp"
#include "kgf/text.hpp"

namespace kgf {

struct RankResult {
  Triple triple;
  Side side = Side::Object;
  std::size_t filtered_rank = 1;
};

/// Ranks both completions of every triple among all N candidates, ignoring
/// competitors known true in any filter store. Ties take the mean rank:
/// rank = 1 + #greater + ceil_half(#tied), i.e. #tied / 2 rounded half up.
template <typename Real>
std::vector<RankResult> rank_all(const ModelParams<Real>& params, std::span<const Triple> triples,
                                 std::span<const TripleStore* const> filters) {
  const std::size_t n = params.entity_count();
  std::vector<RankResult> out;
  out.reserve(2 * triples.size());
  std::vector<char> filtered(n, 0);
  std::vector<Real> scores(n);
  for (const auto& t : triples) {
    for (const Side side : {Side::Object, Side::Subject}) {
      const EntityId anchor = side == Side::Object ? t.subject : t.object;
      const EntityId answer = side == Side::Object ? t.object : t.subject;
      const auto q = make_query(params, Query{anchor, t.predicate}, side);
      for (std::size_t j = 0; j < n; ++j) scores[j] = scorer::dot<Real>(q, params.entity.row(j));
      std::vector<std::uint32_t> marked;
      for (const TripleStore* store : filters) {
        const auto known = side == Side::Object ? store->objects_of(anchor, t.predicate) : store->subjects_of(t.predicate, anchor);
        for (const auto e : known) {
          if (e != answer && !filtered[e.value]) {
            filtered[e.value] = 1;
            marked.push_back(e.value);
          }
        }
      }
      const Real target = scores[answer.value];
      std::size_t greater = 0;
      std::size_t tied = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == answer.value || filtered[j]) continue;
        if (scores[j] > target) {
          ++greater;
        } else if (scores[j] == target) {
          ++tied;
        }
      }
      for (auto e : marked) filtered[e] = 0;
      out.push_back({t, side, 1 + greater + (tied + 1) / 2});
    }
  }
  return out;
}

struct RankingMetrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};

inline RankingMetrics ranking_metrics(std::span<const RankResult> ranks) {
  if (ranks.empty()) fail(ErrorKind::EmptyEvaluation, "no ranks to summarise");
  RankingMetrics m;
  for (const auto& r : ranks) {
    m.mrr += 1.0 / static_cast<double>(r.filtered_rank);
    m.hits1 += r.filtered_rank <= 1;
    m.hits3 += r.filtered_rank <= 3;
    m.hits10 += r.filtered_rank <= 10;
  }
  const double count = static_cast<double>(ranks.size());
  m.mrr /= count;
  m.hits1 /= count;
  m.hits3 /= count;
  m.hits10 /= count;
  return m;
}

inline constexpr int kNegativeAttempts = 1000;

/// One negative per positive: ordered drug pairs (a != b) drawn uniformly
/// from `pool` such that neither (a,r,b) nor (b,r,a) is known in any store.
inline std::vector<Triple> sample_eval_negatives(RelationId relation, std::size_t positives,
                                                 std::span<const TripleStore* const> known,
                                                 std::span<const EntityId> pool, std::uint64_t seed) {
  const auto is_known = [&](EntityId a, EntityId b) {
    for (const TripleStore* store : known) {
      if (store->exists({a, relation, b}) || store->exists({b, relation, a})) return true;
    }
    return false;
  };
  const std::size_t p = pool.size();
  if (positives == 0) return {};
  // Exhaustion check over unordered pool pairs.
  std::vector<char> in_pool;
  std::size_t max_id = 0;
  for (auto e : pool) max_id = std::max<std::size_t>(max_id, e.value);
  in_pool.assign(max_id + 1, 0);
  for (auto e : pool) in_pool[e.value] = 1;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> known_pairs;
  for (const TripleStore* store : known) {
    for (auto pos : store->positions_of(relation)) {
      const auto& t = store->triples()[pos];
      const auto a = t.subject.value, b = t.object.value;
      if (a == b || a > max_id || b > max_id || !in_pool[a] || !in_pool[b]) continue;
      known_pairs.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(known_pairs.begin(), known_pairs.end());
  known_pairs.erase(std::unique(known_pairs.begin(), known_pairs.end()), known_pairs.end());
  const std::size_t all_pairs = p < 2 ? 0 : p * (p - 1) / 2;
  if (all_pairs <= known_pairs.size()) {
    fail(ErrorKind::InsufficientNegatives, "relation " + std::to_string(relation.value) + " has no unknown drug pair");
  }

  Rng rng(seed);
  std::vector<Triple> out;
  out.reserve(positives);
  for (std::size_t k = 0; k < positives; ++k) {
    bool found = false;
    for (int attempt = 0; attempt < kNegativeAttempts; ++attempt) {
      const EntityId a = pool[rng.index(p)];
      const EntityId b = pool[rng.index(p)];
      if (a == b || is_known(a, b)) continue;
      out.push_back({a, relation, b});
      found = true;
      break;
    }
    if (!found) {
      fail(ErrorKind::InsufficientNegatives,
           "relation " + std::to_string(relation.value) + ": no negative within " + std::to_string(kNegativeAttempts) +
               " draws");
    }
  }
  return out;
}

struct ClassificationMetrics {
  double auroc = 0.0;
  double auprc = 0.0;
  double ap50 = 0.0;
};

struct ClassificationOptions {
  std::uint64_t tie_seed = 0;  // seeds the shuffle that orders tied scores for AP@50
  bool trapezoid_auprc = false;
  std::size_t ap_cutoff = 50;
};

/// AUROC as the Mann-Whitney statistic, AUPRC as average precision over
/// grouped-tie thresholds (or the trapezoidal PR area), AP@k over the hard
/// descending ranking.
inline ClassificationMetrics classification_metrics(std::span<const double> pos, std::span<const double> neg,
                                                    const ClassificationOptions& options = {}) {
  if (pos.empty() || neg.empty()) fail(ErrorKind::DegenerateLabels, "both classes need at least one score");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(pos.size() + neg.size());
  for (double s : pos) items.push_back({s, true});
  for (double s : neg) items.push_back({s, false});
  const double n_pos = static_cast<double>(pos.size());
  const double n_neg = static_cast<double>(neg.size());

  ClassificationMetrics m;
  {
    auto sorted = items;
    std::sort(sorted.begin(), sorted.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
    // Twice the win count: a tie is worth half a win.
    std::uint64_t doubled = 0;
    std::uint64_t negatives_below = 0;
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      std::uint64_t gp = 0, gn = 0;
      while (j < sorted.size() && sorted[j].score == sorted[i].score) {
        (sorted[j].positive ? gp : gn) += 1;
        ++j;
      }
      doubled += gp * (2 * negatives_below + gn);
      negatives_below += gn;
      i = j;
    }
    m.auroc = static_cast<double>(doubled) / (2.0 * n_pos * n_neg);
  }
  {
    auto sorted = items;
    std::sort(sorted.begin(), sorted.end(), [](const Item& a, const Item& b) { return a.score > b.score; });
    double tp = 0, fp = 0, prev_recall = 0, prev_precision = 1, area = 0;
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j].score == sorted[i].score) {
        (sorted[j].positive ? tp : fp) += 1;
        ++j;
      }
      const double recall = tp / n_pos;
      const double precision = tp / (tp + fp);
      if (options.trapezoid_auprc) {
        area += (recall - prev_recall) * (precision + prev_precision) / 2.0;
      } else {
        area += (recall - prev_recall) * precision;
      }
      prev_recall = recall;
      prev_precision = precision;
      i = j;
    }
    m.auprc = area;
  }
  {
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(options.tie_seed);
    rng.shuffle(std::span(order));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return items[a].score > items[b].score; });
    const std::size_t depth = std::min(options.ap_cutoff, order.size());
    double hits = 0, sum = 0;
    for (std::size_t k = 0; k < depth; ++k) {
      if (items[order[k]].positive) {
        hits += 1;
        sum += hits / static_cast<double>(k + 1);
      }
    }
    m.ap50 = sum / static_cast<double>(std::min(pos.size(), options.ap_cutoff));
  }
  return m;
}

/// Median with the mean of the two middle values for even counts.
inline double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct RelationAssessment {
  RelationId relation;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double auroc = 0.0;
  double auprc = 0.0;
  double ap50 = 0.0;
};

struct MetricsReport {
  std::vector<RelationAssessment> relations;
  std::vector<RelationId> excluded;  // InsufficientNegatives
  double median_auroc = 0.0;
  double median_auprc = 0.0;
  double median_ap50 = 0.0;
  std::optional<RankingMetrics> ranking;
  std::uint64_t seed = 0;
  bool trapezoid_auprc = false;
};

struct AssessOptions {
  bool trapezoid_auprc = false;
  bool ranking = true;  // filtered MRR/hits@k over the holdout
};

inline std::uint64_t negative_seed(std::uint64_t seed, RelationId r) { return mix_seed(mix_seed(seed, 7), r.value); }
inline std::uint64_t tie_seed(std::uint64_t seed, RelationId r) { return mix_seed(mix_seed(seed, 11), r.value); }

/// Per polypharmacy relation: 1:1 sampled negatives scored against the
/// held-out positives. The same seed always yields the same negatives.
template <typename Real>
MetricsReport assess(const ModelParams<Real>& params, const DatasetBundle& bundle, std::uint64_t seed,
                     const AssessOptions& options = {}) {
  if (bundle.holdout.empty()) fail(ErrorKind::EmptyEvaluation, "holdout split is empty");
  const std::vector<const TripleStore*> known{&bundle.train, &bundle.valid, &bundle.holdout};
  const auto pool = drug_entities(bundle);
  MetricsReport report;
  report.seed = seed;
  report.trapezoid_auprc = options.trapezoid_auprc;
  for (const RelationId r : bundle.pse_relations) {
    const auto positions = bundle.holdout.positions_of(r);
    if (positions.empty()) continue;
    std::vector<Triple> positives;
    for (auto pos : positions) positives.push_back(bundle.holdout.triples()[pos]);
    std::vector<Triple> negatives;
    try {
      negatives = sample_eval_negatives(r, positives.size(), known, pool, negative_seed(seed, r));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InsufficientNegatives) throw;
      report.excluded.push_back(r);
      continue;
    }
    std::vector<double> pos_scores, neg_scores;
    for (const auto& t : positives) pos_scores.push_back(static_cast<double>(score_triple(params, t)));
    for (const auto& t : negatives) neg_scores.push_back(static_cast<double>(score_triple(params, t)));
    const auto m = classification_metrics(pos_scores, neg_scores,
                                          {.tie_seed = tie_seed(seed, r), .trapezoid_auprc = options.trapezoid_auprc});
    report.relations.push_back({r, positives.size(), negatives.size(), m.auroc, m.auprc, m.ap50});
  }
  std::vector<double> a, b, c;
  for (const auto& row : report.relations) {
    a.push_back(row.auroc);
    b.push_back(row.auprc);
    c.push_back(row.ap50);
  }
  report.median_auroc = median(a);
  report.median_auprc = median(b);
  report.median_ap50 = median(c);
  if (options.ranking) {
    const auto ranks = rank_all(params, bundle.holdout.triples(), known);
    report.ranking = ranking_metrics(ranks);
  }
  return report;
}

namespace detail {
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}
}  // namespace detail

inline std::string report_csv(const MetricsReport& report, const Vocabulary& vocabulary) {
  std::string out;
  out += "# ties: entity ranks take the mean rank; auroc and auprc group tied scores into one threshold; "
         "ap50 orders ties by a seeded shuffle\n";
  out += "# seed=" + std::to_string(report.seed) + " auprc=" +
         (report.trapezoid_auprc ? "trapezoid" : "average_precision") + " negatives=1:1 known-excluded\n";
  for (auto r : report.excluded) {
    out += "# excluded," + std::to_string(r.value) + "," + detail::csv_field(vocabulary.relation_name(r)) +
           ",insufficient_negatives\n";
  }
  out += "relation_id,relation_name,n_pos,n_neg,auroc,auprc,ap50\n";
  std::vector<double> n_pos, n_neg;
  for (const auto& row : report.relations) {
    out += std::to_string(row.relation.value) + "," + detail::csv_field(vocabulary.relation_name(row.relation)) + "," +
           std::to_string(row.n_pos) + "," + std::to_string(row.n_neg) + "," + text::fixed6(row.auroc) + "," +
           text::fixed6(row.auprc) + "," + text::fixed6(row.ap50) + "\n";
    n_pos.push_back(static_cast<double>(row.n_pos));
    n_neg.push_back(static_cast<double>(row.n_neg));
  }
  out += "#median,," + text::fixed6(median(n_pos)) + "," + text::fixed6(median(n_neg)) + "," +
         text::fixed6(report.median_auroc) + "," + text::fixed6(report.median_auprc) + "," +
         text::fixed6(report.median_ap50) + "\n";
  return out;
}

inline std::string summary_csv(const MetricsReport& report) {
  std::string out = "metric,value\n";
  if (report.ranking) {
    out += "mrr," + text::fixed6(report.ranking->mrr) + "\n";
    out += "hits@1," + text::fixed6(report.ranking->hits1) + "\n";
    out += "hits@3," + text::fixed6(report.ranking->hits3) + "\n";
    out += "hits@10," + text::fixed6(report.ranking->hits10) + "\n";
  }
  out += "median_auroc," + text::fixed6(report.median_auroc) + "\n";
  out += "median_auprc," + text::fixed6(report.median_auprc) + "\n";
  out += "median_ap50," + text::fixed6(report.median_ap50) + "\n";
  out += "relations_assessed," + std::to_string(report.relations.size()) + "\n";
  out += "relations_excluded," + std::to_string(report.excluded.size()) + "\n";
  return out;
}

}  // namespace kgf

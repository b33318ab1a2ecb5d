// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include "kgf/cli.hpp"

namespace {

using namespace kgf;
namespace fs = std::filesystem;

struct Verdict {
  enum State { Pass, Fail, NotApplicable } state = Fail;
  std::string detail;
};

Verdict fail(std::string detail) { return {Verdict::Fail, std::move(detail)}; }
Verdict check(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

std::string num(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

Triple T(std::uint32_t s, std::uint32_t p, std::uint32_t o) { return {EntityId{s}, RelationId{p}, EntityId{o}}; }

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("kgf_accept_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  if (code != 0) std::cerr << "  kgf " << args.front() << " exited " << code << ": " << err.str();
  return code;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Verdict gradients() {
  const std::size_t n = 10, m = 3, d = 8;
  const double h = 1e-5;
  Rng rng(100);
  std::vector<Triple> triples;
  for (int i = 0; i < 25; ++i) {
    triples.push_back(T(static_cast<std::uint32_t>(rng.index(n)), static_cast<std::uint32_t>(rng.index(m)),
                        static_cast<std::uint32_t>(rng.index(n))));
  }
  const TripleStore train(n, m, triples);
  double worst = 0.0;
  int combos = 0;
  for (auto family : {ModelFamily::DistMult, ModelFamily::ComplEx, ModelFamily::SimplE}) {
    for (auto strategy : {StrategyKind::NegSampling, StrategyKind::OneVsAll, StrategyKind::KVsAll}) {
      for (auto loss : {LossKind::BCEWithLogits, LossKind::KLSoftmax, LossKind::MarginRanking, LossKind::SoftMargin}) {
        auto params = init_params<double>({family, d}, n, m, NormalInit{0.5}, NormalInit{0.5}, 7);
        Rng target_rng(3);
        const auto targets = assemble_targets({strategy, 2, 3}, train.triples().first(6), train, target_rng);
        const auto evaluate = [&] { return loss_value_and_grads(params, targets, {loss, 1.0}, {}, {}, nullptr); };
        const auto analytic = evaluate();
        const auto sweep = [&](Matrix<double>& table, const RowGradients& g) {
          for (std::size_t row = 0; row < table.rows(); ++row) {
            const auto it = std::find(g.ids.begin(), g.ids.end(), static_cast<std::uint32_t>(row));
            for (std::size_t col = 0; col < d; ++col) {
              const double saved = table(row, col);
              table(row, col) = saved + h;
              const double up = evaluate().loss;
              table(row, col) = saved - h;
              const double down = evaluate().loss;
              table(row, col) = saved;
              const double numeric = (up - down) / (2 * h);
              const double exact =
                  it == g.ids.end() ? 0.0 : g.row(static_cast<std::size_t>(it - g.ids.begin()))[col];
              worst = std::max(worst, std::abs(exact - numeric) / std::max(1.0, std::abs(numeric)));
            }
          }
        };
        sweep(params.entity, analytic.entity);
        sweep(params.relation, analytic.relation);
        ++combos;
      }
    }
  }
  return check(worst < 1e-5, std::to_string(combos) + " combinations, max relative error " + num(worst, 3));
}

// ---------------------------------------------------------------------------
// 2. Scorer identities

Verdict scorer_identities() {
  const std::size_t n = 50, m = 5, d = 16, h = d / 2;
  const auto complex = init_params<double>({ModelFamily::ComplEx, d}, n, m, NormalInit{1.0}, NormalInit{1.0}, 1);
  auto real_only = complex;
  ModelParams<double> distmult{{ModelFamily::DistMult, h}, Matrix<double>(n, h), Matrix<double>(m, h)};
  for (std::size_t e = 0; e < n; ++e) {
    for (std::size_t k = 0; k < h; ++k) {
      real_only.entity(e, h + k) = 0.0;
      distmult.entity(e, k) = complex.entity(e, k);
    }
  }
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t k = 0; k < h; ++k) {
      real_only.relation(r, h + k) = 0.0;
      distmult.relation(r, k) = complex.relation(r, k);
    }
  }
  const auto dm = init_params<double>({ModelFamily::DistMult, d}, n, m, NormalInit{1.0}, NormalInit{1.0}, 2);
  const auto simple = init_params<double>({ModelFamily::SimplE, d}, n, m, NormalInit{1.0}, NormalInit{1.0}, 3);
  auto swapped = simple;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t k = 0; k < h; ++k) std::swap(swapped.relation(r, k), swapped.relation(r, h + k));
  }
  Rng rng(4);
  double complex_gap = 0.0, simple_gap = 0.0;
  bool symmetric = true;
  for (int i = 0; i < 10000; ++i) {
    const auto s = static_cast<std::uint32_t>(rng.index(n)), o = static_cast<std::uint32_t>(rng.index(n));
    const auto r = static_cast<std::uint32_t>(rng.index(m));
    complex_gap = std::max(complex_gap, std::abs(score_triple(real_only, T(s, r, o)) - score_triple(distmult, T(s, r, o))));
    symmetric = symmetric && score_triple(dm, T(s, r, o)) == score_triple(dm, T(o, r, s));
    simple_gap = std::max(simple_gap, std::abs(score_triple(simple, T(s, r, o)) - score_triple(swapped, T(o, r, s))));
  }
  return check(complex_gap <= 1e-12 && symmetric && simple_gap <= 1e-12,
               "ComplEx(im=0)-DistMult " + num(complex_gap, 3) + ", DistMult symmetry " +
                   (symmetric ? "exact" : "broken") + ", SimplE swap " + num(simple_gap, 3) + " over 10^4 triples");
}

// ---------------------------------------------------------------------------
// 3. Metric oracles

double auroc_pairs(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

Verdict metric_oracles() {
  Rng rng(31);
  double auroc_gap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int levels = 2 + static_cast<int>(rng.index(30));
    std::vector<double> pos(1 + rng.index(200)), neg(1 + rng.index(200));
    for (auto& x : pos) x = static_cast<double>(rng.index(levels));
    for (auto& x : neg) x = static_cast<double>(rng.index(levels));
    auroc_gap = std::max(auroc_gap, std::abs(classification_metrics(pos, neg).auroc - auroc_pairs(pos, neg)));
  }

  // Distinct scores, labels permuted: the ranking is fixed and the reference
  // is the textbook precision-at-hit summation.
  double ap_gap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t total = 2 + rng.index(199);
    const std::size_t positives = 1 + rng.index(total - 1);
    std::vector<int> labels(total, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(positives), 1);
    rng.shuffle(std::span(labels));
    std::vector<double> pos, neg;
    double hits = 0.0, ap = 0.0, ap50 = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
      const double score = static_cast<double>(total - i);
      (labels[i] ? pos : neg).push_back(score);
      if (labels[i]) {
        hits += 1;
        ap += hits / static_cast<double>(i + 1);
        if (i < 50) ap50 += hits / static_cast<double>(i + 1);
      }
    }
    ap /= static_cast<double>(positives);
    ap50 /= static_cast<double>(std::min<std::size_t>(positives, 50));
    const auto metrics = classification_metrics(pos, neg, {.tie_seed = static_cast<std::uint64_t>(trial)});
    ap_gap = std::max({ap_gap, std::abs(metrics.auprc - ap), std::abs(metrics.ap50 - ap50)});
  }

  // Filtered ranks against explicit enumeration of every candidate.
  std::size_t rank_mismatch = 0, ranks_checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.index(49), m = 1 + rng.index(3), d = 4;
    ModelParams<double> p{{ModelFamily::ComplEx, d}, Matrix<double>(n, d), Matrix<double>(m, d)};
    for (auto& x : p.entity.data()) x = static_cast<double>(rng.index(3)) - 1.0;
    for (auto& x : p.relation.data()) x = static_cast<double>(rng.index(3)) - 1.0;
    std::vector<Triple> known, test;
    for (std::size_t i = 0; i < 3 * n; ++i) {
      known.push_back(T(static_cast<std::uint32_t>(rng.index(n)), static_cast<std::uint32_t>(rng.index(m)),
                        static_cast<std::uint32_t>(rng.index(n))));
    }
    for (std::size_t i = 0; i < n; ++i) test.push_back(known[rng.index(known.size())]);
    const TripleStore filter(n, m, known);
    const std::vector<const TripleStore*> filters{&filter};
    for (const auto& rr : rank_all(p, test, filters)) {
      const auto& t = rr.triple;
      const bool object_side = rr.side == Side::Object;
      const auto candidate = [&](std::uint32_t e) {
        return object_side ? T(t.subject.value, t.predicate.value, e) : T(e, t.predicate.value, t.object.value);
      };
      const std::uint32_t answer = object_side ? t.object.value : t.subject.value;
      const double target = score_triple(p, t);
      std::size_t above = 0, level = 0;
      for (std::uint32_t e = 0; e < n; ++e) {
        if (e != answer && filter.exists(candidate(e))) continue;
        const double s = score_triple(p, candidate(e));
        above += s > target;
        level += s == target;
      }
      // Mean position within the tie group, half rounded up.
      const std::size_t expected = static_cast<std::size_t>(std::floor(static_cast<double>(above) +
                                                                       static_cast<double>(level + 1) / 2.0 + 0.5));
      rank_mismatch += rr.filtered_rank != expected;
      ++ranks_checked;
    }
  }
  return check(auroc_gap <= 1e-12 && ap_gap <= 1e-12 && rank_mismatch == 0,
               "AUROC gap " + num(auroc_gap, 3) + " (1000 tied instances), AP/AP@50 gap " + num(ap_gap, 3) +
                   " (1000 permutations), " + std::to_string(rank_mismatch) + "/" + std::to_string(ranks_checked) +
                   " rank mismatches");
}

// ---------------------------------------------------------------------------
// 4 and 5. Community fixture

DatasetBundle community_fixture() {
  const std::uint32_t n = 200, communities = 4, relations = 10;
  DatasetBundle b;
  for (std::uint32_t i = 0; i < n; ++i) b.vocabulary.add_entity("D" + std::to_string(i));
  for (std::uint32_t r = 0; r < relations; ++r) b.vocabulary.add_relation("pse:" + std::to_string(r));
  Rng rng(2024);
  std::vector<Triple> triples;
  for (std::uint32_t r = 0; r < relations; ++r) {
    for (std::uint32_t s = 0; s < n; ++s) {
      for (std::uint32_t o = s + 1; o < n; ++o) {
        const bool same = s % communities == o % communities;
        if (rng.bernoulli(same ? 0.3 : 0.005)) triples.push_back(T(s, r, o));
      }
    }
  }
  b.train = TripleStore(n, relations, triples);
  b.valid = TripleStore(n, relations, {});
  b.holdout = TripleStore(n, relations, {});
  for (std::uint32_t r = 0; r < relations; ++r) b.pse_relations.push_back(RelationId{r});
  b = holdout_split(std::move(b), 0.1, 1);
  return validation_split(std::move(b), 0.05, 1);
}

const std::vector<std::string> kFixtureSettings{
    "model.family=simple", "model.dim=64",         "train.strategy=1vsAll", "train.loss=kl",
    "train.optimizer=adam", "train.lr=0.01",       "train.seed=1",          "train.early_stop.max_epochs=100"};

struct FixtureRun {
  bool ok = false;
  double seconds = 0.0;
  std::vector<double> losses;
  MetricsReport report;
  std::string curve_csv;
};

const FixtureRun& fixture_run() {
  static const FixtureRun run = [] {
    FixtureRun out;
    TempDir dir("fixture");
    export_dataset(community_fixture(), dir / "data");
    std::vector<std::string> args{"train", "--dataset", dir / "data", "--out", dir / "run", "--save-every-epoch"};
    for (const auto& s : kFixtureSettings) {
      args.push_back("--set");
      args.push_back(s);
    }
    const auto started = std::chrono::steady_clock::now();
    if (cli(args) != 0) return out;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const auto bundle = import_dataset(dir / "data");
    const auto params = read_model<double>(Checkpoint::load(dir / "run/final.ckpt"));
    out.report = assess(params, bundle, 5);
    for (const auto& e : TrainLog::parse_csv(text::read_file(dir / "run/train_log.csv")).epochs) out.losses.push_back(e.loss);
    if (cli({"curve", "--checkpoints", dir / "run", "--dataset", dir / "data", "--seed", "5", "--out",
             dir / "curve.csv"}) != 0) {
      return out;
    }
    out.curve_csv = text::read_file(dir / "curve.csv");
    out.ok = true;
    return out;
  }();
  return run;
}

Verdict desk_learning() {
  const auto& run = fixture_run();
  if (!run.ok) return fail("fixture training did not complete");
  bool decreasing = run.losses.size() >= 10;
  for (std::size_t i = 1; i < std::min<std::size_t>(10, run.losses.size()); ++i) {
    decreasing = decreasing && run.losses[i] < run.losses[i - 1];
  }
  const auto& r = run.report;
  return check(r.median_auroc >= 0.90 && r.median_auprc >= 0.85 && run.losses.size() <= 100 && run.seconds < 300 &&
                   decreasing,
               "median AUROC " + text::fixed6(r.median_auroc) + ", AUPRC " + text::fixed6(r.median_auprc) + ", AP@50 " +
                   text::fixed6(r.median_ap50) + " after " + std::to_string(run.losses.size()) + " epochs in " +
                   num(run.seconds, 3) + " s; loss " + (decreasing ? "strictly decreasing" : "not decreasing") +
                   " over epochs 1-10");
}

Verdict fast_convergence() {
  const auto& run = fixture_run();
  if (!run.ok) return fail("fixture training did not complete");
  std::optional<double> at_two;
  double best = 0.0;
  std::size_t rows = 0;
  for (const auto& line : text::split(run.curve_csv, '\n')) {
    if (line.empty() || line[0] < '0' || line[0] > '9') continue;
    const auto f = text::split_csv(line);
    const double auprc = *text::parse_double(f[2]);
    if (f[0] == "2") at_two = auprc;
    best = std::max(best, auprc);
    ++rows;
  }
  if (!at_two) return fail("no epoch-2 row in the curve output");
  return check(*at_two >= 0.8 * best, "epoch-2 median AUPRC " + text::fixed6(*at_two) + " = " +
                                          num(100.0 * *at_two / best, 4) + "% of best " + text::fixed6(best) + " over " +
                                          std::to_string(rows) + " epochs");
}

// ---------------------------------------------------------------------------
// 6. Real source tables (optional)

Verdict real_ingestion() {
  const char* env = std::getenv("KGF_SOURCE_TABLES");
  const fs::path dir = env ? fs::path(env) : fs::path(KGF_SOURCE_DIR) / "data/decagon";
  const SourcePaths paths{dir / "bio-decagon-combo.csv", dir / "bio-decagon-mono.csv", dir / "bio-decagon-targets.csv",
                          dir / "bio-decagon-ppi.csv"};
  for (const auto& p : {paths.combo, paths.mono, paths.targets, paths.ppi}) {
    if (!fs::exists(p)) return {Verdict::NotApplicable, "source tables not found under " + dir.string()};
  }
  const auto records = parse_source_tables(paths);
  const auto selfloops = build_graph(records, GraphVariant::Selfloops, 500);
  const auto nonnaive = build_graph(records, GraphVariant::NonNaive, 500);
  const auto split = holdout_split(selfloops, 0.1, 1);
  const auto count = [](const DatasetBundle& b, const char* key) { return b.ledger.at(key); };
  const auto holdout = static_cast<std::int64_t>(split.holdout.size());
  const bool ok = count(selfloops, "entities") == 19734 && count(nonnaive, "entities") == 19734 &&
                  count(selfloops, "relations") == 11149 && count(nonnaive, "relations") == 964 &&
                  count(selfloops, "triples") == 5485566 && count(nonnaive, "triples") == 5310589 &&
                  std::abs(holdout - 458061) <= 963;
  return check(ok, "nodes " + std::to_string(count(selfloops, "entities")) + "/" +
                       std::to_string(count(nonnaive, "entities")) + ", meta-edges " +
                       std::to_string(count(selfloops, "relations")) + "/" + std::to_string(count(nonnaive, "relations")) +
                       ", edges " + std::to_string(count(selfloops, "triples")) + "/" +
                       std::to_string(count(nonnaive, "triples")) + ", holdout " + std::to_string(holdout));
}

// ---------------------------------------------------------------------------
// 7. Sobol

Verdict sobol() {
  const auto one = sobol_points(1, 3);
  const bool first = one[0][0] == 0.5 && one[1][0] == 0.75 && one[2][0] == 0.25 &&
                     sobol_points(2, 1)[0] == std::vector<double>{0.5, 0.5};
  const auto points = sobol_points(64, 63);
  std::size_t violations = 0;
  for (int k = 1; k <= 6; ++k) {
    const std::size_t cells = std::size_t{1} << k;
    for (std::size_t d = 0; d < 64; ++d) {
      std::set<std::size_t> seen{0};
      for (std::size_t i = 0; i + 1 < cells; ++i) seen.insert(static_cast<std::size_t>(points[i][d] * cells));
      violations += seen.size() != cells;
    }
  }
  return check(first && violations == 0, std::string("first points ") + (first ? "match" : "differ") +
                                              ", stratification violations " + std::to_string(violations) +
                                              " over k<=6 and 64 dimensions");
}

// ---------------------------------------------------------------------------
// 8. Bayesian optimisation on Branin

double branin(double x1, double x2) {
  const double pi = std::numbers::pi;
  const double b = 5.1 / (4 * pi * pi), c = 5 / pi, t = 1 / (8 * pi);
  return std::pow(x2 - b * x1 * x1 + c * x1 - 6, 2) + 10 * (1 - t) * std::cos(x1) + 10;
}

Verdict bayes_branin() {
  const SearchSpace space({{"x1", FloatRange{-5.0, 10.0, false}, {}, {}}, {"x2", FloatRange{0.0, 15.0, false}, {}, {}}});
  const TrialRunner runner = [](const Assignment& a, std::size_t) {
    const double x1 = *text::parse_double(*find_value(a, "x1"));
    const double x2 = *text::parse_double(*find_value(a, "x2"));
    return TrialResult{-branin(x1, x2), 0.0};
  };
  const auto started = std::chrono::steady_clock::now();
  int hits = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto result = run_search(space, {20, 30}, runner, {.seed = seed, .journal = {}, .workers = 1});
    const double value = -*result.records[*result.best].outcome;
    hits += value <= 0.45;
    worst = std::max(worst, value);
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return check(hits >= 9 && seconds < 60, std::to_string(hits) + "/10 seeds reach <= 0.45 (worst " + num(worst, 5) +
                                              ") in " + num(seconds, 3) + " s");
}

// ---------------------------------------------------------------------------
// 9. Early stopping

std::pair<int, std::string> trace(const EarlyStopSpec& spec, const std::function<double(int)>& metric) {
  EarlyStopState state;
  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    if (!is_eval_epoch(spec, epoch)) continue;
    const auto d = early_stop_update(state, spec, epoch, metric(epoch));
    if (d.stop) return {epoch, d.reason};
  }
  return {-1, "never stopped"};
}

Verdict early_stopping() {
  EarlyStopSpec spec;
  const std::map<int, double> first{{50, 0.5}, {55, 0.6}, {60, 0.59}, {65, 0.58}};
  const bool a = trace(spec, [&](int e) { return first.count(e) ? first.at(e) : 0.0; }).first == 65;
  const bool b = trace(spec, [](int e) { return static_cast<double>(e); }).first == 500;
  EarlyStopSpec inclusive = spec;
  inclusive.mode = CountingMode::Inclusive;
  const bool c = trace(inclusive, [](int) { return 0.5; }).first == 55;
  EarlyStopSpec bounded = spec;
  bounded.min_epochs = 55;
  bounded.max_epochs = 500;
  Rng rng(9);
  int violations = 0;
  for (int i = 0; i < 100; ++i) {
    // Random walks with occasional plateaus of varying length.
    std::map<int, double> values;
    double level = rng.uniform();
    const double noise = rng.uniform(0.0, 0.05);
    for (int e = 0; e <= 500; ++e) {
      level += rng.bernoulli(0.3) ? rng.uniform(-noise, noise) : 0.0;
      values[e] = level;
    }
    auto spec_i = bounded;
    spec_i.mode = rng.bernoulli(0.5) ? CountingMode::Inclusive : CountingMode::Strict;
    spec_i.patience = 1 + static_cast<int>(rng.index(4));
    const int stop = trace(spec_i, [&](int e) { return values.at(e); }).first;
    violations += stop < 55 || stop > 500;
  }
  return check(a && b && c && violations == 0,
               std::string("examples ") + (a ? "65 " : "x ") + (b ? "500 " : "x ") + (c ? "55" : "x") + ", " +
                   std::to_string(violations) + "/100 random traces outside [55, 500]");
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::map<std::string, std::string> toy_pipeline(const TempDir& dir, bool& ok) {
  const std::string toy = std::string(KGF_SOURCE_DIR) + "/data/toy/";
  ok = cli({"ingest", "--combo", toy + "combo.csv", "--mono", toy + "mono.csv", "--targets", toy + "targets.csv",
            "--ppi", toy + "ppi.csv", "--min-pse-count", "10", "--out", dir / "data"}) == 0 &&
       cli({"split", "--dataset", dir / "data", "--fraction", "0.2", "--seed", "7"}) == 0 &&
       cli({"train", "--dataset", dir / "data", "--out", dir / "run", "--save-every-epoch", "--set", "model.dim=16",
            "--set", "train.early_stop.min_epochs=1", "--set", "train.early_stop.max_epochs=5", "--set",
            "train.seed=3"}) == 0 &&
       cli({"eval", "--dataset", dir / "data", "--checkpoint", dir / "run/final.ckpt", "--seed", "5", "--out",
            dir / "report.csv"}) == 0;
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir.path())) {
    if (!entry.is_regular_file()) continue;
    const auto name = fs::relative(entry.path(), dir.path()).string();
    // The seconds column of the training log is wall time.
    if (name == "run/train_log.csv") continue;
    files[name] = text::read_file(entry.path());
  }
  return files;
}

Verdict determinism() {
  TempDir a("det_a"), b("det_b");
  bool ok_a = false, ok_b = false;
  const auto first = toy_pipeline(a, ok_a);
  const auto second = toy_pipeline(b, ok_b);
  if (!ok_a || !ok_b) return fail("pipeline stage failed");
  std::size_t differing = 0, checkpoints = 0, csvs = 0;
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    differing += it == second.end() || it->second != bytes;
    checkpoints += name.ends_with(".ckpt");
    csvs += name.ends_with(".csv");
  }
  differing += first.size() != second.size();
  return check(differing == 0 && checkpoints == 6 && csvs >= 2,
               std::to_string(first.size()) + " files compared (" + std::to_string(checkpoints) + " checkpoints, " +
                   std::to_string(csvs) + " CSV), " + std::to_string(differing) + " differ");
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, gradients},      {2, scorer_identities}, {3, metric_oracles}, {4, desk_learning}, {5, fast_convergence},
      {6, real_ingestion}, {7, sobol},             {8, bayes_branin},   {9, early_stopping}, {10, determinism},
  };
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    const auto started = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const char* label = v.state == Verdict::Pass ? "PASS" : v.state == Verdict::Fail ? "FAIL" : "N/A ";
    std::cout << "criterion " << (id < 10 ? " " : "") << id << ": " << label << "  " << v.detail << " ["
              << num(seconds, 3) << " s]" << std::endl;
    failures += v.state == Verdict::Fail;
  }
  std::cout << (failures == 0 ? "all criteria met" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}

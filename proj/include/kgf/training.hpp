#pragma once

// Training strategies, losses, sparse optimizers, scheduling, early stopping
// and the epoch loop.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgf/checkpoint.hpp"
#include "kgf/config.hpp"
#include "kgf/core.hpp"
#include "kgf/error.hpp"
#include "kgf/eval.hpp"
#include "kgf/ingest.hpp"
#include "kgf/models.hpp"
#include "kgf/rng.hpp"
#include "kgf/text.hpp"

namespace kgf {

// ---------------------------------------------------------------------------
// Configuration

enum class StrategyKind { NegSampling, OneVsAll, KVsAll };
enum class LossKind { BCEWithLogits, KLSoftmax, MarginRanking, SoftMargin };
enum class OptimizerKind { SGD, Adagrad, Adadelta, Adam, Adamax };
enum class InitKind { Normal, Uniform, XavierNormal, XavierUniform, Features };
enum class CountingMode { Strict, Inclusive };

struct TrainStrategy {
  StrategyKind kind = StrategyKind::OneVsAll;
  std::size_t subject_samples = 1;
  std::size_t object_samples = 1;
};

struct LossSpec {
  LossKind kind = LossKind::KLSoftmax;
  double margin = 1.0;
};

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 0.011;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double rho = 0.95;
};

struct SchedulerSpec {
  double factor = 0.95;
  int patience = 1;
};

struct EarlyStopSpec {
  int first_eval = 50;
  int eval_every = 5;
  int patience = 2;
  int min_epochs = 55;
  int max_epochs = 500;
  CountingMode mode = CountingMode::Strict;
  double threshold = 1.0;  // inclusive mode: a first check at or below this counts as non-improving
};

struct DropoutSpec {
  double entity = 0.0;
  double relation = 0.0;
};

struct RegSpec {
  double weight = 0.0;
  int p = 2;
};

struct TrainConfig {
  ModelSpec model{ModelFamily::SimplE, 256};
  InitKind init = InitKind::XavierNormal;
  double init_std = 0.1;
  double init_a = -0.1;
  double init_b = 0.1;
  TrainStrategy strategy;
  LossSpec loss;
  OptimizerSpec optimizer;
  std::size_t batch_size = 256;
  DropoutSpec dropout{0.068, 0.125};
  RegSpec reg;
  SchedulerSpec scheduler;
  EarlyStopSpec stopping;
  std::uint64_t seed = 0;
  bool double_precision = false;

  void validate() const {
    model.validate();
    const auto bad = [](const std::string& what) { fail(ErrorKind::InvalidConfig, what); };
    if (strategy.kind == StrategyKind::NegSampling && (strategy.subject_samples < 1 || strategy.object_samples < 1)) {
      bad("negative sample counts must be >= 1");
    }
    if (!(loss.margin > 0.0)) bad("margin must be positive");
    if (!(optimizer.lr > 0.0)) bad("learning rate must be positive");
    if (!(optimizer.eps > 0.0)) bad("optimizer eps must be positive");
    if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
      bad("betas must lie in [0,1)");
    }
    if (!(optimizer.rho >= 0.0 && optimizer.rho < 1.0)) bad("rho must lie in [0,1)");
    if (batch_size < 1) bad("batch size must be >= 1");
    if (!(dropout.entity >= 0.0 && dropout.entity < 1.0) || !(dropout.relation >= 0.0 && dropout.relation < 1.0)) {
      bad("dropout must lie in [0,1)");
    }
    if (!(reg.weight >= 0.0)) bad("regularisation weight must be >= 0");
    if (reg.p < 1) bad("regularisation exponent must be >= 1");
    if (!(scheduler.factor > 0.0 && scheduler.factor <= 1.0)) bad("scheduler factor must lie in (0,1]");
    if (scheduler.patience < 1) bad("scheduler patience must be >= 1");
    if (stopping.first_eval < 1 || stopping.eval_every < 1 || stopping.patience < 1) {
      bad("early stopping schedule values must be >= 1");
    }
    if (stopping.min_epochs > stopping.max_epochs) bad("min_epochs exceeds max_epochs");
    if (stopping.max_epochs < 1) bad("max_epochs must be >= 1");
    if (init == InitKind::Normal && !(init_std > 0.0)) bad("init std must be positive");
    if (init == InitKind::Uniform && !(init_a < init_b)) bad("uniform init needs a < b");
  }
};

namespace config_detail {

template <typename Enum, std::size_t N>
Enum lookup(const std::string& key, const std::string& value, const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [name, e] : table) {
    if (value == name) return e;
  }
  std::string choices;
  for (const auto& [name, e] : table) choices += std::string(choices.empty() ? "" : "|") + name;
  fail(ErrorKind::InvalidConfig, key + ": '" + value + "' is not one of " + choices);
}

template <typename Enum, std::size_t N>
const char* name_of(Enum e, const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [name, v] : table) {
    if (v == e) return name;
  }
  return "?";
}

inline constexpr std::pair<const char*, ModelFamily> kFamilies[] = {
    {"distmult", ModelFamily::DistMult}, {"complex", ModelFamily::ComplEx}, {"simple", ModelFamily::SimplE}};
inline constexpr std::pair<const char*, InitKind> kInits[] = {{"normal", InitKind::Normal},
                                                              {"uniform", InitKind::Uniform},
                                                              {"xavier_normal", InitKind::XavierNormal},
                                                              {"xavier_uniform", InitKind::XavierUniform},
                                                              {"features", InitKind::Features}};
inline constexpr std::pair<const char*, StrategyKind> kStrategies[] = {
    {"negsamp", StrategyKind::NegSampling}, {"1vsAll", StrategyKind::OneVsAll}, {"KvsAll", StrategyKind::KVsAll}};
inline constexpr std::pair<const char*, LossKind> kLosses[] = {{"bce", LossKind::BCEWithLogits},
                                                               {"kl", LossKind::KLSoftmax},
                                                               {"margin_ranking", LossKind::MarginRanking},
                                                               {"soft_margin", LossKind::SoftMargin}};
inline constexpr std::pair<const char*, OptimizerKind> kOptimizers[] = {{"sgd", OptimizerKind::SGD},
                                                                        {"adagrad", OptimizerKind::Adagrad},
                                                                        {"adadelta", OptimizerKind::Adadelta},
                                                                        {"adam", OptimizerKind::Adam},
                                                                        {"adamax", OptimizerKind::Adamax}};
inline constexpr std::pair<const char*, CountingMode> kModes[] = {{"strict", CountingMode::Strict},
                                                                  {"inclusive", CountingMode::Inclusive}};
inline constexpr std::pair<const char*, bool> kPrecisions[] = {{"float32", false}, {"float64", true}};

}  // namespace config_detail

inline const char* to_string(StrategyKind k) { return config_detail::name_of(k, config_detail::kStrategies); }
inline const char* to_string(LossKind k) { return config_detail::name_of(k, config_detail::kLosses); }
inline const char* to_string(OptimizerKind k) { return config_detail::name_of(k, config_detail::kOptimizers); }
inline const char* to_string(InitKind k) { return config_detail::name_of(k, config_detail::kInits); }
inline const char* to_string(CountingMode k) { return config_detail::name_of(k, config_detail::kModes); }

/// Applies one dotted `key = value` setting. Unknown keys are errors.
inline void apply_setting(TrainConfig& c, const std::string& key, const std::string& value) {
  using namespace config_detail;
  const auto dbl = [&] { return to_double(key, value); };
  const auto count = [&] { return to_int<std::size_t>(key, value); };
  const auto integer = [&] { return to_int<int>(key, value); };
  if (key == "model.family") {
    c.model.family = lookup(key, value, kFamilies);
  } else if (key == "model.dim") {
    c.model.dim = count();
  } else if (key == "model.init") {
    c.init = lookup(key, value, kInits);
  } else if (key == "model.init.std") {
    c.init_std = dbl();
  } else if (key == "model.init.a") {
    c.init_a = dbl();
  } else if (key == "model.init.b") {
    c.init_b = dbl();
  } else if (key == "train.strategy") {
    c.strategy.kind = lookup(key, value, kStrategies);
  } else if (key == "train.negsamp.subjects") {
    c.strategy.subject_samples = count();
  } else if (key == "train.negsamp.objects") {
    c.strategy.object_samples = count();
  } else if (key == "train.loss") {
    c.loss.kind = lookup(key, value, kLosses);
  } else if (key == "train.loss.margin") {
    c.loss.margin = dbl();
  } else if (key == "train.optimizer") {
    c.optimizer.kind = lookup(key, value, kOptimizers);
  } else if (key == "train.lr") {
    c.optimizer.lr = dbl();
  } else if (key == "train.optimizer.beta1") {
    c.optimizer.beta1 = dbl();
  } else if (key == "train.optimizer.beta2") {
    c.optimizer.beta2 = dbl();
  } else if (key == "train.optimizer.eps") {
    c.optimizer.eps = dbl();
  } else if (key == "train.optimizer.rho") {
    c.optimizer.rho = dbl();
  } else if (key == "train.batch_size") {
    c.batch_size = count();
  } else if (key == "train.dropout.entity") {
    c.dropout.entity = dbl();
  } else if (key == "train.dropout.relation") {
    c.dropout.relation = dbl();
  } else if (key == "train.reg.weight") {
    c.reg.weight = dbl();
  } else if (key == "train.reg.p") {
    c.reg.p = integer();
  } else if (key == "train.scheduler.factor") {
    c.scheduler.factor = dbl();
  } else if (key == "train.scheduler.patience") {
    c.scheduler.patience = integer();
  } else if (key == "train.early_stop.first_eval") {
    c.stopping.first_eval = integer();
  } else if (key == "train.early_stop.eval_every") {
    c.stopping.eval_every = integer();
  } else if (key == "train.early_stop.patience") {
    c.stopping.patience = integer();
  } else if (key == "train.early_stop.min_epochs") {
    c.stopping.min_epochs = integer();
  } else if (key == "train.early_stop.max_epochs") {
    c.stopping.max_epochs = integer();
  } else if (key == "train.early_stop.mode") {
    c.stopping.mode = lookup(key, value, kModes);
  } else if (key == "train.early_stop.threshold") {
    c.stopping.threshold = dbl();
  } else if (key == "train.seed") {
    c.seed = to_int<std::uint64_t>(key, value);
  } else if (key == "train.precision") {
    c.double_precision = lookup(key, value, kPrecisions);
  } else {
    fail(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
  }
}

/// Every setting in a fixed order; parsing this back reproduces the config.
inline KeyValues to_key_values(const TrainConfig& c) {
  using namespace config_detail;
  const auto num = [](double v) { return text::exact(v); };
  return {
      {"model.family", to_string(c.model.family)},
      {"model.dim", std::to_string(c.model.dim)},
      {"model.init", to_string(c.init)},
      {"model.init.std", num(c.init_std)},
      {"model.init.a", num(c.init_a)},
      {"model.init.b", num(c.init_b)},
      {"train.strategy", to_string(c.strategy.kind)},
      {"train.negsamp.subjects", std::to_string(c.strategy.subject_samples)},
      {"train.negsamp.objects", std::to_string(c.strategy.object_samples)},
      {"train.loss", to_string(c.loss.kind)},
      {"train.loss.margin", num(c.loss.margin)},
      {"train.optimizer", to_string(c.optimizer.kind)},
      {"train.lr", num(c.optimizer.lr)},
      {"train.optimizer.beta1", num(c.optimizer.beta1)},
      {"train.optimizer.beta2", num(c.optimizer.beta2)},
      {"train.optimizer.eps", num(c.optimizer.eps)},
      {"train.optimizer.rho", num(c.optimizer.rho)},
      {"train.batch_size", std::to_string(c.batch_size)},
      {"train.dropout.entity", num(c.dropout.entity)},
      {"train.dropout.relation", num(c.dropout.relation)},
      {"train.reg.weight", num(c.reg.weight)},
      {"train.reg.p", std::to_string(c.reg.p)},
      {"train.scheduler.factor", num(c.scheduler.factor)},
      {"train.scheduler.patience", std::to_string(c.scheduler.patience)},
      {"train.early_stop.first_eval", std::to_string(c.stopping.first_eval)},
      {"train.early_stop.eval_every", std::to_string(c.stopping.eval_every)},
      {"train.early_stop.patience", std::to_string(c.stopping.patience)},
      {"train.early_stop.min_epochs", std::to_string(c.stopping.min_epochs)},
      {"train.early_stop.max_epochs", std::to_string(c.stopping.max_epochs)},
      {"train.early_stop.mode", to_string(c.stopping.mode)},
      {"train.early_stop.threshold", num(c.stopping.threshold)},
      {"train.seed", std::to_string(c.seed)},
      {"train.precision", c.double_precision ? "float64" : "float32"},
  };
}

inline TrainConfig apply_settings(TrainConfig c, const KeyValues& settings) {
  for (const auto& [k, v] : settings) apply_setting(c, k, v);
  c.validate();
  return c;
}

inline TrainConfig parse_train_config(std::string_view content, const std::string& source = "config") {
  return apply_settings(TrainConfig{}, parse_key_values(content, source));
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(text::read_file(path), path.string());
}

inline std::uint64_t config_digest(const TrainConfig& c) { return text::fnv1a(format_key_values(to_key_values(c))); }

// ---------------------------------------------------------------------------
// Target assembly

struct TargetRow {
  Query query;
  Side side = Side::Object;
  std::vector<EntityId> candidates;      // empty: every entity, in id order
  std::vector<std::uint32_t> positives;  // sorted positions into the candidate list
};

struct Targets {
  std::size_t entity_count = 0;
  std::vector<TargetRow> rows;
  std::size_t collisions_kept = 0;  // negative samples still colliding after the attempt cap

  std::size_t candidate_count(const TargetRow& row) const {
    return row.candidates.empty() ? entity_count : row.candidates.size();
  }
};

inline constexpr int kCorruptionAttempts = 50;

inline Targets assemble_targets(const TrainStrategy& strategy, std::span<const Triple> batch, const TripleStore& train,
                                Rng& rng) {
  if (batch.empty()) fail(ErrorKind::EmptyBatch, "batch has no triples");
  Targets out;
  out.entity_count = train.entity_count();
  const std::size_t n = out.entity_count;
  const auto ids = [](std::span<const EntityId> es) {
    std::vector<std::uint32_t> v;
    v.reserve(es.size());
    for (auto e : es) v.push_back(e.value);
    return v;
  };
  switch (strategy.kind) {
    case StrategyKind::OneVsAll:
      for (const auto& t : batch) {
        out.rows.push_back({{t.subject, t.predicate}, Side::Object, {}, {t.object.value}});
        out.rows.push_back({{t.object, t.predicate}, Side::Subject, {}, {t.subject.value}});
      }
      break;
    case StrategyKind::KVsAll: {
      std::vector<std::pair<std::uint32_t, std::uint32_t>> sp, po;
      for (const auto& t : batch) {
        const std::pair a{t.subject.value, t.predicate.value};
        if (std::find(sp.begin(), sp.end(), a) == sp.end()) sp.push_back(a);
        const std::pair b{t.object.value, t.predicate.value};
        if (std::find(po.begin(), po.end(), b) == po.end()) po.push_back(b);
      }
      for (auto [s, p] : sp) {
        out.rows.push_back(
            {{EntityId{s}, RelationId{p}}, Side::Object, {}, ids(train.objects_of(EntityId{s}, RelationId{p}))});
      }
      for (auto [o, p] : po) {
        out.rows.push_back(
            {{EntityId{o}, RelationId{p}}, Side::Subject, {}, ids(train.subjects_of(RelationId{p}, EntityId{o}))});
      }
      for (const auto& row : out.rows) {
        if (row.positives.empty()) fail(ErrorKind::EmptyBatch, "KvsAll key has no training completion");
      }
      break;
    }
    case StrategyKind::NegSampling:
      for (const auto& t : batch) {
        for (const Side side : {Side::Object, Side::Subject}) {
          const std::size_t k = side == Side::Object ? strategy.object_samples : strategy.subject_samples;
          TargetRow row{side == Side::Object ? Query{t.subject, t.predicate} : Query{t.object, t.predicate},
                        side,
                        {side == Side::Object ? t.object : t.subject},
                        {0}};
          for (std::size_t i = 0; i < k; ++i) {
            EntityId c{};
            bool clean = false;
            for (int attempt = 0; attempt < kCorruptionAttempts && !clean; ++attempt) {
              c = EntityId{static_cast<std::uint32_t>(rng.index(n))};
              const Triple corrupted = side == Side::Object ? Triple{t.subject, t.predicate, c}
                                                            : Triple{c, t.predicate, t.object};
              clean = !train.exists(corrupted);
            }
            if (!clean) ++out.collisions_kept;
            row.candidates.push_back(c);
          }
          out.rows.push_back(std::move(row));
        }
      }
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss and gradients

/// Gradient rows for the touched subset of one parameter table.
struct RowGradients {
  std::size_t dim = 0;
  std::vector<std::uint32_t> ids;
  std::vector<double> values;  // ids.size() x dim

  std::span<const double> row(std::size_t k) const { return {values.data() + k * dim, dim}; }
  std::span<double> row(std::size_t k) { return {values.data() + k * dim, dim}; }
};

struct LossGradients {
  double loss = 0.0;
  RowGradients entity;
  RowGradients relation;
};

namespace detail {

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

/// Touched rows of one table: their effective (dropped-out) values in double
/// and the per-component multipliers needed to map gradients back.
struct TouchedRows {
  std::vector<std::int64_t> slot;  // table row -> slot or -1
  std::vector<std::uint32_t> ids;
  std::vector<double> values;
  std::vector<double> scale;  // empty without dropout
  std::size_t dim = 0;

  void touch(std::uint32_t id) {
    if (slot[id] < 0) {
      slot[id] = static_cast<std::int64_t>(ids.size());
      ids.push_back(id);
    }
  }
  std::span<const double> at(std::uint32_t id) const {
    return {values.data() + static_cast<std::size_t>(slot[id]) * dim, dim};
  }

  template <typename Real>
  void load(const Matrix<Real>& table, double drop, Rng* rng) {
    values.resize(ids.size() * dim);
    const bool dropout = rng != nullptr && drop > 0.0;
    if (dropout) scale.resize(values.size());
    const double keep_scale = 1.0 / (1.0 - drop);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto src = table.row(ids[k]);
      for (std::size_t c = 0; c < dim; ++c) {
        const std::size_t i = k * dim + c;
        double m = 1.0;
        if (dropout) {
          m = rng->bernoulli(drop) ? 0.0 : keep_scale;
          scale[i] = m;
        }
        values[i] = static_cast<double>(src[c]) * m;
      }
    }
  }
};

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double power_abs(double v, int p) {
  double r = 1.0;
  const double a = std::abs(v);
  for (int i = 0; i < p; ++i) r *= a;
  return r;
}

template <typename Real>
void add_regulariser(const Matrix<Real>& table, const std::vector<std::uint32_t>& ids, const RegSpec& reg,
                     double& loss, RowGradients& grads) {
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto v = table.row(ids[k]);
    auto g = grads.row(k);
    for (std::size_t c = 0; c < v.size(); ++c) {
      const double x = static_cast<double>(v[c]);
      loss += reg.weight * power_abs(x, reg.p);
      if (x != 0.0) g[c] += reg.weight * reg.p * power_abs(x, reg.p - 1) * (x > 0.0 ? 1.0 : -1.0);
    }
  }
}

}  // namespace detail

/// Scores every target row, returns the loss and its gradient with respect
/// to each touched embedding row. Passing `rng == nullptr` disables dropout.
template <typename Real>
LossGradients loss_value_and_grads(const ModelParams<Real>& params, const Targets& targets, const LossSpec& loss,
                                   const DropoutSpec& dropout, const RegSpec& reg, Rng* rng) {
  if (targets.rows.empty()) fail(ErrorKind::EmptyBatch, "no target rows");
  const std::size_t n = params.entity_count();
  const std::size_t d = params.spec.dim;
  const ModelFamily family = params.spec.family;
  if (targets.entity_count != n) fail(ErrorKind::DimensionMismatch, "targets built for a different entity count");

  detail::TouchedRows ent{std::vector<std::int64_t>(n, -1), {}, {}, {}, d};
  detail::TouchedRows rel{std::vector<std::int64_t>(params.relation_count(), -1), {}, {}, {}, d};
  const bool dense = std::any_of(targets.rows.begin(), targets.rows.end(),
                                 [](const TargetRow& r) { return r.candidates.empty(); });
  if (dense) {
    for (std::uint32_t e = 0; e < n; ++e) ent.touch(e);
  }
  std::size_t entries = 0;
  std::size_t pairs = 0;
  for (const auto& row : targets.rows) {
    if (row.query.entity.value >= n || row.query.relation.value >= params.relation_count()) {
      fail(ErrorKind::IdOutOfRange, "target query outside the parameter tables");
    }
    ent.touch(row.query.entity.value);
    rel.touch(row.query.relation.value);
    for (auto c : row.candidates) {
      if (c.value >= n) fail(ErrorKind::IdOutOfRange, "candidate " + std::to_string(c.value));
      ent.touch(c.value);
    }
    const std::size_t k = targets.candidate_count(row);
    if (k == 0) fail(ErrorKind::EmptyBatch, "target row without candidates");
    entries += k;
    pairs += row.positives.size() * (k - row.positives.size());
  }
  ent.load(params.entity, dropout.entity, rng);
  rel.load(params.relation, dropout.relation, rng);

  std::vector<double> grad_ent(ent.values.size(), 0.0);
  std::vector<double> grad_rel(rel.values.size(), 0.0);
  const auto grad_ent_row = [&](std::uint32_t id) {
    return std::span<double>(grad_ent.data() + static_cast<std::size_t>(ent.slot[id]) * d, d);
  };
  const auto grad_rel_row = [&](std::uint32_t id) {
    return std::span<double>(grad_rel.data() + static_cast<std::size_t>(rel.slot[id]) * d, d);
  };

  const double rows = static_cast<double>(targets.rows.size());
  double total = 0.0;
  std::vector<double> q(d), gq(d), tmp(d), x, dx;
  std::vector<char> label;
  for (const auto& row : targets.rows) {
    const std::size_t k = targets.candidate_count(row);
    const auto candidate = [&](std::size_t j) {
      return row.candidates.empty() ? static_cast<std::uint32_t>(j) : row.candidates[j].value;
    };
    const auto anchor = ent.at(row.query.entity.value);
    const auto r = rel.at(row.query.relation.value);
    if (row.side == Side::Object) {
      scorer::object_query<double>(family, anchor, r, q);
    } else {
      scorer::subject_query<double>(family, r, anchor, q);
    }
    x.assign(k, 0.0);
    dx.assign(k, 0.0);
    label.assign(k, 0);
    for (auto p : row.positives) {
      if (p >= k) fail(ErrorKind::IdOutOfRange, "positive label outside candidate list");
      label[p] = 1;
    }
    for (std::size_t j = 0; j < k; ++j) x[j] = scorer::dot<double>(q, ent.at(candidate(j)));

    switch (loss.kind) {
      case LossKind::BCEWithLogits:
        for (std::size_t j = 0; j < k; ++j) {
          const double y = label[j];
          total += (detail::softplus(x[j]) - y * x[j]) / static_cast<double>(entries);
          dx[j] = (probability(x[j]) - y) / static_cast<double>(entries);
        }
        break;
      case LossKind::SoftMargin:
        for (std::size_t j = 0; j < k; ++j) {
          const double sign = label[j] ? 1.0 : -1.0;
          total += detail::softplus(-sign * x[j]) / static_cast<double>(entries);
          dx[j] = -sign * probability(-sign * x[j]) / static_cast<double>(entries);
        }
        break;
      case LossKind::KLSoftmax: {
        if (row.positives.empty()) fail(ErrorKind::EmptyBatch, "KL row without a positive label");
        const double top = *std::max_element(x.begin(), x.end());
        double z = 0.0;
        for (double v : x) z += std::exp(v - top);
        const double lse = top + std::log(z);
        const double target = 1.0 / static_cast<double>(row.positives.size());
        double row_loss = lse;
        for (std::size_t j = 0; j < k; ++j) {
          const double p_hat = label[j] ? target : 0.0;
          row_loss -= p_hat * x[j];
          dx[j] = (std::exp(x[j] - lse) - p_hat) / rows;
        }
        total += row_loss / rows;
        break;
      }
      case LossKind::MarginRanking: {
        if (pairs == 0) break;
        const double w = 1.0 / static_cast<double>(pairs);
        for (auto pi : row.positives) {
          for (std::size_t j = 0; j < k; ++j) {
            if (label[j]) continue;
            const double h = loss.margin - x[pi] + x[j];
            if (h > 0.0) {
              total += h * w;
              dx[pi] -= w;
              dx[j] += w;
            }
          }
        }
        break;
      }
    }

    std::fill(gq.begin(), gq.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      if (dx[j] == 0.0) continue;
      const auto id = candidate(j);
      detail::axpy(dx[j], ent.at(id), gq);
      detail::axpy(dx[j], q, grad_ent_row(id));
    }
    if (row.side == Side::Object) {
      scorer::subject_query<double>(family, r, gq, tmp);
      detail::axpy(1.0, tmp, grad_ent_row(row.query.entity.value));
      scorer::relation_gradient<double>(family, anchor, gq, tmp);
    } else {
      scorer::object_query<double>(family, gq, r, tmp);
      detail::axpy(1.0, tmp, grad_ent_row(row.query.entity.value));
      scorer::relation_gradient<double>(family, gq, anchor, tmp);
    }
    detail::axpy(1.0, tmp, grad_rel_row(row.query.relation.value));
  }

  LossGradients out;
  out.entity = {d, ent.ids, std::move(grad_ent)};
  out.relation = {d, rel.ids, std::move(grad_rel)};
  if (!ent.scale.empty()) {
    for (std::size_t i = 0; i < out.entity.values.size(); ++i) out.entity.values[i] *= ent.scale[i];
  }
  if (!rel.scale.empty()) {
    for (std::size_t i = 0; i < out.relation.values.size(); ++i) out.relation.values[i] *= rel.scale[i];
  }
  if (reg.weight > 0.0) {
    detail::add_regulariser(params.entity, out.entity.ids, reg, total, out.entity);
    detail::add_regulariser(params.relation, out.relation.ids, reg, total, out.relation);
  }
  if (!std::isfinite(total)) fail(ErrorKind::NumericalFault, "non-finite loss");
  out.loss = total;
  return out;
}

// ---------------------------------------------------------------------------
// Optimizers

template <typename Real>
struct SlotTable {
  Matrix<Real> first;   // Adam/Adamax m, Adagrad accumulator, Adadelta E[g^2]
  Matrix<Real> second;  // Adam v, Adamax u, Adadelta E[dx^2]
  std::vector<std::int64_t> steps;
};

template <typename Real>
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::SGD;
  SlotTable<Real> entity;
  SlotTable<Real> relation;

  static OptimizerState create(OptimizerKind kind, const ModelParams<Real>& params) {
    OptimizerState s;
    s.kind = kind;
    const auto make = [&](const Matrix<Real>& table) {
      SlotTable<Real> t;
      if (kind != OptimizerKind::SGD) t.first = Matrix<Real>(table.rows(), table.cols());
      if (kind == OptimizerKind::Adadelta || kind == OptimizerKind::Adam || kind == OptimizerKind::Adamax) {
        t.second = Matrix<Real>(table.rows(), table.cols());
      }
      if (kind == OptimizerKind::Adam || kind == OptimizerKind::Adamax) t.steps.assign(table.rows(), 0);
      return t;
    };
    s.entity = make(params.entity);
    s.relation = make(params.relation);
    return s;
  }
};

namespace detail {

inline void check_gradients(const RowGradients& g, const char* table) {
  for (std::size_t k = 0; k < g.ids.size(); ++k) {
    for (double v : g.row(k)) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::NumericalFault, std::string("non-finite gradient in ") + table + " row " + std::to_string(g.ids[k]));
      }
    }
  }
}

template <typename Real>
void step_table(SlotTable<Real>& slots, Matrix<Real>& table, const RowGradients& g, const OptimizerSpec& spec) {
  const std::size_t needed = spec.kind == OptimizerKind::SGD ? 0 : table.rows();
  if (slots.first.rows() != needed || (needed && slots.first.cols() != table.cols())) {
    fail(ErrorKind::DimensionMismatch, "optimizer state does not match the parameter table");
  }
  const double lr = spec.lr;
  for (std::size_t k = 0; k < g.ids.size(); ++k) {
    const auto id = g.ids[k];
    auto theta = table.row(id);
    const auto grad = g.row(k);
    switch (spec.kind) {
      case OptimizerKind::SGD:
        for (std::size_t c = 0; c < theta.size(); ++c) theta[c] = static_cast<Real>(theta[c] - lr * grad[c]);
        break;
      case OptimizerKind::Adagrad: {
        auto acc = slots.first.row(id);
        for (std::size_t c = 0; c < theta.size(); ++c) {
          const double a = acc[c] + grad[c] * grad[c];
          acc[c] = static_cast<Real>(a);
          theta[c] = static_cast<Real>(theta[c] - lr * grad[c] / (std::sqrt(a) + spec.eps));
        }
        break;
      }
      case OptimizerKind::Adadelta: {
        auto sq = slots.first.row(id);
        auto delta = slots.second.row(id);
        for (std::size_t c = 0; c < theta.size(); ++c) {
          const double s = spec.rho * sq[c] + (1.0 - spec.rho) * grad[c] * grad[c];
          const double step = std::sqrt(delta[c] + spec.eps) / std::sqrt(s + spec.eps) * grad[c];
          sq[c] = static_cast<Real>(s);
          delta[c] = static_cast<Real>(spec.rho * delta[c] + (1.0 - spec.rho) * step * step);
          theta[c] = static_cast<Real>(theta[c] - lr * step);
        }
        break;
      }
      case OptimizerKind::Adam: {
        auto m = slots.first.row(id);
        auto v = slots.second.row(id);
        const auto t = static_cast<double>(++slots.steps[id]);
        const double c1 = 1.0 - std::pow(spec.beta1, t);
        const double c2 = 1.0 - std::pow(spec.beta2, t);
        for (std::size_t c = 0; c < theta.size(); ++c) {
          const double mc = spec.beta1 * m[c] + (1.0 - spec.beta1) * grad[c];
          const double vc = spec.beta2 * v[c] + (1.0 - spec.beta2) * grad[c] * grad[c];
          m[c] = static_cast<Real>(mc);
          v[c] = static_cast<Real>(vc);
          theta[c] = static_cast<Real>(theta[c] - lr * (mc / c1) / (std::sqrt(vc / c2) + spec.eps));
        }
        break;
      }
      case OptimizerKind::Adamax: {
        auto m = slots.first.row(id);
        auto u = slots.second.row(id);
        const auto t = static_cast<double>(++slots.steps[id]);
        const double c1 = 1.0 - std::pow(spec.beta1, t);
        for (std::size_t c = 0; c < theta.size(); ++c) {
          const double mc = spec.beta1 * m[c] + (1.0 - spec.beta1) * grad[c];
          const double uc = std::max(spec.beta2 * u[c], std::abs(grad[c]) + spec.eps);
          m[c] = static_cast<Real>(mc);
          u[c] = static_cast<Real>(uc);
          theta[c] = static_cast<Real>(theta[c] - (lr / c1) * mc / uc);
        }
        break;
      }
    }
  }
}

}  // namespace detail

/// Updates only the rows present in `grads`; every other row and its slots
/// are left untouched.
template <typename Real>
void optimizer_step(OptimizerState<Real>& state, ModelParams<Real>& params, const LossGradients& grads,
                    const OptimizerSpec& spec) {
  if (state.kind != spec.kind) fail(ErrorKind::InvalidConfig, "optimizer state built for a different optimizer");
  detail::check_gradients(grads.entity, "entity");
  detail::check_gradients(grads.relation, "relation");
  detail::step_table(state.entity, params.entity, grads.entity, spec);
  detail::step_table(state.relation, params.relation, grads.relation, spec);
}

template <typename Real>
void add_optimizer_state(Checkpoint& c, const OptimizerState<Real>& s) {
  const std::int64_t kind = static_cast<std::int64_t>(s.kind);
  c.add_ints("optimizer.kind", std::span(&kind, 1));
  for (const auto& [prefix, table] : {std::pair{"optimizer.entity", &s.entity}, std::pair{"optimizer.relation", &s.relation}}) {
    if (table->first.size()) c.add_matrix(std::string(prefix) + ".first", table->first);
    if (table->second.size()) c.add_matrix(std::string(prefix) + ".second", table->second);
    if (!table->steps.empty()) c.add_ints(std::string(prefix) + ".steps", table->steps);
  }
}

// ---------------------------------------------------------------------------
// Scheduling and early stopping

/// Multiplies the rate by `factor` once `patience` evaluations in a row fail
/// to improve on the best metric.
struct PlateauScheduler {
  SchedulerSpec spec;
  double lr = 0.0;
  std::optional<double> best;
  int bad = 0;

  double update(double metric) {
    if (!best || metric > *best) {
      best = metric;
      bad = 0;
    } else if (++bad >= spec.patience) {
      lr *= spec.factor;
      bad = 0;
    }
    return lr;
  }
};

struct EarlyStopState {
  std::optional<double> best;
  int non_improving = 0;
  int checks = 0;
};

struct StopDecision {
  bool stop = false;
  std::string reason;
};

inline bool is_eval_epoch(const EarlyStopSpec& spec, int epoch) {
  return epoch >= spec.first_eval && (epoch - spec.first_eval) % spec.eval_every == 0;
}

inline StopDecision early_stop_update(EarlyStopState& state, const EarlyStopSpec& spec, int epoch, double metric) {
  ++state.checks;
  if (!state.best) {
    state.best = metric;
    if (spec.mode == CountingMode::Inclusive && metric <= spec.threshold) state.non_improving = 1;
  } else if (metric > *state.best) {
    state.best = metric;
    state.non_improving = 0;
  } else {
    ++state.non_improving;
  }
  if (epoch >= spec.max_epochs) return {true, "max_epochs"};
  if (state.non_improving >= spec.patience && epoch >= spec.min_epochs) return {true, "patience"};
  return {};
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double seconds = 0.0;
  double lr = 0.0;
  std::optional<double> valid_mrr;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string stop_reason;
  std::size_t collisions_kept = 0;

  std::string csv() const {
    std::string out = "epoch,loss,seconds,lr,valid_mrr\n";
    for (const auto& e : epochs) {
      out += std::to_string(e.epoch) + "," + text::exact(e.loss) + "," + text::fixed6(e.seconds) + "," +
             text::exact(e.lr) + "," + (e.valid_mrr ? text::exact(*e.valid_mrr) : std::string()) + "\n";
    }
    return out;
  }

  static TrainLog parse_csv(std::string_view content) {
    TrainLog log;
    std::size_t line_no = 0;
    for (const auto& line : text::split(content, '\n')) {
      ++line_no;
      if (line_no == 1 || text::trim(line).empty()) continue;
      const auto f = text::split(text::trim(line), ',');
      if (f.size() != 5) fail(ErrorKind::MalformedRow, "training log line " + std::to_string(line_no));
      EpochRecord r;
      const auto epoch = text::parse_int<int>(f[0]);
      const auto loss = text::parse_double(f[1]);
      const auto secs = text::parse_double(f[2]);
      const auto lr = text::parse_double(f[3]);
      if (!epoch || !loss || !secs || !lr) fail(ErrorKind::MalformedRow, "training log line " + std::to_string(line_no));
      r.epoch = *epoch;
      r.loss = *loss;
      r.seconds = *secs;
      r.lr = *lr;
      if (!f[4].empty()) r.valid_mrr = text::parse_double(f[4]);
      log.epochs.push_back(r);
    }
    return log;
  }
};

struct TrainOutput {
  std::optional<std::filesystem::path> dir;  // train_log.csv and final.ckpt go here
  bool every_epoch = false;                  // also epoch_%05d.ckpt
};

template <typename Real>
struct TrainResult {
  ModelParams<Real> params;
  TrainLog log;
};

template <typename Real>
using ValidMetric = std::function<double(const ModelParams<Real>&)>;

inline std::string epoch_checkpoint_name(int epoch) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "epoch_%05d.ckpt", epoch);
  return buffer;
}

/// Filtered MRR of the validation split, filtered against train and valid.
template <typename Real>
double valid_mrr(const ModelParams<Real>& params, const DatasetBundle& bundle) {
  if (bundle.valid.empty()) fail(ErrorKind::EmptyEvaluation, "validation split is empty");
  const std::vector<const TripleStore*> filters{&bundle.train, &bundle.valid};
  return ranking_metrics(rank_all(params, bundle.valid.triples(), filters)).mrr;
}

/// Entity initialiser from the config. Feature initialisation projects the
/// mono side-effect matrix onto its leading singular directions, scaled to
/// the Xavier-normal spread, and zero-pads beyond the feature rank.
inline InitSpec entity_initialiser(const TrainConfig& config, const DatasetBundle& bundle) {
  switch (config.init) {
    case InitKind::Normal: return NormalInit{config.init_std};
    case InitKind::Uniform: return UniformInit{config.init_a, config.init_b};
    case InitKind::XavierNormal: return XavierNormalInit{};
    case InitKind::XavierUniform: return XavierUniformInit{};
    case InitKind::Features: break;
  }
  if (!bundle.features || bundle.features->rows.empty() || bundle.features->column_count == 0) {
    fail(ErrorKind::InvalidConfig, "feature initialisation needs a dataset with mono features");
  }
  const auto& features = *bundle.features;
  const std::size_t d = config.model.dim;
  const std::size_t usable = std::min({d, features.rows.size(), features.column_count});
  ReduceOptions options;
  options.target_std = xavier_normal_std(bundle.vocabulary.entity_count(), d);
  const auto reduced = reduce_features(features, usable, options);
  FeatureInit init{reduced.rows, Matrix<double>(reduced.rows.size(), d)};
  for (std::size_t r = 0; r < reduced.rows.size(); ++r) {
    for (std::size_t c = 0; c < usable; ++c) init.rows(r, c) = reduced.values(r, c);
  }
  return init;
}

inline InitSpec relation_initialiser(const TrainConfig& config) {
  switch (config.init) {
    case InitKind::Normal: return NormalInit{config.init_std};
    case InitKind::Uniform: return UniformInit{config.init_a, config.init_b};
    case InitKind::XavierUniform: return XavierUniformInit{};
    default: return XavierNormalInit{};
  }
}

template <typename Real>
Checkpoint training_checkpoint(const ModelParams<Real>& params, const OptimizerState<Real>& state, int epoch,
                               std::uint64_t digest) {
  Checkpoint c;
  add_model(c, params);
  add_optimizer_state(c, state);
  const std::int64_t e = epoch;
  c.add_ints(checkpoint_names::kEpoch, std::span(&e, 1));
  const auto dg = static_cast<std::int64_t>(digest);
  c.add_ints(checkpoint_names::kDigest, std::span(&dg, 1));
  return c;
}

template <typename Real>
TrainResult<Real> run_training(const TrainConfig& config, const DatasetBundle& bundle, const TrainOutput& output = {},
                               ValidMetric<Real> metric = {}) {
  config.validate();
  if (bundle.train.empty()) fail(ErrorKind::EmptyGraph, "training split is empty");
  if (!metric && !bundle.valid.empty()) {
    metric = [&bundle](const ModelParams<Real>& p) { return valid_mrr(p, bundle); };
  }
  if (output.dir) std::filesystem::create_directories(*output.dir);

  const std::size_t n = bundle.vocabulary.entity_count();
  const std::size_t m = bundle.vocabulary.relation_count();
  TrainResult<Real> result{init_params<Real>(config.model, n, m, entity_initialiser(config, bundle),
                                             relation_initialiser(config), mix_seed(config.seed, 1)),
                           {}};
  auto& params = result.params;
  auto& log = result.log;
  auto state = OptimizerState<Real>::create(config.optimizer.kind, params);
  PlateauScheduler scheduler{config.scheduler, config.optimizer.lr, std::nullopt, 0};
  EarlyStopState stopping;
  const std::uint64_t digest = config_digest(config);
  Rng order_rng(mix_seed(config.seed, 2));
  Rng noise_rng(mix_seed(config.seed, 3));

  const auto train = bundle.train.triples();
  std::vector<std::uint32_t> order(train.size());
  std::iota(order.begin(), order.end(), 0u);
  std::vector<Triple> batch;

  const auto flush_log = [&] {
    if (output.dir) text::write_file_atomic(*output.dir / "train_log.csv", log.csv());
  };

  for (int epoch = 1; epoch <= config.stopping.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    order_rng.shuffle(std::span(order));
    OptimizerSpec step_spec = config.optimizer;
    step_spec.lr = scheduler.lr;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(train[order[i]]);
      const auto targets = assemble_targets(config.strategy, batch, bundle.train, noise_rng);
      log.collisions_kept += targets.collisions_kept;
      const auto grads = loss_value_and_grads(params, targets, config.loss, config.dropout, config.reg, &noise_rng);
      optimizer_step(state, params, grads, step_spec);
      loss_sum += grads.loss;
      ++batches;
    }
    EpochRecord record{epoch, loss_sum / static_cast<double>(batches), 0.0, step_spec.lr, std::nullopt};
    StopDecision decision;
    if (metric && is_eval_epoch(config.stopping, epoch)) {
      const double value = metric(params);
      record.valid_mrr = value;
      scheduler.update(value);
      decision = early_stop_update(stopping, config.stopping, epoch, value);
    } else if (epoch >= config.stopping.max_epochs) {
      decision = {true, "max_epochs"};
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log.epochs.push_back(record);
    if (decision.stop) log.stop_reason = decision.reason;
    flush_log();
    if (output.dir && output.every_epoch) {
      training_checkpoint(params, state, epoch, digest).save(*output.dir / epoch_checkpoint_name(epoch));
    }
    if (decision.stop) break;
  }
  if (log.stop_reason.empty()) log.stop_reason = "max_epochs";
  flush_log();
  if (output.dir) {
    training_checkpoint(params, state, log.epochs.back().epoch, digest).save(*output.dir / "final.ckpt");
  }
  return result;
}

}  // namespace kgf

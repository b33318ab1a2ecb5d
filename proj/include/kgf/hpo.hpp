#pragma once

// Two-phase hyperparameter search: a Sobol design, then GP-EI proposals.

#include <fcntl.h>
#include <unistd.h>

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kgf/config.hpp"
#include "kgf/error.hpp"
#include "kgf/gp.hpp"
#include "kgf/rng.hpp"
#include "kgf/sobol.hpp"
#include "kgf/text.hpp"
#include "kgf/training.hpp"

namespace kgf {

// ---------------------------------------------------------------------------
// Search space

struct Categorical {
  std::vector<std::string> options;
};

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  bool log2 = false;  // lo and hi are powers of two; exponents are interpolated
};

struct FloatRange {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;
};

using Domain = std::variant<Categorical, IntRange, FloatRange>;

/// Active only when `parameter` decoded to one of `values`.
struct Condition {
  std::string parameter;
  std::vector<std::string> values;
};

struct Parameter {
  std::string name;
  Domain domain;
  std::optional<Condition> when;
  std::string default_value;  // used while inactive
};

using Assignment = KeyValues;

inline const std::string* find_value(const Assignment& a, const std::string& key) {
  for (const auto& [k, v] : a) {
    if (k == key) return &v;
  }
  return nullptr;
}

namespace hpo_detail {

inline bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

inline int exponent_of(std::int64_t v) {
  int e = 0;
  while ((std::int64_t{1} << e) < v) ++e;
  return e;
}

inline double clamp_unit(double u) { return std::clamp(u, 0.0, 1.0); }

}  // namespace hpo_detail

class SearchSpace {
 public:
  SearchSpace() = default;
  explicit SearchSpace(std::vector<Parameter> params) : params_(std::move(params)) { validate(); }

  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t dimension() const { return params_.size(); }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return i;
    }
    return std::nullopt;
  }

  /// Width of the GP encoding: one column per categorical option, one per numeric parameter.
  std::size_t encoded_dimension() const {
    std::size_t n = 0;
    for (const auto& p : params_) {
      n += std::holds_alternative<Categorical>(p.domain) ? std::get<Categorical>(p.domain).options.size() : 1;
    }
    return n;
  }

  void validate() const {
    if (params_.empty()) fail(ErrorKind::InvalidConfig, "search space has no parameters");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& p = params_[i];
      for (std::size_t j = 0; j < i; ++j) {
        if (params_[j].name == p.name) fail(ErrorKind::InvalidConfig, "duplicate parameter '" + p.name + "'");
      }
      std::visit(
          [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Categorical>) {
              if (d.options.empty()) fail(ErrorKind::InvalidConfig, p.name + ": no categorical options");
            } else if constexpr (std::is_same_v<T, IntRange>) {
              if (d.lo > d.hi) fail(ErrorKind::InvalidConfig, p.name + ": empty integer range");
              if (d.log2 && (!hpo_detail::is_power_of_two(d.lo) || !hpo_detail::is_power_of_two(d.hi))) {
                fail(ErrorKind::InvalidConfig, p.name + ": log2 bounds must be powers of two");
              }
            } else {
              if (!(d.lo <= d.hi)) fail(ErrorKind::InvalidConfig, p.name + ": empty float range");
              if (d.log && !(d.lo > 0.0)) fail(ErrorKind::InvalidConfig, p.name + ": log range needs lo > 0");
            }
          },
          p.domain);
      if (p.when) {
        // Parents must precede children, which also rules out cycles.
        bool earlier = false;
        for (std::size_t j = 0; j < i; ++j) earlier |= params_[j].name == p.when->parameter;
        if (!earlier) {
          fail(ErrorKind::InvalidConfig, p.name + ": condition on '" + p.when->parameter + "' which is not declared before it");
        }
        if (p.when->values.empty()) fail(ErrorKind::InvalidConfig, p.name + ": condition lists no values");
        if (p.default_value.empty()) fail(ErrorKind::InvalidConfig, p.name + ": conditional parameter needs a default");
      }
    }
  }

 private:
  std::vector<Parameter> params_;
};

inline std::string decode_value(const Domain& domain, double u) {
  u = hpo_detail::clamp_unit(u);
  if (const auto* c = std::get_if<Categorical>(&domain)) {
    const auto k = c->options.size();
    return c->options[std::min(static_cast<std::size_t>(std::floor(u * static_cast<double>(k))), k - 1)];
  }
  if (const auto* r = std::get_if<IntRange>(&domain)) {
    if (r->log2) {
      const int a = hpo_detail::exponent_of(r->lo), b = hpo_detail::exponent_of(r->hi);
      const auto e = static_cast<int>(std::lround(a + u * (b - a)));
      return std::to_string(std::int64_t{1} << e);
    }
    const auto span = static_cast<double>(r->hi - r->lo + 1);
    return std::to_string(std::min(r->hi, r->lo + static_cast<std::int64_t>(std::floor(u * span))));
  }
  const auto& f = std::get<FloatRange>(domain);
  if (f.log) return text::exact(std::exp(std::log(f.lo) + u * (std::log(f.hi) - std::log(f.lo))));
  return text::exact(f.lo + u * (f.hi - f.lo));
}

/// Maps a point of the unit cube to one value per parameter. Inactive
/// conditional parameters take their defaults.
inline Assignment decode_point(std::span<const double> point, const SearchSpace& space) {
  if (point.size() != space.dimension()) {
    fail(ErrorKind::DimensionMismatch, "point has " + std::to_string(point.size()) + " coordinates, space has " +
                                           std::to_string(space.dimension()));
  }
  Assignment out;
  const auto& params = space.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    bool active = true;
    if (p.when) {
      const auto* parent = find_value(out, p.when->parameter);
      active = parent && std::find(p.when->values.begin(), p.when->values.end(), *parent) != p.when->values.end();
    }
    out.emplace_back(p.name, active ? decode_value(p.domain, point[i]) : p.default_value);
  }
  return out;
}

/// Settings addressed to the trainer; keys under `hpo.` only steer the space.
inline TrainConfig apply_assignment(const TrainConfig& base, const Assignment& a) {
  TrainConfig c = base;
  for (const auto& [k, v] : a) {
    if (k.rfind("hpo.", 0) == 0) continue;
    apply_setting(c, k, v);
  }
  c.validate();
  return c;
}

inline TrainConfig decode_config(std::span<const double> point, const SearchSpace& space, const TrainConfig& base = {}) {
  return apply_assignment(base, decode_point(point, space));
}

/// GP input encoding of an assignment: one-hot categoricals, unit-scaled
/// numerics; inactive parameters encode as zeros.
inline Eigen::VectorXd encode_assignment(const Assignment& a, const SearchSpace& space) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.encoded_dimension()));
  Eigen::Index col = 0;
  for (const auto& p : space.parameters()) {
    const auto* value = find_value(a, p.name);
    bool active = value != nullptr;
    if (active && p.when) {
      const auto* parent = find_value(a, p.when->parameter);
      active = parent && std::find(p.when->values.begin(), p.when->values.end(), *parent) != p.when->values.end();
    }
    if (const auto* c = std::get_if<Categorical>(&p.domain)) {
      if (active) {
        const auto it = std::find(c->options.begin(), c->options.end(), *value);
        if (it == c->options.end()) fail(ErrorKind::InvalidConfig, p.name + ": '" + *value + "' is not an option");
        x[col + (it - c->options.begin())] = 1.0;
      }
      col += static_cast<Eigen::Index>(c->options.size());
      continue;
    }
    if (active) {
      const auto v = text::parse_double(*value);
      if (!v) fail(ErrorKind::InvalidConfig, p.name + ": '" + *value + "' is not numeric");
      double u = 0.0;
      if (const auto* r = std::get_if<IntRange>(&p.domain)) {
        if (r->log2) {
          const double a0 = hpo_detail::exponent_of(r->lo), b0 = hpo_detail::exponent_of(r->hi);
          u = b0 > a0 ? (std::log2(*v) - a0) / (b0 - a0) : 0.0;
        } else {
          u = r->hi > r->lo ? (*v - static_cast<double>(r->lo)) / static_cast<double>(r->hi - r->lo) : 0.0;
        }
      } else {
        const auto& f = std::get<FloatRange>(p.domain);
        if (f.log) {
          u = f.hi > f.lo ? (std::log(*v) - std::log(f.lo)) / (std::log(f.hi) - std::log(f.lo)) : 0.0;
        } else {
          u = f.hi > f.lo ? (*v - f.lo) / (f.hi - f.lo) : 0.0;
        }
      }
      x[col] = hpo_detail::clamp_unit(u);
    }
    ++col;
  }
  return x;
}

inline SearchSpace default_search_space() {
  const auto cat = [](std::vector<std::string> o) { return Domain{Categorical{std::move(o)}}; };
  std::vector<Parameter> p{
      {"train.optimizer", cat({"sgd", "adagrad", "adadelta", "adam", "adamax"}), {}, {}},
      {"train.loss", cat({"bce", "kl", "margin_ranking", "soft_margin"}), {}, {}},
      {"model.dim", IntRange{32, 512, true}, {}, {}},
      {"train.strategy", cat({"negsamp", "1vsAll", "KvsAll"}), {}, {}},
      {"train.negsamp.subjects", IntRange{1, 128, true}, Condition{"train.strategy", {"negsamp"}}, "1"},
      {"train.negsamp.objects", IntRange{1, 128, true}, Condition{"train.strategy", {"negsamp"}}, "1"},
      {"train.batch_size", IntRange{128, 8192, true}, {}, {}},
      {"train.lr", FloatRange{1e-4, 1.0, true}, {}, {}},
      {"train.dropout.entity", FloatRange{0.0, 0.5, false}, {}, {}},
      {"train.dropout.relation", FloatRange{0.0, 0.5, false}, {}, {}},
      {"hpo.reg_enabled", cat({"no", "yes"}), {}, {}},
      {"train.reg.weight", FloatRange{1e-12, 1e-2, true}, Condition{"hpo.reg_enabled", {"yes"}}, "0"},
      {"model.init", cat({"normal", "uniform", "xavier_normal", "xavier_uniform"}), {}, {}},
  };
  return SearchSpace(std::move(p));
}

/// `param.<name>.<field> = value`; fields are type, values, lo, hi, scale,
/// when (`parent=v1|v2`) and default. Parameters keep first-mention order.
inline SearchSpace parse_search_space(std::string_view content, const std::string& source = "space") {
  struct Fields {
    std::string name;
    std::map<std::string, std::string> f;
  };
  std::vector<Fields> order;
  for (const auto& [key, value] : parse_key_values(content, source)) {
    const auto dot = key.rfind('.');
    if (key.rfind("param.", 0) != 0 || dot == std::string::npos || dot <= 6) {
      fail(ErrorKind::InvalidConfig, source + ": unknown key '" + key + "'");
    }
    const std::string name = key.substr(6, dot - 6);
    const std::string field = key.substr(dot + 1);
    static const std::array<const char*, 7> kFields{"type", "values", "lo", "hi", "scale", "when", "default"};
    if (std::find(kFields.begin(), kFields.end(), field) == kFields.end()) {
      fail(ErrorKind::InvalidConfig, source + ": unknown field '" + field + "' for " + name);
    }
    auto it = std::find_if(order.begin(), order.end(), [&](const Fields& x) { return x.name == name; });
    if (it == order.end()) {
      order.push_back({name, {}});
      it = order.end() - 1;
    }
    it->f[field] = value;
  }
  std::vector<Parameter> params;
  for (const auto& [name, f] : order) {
    const auto get = [&](const char* field) -> std::string {
      auto it = f.find(field);
      if (it == f.end()) fail(ErrorKind::InvalidConfig, source + ": " + name + " lacks ." + field);
      return it->second;
    };
    const auto opt = [&](const char* field, std::string fallback) {
      auto it = f.find(field);
      return it == f.end() ? fallback : it->second;
    };
    const std::string type = get("type");
    const std::string scale = opt("scale", "linear");
    Parameter p{name, Categorical{}, std::nullopt, opt("default", "")};
    if (type == "categorical") {
      Categorical c;
      for (auto v : text::split(get("values"), ',')) c.options.emplace_back(text::trim(v));
      p.domain = c;
    } else if (type == "int") {
      if (scale != "linear" && scale != "log2") fail(ErrorKind::InvalidConfig, name + ": int scale is linear or log2");
      p.domain = IntRange{config_detail::to_int<std::int64_t>(name, get("lo")),
                          config_detail::to_int<std::int64_t>(name, get("hi")), scale == "log2"};
    } else if (type == "float") {
      if (scale != "linear" && scale != "log") fail(ErrorKind::InvalidConfig, name + ": float scale is linear or log");
      p.domain = FloatRange{config_detail::to_double(name, get("lo")), config_detail::to_double(name, get("hi")),
                            scale == "log"};
    } else {
      fail(ErrorKind::InvalidConfig, name + ": type must be categorical, int or float");
    }
    if (auto it = f.find("when"); it != f.end()) {
      const auto eq = it->second.find('=');
      if (eq == std::string::npos) fail(ErrorKind::InvalidConfig, name + ": when must read 'parent=v1|v2'");
      Condition c{std::string(text::trim(std::string_view(it->second).substr(0, eq))), {}};
      for (auto v : text::split(std::string_view(it->second).substr(eq + 1), '|')) c.values.emplace_back(text::trim(v));
      p.when = c;
    }
    params.push_back(std::move(p));
  }
  return SearchSpace(std::move(params));
}

inline SearchSpace load_search_space(const std::filesystem::path& path) {
  return parse_search_space(text::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Trials and journal

enum class TrialStatus { Ok, Failed };

struct TrialRecord {
  std::size_t index = 0;
  std::vector<double> point;  // empty for proposals restored from a journal
  Assignment assignment;
  TrialStatus status = TrialStatus::Failed;
  std::optional<double> outcome;  // present iff status is Ok
  double seconds = 0.0;
};

struct TrialResult {
  std::optional<double> outcome;  // nullopt or non-finite marks a failed trial
  double seconds = 0.0;
};

using TrialRunner = std::function<TrialResult(const Assignment&, std::size_t index)>;

inline std::string journal_line(const TrialRecord& r) {
  std::string line = std::to_string(r.index) + "\t" + (r.status == TrialStatus::Ok ? "ok" : "failed") + "\t" +
                     (r.outcome ? text::exact(*r.outcome) : std::string("-")) + "\t" + text::fixed6(r.seconds);
  for (const auto& [k, v] : r.assignment) line += "\t" + k + "=" + v;
  return line + "\n";
}

inline TrialRecord parse_journal_line(std::string_view line, std::size_t line_no) {
  const auto bad = [&](const std::string& why) -> TrialRecord {
    fail(ErrorKind::CorruptDataset, "journal line " + std::to_string(line_no) + ": " + why);
  };
  const auto f = text::split(line, '\t');
  if (f.size() < 4) return bad("expected index, status, outcome, seconds");
  TrialRecord r;
  const auto index = text::parse_int<std::size_t>(f[0]);
  if (!index) return bad("bad index");
  r.index = *index;
  if (f[1] == "ok") {
    r.status = TrialStatus::Ok;
    r.outcome = text::parse_double(f[2]);
    if (!r.outcome) return bad("ok trial without an outcome");
  } else if (f[1] == "failed") {
    if (f[2] != "-") return bad("failed trial with an outcome");
  } else {
    return bad("status must be ok or failed");
  }
  const auto secs = text::parse_double(f[3]);
  if (!secs) return bad("bad seconds");
  r.seconds = *secs;
  for (std::size_t i = 4; i < f.size(); ++i) {
    const auto eq = f[i].find('=');
    if (eq == std::string_view::npos) return bad("config pair without '='");
    r.assignment.emplace_back(std::string(f[i].substr(0, eq)), std::string(f[i].substr(eq + 1)));
  }
  return r;
}

/// Complete records of a journal; an unterminated final line (a write cut
/// short) is ignored.
inline std::vector<TrialRecord> read_journal(const std::filesystem::path& path) {
  std::vector<TrialRecord> out;
  if (!std::filesystem::exists(path)) return out;
  const auto content = text::read_file(path);
  std::size_t start = 0, line_no = 0;
  while (start < content.size()) {
    const auto end = content.find('\n', start);
    if (end == std::string::npos) break;
    ++line_no;
    auto rec = parse_journal_line(std::string_view(content).substr(start, end - start), line_no);
    if (rec.index != out.size()) {
      fail(ErrorKind::CorruptDataset, "journal line " + std::to_string(line_no) + ": index " +
                                          std::to_string(rec.index) + " out of sequence");
    }
    out.push_back(std::move(rec));
    start = end + 1;
  }
  return out;
}

class JournalWriter {
 public:
  explicit JournalWriter(const std::filesystem::path& path, std::size_t keep_bytes) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT, 0644);
    if (fd_ < 0) fail(ErrorKind::Io, "cannot open journal " + path.string());
    if (::ftruncate(fd_, static_cast<off_t>(keep_bytes)) != 0 || ::lseek(fd_, 0, SEEK_END) < 0) {
      ::close(fd_);
      fail(ErrorKind::Io, "cannot position journal " + path.string());
    }
  }
  JournalWriter(const JournalWriter&) = delete;
  JournalWriter& operator=(const JournalWriter&) = delete;
  ~JournalWriter() {
    if (fd_ >= 0) ::close(fd_);
  }

  void append(const TrialRecord& r) {
    const auto line = journal_line(r);
    std::size_t done = 0;
    while (done < line.size()) {
      const auto n = ::write(fd_, line.data() + done, line.size() - done);
      if (n < 0) fail(ErrorKind::Io, "journal write failed");
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) fail(ErrorKind::Io, "journal fsync failed");
  }

 private:
  int fd_ = -1;
};

// ---------------------------------------------------------------------------
// Surrogate and proposal

/// GP over encoded assignments. Failed trials enter at the worst observed outcome.
inline GaussianProcess fit_surrogate(std::span<const TrialRecord> records, const SearchSpace& space) {
  std::optional<double> worst;
  std::size_t ok = 0;
  for (const auto& r : records) {
    if (r.status == TrialStatus::Ok) {
      ++ok;
      worst = worst ? std::min(*worst, *r.outcome) : *r.outcome;
    }
  }
  if (ok < 2) fail(ErrorKind::InsufficientData, "surrogate needs two completed trials, have " + std::to_string(ok));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(space.encoded_dimension()));
  std::vector<double> y;
  for (std::size_t i = 0; i < records.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = encode_assignment(records[i].assignment, space).transpose();
    y.push_back(records[i].status == TrialStatus::Ok ? *records[i].outcome : *worst);
  }
  return GaussianProcess::fit(x, y);
}

inline constexpr std::size_t kProposalCandidates = 4096;
inline constexpr std::size_t kProposalRefinements = 16;

/// Argmax of EI over a shifted Sobol candidate set, then coordinate-wise
/// refinement of the winner. Ties keep the earliest candidate.
inline std::vector<double> suggest_next(const GaussianProcess& gp, const SearchSpace& space, double best_outcome,
                                        std::uint64_t seed) {
  const std::size_t dim = space.dimension();
  Rng rng(seed);
  std::vector<double> shift(dim);
  for (auto& s : shift) s = rng.uniform();
  const auto score = [&](std::span<const double> u) {
    return expected_improvement(gp, encode_assignment(decode_point(u, space), space), best_outcome);
  };
  SobolSequence seq(dim);
  std::vector<double> best_point;
  double best_ei = -1.0;
  for (std::size_t c = 0; c < kProposalCandidates; ++c) {
    auto u = seq.next();
    for (std::size_t j = 0; j < dim; ++j) {
      u[j] += shift[j];
      if (u[j] >= 1.0) u[j] -= 1.0;
    }
    const double ei = score(u);
    if (ei > best_ei) {
      best_ei = ei;
      best_point = std::move(u);
    }
  }
  double step = 0.25;
  for (std::size_t r = 0; r < kProposalRefinements; ++r) {
    const std::size_t j = r % dim;
    if (r > 0 && j == 0) step *= 0.5;
    for (const double direction : {-1.0, 1.0}) {
      auto u = best_point;
      u[j] = std::clamp(u[j] + direction * step, 0.0, std::nextafter(1.0, 0.0));
      const double ei = score(u);
      if (ei > best_ei) {
        best_ei = ei;
        best_point = std::move(u);
      }
    }
  }
  return best_point;
}

// ---------------------------------------------------------------------------
// Search driver

struct SearchBudget {
  std::size_t sobol = 50;
  std::size_t bayes = 50;
};

struct SearchOptions {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> journal;
  std::size_t workers = 1;
};

struct SearchResult {
  std::vector<TrialRecord> records;
  std::optional<std::size_t> best;  // index of the best ok trial
};

namespace hpo_detail {

inline TrialRecord run_trial(const TrialRunner& runner, std::size_t index, std::vector<double> point, Assignment a) {
  TrialRecord r{index, std::move(point), std::move(a), TrialStatus::Failed, std::nullopt, 0.0};
  const auto started = std::chrono::steady_clock::now();
  try {
    const auto result = runner(r.assignment, index);
    r.seconds = result.seconds;
    if (result.outcome && std::isfinite(*result.outcome)) {
      r.status = TrialStatus::Ok;
      r.outcome = result.outcome;
    }
  } catch (const std::exception&) {
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return r;
}

}  // namespace hpo_detail

inline std::optional<std::size_t> best_trial(std::span<const TrialRecord> records) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].status != TrialStatus::Ok) continue;
    if (!best || *records[i].outcome > *records[*best].outcome) best = i;
  }
  return best;
}

/// Runs (or resumes from the journal) budget.sobol design trials followed by
/// budget.bayes surrogate-guided trials. Each record is journaled as soon as
/// it and all earlier trials are complete.
inline SearchResult run_search(const SearchSpace& space, const SearchBudget& budget, const TrialRunner& runner,
                               const SearchOptions& options = {}) {
  space.validate();
  const std::size_t total = budget.sobol + budget.bayes;
  if (total == 0) fail(ErrorKind::InvalidConfig, "search budget is zero");
  SearchResult result;
  std::optional<JournalWriter> writer;
  if (options.journal) {
    result.records = read_journal(*options.journal);
    if (result.records.size() > total) {
      fail(ErrorKind::InvalidConfig, "journal already holds " + std::to_string(result.records.size()) +
                                         " trials, budget is " + std::to_string(total));
    }
    std::size_t bytes = 0;
    for (const auto& r : result.records) bytes += journal_line(r).size();
    writer.emplace(*options.journal, bytes);
  }
  const auto design = sobol_points(space.dimension(), total);
  for (std::size_t i = 0; i < std::min(result.records.size(), budget.sobol); ++i) result.records[i].point = design[i];

  const auto record = [&](TrialRecord r) {
    if (writer) writer->append(r);
    result.records.push_back(std::move(r));
  };

  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  while (result.records.size() < budget.sobol) {
    const std::size_t first = result.records.size();
    const std::size_t last = std::min(budget.sobol, first + workers);
    std::vector<std::future<TrialRecord>> running;
    for (std::size_t i = first; i < last; ++i) {
      running.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, hpo_detail::run_trial,
                                   std::cref(runner), i, design[i], decode_point(design[i], space)));
    }
    for (auto& f : running) record(f.get());
  }
  while (result.records.size() < total) {
    const std::size_t i = result.records.size();
    std::vector<double> point;
    std::size_t ok = 0;
    for (const auto& r : result.records) ok += r.status == TrialStatus::Ok;
    if (ok < 2) {
      point = design[i];
    } else {
      const auto gp = fit_surrogate(result.records, space);
      const auto best = best_trial(result.records);
      point = suggest_next(gp, space, *result.records[*best].outcome, mix_seed(options.seed, i));
    }
    auto a = decode_point(point, space);
    record(hpo_detail::run_trial(runner, i, std::move(point), std::move(a)));
  }
  result.best = best_trial(result.records);
  return result;
}

}  // namespace kgf

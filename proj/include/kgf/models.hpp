#pragma once

// DistMult, ComplEx and SimplE scorers over dense embedding tables.
//
// Every scorer here is trilinear in (subject, relation, object), so each is
// expressed through three linear forms:
//   score(s, r, o) = <object_query(s, r), o> = <subject_query(r, o), s>
//   d score / d r  = relation_gradient(s, o)
// Scoring a triple and scoring a row against all entities share these forms,
// which makes the two paths agree to the last bit.
//
// Half layouts (contiguous halves, h = dim / 2):
//   ComplEx  entity and relation: [0, h) real part, [h, dim) imaginary part.
//   SimplE   entity: [0, h) head role, [h, dim) tail role;
//            relation: [0, h) forward, [h, dim) inverse.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "kgf/core.hpp"
#include "kgf/error.hpp"
#include "kgf/matrix.hpp"
#include "kgf/rng.hpp"

namespace kgf {

enum class ModelFamily { DistMult = 0, ComplEx = 1, SimplE = 2 };

inline const char* to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::DistMult: return "distmult";
    case ModelFamily::ComplEx: return "complex";
    case ModelFamily::SimplE: return "simple";
  }
  return "?";
}

struct ModelSpec {
  ModelFamily family = ModelFamily::SimplE;
  std::size_t dim = 256;

  void validate() const {
    if (dim < 2) fail(ErrorKind::InvalidConfig, "embedding dim must be at least 2");
    if (family != ModelFamily::DistMult && dim % 2 != 0) {
      fail(ErrorKind::InvalidConfig, std::string(to_string(family)) + " needs an even embedding dim");
    }
  }

  bool operator==(const ModelSpec&) const = default;
};

template <typename Real>
struct ModelParams {
  ModelSpec spec;
  Matrix<Real> entity;    // N x dim
  Matrix<Real> relation;  // M x dim

  std::size_t entity_count() const { return entity.rows(); }
  std::size_t relation_count() const { return relation.rows(); }
};

namespace scorer {

template <typename Real>
Real dot(std::span<const Real> a, std::span<const Real> b) {
  Real sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

/// q with score(s, r, o) = <q, o>.
template <typename Real>
void object_query(ModelFamily family, std::span<const Real> s, std::span<const Real> r, std::span<Real> q) {
  const std::size_t d = q.size();
  const std::size_t h = d / 2;
  switch (family) {
    case ModelFamily::DistMult:
      for (std::size_t i = 0; i < d; ++i) q[i] = s[i] * r[i];
      break;
    case ModelFamily::ComplEx:
      // Re(s r conj(o)) = Re(o) Re(s r) + Im(o) Im(s r)
      for (std::size_t i = 0; i < h; ++i) {
        const Real a = s[i], b = s[h + i], c = r[i], e = r[h + i];
        q[i] = a * c - b * e;
        q[h + i] = a * e + b * c;
      }
      break;
    case ModelFamily::SimplE:
      for (std::size_t i = 0; i < h; ++i) {
        q[i] = Real(0.5) * r[h + i] * s[h + i];  // pairs with head(o)
        q[h + i] = Real(0.5) * s[i] * r[i];      // pairs with tail(o)
      }
      break;
  }
}

/// q with score(s, r, o) = <q, s>.
template <typename Real>
void subject_query(ModelFamily family, std::span<const Real> r, std::span<const Real> o, std::span<Real> q) {
  const std::size_t d = q.size();
  const std::size_t h = d / 2;
  switch (family) {
    case ModelFamily::DistMult:
      for (std::size_t i = 0; i < d; ++i) q[i] = r[i] * o[i];
      break;
    case ModelFamily::ComplEx:
      for (std::size_t i = 0; i < h; ++i) {
        const Real c = r[i], e = r[h + i], f = o[i], g = o[h + i];
        q[i] = c * f + e * g;
        q[h + i] = c * g - e * f;
      }
      break;
    case ModelFamily::SimplE:
      for (std::size_t i = 0; i < h; ++i) {
        q[i] = Real(0.5) * r[i] * o[h + i];      // pairs with head(s)
        q[h + i] = Real(0.5) * o[i] * r[h + i];  // pairs with tail(s)
      }
      break;
  }
}

/// g = d score(s, r, o) / d r.
template <typename Real>
void relation_gradient(ModelFamily family, std::span<const Real> s, std::span<const Real> o, std::span<Real> g) {
  const std::size_t d = g.size();
  const std::size_t h = d / 2;
  switch (family) {
    case ModelFamily::DistMult:
      for (std::size_t i = 0; i < d; ++i) g[i] = s[i] * o[i];
      break;
    case ModelFamily::ComplEx:
      for (std::size_t i = 0; i < h; ++i) {
        const Real a = s[i], b = s[h + i], f = o[i], e = o[h + i];
        g[i] = a * f + b * e;
        g[h + i] = a * e - b * f;
      }
      break;
    case ModelFamily::SimplE:
      for (std::size_t i = 0; i < h; ++i) {
        g[i] = Real(0.5) * s[i] * o[h + i];
        g[h + i] = Real(0.5) * o[i] * s[h + i];
      }
      break;
  }
}

}  // namespace scorer

namespace detail {

template <typename Real>
void check_ids(const ModelParams<Real>& params, const Triple& t) {
  if (t.subject.value >= params.entity_count() || t.object.value >= params.entity_count()) {
    fail(ErrorKind::IdOutOfRange, "entity id beyond embedding table");
  }
  if (t.predicate.value >= params.relation_count()) fail(ErrorKind::IdOutOfRange, "relation id beyond embedding table");
}

template <typename Real>
void check_finite(Real value, const char* what) {
  if (!std::isfinite(static_cast<double>(value))) fail(ErrorKind::NumericalFault, std::string("non-finite ") + what);
}

}  // namespace detail

template <typename Real>
Real score_triple(const ModelParams<Real>& params, const Triple& t) {
  detail::check_ids(params, t);
  if (params.spec.family == ModelFamily::DistMult) {
    const auto s = params.entity.row(t.subject.value), r = params.relation.row(t.predicate.value),
               o = params.entity.row(t.object.value);
    Real score = 0;
    for (std::size_t i = 0; i < s.size(); ++i) score += r[i] * (s[i] * o[i]);
    detail::check_finite(score, "score");
    return score;
  }
  std::vector<Real> q(params.spec.dim);
  scorer::object_query<Real>(params.spec.family, params.entity.row(t.subject.value), params.relation.row(t.predicate.value), q);
  const Real score = scorer::dot<Real>(q, params.entity.row(t.object.value));
  detail::check_finite(score, "score");
  return score;
}

template <typename Real>
std::vector<Real> score_triples(const ModelParams<Real>& params, std::span<const Triple> batch) {
  std::vector<Real> out;
  out.reserve(batch.size());
  for (const auto& t : batch) out.push_back(score_triple(params, t));
  return out;
}

enum class Side { Object, Subject };

/// A partial triple: (entity, relation, ?) on the object side or
/// (?, relation, entity) on the subject side.
struct Query {
  EntityId entity;
  RelationId relation;
};

template <typename Real>
std::vector<Real> make_query(const ModelParams<Real>& params, const Query& query, Side side) {
  if (query.entity.value >= params.entity_count() || query.relation.value >= params.relation_count()) {
    fail(ErrorKind::IdOutOfRange, "query id beyond embedding table");
  }
  std::vector<Real> q(params.spec.dim);
  const auto e = params.entity.row(query.entity.value);
  const auto r = params.relation.row(query.relation.value);
  if (side == Side::Object) {
    scorer::object_query<Real>(params.spec.family, e, r, q);
  } else {
    scorer::subject_query<Real>(params.spec.family, r, e, q);
  }
  return q;
}

/// Scores every entity as the missing side of each query; rows x N.
template <typename Real>
Matrix<Real> score_against_all(const ModelParams<Real>& params, std::span<const Query> queries, Side side) {
  const std::size_t n = params.entity_count();
  Matrix<Real> out(queries.size(), n);
  for (std::size_t k = 0; k < queries.size(); ++k) {
    const auto q = make_query(params, queries[k], side);
    auto row = out.row(k);
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = scorer::dot<Real>(q, params.entity.row(j));
      detail::check_finite(row[j], "score");
    }
  }
  return out;
}

template <typename Real>
struct ScoreGradients {
  std::vector<Real> subject;
  std::vector<Real> relation;
  std::vector<Real> object;
};

template <typename Real>
ScoreGradients<Real> score_gradients(const ModelParams<Real>& params, const Triple& t) {
  detail::check_ids(params, t);
  const std::size_t d = params.spec.dim;
  ScoreGradients<Real> g{std::vector<Real>(d), std::vector<Real>(d), std::vector<Real>(d)};
  const auto s = params.entity.row(t.subject.value);
  const auto r = params.relation.row(t.predicate.value);
  const auto o = params.entity.row(t.object.value);
  scorer::subject_query<Real>(params.spec.family, r, o, g.subject);
  scorer::relation_gradient<Real>(params.spec.family, s, o, g.relation);
  scorer::object_query<Real>(params.spec.family, s, r, g.object);
  for (const auto* v : {&g.subject, &g.relation, &g.object}) {
    for (Real x : *v) detail::check_finite(x, "gradient");
  }
  return g;
}

/// Logistic sigmoid, evaluated without overflow for any finite input.
inline double probability(double score) {
  if (score >= 0.0) return 1.0 / (1.0 + std::exp(-score));
  const double z = std::exp(score);
  return z / (1.0 + z);
}

// ---------------------------------------------------------------------------
// Initialisation

struct NormalInit {
  double std = 0.1;
};
struct UniformInit {
  double a = -0.1;
  double b = 0.1;
};
struct XavierNormalInit {};
struct XavierUniformInit {};
/// Copies one row per listed entity; every other entity falls back to XavierNormal.
struct FeatureInit {
  std::vector<EntityId> entities;
  Matrix<double> rows;  // entities.size() x dim
};

using InitSpec = std::variant<NormalInit, UniformInit, XavierNormalInit, XavierUniformInit, FeatureInit>;

/// Xavier convention for an N x d embedding matrix: fan_in = N, fan_out = d.
inline double xavier_normal_std(std::size_t rows, std::size_t dim) {
  return std::sqrt(2.0 / static_cast<double>(rows + dim));
}
inline double xavier_uniform_bound(std::size_t rows, std::size_t dim) {
  return std::sqrt(6.0 / static_cast<double>(rows + dim));
}

namespace detail {

template <typename Real>
void fill(Matrix<Real>& m, const InitSpec& init, Rng& rng) {
  const std::size_t rows = m.rows();
  const std::size_t dim = m.cols();
  const auto normal = [&](double sd) {
    for (auto& x : m.data()) x = static_cast<Real>(sd * rng.normal());
  };
  const auto uniform = [&](double a, double b) {
    for (auto& x : m.data()) x = static_cast<Real>(rng.uniform(a, b));
  };
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, NormalInit>) {
          if (!(spec.std > 0.0)) fail(ErrorKind::InvalidConfig, "normal init std must be positive");
          normal(spec.std);
        } else if constexpr (std::is_same_v<T, UniformInit>) {
          if (!(spec.a < spec.b)) fail(ErrorKind::InvalidConfig, "uniform init needs a < b");
          uniform(spec.a, spec.b);
        } else if constexpr (std::is_same_v<T, XavierNormalInit>) {
          normal(xavier_normal_std(rows, dim));
        } else if constexpr (std::is_same_v<T, XavierUniformInit>) {
          const double bound = xavier_uniform_bound(rows, dim);
          uniform(-bound, bound);
        } else {
          if (spec.rows.cols() != dim || spec.rows.rows() != spec.entities.size()) {
            fail(ErrorKind::DimensionMismatch, "feature rows are " + std::to_string(spec.rows.rows()) + "x" +
                                                   std::to_string(spec.rows.cols()) + ", embedding dim is " +
                                                   std::to_string(dim));
          }
          normal(xavier_normal_std(rows, dim));
          for (std::size_t k = 0; k < spec.entities.size(); ++k) {
            const auto e = spec.entities[k].value;
            if (e >= rows) fail(ErrorKind::IdOutOfRange, "feature row for entity " + std::to_string(e));
            auto dst = m.row(e);
            for (std::size_t c = 0; c < dim; ++c) dst[c] = static_cast<Real>(spec.rows(k, c));
          }
        }
      },
      init);
}

}  // namespace detail

/// Seeded, platform-deterministic parameter tables.
template <typename Real>
ModelParams<Real> init_params(const ModelSpec& spec, std::size_t entity_count, std::size_t relation_count,
                              const InitSpec& entity_init, const InitSpec& relation_init, std::uint64_t seed) {
  spec.validate();
  if (std::holds_alternative<FeatureInit>(relation_init)) {
    fail(ErrorKind::InvalidConfig, "feature initialisation applies to entities only");
  }
  ModelParams<Real> params{spec, Matrix<Real>(entity_count, spec.dim), Matrix<Real>(relation_count, spec.dim)};
  Rng entity_rng(mix_seed(seed, 0));
  Rng relation_rng(mix_seed(seed, 1));
  detail::fill(params.entity, entity_init, entity_rng);
  detail::fill(params.relation, relation_init, relation_rng);
  return params;
}

template <typename To, typename From>
ModelParams<To> convert(const ModelParams<From>& in) {
  ModelParams<To> out{in.spec, Matrix<To>(in.entity.rows(), in.entity.cols()),
                      Matrix<To>(in.relation.rows(), in.relation.cols())};
  for (std::size_t i = 0; i < in.entity.size(); ++i) out.entity.data()[i] = static_cast<To>(in.entity.data()[i]);
  for (std::size_t i = 0; i < in.relation.size(); ++i) out.relation.data()[i] = static_cast<To>(in.relation.data()[i]);
  return out;
}

}  // namespace kgf

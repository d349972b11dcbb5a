#pragma once

// Seeded LDA over POI-label pseudo-documents, fit by collapsed Gibbs
// sampling. One model per passenger attribute; each attribute picks its own
// label vocabulary and seeds its named classes with labels.
//
//   theta[m] ~ Dir(alpha)            class proportions of passenger m
//   phi[k]   ~ Dir(beta_k)           label weights of class k
//   beta_k[w] = beta + beta_seed * [w is a seed label of class k]
//   z ~ Mult(theta[m]),  w ~ Mult(phi[z])
//
// Conditional for one token (counts exclude the token itself):
//   p(z = k) ~ (n_mk + alpha) * (n_kw + beta_k[w]) / (n_k + sum_w beta_k[w])

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "poitrav/csv.hpp"
#include "poitrav/error.hpp"
#include "poitrav/labels.hpp"
#include "poitrav/poi_matrix.hpp"
#include "poitrav/rng.hpp"

namespace poitrav {

struct AttributeConfig {
  std::string name;
  std::vector<PoiLabel> vocab;
  std::size_t k_classes = 0;
  std::vector<std::string> class_names;
  /// seeds[k] = labels that seed class k.
  std::vector<std::vector<PoiLabel>> seeds;

  void validate() const {
    if (vocab.empty()) throw ConfigError(name + ": empty vocabulary");
    if (k_classes == 0) throw ConfigError(name + ": k_classes must be >= 1");
    if (k_classes > vocab.size()) {
      throw ConfigError(fmt::format("{}: {} classes exceed vocabulary of {}", name, k_classes,
                                    vocab.size()));
    }
    if (class_names.size() != k_classes) throw ConfigError(name + ": class_names size != k");
    if (seeds.size() != k_classes) throw ConfigError(name + ": seed map must cover every class");
    std::set<PoiLabel> v(vocab.begin(), vocab.end());
    if (v.size() != vocab.size()) throw ConfigError(name + ": duplicate vocabulary label");
    for (const auto& s : seeds) {
      for (auto l : s) {
        if (!v.contains(l)) {
          throw ConfigError(fmt::format("{}: seed label {} not in vocabulary", name, label_name(l)));
        }
      }
    }
  }

  std::size_t vocab_index(PoiLabel l) const {
    return static_cast<std::size_t>(std::find(vocab.begin(), vocab.end(), l) - vocab.begin());
  }

  std::optional<std::size_t> class_index(std::string_view class_name) const {
    for (std::size_t k = 0; k < class_names.size(); ++k) {
      if (class_names[k] == class_name) return k;
    }
    return std::nullopt;
  }
};

inline constexpr std::array<std::string_view, 7> kAttributeNames = {
    "age", "occupation", "gender", "health", "economic", "safety", "personality"};

/// The seven attribute configurations: label selection per attribute and the
/// labels judged characteristic of each class. Attributes whose judgments
/// only split into a better/worse pair get two classes.
inline std::vector<AttributeConfig> builtin_attributes() {
  using L = PoiLabel;
  return {
      {"age",
       {L::company, L::government, L::education, L::medicine, L::traffic, L::car},
       3,
       {"teenagers", "middle age", "old age"},
       {{L::education, L::traffic}, {L::company, L::government, L::car}, {L::medicine, L::traffic}}},
      {"occupation",
       {L::education, L::media, L::medicine, L::service, L::company, L::government, L::finance},
       5,
       {"students/teachers", "company employees", "political parties", "self-employed/businessmen",
        "retirees/medical workers"},
       {{L::education, L::media}, {L::service, L::company}, {L::government}, {L::finance},
        {L::medicine}}},
      {"gender",
       {L::shopping, L::beauty, L::service, L::traffic, L::car, L::entertainment, L::sports},
       2,
       {"male", "female"},
       {{L::car, L::entertainment, L::sports}, {L::shopping, L::beauty, L::service, L::traffic}}},
      {"health",
       {L::sports, L::entertainment, L::travel},
       2,
       {"better", "worse"},
       {{L::sports}, {L::entertainment, L::travel}}},
      {"economic",
       {L::food, L::shopping, L::travel, L::entertainment, L::media, L::traffic, L::car},
       2,
       {"better", "worse"},
       {{L::shopping, L::travel, L::entertainment, L::media, L::car}, {L::traffic, L::food}}},
      {"safety",
       {L::sports, L::medicine, L::service, L::traffic, L::entertainment},
       2,
       {"better", "worse"},
       {{L::sports, L::medicine, L::traffic, L::service}, {L::entertainment}}},
      {"personality",
       {L::shopping, L::entertainment, L::media, L::travel, L::sports, L::service},
       2,
       {"better", "worse"},
       {{L::service, L::sports}, {L::shopping, L::media, L::entertainment, L::travel}}},
  };
}

inline const AttributeConfig& find_attribute(const std::vector<AttributeConfig>& all,
                                             std::string_view name) {
  for (const auto& a : all) {
    if (a.name == name) return a;
  }
  throw ConfigError("unknown attribute " + std::string(name));
}

/// Pattern rows restricted to one attribute's vocabulary. Rows with no mass
/// in the vocabulary are excluded and listed.
struct Corpus {
  std::vector<std::string> uids;
  std::vector<std::vector<std::int64_t>> counts;  // M x V
  std::vector<std::string> excluded;
  std::size_t vocab_size = 0;
};

inline Corpus restrict_to_vocab(const TravelPatternMatrix& x, const AttributeConfig& cfg,
                                std::span<const std::string> only_uids = {}) {
  Corpus c;
  c.vocab_size = cfg.vocab.size();
  std::set<std::string> keep(only_uids.begin(), only_uids.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!keep.empty() && !keep.contains(x.passengers[i])) continue;
    std::vector<std::int64_t> row(cfg.vocab.size());
    std::int64_t total = 0;
    for (std::size_t v = 0; v < cfg.vocab.size(); ++v) {
      row[v] = x.counts[i][index_of(cfg.vocab[v])];
      total += row[v];
    }
    if (total == 0) {
      c.excluded.push_back(x.passengers[i]);
      continue;
    }
    c.uids.push_back(x.passengers[i]);
    c.counts.push_back(std::move(row));
  }
  return c;
}

struct LdaHyper {
  double alpha = -1.0;  // <= 0 means 50 / K
  double beta = 0.01;
  double beta_seed = 1.0;
  std::size_t n_sweeps = 2000;
  std::uint64_t rng_seed = 1;

  double alpha_for(std::size_t k) const { return alpha > 0.0 ? alpha : 50.0 / static_cast<double>(k); }

  void validate() const {
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (!(beta_seed >= 0.0)) throw ConfigError("beta_seed must be >= 0");
  }
};

/// K x V Dirichlet prior on phi with the seed boost applied.
inline std::vector<std::vector<double>> seeded_prior(const AttributeConfig& cfg, double beta,
                                                     double beta_seed) {
  std::vector<std::vector<double>> prior(cfg.k_classes, std::vector<double>(cfg.vocab.size(), beta));
  for (std::size_t k = 0; k < cfg.k_classes; ++k) {
    for (auto l : cfg.seeds[k]) prior[k][cfg.vocab_index(l)] += beta_seed;
  }
  return prior;
}

/// Collapsed Gibbs state over token-level class assignments.
class GibbsSampler {
 public:
  /// `seed_topics[w]` lists classes seeded with word w; when non-empty the
  /// word's tokens start in one of those classes, otherwise uniformly.
  GibbsSampler(const std::vector<std::vector<std::int64_t>>& docs, std::size_t k, double alpha,
               std::vector<std::vector<double>> prior, std::uint64_t rng_seed,
               const std::vector<std::vector<std::size_t>>& seed_topics = {})
      : m_(docs.size()), k_(k), v_(prior.empty() ? 0 : prior[0].size()), alpha_(alpha),
        prior_(std::move(prior)), rng_(rng_seed) {
    if (k_ == 0 || prior_.size() != k_) throw ConfigError("prior must have one row per class");
    prior_sum_.assign(k_, 0.0);
    for (std::size_t t = 0; t < k_; ++t) {
      for (double b : prior_[t]) prior_sum_[t] += b;
    }
    ndk_.assign(m_ * k_, 0);
    nkw_.assign(k_ * v_, 0);
    nk_.assign(k_, 0);
    doc_len_.assign(m_, 0);
    for (std::size_t d = 0; d < m_; ++d) {
      if (docs[d].size() != v_) throw InputError("document width differs from vocabulary");
      for (std::size_t w = 0; w < v_; ++w) {
        if (docs[d][w] < 0) throw InputError("negative token count");
        for (std::int64_t c = 0; c < docs[d][w]; ++c) {
          std::size_t z;
          if (w < seed_topics.size() && !seed_topics[w].empty()) {
            z = seed_topics[w][uniform_index(rng_, seed_topics[w].size())];
          } else {
            z = static_cast<std::size_t>(uniform_index(rng_, k_));
          }
          doc_.push_back(static_cast<std::uint32_t>(d));
          word_.push_back(static_cast<std::uint32_t>(w));
          z_.push_back(static_cast<std::uint32_t>(z));
          ++ndk_[d * k_ + z];
          ++nkw_[z * v_ + w];
          ++nk_[z];
          ++doc_len_[d];
        }
      }
    }
    p_.resize(k_);
  }

  void sweep() {
    for (std::size_t i = 0; i < z_.size(); ++i) {
      const std::size_t d = doc_[i], w = word_[i];
      std::size_t z = z_[i];
      --ndk_[d * k_ + z];
      --nkw_[z * v_ + w];
      --nk_[z];
      double acc = 0.0;
      for (std::size_t t = 0; t < k_; ++t) {
        acc += (static_cast<double>(ndk_[d * k_ + t]) + alpha_) *
               (static_cast<double>(nkw_[t * v_ + w]) + prior_[t][w]) /
               (static_cast<double>(nk_[t]) + prior_sum_[t]);
        p_[t] = acc;
      }
      const double u = uniform01(rng_) * acc;
      z = 0;
      while (z + 1 < k_ && !(u < p_[z])) ++z;
      z_[i] = static_cast<std::uint32_t>(z);
      ++ndk_[d * k_ + z];
      ++nkw_[z * v_ + w];
      ++nk_[z];
    }
    ++sweeps_;
  }

  std::size_t n_tokens() const { return z_.size(); }
  std::size_t n_docs() const { return m_; }
  std::size_t n_topics() const { return k_; }
  std::size_t sweeps_done() const { return sweeps_; }

  std::int64_t doc_topic(std::size_t d, std::size_t k) const { return ndk_[d * k_ + k]; }
  std::int64_t topic_word(std::size_t k, std::size_t w) const { return nkw_[k * v_ + w]; }
  std::int64_t topic_total(std::size_t k) const { return nk_[k]; }

  /// Posterior-mean class proportions of document d from current counts.
  std::vector<double> theta_row(std::size_t d) const {
    std::vector<double> row(k_);
    const double denom = static_cast<double>(doc_len_[d]) + static_cast<double>(k_) * alpha_;
    for (std::size_t k = 0; k < k_; ++k) {
      row[k] = (static_cast<double>(ndk_[d * k_ + k]) + alpha_) / denom;
    }
    return row;
  }

  std::vector<std::vector<double>> phi() const {
    std::vector<std::vector<double>> out(k_, std::vector<double>(v_));
    for (std::size_t k = 0; k < k_; ++k) {
      const double denom = static_cast<double>(nk_[k]) + prior_sum_[k];
      for (std::size_t w = 0; w < v_; ++w) {
        out[k][w] = (static_cast<double>(nkw_[k * v_ + w]) + prior_[k][w]) / denom;
      }
    }
    return out;
  }

 private:
  std::size_t m_, k_, v_;
  double alpha_;
  std::vector<std::vector<double>> prior_;
  std::vector<double> prior_sum_;
  Rng rng_;
  std::vector<std::uint32_t> doc_, word_, z_;
  std::vector<std::int64_t> ndk_, nkw_, nk_, doc_len_;
  std::vector<double> p_;
  std::size_t sweeps_ = 0;
};

struct LdaModel {
  std::string attribute;
  std::vector<std::string> class_names;
  std::vector<PoiLabel> vocab;
  std::vector<std::string> uids;
  std::vector<std::vector<double>> theta;  // M x K
  std::vector<std::vector<double>> phi;    // K x V
  double alpha = 0.0;
  double beta = 0.0;
  double beta_seed = 0.0;
  std::size_t n_sweeps = 0;
  std::uint64_t rng_seed = 0;
  /// Passengers with no tokens in the vocabulary.
  std::vector<std::string> excluded;

  std::size_t k() const { return class_names.size(); }

  std::optional<std::size_t> row_of(std::string_view uid) const {
    for (std::size_t i = 0; i < uids.size(); ++i) {
      if (uids[i] == uid) return i;
    }
    return std::nullopt;
  }
};

namespace detail {

inline std::vector<std::vector<std::size_t>> seed_topics(const AttributeConfig& cfg) {
  std::vector<std::vector<std::size_t>> out(cfg.vocab.size());
  for (std::size_t k = 0; k < cfg.k_classes; ++k) {
    for (auto l : cfg.seeds[k]) out[cfg.vocab_index(l)].push_back(k);
  }
  return out;
}

}  // namespace detail

/// Fits one attribute model. With beta_seed > 0, seeded labels' tokens start
/// in their seeded classes. Estimates come from the counts after the final
/// sweep, so the result is a pure function of (corpus, config, hyper).
/// An empty corpus yields the prior-only phi and no theta rows.
inline LdaModel fit_plda(const Corpus& corpus, const AttributeConfig& cfg, const LdaHyper& hyper) {
  cfg.validate();
  hyper.validate();
  if (corpus.vocab_size != cfg.vocab.size()) throw ConfigError("corpus/vocabulary mismatch");
  for (const auto& row : corpus.counts) {
    if (std::accumulate(row.begin(), row.end(), std::int64_t{0}) <= 0) {
      throw InputError("document with no tokens in the vocabulary");
    }
  }
  const double alpha = hyper.alpha_for(cfg.k_classes);
  const auto seeds = hyper.beta_seed > 0.0 ? detail::seed_topics(cfg)
                                           : std::vector<std::vector<std::size_t>>{};
  GibbsSampler s(corpus.counts, cfg.k_classes, alpha, seeded_prior(cfg, hyper.beta, hyper.beta_seed),
                 hyper.rng_seed, seeds);
  for (std::size_t i = 0; i < hyper.n_sweeps; ++i) s.sweep();

  LdaModel m;
  m.attribute = cfg.name;
  m.class_names = cfg.class_names;
  m.vocab = cfg.vocab;
  m.uids = corpus.uids;
  m.excluded = corpus.excluded;
  m.alpha = alpha;
  m.beta = hyper.beta;
  m.beta_seed = hyper.beta_seed;
  m.n_sweeps = hyper.n_sweeps;
  m.rng_seed = hyper.rng_seed;
  m.theta.reserve(corpus.counts.size());
  for (std::size_t d = 0; d < corpus.counts.size(); ++d) m.theta.push_back(s.theta_row(d));
  m.phi = s.phi();
  return m;
}

/// Class proportions for an unseen document with phi held fixed
/// ("fold-in" Gibbs sampling).
inline std::vector<double> infer_theta(const LdaModel& model, std::span<const std::int64_t> doc,
                                       std::size_t n_sweeps, std::uint64_t rng_seed) {
  const std::size_t k = model.k();
  if (doc.size() != model.vocab.size()) throw InputError("document width differs from vocabulary");
  Rng rng(rng_seed);
  std::vector<std::uint32_t> word, z;
  std::vector<std::int64_t> ndk(k, 0);
  for (std::size_t w = 0; w < doc.size(); ++w) {
    for (std::int64_t c = 0; c < doc[w]; ++c) {
      word.push_back(static_cast<std::uint32_t>(w));
      const auto t = static_cast<std::uint32_t>(uniform_index(rng, k));
      z.push_back(t);
      ++ndk[t];
    }
  }
  std::vector<double> p(k);
  for (std::size_t s = 0; s < n_sweeps; ++s) {
    for (std::size_t i = 0; i < z.size(); ++i) {
      --ndk[z[i]];
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        acc += (static_cast<double>(ndk[t]) + model.alpha) * model.phi[t][word[i]];
        p[t] = acc;
      }
      const double u = uniform01(rng) * acc;
      std::size_t t = 0;
      while (t + 1 < k && !(u < p[t])) ++t;
      z[i] = static_cast<std::uint32_t>(t);
      ++ndk[t];
    }
  }
  const double denom = static_cast<double>(z.size()) + static_cast<double>(k) * model.alpha;
  std::vector<double> theta(k);
  for (std::size_t t = 0; t < k; ++t) theta[t] = (static_cast<double>(ndk[t]) + model.alpha) / denom;
  return theta;
}

/// Index of the largest entry, lowest index on exact ties.
inline std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

struct AttributeAssignment {
  std::string attribute;
  std::size_t class_index = 0;
  std::string class_name;
  std::vector<double> theta;
};

struct AttributeProfile {
  std::string uid;
  std::vector<AttributeAssignment> attributes;
  /// True when the uid is missing from at least one model.
  bool partial = false;

  const AttributeAssignment* find(std::string_view attribute) const {
    for (const auto& a : attributes) {
      if (a.attribute == attribute) return &a;
    }
    return nullptr;
  }
};

class NotFoundError : public InputError {
 public:
  using InputError::InputError;
};

/// Per attribute, the class with the largest theta entry.
inline AttributeProfile infer_profile(const std::map<std::string, LdaModel>& models,
                                      std::string_view uid) {
  AttributeProfile p;
  p.uid = std::string(uid);
  for (const auto& [name, model] : models) {
    const auto row = model.row_of(uid);
    if (!row) {
      p.partial = true;
      continue;
    }
    const auto& theta = model.theta[*row];
    const std::size_t k = argmax(theta);
    p.attributes.push_back({name, k, model.class_names[k], theta});
  }
  if (p.attributes.empty()) throw NotFoundError("passenger " + p.uid + " not in any model");
  return p;
}

struct ClassWeights {
  std::string class_name;
  std::vector<std::pair<PoiLabel, double>> weights;
};

/// phi rows keyed by class name: the POI weighting of each class.
inline std::vector<ClassWeights> poi_weightings(const LdaModel& model) {
  std::vector<ClassWeights> out;
  for (std::size_t k = 0; k < model.k(); ++k) {
    ClassWeights cw{model.class_names[k], {}};
    for (std::size_t w = 0; w < model.vocab.size(); ++w) {
      cw.weights.emplace_back(model.vocab[w], model.phi[k][w]);
    }
    out.push_back(std::move(cw));
  }
  return out;
}

/// UMass coherence averaged over classes, using each class's top-10 labels
/// by phi among labels that occur in at least one document (fewer if there
/// are not that many):
///   sum_{i>j} log((D(w_i, w_j) + 1) / (D(w_j) + 1))
/// with D counting documents that contain the label(s). Never positive;
/// higher is better.
inline double consistency_score(const LdaModel& model, const Corpus& corpus) {
  const std::size_t v = model.vocab.size();
  std::vector<std::int64_t> df(v, 0);
  std::vector<std::int64_t> co(v * v, 0);
  for (const auto& doc : corpus.counts) {
    for (std::size_t a = 0; a < v; ++a) {
      if (doc[a] <= 0) continue;
      ++df[a];
      for (std::size_t b = 0; b < v; ++b) {
        if (doc[b] > 0) ++co[a * v + b];
      }
    }
  }
  if (model.k() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < model.k(); ++k) {
    std::vector<std::size_t> order;
    for (std::size_t w = 0; w < v; ++w) {
      if (df[w] > 0) order.push_back(w);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return model.phi[k][a] > model.phi[k][b]; });
    const std::size_t top = std::min<std::size_t>(10, order.size());
    double score = 0.0;
    for (std::size_t i = 1; i < top; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto wi = order[i], wj = order[j];
        score += std::log((static_cast<double>(co[wi * v + wj]) + 1.0) /
                          (static_cast<double>(df[wj]) + 1.0));
      }
    }
    total += score;
  }
  return total / static_cast<double>(model.k());
}

inline std::string theta_to_csv(const LdaModel& m) {
  csv::Writer w;
  std::vector<std::string> header{"uid"};
  for (std::size_t k = 0; k < m.k(); ++k) header.push_back(fmt::format("class_{}", k));
  w.row(header);
  for (std::size_t i = 0; i < m.uids.size(); ++i) {
    std::vector<std::string> row{m.uids[i]};
    for (double x : m.theta[i]) row.push_back(fmt::format("{}", x));
    w.row(row);
  }
  return w.str();
}

inline std::string phi_to_csv(const LdaModel& m) {
  csv::Writer w;
  w.row({"class", "label", "weight"});
  for (const auto& cw : poi_weightings(m)) {
    for (const auto& [label, weight] : cw.weights) {
      w.row({cw.class_name, std::string(label_name(label)), fmt::format("{}", weight)});
    }
  }
  return w.str();
}

}  // namespace poitrav

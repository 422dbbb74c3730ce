#include "dkse/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "dkse/metrics.hpp"
#include "dkse/util.hpp"

namespace dkse {
namespace {

constexpr uint64_t kSaltInit = 0x696e6974;
constexpr uint64_t kSaltShuffle = 0x73687566;
constexpr uint64_t kSaltSample = 0x73616d70;
constexpr uint64_t kSaltEval = 0x6576616c;

constexpr double kProbClamp = 1e-7;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// d(bce)/d(dot) for one example; zero inside the clamped flats.
double bce_dot_grad(double yhat, int label) {
  if (yhat < kProbClamp || yhat > 1.0 - kProbClamp) return 0.0;
  return yhat - static_cast<double>(label);
}

}  // namespace

void HyperParams::validate() const {
  check(l_u >= 1 && n_u >= 1 && l_v >= 1 && n_v >= 1,
        "sampling depths and fan-outs must be >= 1");
  check(d >= 1, "embedding dimension must be >= 1");
  check(n >= 1, "query count must be >= 1");
  check(lambda >= 0, "l2 coefficient must be >= 0");
  check(tau > 0, "temperature must be > 0");
  check(learning_rate > 0, "learning rate must be > 0");
  check(batch_size >= 1, "batch size must be >= 1");
  check(epochs >= 0, "epoch count must be >= 0");
  check(patience >= 1, "patience must be >= 1");
  check(negative_ratio >= 1, "negative ratio must be >= 1");
  check(mask.user_item || mask.relation || mask.head || mask.tail,
        "ablation mask must keep at least one element class");
}

ModelConfig HyperParams::model_config() const {
  ModelConfig cfg;
  cfg.grouping = grouping;
  cfg.mask = mask;
  cfg.strict_ratio_norm = strict_ratio_norm;
  cfg.aggregate_terminals = aggregate_terminals;
  return cfg;
}

double bce_loss(double yhat, int label) {
  check(label == 0 || label == 1, "label must be 0 or 1");
  double p = std::clamp(yhat, kProbClamp, 1.0 - kProbClamp);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

double contrastive_loss(const std::vector<std::vector<double>>& eu,
                        const std::vector<std::vector<double>>& ev, double tau,
                        bool raw_logits) {
  check(eu.size() == ev.size(), "user and item lists must align");
  check(!eu.empty(), "contrastive loss needs at least one pair");
  check(tau > 0, "temperature must be > 0");
  const size_t P = eu.size();
  if (P == 1) return 0.0;

  double loss = 0;
  std::vector<double> logits(P);
  for (size_t i = 0; i < P; ++i) {
    for (size_t j = 0; j < P; ++j) {
      double dij = dot(eu[i], ev[j]);
      logits[j] = (raw_logits ? dij : sigmoid(dij)) / tau;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0;
    for (double l : logits) denom += std::exp(l - mx);
    loss += -(logits[i] - mx) + std::log(denom);
  }
  return loss / static_cast<double>(P);
}

double l2_penalty(const ParameterSet& params, double lambda) {
  check(lambda >= 0, "l2 coefficient must be >= 0");
  if (lambda == 0) return 0.0;
  double sq = 0;
  for (const auto& t : params.tensors)
    for (double x : t) sq += x * x;
  return lambda * sq;
}

LossTerms total_loss(const std::vector<BatchExample>& batch,
                     const UnifiedGraph& graph, const ParameterSet& params,
                     const HyperParams& hyper, uint64_t stream,
                     GradientTape* tape) {
  const ModelConfig cfg = hyper.model_config();
  const size_t d = static_cast<size_t>(params.shape.dim);

  std::vector<PairForward> fwd(batch.size());
  std::vector<std::vector<double>> pos_eu, pos_ev;
  uint64_t draw = 0;
  double bce_sum = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const BatchExample& ex = batch[i];
    PairForward& pf = fwd[i];
    pf.example = ex;
    std::vector<double> enu(d, 0.0), env(d, 0.0);
    if (hyper.use_neighborhood) {
      auto exclude = std::pair{ex.user_node, ex.item_node};
      auto su = sample_neighborhood(graph, ex.user_node, hyper.l_u, hyper.n_u,
                                    Rng(Rng::mix(stream, draw++)), exclude);
      auto sv = sample_neighborhood(graph, ex.item_node, hyper.l_v, hyper.n_v,
                                    Rng(Rng::mix(stream, draw++)), exclude);
      enu = forward_node(su, params, cfg, tape ? &pf.user_trace : nullptr);
      env = forward_node(sv, params, cfg, tape ? &pf.item_trace : nullptr);
    }
    pf.eu = enrich(params.node(ex.user_node), enu);
    pf.ev = enrich(params.node(ex.item_node), env);
    pf.yhat = predict(pf.eu, pf.ev);
    bce_sum += bce_loss(pf.yhat, ex.label);
    if (ex.label) {
      pos_eu.push_back(pf.eu);
      pos_ev.push_back(pf.ev);
    }
  }

  LossTerms t;
  t.bce = batch.empty() ? 0.0 : bce_sum / static_cast<double>(batch.size());
  if (hyper.use_contrastive && !pos_eu.empty())
    t.contrastive =
        contrastive_loss(pos_eu, pos_ev, hyper.tau, hyper.contrastive_raw_logits);
  t.l2 = l2_penalty(params, hyper.lambda);
  t.total = t.bce + t.contrastive + t.l2;
  if (tape) tape->pairs = std::move(fwd);
  return t;
}

TensorPack backward(const GradientTape& tape, const ParameterSet& params,
                    const HyperParams& hyper) {
  TensorPack grads = ParameterSet::zeros(params.shape);
  const ModelConfig cfg = hyper.model_config();
  const size_t d = static_cast<size_t>(params.shape.dim);
  const size_t B = tape.pairs.size();

  std::vector<std::vector<double>> geu(B, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> gev(B, std::vector<double>(d, 0.0));

  for (size_t i = 0; i < B; ++i) {
    const PairForward& pf = tape.pairs[i];
    double c = bce_dot_grad(pf.yhat, pf.example.label) / static_cast<double>(B);
    for (size_t r = 0; r < d; ++r) {
      geu[i][r] += c * pf.ev[r];
      gev[i][r] += c * pf.eu[r];
    }
  }

  if (hyper.use_contrastive) {
    std::vector<size_t> pos;
    for (size_t i = 0; i < B; ++i)
      if (tape.pairs[i].example.label) pos.push_back(i);
    const size_t P = pos.size();
    if (P >= 2) {
      std::vector<double> logits(P), dots(P), soft(P);
      for (size_t a = 0; a < P; ++a) {
        const auto& eu = tape.pairs[pos[a]].eu;
        for (size_t b = 0; b < P; ++b) {
          dots[b] = dot(eu, tape.pairs[pos[b]].ev);
          logits[b] = (hyper.contrastive_raw_logits ? dots[b] : sigmoid(dots[b])) /
                      hyper.tau;
        }
        double mx = *std::max_element(logits.begin(), logits.end());
        double denom = 0;
        for (size_t b = 0; b < P; ++b) {
          soft[b] = std::exp(logits[b] - mx);
          denom += soft[b];
        }
        for (double& s : soft) s /= denom;
        for (size_t b = 0; b < P; ++b) {
          double gl = (soft[b] - (a == b ? 1.0 : 0.0)) / static_cast<double>(P);
          double slope = 1.0 / hyper.tau;
          if (!hyper.contrastive_raw_logits) {
            double s = sigmoid(dots[b]);
            slope = s * (1.0 - s) / hyper.tau;
          }
          double gd = gl * slope;
          const auto& ev = tape.pairs[pos[b]].ev;
          const auto& eu = tape.pairs[pos[a]].eu;
          for (size_t r = 0; r < d; ++r) {
            geu[pos[a]][r] += gd * ev[r];
            gev[pos[b]][r] += gd * eu[r];
          }
        }
      }
    }
  }

  for (size_t i = 0; i < B; ++i) {
    const PairForward& pf = tape.pairs[i];
    double* ug = grads[kNodeEmb].data() +
                 static_cast<size_t>(pf.example.user_node) * d;
    double* vg = grads[kNodeEmb].data() +
                 static_cast<size_t>(pf.example.item_node) * d;
    for (size_t r = 0; r < d; ++r) {
      ug[r] += geu[i][r];
      vg[r] += gev[i][r];
    }
    if (hyper.use_neighborhood) {
      backward_node(pf.user_trace, params, cfg, geu[i], grads);
      backward_node(pf.item_trace, params, cfg, gev[i], grads);
    }
  }

  if (hyper.lambda > 0)
    for (int t = 0; t < kTensorCount; ++t)
      for (size_t k = 0; k < grads[t].size(); ++k)
        grads[t][k] += 2.0 * hyper.lambda * params.tensors[t][k];
  return grads;
}

AdamState AdamState::init(const TensorShapes& shape) {
  AdamState s;
  s.m = ParameterSet::zeros(shape);
  s.v = ParameterSet::zeros(shape);
  return s;
}

void adam_step(ParameterSet& params, const TensorPack& grads, AdamState& state,
               double learning_rate) {
  check(learning_rate > 0, "learning rate must be > 0");
  state.step += 1;
  const double bc1 =
      1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (int t = 0; t < kTensorCount; ++t) {
    check(grads[t].size() == params.tensors[t].size(),
          "gradient shape mismatch");
    for (size_t k = 0; k < grads[t].size(); ++k) {
      double g = grads[t][k];
      check(std::isfinite(g), "non-finite gradient, aborting training");
      double& m = state.m[t][k];
      double& v = state.v[t][k];
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g * g;
      params.tensors[t][k] -=
          learning_rate * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
    }
  }
  check(params.all_finite(), "non-finite parameter after optimizer step");
}

std::string format_epoch(const EpochStats& s) {
  std::ostringstream out;
  out << "epoch=" << s.epoch << " loss=" << format_double(s.loss)
      << " bce=" << format_double(s.bce)
      << " cl=" << format_double(s.contrastive)
      << " l2=" << format_double(s.l2)
      << " val_auc=" << format_double(s.val_auc);
  return out.str();
}

uint64_t eval_stream(uint64_t seed) { return Rng::mix(seed, kSaltEval); }

double score_pair(const UnifiedGraph& graph, const ParameterSet& params,
                  const HyperParams& hyper, int32_t user_node,
                  int32_t item_node, uint64_t seed) {
  if (!hyper.use_neighborhood)
    return predict(params.node(user_node), params.node(item_node));
  const ModelConfig cfg = hyper.model_config();
  auto exclude = std::pair{user_node, item_node};
  auto su =
      sample_neighborhood(graph, user_node, hyper.l_u, hyper.n_u,
                          Rng(Rng::mix(seed, static_cast<uint64_t>(user_node))),
                          exclude);
  auto sv =
      sample_neighborhood(graph, item_node, hyper.l_v, hyper.n_v,
                          Rng(Rng::mix(seed, static_cast<uint64_t>(item_node))),
                          exclude);
  auto eu = enrich(params.node(user_node), msal(su, params, cfg));
  auto ev = enrich(params.node(item_node), msal(sv, params, cfg));
  return predict(eu, ev);
}

FitResult fit(const DatasetSplit& split, const UnifiedGraph& graph,
              const HyperParams& hyper, std::ostream* log) {
  hyper.validate();
  TensorShapes shape{graph.node_count(), graph.relation_count(), hyper.n,
                     hyper.d};
  ParameterSet params =
      ParameterSet::init(shape, Rng::mix(hyper.seed, kSaltInit));

  FitResult out{params, {}, -1};
  if (hyper.epochs == 0) return out;

  std::vector<BatchExample> examples;
  examples.reserve(split.train.size());
  for (const auto& p : split.train)
    examples.push_back(
        {graph.user_node(p.user), graph.item_node(p.item), p.label});
  check(!examples.empty(), "training split is empty");

  bool val_pos = false, val_neg = false;
  for (const auto& p : split.validation) (p.label ? val_pos : val_neg) = true;
  const bool val_usable = val_pos && val_neg;

  AdamState adam = AdamState::init(shape);
  const uint64_t shuffle_base = Rng::mix(hyper.seed, kSaltShuffle);
  const uint64_t sample_base = Rng::mix(hyper.seed, kSaltSample);
  const uint64_t eval_seed = eval_stream(hyper.seed);

  ParameterSet best = params;
  double best_auc = -1.0;
  int best_epoch = -1;
  int since_best = 0;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng shuffle_rng(Rng::mix(shuffle_base, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(examples);

    const uint64_t epoch_stream =
        Rng::mix(sample_base, static_cast<uint64_t>(epoch));
    double sum_total = 0, sum_bce = 0, sum_cl = 0, sum_l2 = 0;
    size_t seen = 0;
    for (size_t start = 0; start < examples.size();
         start += static_cast<size_t>(hyper.batch_size)) {
      size_t end =
          std::min(start + static_cast<size_t>(hyper.batch_size), examples.size());
      std::vector<BatchExample> batch(examples.begin() + start,
                                      examples.begin() + end);
      GradientTape tape;
      LossTerms terms = total_loss(batch, graph, params, hyper,
                                   Rng::mix(epoch_stream, start), &tape);
      TensorPack grads = backward(tape, params, hyper);
      adam_step(params, grads, adam, hyper.learning_rate);

      double w = static_cast<double>(batch.size());
      sum_total += terms.total * w;
      sum_bce += terms.bce * w;
      sum_cl += terms.contrastive * w;
      sum_l2 += terms.l2 * w;
      seen += batch.size();
    }

    EpochStats st;
    st.epoch = epoch;
    st.loss = sum_total / static_cast<double>(seen);
    st.bce = sum_bce / static_cast<double>(seen);
    st.contrastive = sum_cl / static_cast<double>(seen);
    st.l2 = sum_l2 / static_cast<double>(seen);
    st.val_auc = std::numeric_limits<double>::quiet_NaN();
    if (val_usable) {
      std::vector<ScoredPair> scored;
      scored.reserve(split.validation.size());
      for (const auto& p : split.validation) {
        double s = score_pair(graph, params, hyper, graph.user_node(p.user),
                              graph.item_node(p.item), eval_seed);
        scored.push_back({p.user, p.item, s, p.label});
      }
      st.val_auc = auc(scored);
    }
    out.history.push_back(st);
    if (log) *log << format_epoch(st) << std::endl;

    if (val_usable) {
      if (st.val_auc > best_auc) {
        best_auc = st.val_auc;
        best = params;
        best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= hyper.patience) {
        break;
      }
    }
  }

  if (best_epoch >= 0) {
    out.params = std::move(best);
    out.best_epoch = best_epoch;
  } else {
    out.params = std::move(params);  // validation AUC was undefined
    out.best_epoch = -1;
  }
  return out;
}

}  // namespace dkse

#include "dkse/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dkse/util.hpp"

namespace dkse {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::span<const double> embedding(const ParameterSet& p, const ElementRef& ref) {
  return ref.is_relation ? p.relation(ref.id) : p.node(ref.id);
}

// cell index per route plus cell count
std::pair<std::vector<int32_t>, int32_t> compute_cells(
    const std::vector<ChainRoute>& routes, GroupingMode mode) {
  size_t m = routes.size();
  std::vector<int32_t> cell(m, 0);
  if (m == 0) return {cell, 0};
  if (mode == GroupingMode::Global || mode == GroupingMode::Base)
    return {cell, 1};
  std::map<int32_t, int32_t> ids;
  for (size_t c = 0; c < m; ++c) {
    int32_t key = mode == GroupingMode::Vertical
                      ? routes[c].elements[2]  // first-hop neighbor
                      : static_cast<int32_t>(routes[c].depth());
    auto [it, fresh] = ids.try_emplace(key, static_cast<int32_t>(ids.size()));
    (void)fresh;
    cell[c] = it->second;
  }
  return {cell, static_cast<int32_t>(ids.size())};
}

std::vector<double> normalize_with_cells(std::span<const double> scores,
                                         std::span<const int32_t> cell_of,
                                         int32_t n_cells, GroupingMode mode,
                                         bool strict) {
  size_t m = scores.size();
  std::vector<double> w(m, 0.0);
  if (m == 0) return w;
  if (mode == GroupingMode::Base) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(m));
    return w;
  }
  std::vector<std::vector<size_t>> cells(static_cast<size_t>(n_cells));
  for (size_t c = 0; c < m; ++c) cells[cell_of[c]].push_back(c);
  const double inv_cells = 1.0 / static_cast<double>(n_cells);
  for (const auto& idx : cells) {
    if (strict) {
      double sum = 0;
      for (size_t c : idx) sum += scores[c];
      if (std::abs(sum) < 1e-12) {
        // ratio normalization is undefined here; fall back to uniform
        for (size_t c : idx) w[c] = inv_cells / static_cast<double>(idx.size());
      } else {
        for (size_t c : idx) w[c] = scores[c] / sum * inv_cells;
      }
    } else {
      double mx = scores[idx[0]];
      for (size_t c : idx) mx = std::max(mx, scores[c]);
      double z = 0;
      for (size_t c : idx) z += std::exp(scores[c] - mx);
      for (size_t c : idx) w[c] = std::exp(scores[c] - mx) / z * inv_cells;
    }
  }
  return w;
}

}  // namespace

std::vector<ElementRef> route_elements(const ChainRoute& route,
                                       const AblationMask& mask) {
  const auto& el = route.elements;
  check(el.size() >= 3 && el.size() % 2 == 1, "malformed chain route");
  check(mask.user_item || mask.relation || mask.head || mask.tail,
        "ablation mask must keep at least one element class");
  std::vector<ElementRef> out;
  const size_t last = el.size() - 1;
  for (size_t i = 0; i < el.size(); ++i) {
    bool is_rel = (i % 2) == 1;
    bool keep = is_rel ? mask.relation
                       : (i == 0      ? mask.user_item
                          : i == last ? mask.tail
                                      : mask.head);
    if (keep) out.push_back({is_rel, el[i]});
  }
  if (out.empty()) out.push_back({false, el[last]});  // terminal fallback
  return out;
}

std::vector<double> knowledge_selector(
    const std::vector<std::span<const double>>& elements,
    std::span<const double> query, const ParameterSet& params,
    std::vector<double>* weights_out) {
  check(!elements.empty(), "selector needs at least one element");
  const int d = params.shape.dim;
  check(static_cast<int>(query.size()) == d, "query has wrong dimension");
  auto wk = params.selector_w();
  auto bk = params.selector_b();

  const size_t ne = elements.size();
  std::vector<double> pi(ne);
  std::vector<double> key(static_cast<size_t>(d));
  for (size_t j = 0; j < ne; ++j) {
    check(static_cast<int>(elements[j].size()) == d, "element has wrong dimension");
    for (int r = 0; r < d; ++r) {
      double z = bk[r];
      const double* wrow = wk.data() + static_cast<size_t>(r) * d;
      for (int c = 0; c < d; ++c) z += wrow[c] * elements[j][c];
      key[r] = z > 0 ? z : 0.0;
    }
    pi[j] = dot(query, key);
  }

  double mx = *std::max_element(pi.begin(), pi.end());
  double z = 0;
  std::vector<double> a(ne);
  for (size_t j = 0; j < ne; ++j) {
    a[j] = std::exp(pi[j] - mx);
    z += a[j];
  }
  for (double& x : a) x /= z;

  std::vector<double> ec(static_cast<size_t>(d), 0.0);
  for (size_t j = 0; j < ne; ++j)
    for (int r = 0; r < d; ++r) ec[r] += a[j] * elements[j][r];
  if (weights_out) *weights_out = std::move(a);
  return ec;
}

double route_score(std::span<const double> selected, const ParameterSet& params) {
  check(static_cast<int>(selected.size()) == params.shape.dim,
        "selected feature has wrong dimension");
  return dot(params.evaluator_w(), selected) + params.evaluator_b();
}

std::vector<double> group_normalize(const std::vector<double>& scores,
                                    const std::vector<ChainRoute>& routes,
                                    GroupingMode mode, bool strict_ratio) {
  check(scores.size() == routes.size(), "scores and routes must align");
  check(!scores.empty(), "group_normalize needs at least one route");
  auto [cell_of, n_cells] = compute_cells(routes, mode);
  return normalize_with_cells(scores, cell_of, n_cells, mode, strict_ratio);
}

std::vector<double> evaluate_routes(
    const std::vector<std::vector<double>>& features,
    const std::vector<double>& weights, int dim) {
  check(features.size() == weights.size(), "features and weights must align");
  std::vector<double> out(static_cast<size_t>(dim), 0.0);
  if (weights.empty()) return out;
  double sum = 0;
  for (double w : weights) sum += w;
  check(std::abs(sum - 1.0) <= 1e-6, "route weights must sum to 1");
  for (size_t c = 0; c < features.size(); ++c) {
    check(static_cast<int>(features[c].size()) == dim,
          "feature has wrong dimension");
    for (int r = 0; r < dim; ++r) out[r] += weights[c] * features[c][r];
  }
  return out;
}

std::vector<double> forward_node(const NeighborhoodSample& sample,
                                 const ParameterSet& params,
                                 const ModelConfig& config, NodeTrace* trace,
                                 std::vector<double>* avg_weights_out) {
  const int d = params.shape.dim;
  const int n = params.shape.queries;
  const size_t m = sample.routes.size();
  if (trace) {
    *trace = NodeTrace{};
    trace->dim = d;
    trace->queries = n;
  }
  std::vector<double> en(static_cast<size_t>(d), 0.0);
  if (m == 0) {
    if (avg_weights_out) avg_weights_out->clear();
    return en;
  }

  // Resolve route elements once; selector keys are computed per distinct
  // element, not per occurrence.
  std::vector<std::vector<int32_t>> elem_of_route(m);
  std::vector<int32_t> terminal(m);
  std::vector<ElementRef> distinct;
  std::map<ElementRef, int32_t> index_of;
  for (size_t c = 0; c < m; ++c) {
    auto refs = route_elements(sample.routes[c], config.mask);
    elem_of_route[c].reserve(refs.size());
    for (const ElementRef& ref : refs) {
      auto [it, fresh] =
          index_of.try_emplace(ref, static_cast<int32_t>(distinct.size()));
      if (fresh) distinct.push_back(ref);
      elem_of_route[c].push_back(it->second);
    }
    terminal[c] = sample.routes[c].elements.back();
  }

  const size_t n_dist = distinct.size();
  std::vector<double> keys(n_dist * static_cast<size_t>(d));
  std::vector<char> gate(n_dist * static_cast<size_t>(d));
  auto wk = params.selector_w();
  auto bk = params.selector_b();
  for (size_t t = 0; t < n_dist; ++t) {
    auto e = embedding(params, distinct[t]);
    for (int r = 0; r < d; ++r) {
      double z = bk[r];
      const double* wrow = wk.data() + static_cast<size_t>(r) * d;
      for (int c = 0; c < d; ++c) z += wrow[c] * e[c];
      gate[t * d + r] = z > 0;
      keys[t * d + r] = z > 0 ? z : 0.0;
    }
  }

  auto [cell_of, n_cells] = compute_cells(sample.routes, config.grouping);

  std::vector<double> scores(static_cast<size_t>(n) * m);
  std::vector<double> weights(static_cast<size_t>(n) * m);
  std::vector<double> attn;
  std::vector<size_t> attn_off{0};
  std::vector<double> features(m * static_cast<size_t>(d), 0.0);
  std::vector<double> avg_w(m, 0.0);
  auto wc = params.evaluator_w();
  const double bc = params.evaluator_b();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> pi, a, ec(static_cast<size_t>(d));
  for (int i = 0; i < n; ++i) {
    auto q = params.query(i);
    for (size_t c = 0; c < m; ++c) {
      const auto& elems = elem_of_route[c];
      pi.assign(elems.size(), 0.0);
      for (size_t j = 0; j < elems.size(); ++j)
        pi[j] = dot(q, {keys.data() + static_cast<size_t>(elems[j]) * d,
                        static_cast<size_t>(d)});
      double mx = *std::max_element(pi.begin(), pi.end());
      double z = 0;
      a.assign(elems.size(), 0.0);
      for (size_t j = 0; j < elems.size(); ++j) {
        a[j] = std::exp(pi[j] - mx);
        z += a[j];
      }
      for (double& x : a) x /= z;

      std::fill(ec.begin(), ec.end(), 0.0);
      for (size_t j = 0; j < elems.size(); ++j) {
        auto e = embedding(params, distinct[elems[j]]);
        for (int r = 0; r < d; ++r) ec[r] += a[j] * e[r];
      }
      scores[static_cast<size_t>(i) * m + c] = dot(wc, ec) + bc;
      if (!config.aggregate_terminals)
        for (int r = 0; r < d; ++r) features[c * d + r] += inv_n * ec[r];
      if (trace) {
        attn.insert(attn.end(), a.begin(), a.end());
        attn_off.push_back(attn.size());
      }
    }
    auto w_i = normalize_with_cells(
        {scores.data() + static_cast<size_t>(i) * m, m}, cell_of, n_cells,
        config.grouping, config.strict_ratio_norm);
    std::copy(w_i.begin(), w_i.end(),
              weights.begin() + static_cast<size_t>(i) * m);
    for (size_t c = 0; c < m; ++c) avg_w[c] += inv_n * w_i[c];
  }

  if (config.aggregate_terminals) {
    for (size_t c = 0; c < m; ++c) {
      auto e = params.node(terminal[c]);
      std::copy(e.begin(), e.end(), features.begin() + c * d);
    }
  }

  for (size_t c = 0; c < m; ++c)
    for (int r = 0; r < d; ++r) en[r] += avg_w[c] * features[c * d + r];

  if (avg_weights_out) *avg_weights_out = avg_w;
  if (trace) {
    trace->empty = false;
    trace->elem_of_route = std::move(elem_of_route);
    trace->terminal = std::move(terminal);
    trace->distinct = std::move(distinct);
    trace->keys = std::move(keys);
    trace->gate = std::move(gate);
    trace->scores = std::move(scores);
    trace->weights = std::move(weights);
    trace->attn = std::move(attn);
    trace->attn_off = std::move(attn_off);
    trace->cell_of = std::move(cell_of);
    trace->n_cells = n_cells;
    trace->features = std::move(features);
    trace->avg_w = std::move(avg_w);
  }
  return en;
}

void backward_node(const NodeTrace& trace, const ParameterSet& params,
                   const ModelConfig& config, std::span<const double> upstream,
                   TensorPack& grads) {
  if (trace.empty) return;
  const int d = trace.dim;
  const int n = trace.queries;
  const size_t m = trace.terminal.size();
  const int32_t K = trace.n_cells;
  check(static_cast<int>(upstream.size()) == d,
        "upstream gradient has wrong dimension");
  check(grads[kNodeEmb].size() == params.tensors[kNodeEmb].size(),
        "gradient pack shape mismatch");

  auto ref_grad = [&](const ElementRef& ref) {
    auto& t = grads[ref.is_relation ? kRelEmb : kNodeEmb];
    return std::span<double>(t.data() + static_cast<size_t>(ref.id) * d,
                             static_cast<size_t>(d));
  };

  std::vector<double> g_avg_w(m, 0.0);
  for (size_t c = 0; c < m; ++c)
    g_avg_w[c] =
        dot(upstream, {trace.features.data() + c * d, static_cast<size_t>(d)});

  std::vector<double> gfeat;
  if (config.aggregate_terminals) {
    for (size_t c = 0; c < m; ++c) {
      auto tg = ref_grad({false, trace.terminal[c]});
      for (int r = 0; r < d; ++r) tg[r] += trace.avg_w[c] * upstream[r];
    }
  } else {
    gfeat.assign(m * static_cast<size_t>(d), 0.0);
    for (size_t c = 0; c < m; ++c)
      for (int r = 0; r < d; ++r)
        gfeat[c * d + r] = trace.avg_w[c] * upstream[r];
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const size_t n_dist = trace.distinct.size();
  std::vector<double> gk_total(n_dist * static_cast<size_t>(d), 0.0);

  std::vector<std::vector<size_t>> cells(static_cast<size_t>(K));
  for (size_t c = 0; c < m; ++c) cells[trace.cell_of[c]].push_back(c);

  auto wcspan = params.evaluator_w();
  std::vector<double> gs(m), ec(static_cast<size_t>(d)), ge(static_cast<size_t>(d)), ga;

  for (int i = 0; i < n; ++i) {
    auto q = params.query(i);
    const double* w_row = trace.weights.data() + static_cast<size_t>(i) * m;
    const double* s_row = trace.scores.data() + static_cast<size_t>(i) * m;

    std::fill(gs.begin(), gs.end(), 0.0);
    if (config.grouping != GroupingMode::Base) {
      for (const auto& idx : cells) {
        if (config.strict_ratio_norm) {
          double S = 0;
          for (size_t c : idx) S += s_row[c];
          if (std::abs(S) < 1e-12) continue;  // uniform fallback is constant
          double gdot = 0;
          for (size_t c : idx) gdot += g_avg_w[c] * inv_n * (s_row[c] / S);
          for (size_t c : idx)
            gs[c] = (g_avg_w[c] * inv_n - gdot) / (S * static_cast<double>(K));
        } else {
          double gdot = 0;
          for (size_t c : idx)
            gdot += g_avg_w[c] * inv_n * (w_row[c] * static_cast<double>(K));
          for (size_t c : idx)
            gs[c] = w_row[c] * (g_avg_w[c] * inv_n - gdot);
        }
      }
    }

    for (size_t c = 0; c < m; ++c) {
      const auto& elems = trace.elem_of_route[c];
      const double* a = trace.attn.data() + trace.attn_off[static_cast<size_t>(i) * m + c];

      std::fill(ec.begin(), ec.end(), 0.0);
      for (size_t j = 0; j < elems.size(); ++j) {
        auto e = embedding(params, trace.distinct[elems[j]]);
        for (int r = 0; r < d; ++r) ec[r] += a[j] * e[r];
      }

      const double gsc = gs[c];
      if (gsc != 0.0) {
        for (int r = 0; r < d; ++r) grads[kEvaluatorW][r] += gsc * ec[r];
        grads[kEvaluatorB][0] += gsc;
      }
      for (int r = 0; r < d; ++r) ge[r] = gsc * wcspan[r];
      if (!config.aggregate_terminals)
        for (int r = 0; r < d; ++r) ge[r] += gfeat[c * d + r] * inv_n;

      ga.assign(elems.size(), 0.0);
      double adot = 0;
      for (size_t j = 0; j < elems.size(); ++j) {
        auto e = embedding(params, trace.distinct[elems[j]]);
        double gaj = 0;
        for (int r = 0; r < d; ++r) gaj += ge[r] * e[r];
        ga[j] = gaj;
        adot += a[j] * gaj;
        auto eg = ref_grad(trace.distinct[elems[j]]);
        for (int r = 0; r < d; ++r) eg[r] += a[j] * ge[r];
      }
      auto qg = std::span<double>(
          grads[kQueryBank].data() + static_cast<size_t>(i) * d,
          static_cast<size_t>(d));
      for (size_t j = 0; j < elems.size(); ++j) {
        double gpi = a[j] * (ga[j] - adot);
        const double* kj = trace.keys.data() + static_cast<size_t>(elems[j]) * d;
        double* gkt = gk_total.data() + static_cast<size_t>(elems[j]) * d;
        for (int r = 0; r < d; ++r) {
          qg[r] += gpi * kj[r];
          gkt[r] += gpi * q[r];
        }
      }
    }
  }

  // Through the shared key map once per distinct element.
  auto wk = params.selector_w();
  std::vector<double> gz(static_cast<size_t>(d));
  for (size_t t = 0; t < n_dist; ++t) {
    const double* gkt = gk_total.data() + t * static_cast<size_t>(d);
    const char* gt = trace.gate.data() + t * static_cast<size_t>(d);
    bool any = false;
    for (int r = 0; r < d; ++r) {
      gz[r] = gt[r] ? gkt[r] : 0.0;
      any = any || gz[r] != 0.0;
    }
    if (!any) continue;
    auto e = embedding(params, trace.distinct[t]);
    auto eg = ref_grad(trace.distinct[t]);
    for (int r = 0; r < d; ++r) {
      if (gz[r] == 0.0) continue;
      grads[kSelectorB][r] += gz[r];
      double* wrow_g = grads[kSelectorW].data() + static_cast<size_t>(r) * d;
      const double* wrow = wk.data() + static_cast<size_t>(r) * d;
      for (int c = 0; c < d; ++c) {
        wrow_g[c] += gz[r] * e[c];
        eg[c] += wrow[c] * gz[r];
      }
    }
  }
}

std::vector<double> enrich(std::span<const double> e, std::span<const double> e_n) {
  std::vector<double> out(e.begin(), e.end());
  if (e_n.empty()) return out;
  check(e_n.size() == e.size(), "neighborhood vector has wrong dimension");
  for (size_t i = 0; i < out.size(); ++i) out[i] += e_n[i];
  return out;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double t = std::exp(x);
  return t / (1.0 + t);
}

double predict(std::span<const double> eu, std::span<const double> ev) {
  check(eu.size() == ev.size(), "embeddings must have equal dimension");
  return sigmoid(dot(eu, ev));
}

}  // namespace dkse

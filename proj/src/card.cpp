#include "layercard/card.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "layercard/errors.hpp"
#include "layercard/rng.hpp"

namespace layercard {

namespace {

constexpr const char* kCardSchema = "layercard/v1";
constexpr const char* kDecisionSchema = "layercard-decision/v1";

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> regime_ids(Index regimes) {
  std::vector<std::string> ids;
  if (regimes == 1) return {"top"};
  if (regimes == 2) return {"top", "bottom"};
  if (regimes == 3) return {"top", "mid", "bottom"};
  ids.push_back("top");
  for (Index m = 1; m + 1 < regimes; ++m) ids.push_back("mid" + std::to_string(m));
  ids.push_back("bottom");
  return ids;
}

Vector profile_resnorms(const std::vector<LayerProfile>& profiles) {
  Vector r(static_cast<Index>(profiles.size()));
  for (Index i = 0; i < r.size(); ++i) r(i) = profiles[static_cast<std::size_t>(i)].resnorm;
  return r;
}

}  // namespace

Vector average_ranks(const Vector& v) {
  const Index n = v.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (v(a) != v(b)) return v(a) > v(b);
    return a < b;
  });
  Vector ranks(n);
  Index pos = 0;
  while (pos < n) {
    Index end = pos + 1;
    while (end < n && v(order[static_cast<std::size_t>(end)]) ==
                          v(order[static_cast<std::size_t>(pos)])) {
      ++end;
    }
    // 1-based positions pos+1 .. end share their mean rank.
    const double rank = 0.5 * static_cast<double>(pos + 1 + end);
    for (Index i = pos; i < end; ++i) ranks(order[static_cast<std::size_t>(i)]) = rank;
    pos = end;
  }
  return ranks;
}

double spearman(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("spearman: length mismatch");
  const Index n = a.size();
  if (n < 2) throw UndefinedCorrelation("spearman: need at least two entries");
  const Vector ra = average_ranks(a);
  const Vector rb = average_ranks(b);
  const Vector ca = ra.array() - ra.mean();
  const Vector cb = rb.array() - rb.mean();
  const double va = ca.squaredNorm();
  const double vb = cb.squaredNorm();
  if (va <= 0.0 || vb <= 0.0) {
    throw UndefinedCorrelation("spearman: zero rank variance");
  }
  return ca.dot(cb) / std::sqrt(va * vb);
}

std::vector<RegimeLayers> stratify(const std::vector<LayerProfile>& profiles, Index regimes,
                                   Index layers_per_regime) {
  const Index layer_count = static_cast<Index>(profiles.size());
  if (regimes < 1 || layers_per_regime < 1) {
    throw InvalidArgument("stratify: regime count and size must be positive");
  }
  if (regimes * layers_per_regime > layer_count) {
    throw InvalidArgument("stratify: regime budget exceeds layer count");
  }
  std::vector<Index> order(static_cast<std::size_t>(layer_count));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const LayerProfile& pa = profiles[static_cast<std::size_t>(a)];
    const LayerProfile& pb = profiles[static_cast<std::size_t>(b)];
    if (pa.resnorm != pb.resnorm) return pa.resnorm > pb.resnorm;
    return pa.layer < pb.layer;
  });

  // Rank-position block starts: extremes pinned, middles on even quantiles of
  // the rank axis, clamped so blocks stay disjoint.
  std::vector<Index> starts(static_cast<std::size_t>(regimes), 0);
  if (regimes >= 2) starts[static_cast<std::size_t>(regimes - 1)] = layer_count - layers_per_regime;
  Index prev_end = layers_per_regime;
  const Index avail_end = layer_count - layers_per_regime;
  for (Index m = 1; m + 1 < regimes; ++m) {
    const double center = static_cast<double>(m + 1) * static_cast<double>(layer_count + 1) /
                              static_cast<double>(regimes + 1) -
                          1.0;
    Index start = static_cast<Index>(std::llround(center - 0.5 * static_cast<double>(layers_per_regime - 1)));
    const Index latest = avail_end - (regimes - 1 - m) * layers_per_regime;
    start = std::max(start, prev_end);
    start = std::min(start, latest);
    starts[static_cast<std::size_t>(m)] = start;
    prev_end = start + layers_per_regime;
  }

  const std::vector<std::string> ids = regime_ids(regimes);
  std::vector<RegimeLayers> out;
  for (Index k = 0; k < regimes; ++k) {
    RegimeLayers r;
    r.id = ids[static_cast<std::size_t>(k)];
    const Index s = starts[static_cast<std::size_t>(k)];
    for (Index i = s; i < s + layers_per_regime; ++i) {
      r.layers.push_back(profiles[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])].layer);
    }
    std::sort(r.layers.begin(), r.layers.end());
    out.push_back(std::move(r));
  }
  return out;
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kRandom: return "random";
    case Strategy::kUniform: return "uniform";
    case Strategy::kBottom: return "bottom";
    case Strategy::kMid: return "mid";
    case Strategy::kTop: return "top";
  }
  throw InvalidArgument("strategy: unknown value");
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "random") return Strategy::kRandom;
  if (name == "uniform") return Strategy::kUniform;
  if (name == "bottom") return Strategy::kBottom;
  if (name == "mid") return Strategy::kMid;
  if (name == "top") return Strategy::kTop;
  throw InvalidArgument("strategy: unknown name '" + name + "'");
}

LayerSet strategy_layers(Strategy s, Index layers, Index k, std::uint64_t seed) {
  if (layers < 1) throw InvalidArgument("strategy: need at least one layer");
  if (k < 1 || k > layers) throw InvalidArgument("strategy: budget exceeds layer count");
  LayerSet out;
  switch (s) {
    case Strategy::kBottom:
      for (Index l = 1; l <= k; ++l) out.push_back(l);
      break;
    case Strategy::kTop:
      for (Index l = layers - k + 1; l <= layers; ++l) out.push_back(l);
      break;
    case Strategy::kMid: {
      const Index start = (layers - k) / 2 + 1;
      for (Index l = start; l < start + k; ++l) out.push_back(l);
      break;
    }
    case Strategy::kUniform: {
      Index prev = 0;
      for (Index i = 0; i < k; ++i) {
        Index idx = static_cast<Index>(std::llround(
            (static_cast<double>(i) + 0.5) * static_cast<double>(layers) / static_cast<double>(k)));
        idx = std::clamp(idx, Index{1}, layers);
        if (idx <= prev) idx = prev + 1;
        out.push_back(idx);
        prev = idx;
      }
      break;
    }
    case Strategy::kRandom: {
      CounterRng rng(seed, fnv1a64("strategy:random"));
      std::set<Index> picked;
      while (static_cast<Index>(picked.size()) < k) {
        picked.insert(static_cast<Index>(rng.uniform_int(1, static_cast<int>(layers))));
      }
      out.assign(picked.begin(), picked.end());
      break;
    }
  }
  return out;
}

LayerSet strategy_layers(Strategy s, const std::vector<LayerProfile>& profiles, Index k,
                         std::uint64_t seed) {
  const Index layers = static_cast<Index>(profiles.size());
  if (s == Strategy::kTop || s == Strategy::kMid || s == Strategy::kBottom) {
    const std::vector<RegimeLayers> strata = stratify(profiles, 3, k);
    if (s == Strategy::kTop) return strata[0].layers;
    if (s == Strategy::kMid) return strata[1].layers;
    return strata[2].layers;
  }
  return strategy_layers(s, layers, k, seed);
}

LayerCard build_card(const ToyModel& m, const Batch& probe, const Batch& eval_data,
                     Index regimes, Index layers_per_regime, const FinetuneConfig& ft_cfg,
                     const CostCoeffs& cost_coeffs) {
  ProfileOptions opts;
  opts.rank = ft_cfg.rank;
  const std::vector<LayerProfile> profiles = profile_layers(m, probe, opts);
  const std::vector<RegimeLayers> strata = stratify(profiles, regimes, layers_per_regime);

  const Index n_eval = eval_data.inputs.rows();
  const std::vector<double> flops = layer_flop_units(m, n_eval);
  const std::vector<double> act = layer_act_units(m, n_eval);

  LayerCard card;
  card.model_id = model_id(m);
  card.layers = m.spec.layers;
  card.created = iso_now();
  for (const RegimeLayers& stratum : strata) {
    CardRegime r;
    r.regime_id = stratum.id;
    r.layers = stratum.layers;
    r.resnorm_lo = std::numeric_limits<double>::infinity();
    r.resnorm_hi = -std::numeric_limits<double>::infinity();
    for (Index l : stratum.layers) {
      const LayerProfile& p = profiles[static_cast<std::size_t>(l - 1)];
      r.resnorm_lo = std::min(r.resnorm_lo, p.resnorm);
      r.resnorm_hi = std::max(r.resnorm_hi, p.resnorm);
      r.sigma_profile.push_back(p.sigma_hat);
    }
    const FinetuneResult f = finetune(m, stratum.layers, eval_data, ft_cfg);
    r.gain = f.gain;
    r.cost = estimate(stratum.layers, card.layers, flops, act, cost_coeffs).time_units;
    card.regimes.push_back(std::move(r));
  }

  CardReference ref;
  ref.name = "probe";
  const Vector res = profile_resnorms(profiles);
  ref.resnorm.assign(res.data(), res.data() + res.size());
  card.reference_profiles.push_back(std::move(ref));
  return card;
}

Json card_to_json(const LayerCard& card) {
  Json j;
  j["schema"] = kCardSchema;
  j["model_id"] = card.model_id;
  j["layers"] = card.layers;
  j["created"] = card.created;
  j["regimes"] = Json::array();
  for (const CardRegime& r : card.regimes) {
    Json jr;
    jr["regime_id"] = r.regime_id;
    jr["layers"] = r.layers;
    jr["resnorm_range"] = Json::array({r.resnorm_lo, r.resnorm_hi});
    jr["sigma_profile"] = r.sigma_profile;
    jr["gain"] = r.gain;
    jr["cost"] = r.cost;
    j["regimes"].push_back(std::move(jr));
  }
  j["reference_profiles"] = Json::array();
  for (const CardReference& ref : card.reference_profiles) {
    Json jr;
    jr["name"] = ref.name;
    jr["resnorm"] = ref.resnorm;
    j["reference_profiles"].push_back(std::move(jr));
  }
  return j;
}

LayerCard card_from_json(const Json& j) {
  try {
    if (!j.contains("schema") || j.at("schema").get<std::string>() != kCardSchema) {
      throw SchemaMismatch("card: expected schema layercard/v1");
    }
    LayerCard card;
    card.model_id = j.at("model_id").get<std::string>();
    card.layers = j.at("layers").get<Index>();
    card.created = j.value("created", std::string{});
    for (const Json& jr : j.at("regimes")) {
      CardRegime r;
      r.regime_id = jr.at("regime_id").get<std::string>();
      r.layers = jr.at("layers").get<LayerSet>();
      r.resnorm_lo = jr.at("resnorm_range").at(0).get<double>();
      r.resnorm_hi = jr.at("resnorm_range").at(1).get<double>();
      r.sigma_profile = jr.at("sigma_profile").get<std::vector<double>>();
      r.gain = jr.at("gain").get<double>();
      r.cost = jr.at("cost").get<double>();
      validate_layer_set(r.layers, card.layers, "card regime");
      card.regimes.push_back(std::move(r));
    }
    for (const Json& jr : j.at("reference_profiles")) {
      CardReference ref;
      ref.name = jr.at("name").get<std::string>();
      ref.resnorm = jr.at("resnorm").get<std::vector<double>>();
      card.reference_profiles.push_back(std::move(ref));
    }
    return card;
  } catch (const Json::exception& e) {
    throw IoError(std::string("card: malformed JSON: ") + e.what());
  }
}

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::kMaxPerformance: return "max_performance";
    case Objective::kMinCost: return "min_cost";
    case Objective::kBalanced: return "balanced";
  }
  throw InvalidArgument("objective: unknown value");
}

Objective objective_from_name(const std::string& name) {
  if (name == "max_performance") return Objective::kMaxPerformance;
  if (name == "min_cost") return Objective::kMinCost;
  if (name == "balanced") return Objective::kBalanced;
  throw InvalidArgument("objective: unknown name '" + name + "'");
}

TransferDecision transfer_select(const std::vector<LayerCard>& cards,
                                 const std::vector<LayerProfile>& target_profile, double tau,
                                 Objective objective) {
  if (cards.empty()) throw InvalidArgument("card transfer: no reference cards");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("card transfer: tau must lie in (0,1)");
  if (target_profile.size() < 2) {
    throw InvalidArgument("card transfer: target profile too short");
  }
  for (const LayerCard& c : cards) {
    if (c.regimes.empty() || c.reference_profiles.empty()) {
      throw InvalidArgument("card transfer: card lacks regimes or reference profiles");
    }
  }

  const Vector target = profile_resnorms(target_profile);
  TransferDecision d;
  d.objective = objective;
  std::vector<std::size_t> ref_owner;  // flat reference index -> card index
  for (std::size_t ci = 0; ci < cards.size(); ++ci) {
    for (const CardReference& ref : cards[ci].reference_profiles) {
      Vector r(static_cast<Index>(ref.resnorm.size()));
      for (Index i = 0; i < r.size(); ++i) r(i) = ref.resnorm[static_cast<std::size_t>(i)];
      const double s = spearman(target, r);
      if (s >= tau) d.accepted_refs.push_back(d.similarities.size());
      d.similarities.push_back(s);
      ref_owner.push_back(ci);
    }
  }

  if (d.accepted_refs.empty()) {
    const Index k = static_cast<Index>(cards.front().regimes.front().layers.size());
    d.selected_layers =
        strategy_layers(Strategy::kUniform, static_cast<Index>(target_profile.size()), k, 0);
    return d;
  }

  // Unweighted means per regime id, ids kept in first-appearance order.
  std::vector<std::string> id_order;
  std::map<std::string, std::pair<double, double>> sums;
  std::map<std::string, int> counts;
  for (std::size_t ref : d.accepted_refs) {
    const LayerCard& c = cards[ref_owner[ref]];
    for (const CardRegime& r : c.regimes) {
      if (counts.find(r.regime_id) == counts.end()) id_order.push_back(r.regime_id);
      sums[r.regime_id].first += r.gain;
      sums[r.regime_id].second += r.cost;
      counts[r.regime_id] += 1;
    }
  }
  for (const std::string& id : id_order) {
    RegimeSummary s;
    s.regime_id = id;
    s.mean_gain = sums[id].first / counts[id];
    s.mean_cost = sums[id].second / counts[id];
    d.regime_stats.push_back(std::move(s));
  }

  std::size_t best = 0;
  bool found = false;
  switch (objective) {
    case Objective::kMaxPerformance: {
      for (std::size_t i = 0; i < d.regime_stats.size(); ++i) {
        if (!found || d.regime_stats[i].mean_gain > d.regime_stats[best].mean_gain) {
          best = i;
          found = true;
        }
      }
      break;
    }
    case Objective::kMinCost: {
      // Regimes that lose performance are out; the gain invariant keeps the
      // candidate set nonempty on cards built here.
      for (std::size_t i = 0; i < d.regime_stats.size(); ++i) {
        if (d.regime_stats[i].mean_gain < -1e-12) continue;
        if (!found || d.regime_stats[i].mean_cost < d.regime_stats[best].mean_cost) {
          best = i;
          found = true;
        }
      }
      if (!found) {
        for (std::size_t i = 0; i < d.regime_stats.size(); ++i) {
          if (!found || d.regime_stats[i].mean_cost < d.regime_stats[best].mean_cost) {
            best = i;
            found = true;
          }
        }
      }
      break;
    }
    case Objective::kBalanced: {
      auto ratio = [&](std::size_t i) {
        return d.regime_stats[i].mean_gain / std::max(d.regime_stats[i].mean_cost, 1e-12);
      };
      for (std::size_t i = 0; i < d.regime_stats.size(); ++i) {
        if (!found || ratio(i) > ratio(best)) {
          best = i;
          found = true;
        }
      }
      break;
    }
  }
  d.chosen_regime = d.regime_stats[best].regime_id;

  // Map the chosen stratum onto the target's own profile using the first
  // accepted card's stratification shape.
  const LayerCard& owner = cards[ref_owner[d.accepted_refs.front()]];
  const Index k_sel = static_cast<Index>(owner.regimes.size());
  const Index k_per = static_cast<Index>(owner.regimes.front().layers.size());
  const std::vector<RegimeLayers> target_strata = stratify(target_profile, k_sel, k_per);
  bool mapped = false;
  for (const RegimeLayers& stratum : target_strata) {
    if (stratum.id == d.chosen_regime) {
      d.selected_layers = stratum.layers;
      mapped = true;
      break;
    }
  }
  if (!mapped) {
    for (const CardRegime& r : owner.regimes) {
      if (r.regime_id == d.chosen_regime) d.selected_layers = r.layers;
    }
  }
  return d;
}

Json decision_to_json(const TransferDecision& d) {
  Json j;
  j["schema"] = kDecisionSchema;
  j["objective"] = objective_name(d.objective);
  j["similarities"] = d.similarities;
  j["accepted_refs"] = d.accepted_refs;
  if (d.chosen_regime.empty()) {
    j["chosen_regime"] = nullptr;
  } else {
    j["chosen_regime"] = d.chosen_regime;
  }
  j["selected_layers"] = d.selected_layers;
  j["regime_stats"] = Json::array();
  for (const RegimeSummary& s : d.regime_stats) {
    Json js;
    js["regime_id"] = s.regime_id;
    js["mean_gain"] = s.mean_gain;
    js["mean_cost"] = s.mean_cost;
    j["regime_stats"].push_back(std::move(js));
  }
  return j;
}

std::string decision_table(const TransferDecision& d) {
  std::string out;
  char line[128];
  out += "ref  similarity  accepted\n";
  for (std::size_t i = 0; i < d.similarities.size(); ++i) {
    const bool acc = std::find(d.accepted_refs.begin(), d.accepted_refs.end(), i) !=
                     d.accepted_refs.end();
    std::snprintf(line, sizeof line, "%3zu  %10.6f  %8s\n", i, d.similarities[i],
                  acc ? "yes" : "no");
    out += line;
  }
  if (!d.regime_stats.empty()) {
    out += "regime  mean_gain  mean_cost\n";
    for (const RegimeSummary& s : d.regime_stats) {
      std::snprintf(line, sizeof line, "%-6s  %9.4g  %9.4g\n", s.regime_id.c_str(), s.mean_gain,
                    s.mean_cost);
      out += line;
    }
  }
  out += "objective: ";
  out += objective_name(d.objective);
  out += "\nchosen regime: ";
  out += d.chosen_regime.empty() ? "none" : d.chosen_regime;
  out += "\nselected layers:";
  for (Index l : d.selected_layers) out += " " + std::to_string(l);
  out += "\n";
  return out;
}

}  // namespace layercard

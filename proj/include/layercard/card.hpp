#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "layercard/costmodel.hpp"
#include "layercard/io.hpp"
#include "layercard/toynet.hpp"

namespace layercard {

// Average-tie ranks in descending value order: the largest entry gets rank 1,
// tied entries share the mean of the positions they cover.
Vector average_ranks(const Vector& v);

// Pearson correlation of the descending average-tie ranks of a and b.
double spearman(const Vector& a, const Vector& b);

struct RegimeLayers {
  std::string id;
  LayerSet layers;
};

// Groups layers into disjoint resnorm strata: regime 1 holds the k_per
// highest-resnorm layers, regime K the k_per lowest, middle regimes sit on
// evenly spaced rank quantiles. Ties rank the smaller layer index first.
std::vector<RegimeLayers> stratify(const std::vector<LayerProfile>& profiles, Index regimes,
                                   Index layers_per_regime);

enum class Strategy { kRandom, kUniform, kBottom, kMid, kTop };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// Depth-based placement: bottom/mid/top are contiguous blocks by layer index,
// uniform spreads round((i+1/2)L/k), random draws k distinct seeded layers.
LayerSet strategy_layers(Strategy s, Index layers, Index k, std::uint64_t seed);
// Profile-based placement: bottom/mid/top are resnorm strata from stratify
// with three regimes; uniform and random ignore the profiles.
LayerSet strategy_layers(Strategy s, const std::vector<LayerProfile>& profiles, Index k,
                         std::uint64_t seed);

struct CardRegime {
  std::string regime_id;
  LayerSet layers;
  double resnorm_lo = 0.0;
  double resnorm_hi = 0.0;
  std::vector<double> sigma_profile;  // sigma_hat aligned with layers
  double gain = 0.0;                  // loss reduction from adapting this stratum
  double cost = 0.0;                  // estimated time units for this stratum
};

struct CardReference {
  std::string name;
  std::vector<double> resnorm;  // per-layer resnorm on the reference data
};

struct LayerCard {
  std::string model_id;
  Index layers = 0;
  std::vector<CardRegime> regimes;
  std::vector<CardReference> reference_profiles;
  std::string created;  // wall-clock timestamp, the only non-deterministic field
};

// Work-proportional default: time counts backward-path flops, memory counts
// retained activations, with no fixed overhead.
inline constexpr CostCoeffs kUnitCostCoeffs{0.0, 1.0, 0.0, 0.0, 1.0};

LayerCard build_card(const ToyModel& m, const Batch& probe, const Batch& eval_data,
                     Index regimes, Index layers_per_regime, const FinetuneConfig& ft_cfg,
                     const CostCoeffs& cost_coeffs = kUnitCostCoeffs);

Json card_to_json(const LayerCard& card);
LayerCard card_from_json(const Json& j);

enum class Objective { kMaxPerformance, kMinCost, kBalanced };

const char* objective_name(Objective o);
Objective objective_from_name(const std::string& name);

struct RegimeSummary {
  std::string regime_id;
  double mean_gain = 0.0;
  double mean_cost = 0.0;
};

struct TransferDecision {
  std::vector<double> similarities;        // one per reference profile, card order
  std::vector<std::size_t> accepted_refs;  // indices with similarity >= tau
  std::string chosen_regime;               // empty when no reference clears tau
  LayerSet selected_layers;
  Objective objective = Objective::kMaxPerformance;
  std::vector<RegimeSummary> regime_stats;  // means over accepted references
};

// Stage II: scores every reference profile against the target by Spearman
// rank correlation, averages regime statistics over the accepted set, picks a
// regime per the objective, and maps it onto the target's own strata. With no
// accepted reference the fallback is a uniform depth spread.
TransferDecision transfer_select(const std::vector<LayerCard>& cards,
                                 const std::vector<LayerProfile>& target_profile, double tau,
                                 Objective objective);

Json decision_to_json(const TransferDecision& d);
std::string decision_table(const TransferDecision& d);

}  // namespace layercard

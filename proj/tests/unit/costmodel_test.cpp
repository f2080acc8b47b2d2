#include "layercard/costmodel.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "layercard/errors.hpp"
#include "layercard/rng.hpp"
#include "layercard/toynet.hpp"

using namespace layercard;

namespace {

std::vector<double> uniform_units(Index layers, double value) {
  return std::vector<double>(static_cast<std::size_t>(layers), value);
}

std::vector<double> ramp_units(Index layers, double base, double slope) {
  std::vector<double> u(static_cast<std::size_t>(layers));
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = base + slope * static_cast<double>(i);
  return u;
}

}  // namespace

TEST_SUITE("costmodel") {

TEST_CASE("estimate matches the affine law on pinned inputs") {
  const Index layers = 4;
  const auto flops = uniform_units(layers, 1.0);
  const auto act = uniform_units(layers, 1.0);
  CostCoeffs c;
  c.t0 = 1.0;
  c.t1 = 2.0;
  c.t2 = 0.1;
  c.m0 = 3.0;
  c.m1 = 0.5;

  const CostEstimate deep = estimate({4}, layers, flops, act, c);
  CHECK(deep.time_units == doctest::Approx(3.1).epsilon(1e-12));
  CHECK(deep.memory_units == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(deep.backprop_depth == 1);
  CHECK(deep.retained_layers == 1);

  const CostEstimate shallow = estimate({1}, layers, flops, act, c);
  CHECK(shallow.time_units == doctest::Approx(9.1).epsilon(1e-12));
  CHECK(shallow.memory_units == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(shallow.backprop_depth == 4);

  const CostEstimate pair = estimate({2, 4}, layers, flops, act, c);
  CHECK(pair.time_units == doctest::Approx(7.2).epsilon(1e-12));
  CHECK(pair.memory_units == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(pair.backprop_depth == 3);

  const auto flops3 = std::vector<double>{10.0, 20.0, 30.0};
  const auto act3 = std::vector<double>{5.0, 7.0, 9.0};
  const CostEstimate mid = estimate({2, 3}, 3, flops3, act3, c);
  CHECK(mid.time_units == doctest::Approx(1.0 + 2.0 * 50.0 + 0.2).epsilon(1e-12));
  CHECK(mid.memory_units == doctest::Approx(3.0 + 0.5 * 16.0).epsilon(1e-12));
}

TEST_CASE("estimate validates its inputs") {
  const auto flops = uniform_units(4, 1.0);
  const auto act = uniform_units(4, 1.0);
  CostCoeffs c;
  CHECK_THROWS_AS(estimate({}, 4, flops, act, c), EmptySelection);
  CHECK_THROWS_AS(estimate({0}, 4, flops, act, c), InvalidArgument);
  CHECK_THROWS_AS(estimate({5}, 4, flops, act, c), InvalidArgument);
  CHECK_THROWS_AS(estimate({2, 2}, 4, flops, act, c), InvalidArgument);
  CHECK_THROWS_AS(estimate({1}, 4, uniform_units(3, 1.0), act, c), DimensionMismatch);
  CHECK_THROWS_AS(estimate({1}, 4, flops, uniform_units(5, 1.0), c), DimensionMismatch);
}

TEST_CASE("latest singleton is the cheapest selection") {
  const Index layers = 8;
  CounterRng rng(77, 0);
  std::vector<double> flops(8), act(8);
  for (auto& f : flops) f = 1.0 + rng.uniform();
  for (auto& a : act) a = 0.5 + rng.uniform();
  CostCoeffs c;
  c.t0 = 0.3;
  c.t1 = 1.7;
  c.t2 = 0.05;
  c.m0 = 0.1;
  c.m1 = 2.0;
  const CostEstimate last = estimate({layers}, layers, flops, act, c);
  for (Index l = 1; l <= layers; ++l) {
    const CostEstimate e = estimate({l}, layers, flops, act, c);
    CHECK(e.time_units >= last.time_units - 1e-12);
    CHECK(e.memory_units >= last.memory_units - 1e-12);
  }
}

TEST_CASE("uniform layers make the shallow to deep singleton time ratio the depth") {
  const Index layers = 6;
  const auto flops = uniform_units(layers, 3.0);
  const auto act = uniform_units(layers, 1.0);
  CostCoeffs c;
  c.t1 = 0.8;
  const double shallow = estimate({1}, layers, flops, act, c).time_units;
  const double deep = estimate({layers}, layers, flops, act, c).time_units;
  CHECK(shallow == doctest::Approx(static_cast<double>(layers) * deep).epsilon(1e-12));
}

TEST_CASE("deeper start never costs more at equal selection size") {
  const Index layers = 6;
  CounterRng rng(31, 0);
  std::vector<double> flops(6), act(6);
  for (auto& f : flops) f = rng.uniform();
  for (auto& a : act) a = rng.uniform();
  CostCoeffs c;
  c.t0 = rng.uniform();
  c.t1 = rng.uniform();
  c.t2 = rng.uniform();
  c.m0 = rng.uniform();
  c.m1 = rng.uniform();
  std::vector<LayerSet> pairs;
  for (Index a = 1; a <= layers; ++a)
    for (Index b = a + 1; b <= layers; ++b) pairs.push_back({a, b});
  for (const LayerSet& s1 : pairs) {
    for (const LayerSet& s2 : pairs) {
      if (s1.front() > s2.front()) continue;
      const CostEstimate e1 = estimate(s1, layers, flops, act, c);
      const CostEstimate e2 = estimate(s2, layers, flops, act, c);
      CHECK(e1.time_units >= e2.time_units - 1e-12);
      CHECK(e1.memory_units >= e2.memory_units - 1e-12);
    }
  }
}

TEST_CASE("adding a deeper layer moves time only through the per-layer term") {
  const Index layers = 8;
  const auto flops = ramp_units(layers, 2.0, 0.5);
  const auto act = ramp_units(layers, 1.0, 0.25);
  CostCoeffs c;
  c.t0 = 1.0;
  c.t1 = 0.4;
  c.t2 = 0.75;
  c.m1 = 1.5;
  const CostEstimate base = estimate({3, 5}, layers, flops, act, c);
  const CostEstimate wider = estimate({3, 5, 7}, layers, flops, act, c);
  CHECK(wider.time_units - base.time_units == doctest::Approx(c.t2).epsilon(1e-12));
  CHECK(wider.memory_units == doctest::Approx(base.memory_units).epsilon(1e-12));
  CHECK(wider.backprop_depth == base.backprop_depth);
}

TEST_CASE("calibration recovers the generating coefficients") {
  const Index layers = 10;
  const auto flops = ramp_units(layers, 10.0, 3.0);
  const auto act = ramp_units(layers, 4.0, 1.0);
  CostCoeffs truth;
  truth.t0 = 5.0;
  truth.t1 = 0.25;
  truth.t2 = 3.0;
  truth.m0 = 2.0;
  truth.m1 = 0.5;
  const std::vector<LayerSet> sets = {{1, 2, 3, 4}, {5, 6}, {9}, {3, 7, 10}, {10}, {2, 8}};
  std::vector<CostMeasurement> measured;
  for (const LayerSet& s : sets) {
    const CostEstimate e = estimate(s, layers, flops, act, truth);
    measured.push_back({s, e.time_units, e.memory_units});
  }
  const CalibrationResult r = calibrate(measured, layers, flops, act);
  CHECK(r.coeffs.t0 == doctest::Approx(truth.t0).epsilon(1e-6));
  CHECK(r.coeffs.t1 == doctest::Approx(truth.t1).epsilon(1e-6));
  CHECK(r.coeffs.t2 == doctest::Approx(truth.t2).epsilon(1e-6));
  CHECK(r.coeffs.m0 == doctest::Approx(truth.m0).epsilon(1e-6));
  CHECK(r.coeffs.m1 == doctest::Approx(truth.m1).epsilon(1e-6));
  CHECK(r.time_residual <= 1e-8);
  CHECK(r.memory_residual <= 1e-8);
}

TEST_CASE("calibration needs three distinct earliest layers") {
  const Index layers = 6;
  const auto flops = uniform_units(layers, 1.0);
  const auto act = uniform_units(layers, 1.0);
  std::vector<CostMeasurement> same_min = {
      {{2}, 1.0, 1.0}, {{2, 3}, 2.0, 1.0}, {{2, 5, 6}, 3.0, 1.0}};
  CHECK_THROWS_AS(calibrate(same_min, layers, flops, act), CalibrationUnderdetermined);
  std::vector<CostMeasurement> two = {{{1}, 1.0, 1.0}, {{4}, 2.0, 2.0}};
  CHECK_THROWS_AS(calibrate(two, layers, flops, act), CalibrationUnderdetermined);
  std::vector<CostMeasurement> bad = {{{1}, 1.0, 1.0}, {{0}, 2.0, 2.0}, {{4}, 3.0, 3.0}};
  CHECK_THROWS_AS(calibrate(bad, layers, flops, act), InvalidArgument);
}

TEST_CASE("zero per-layer units leave the design rank deficient") {
  const Index layers = 6;
  const auto zeros = uniform_units(layers, 0.0);
  std::vector<CostMeasurement> measured = {
      {{1}, 1.0, 1.0}, {{3}, 2.0, 2.0}, {{5}, 3.0, 3.0}};
  CHECK_THROWS_AS(calibrate(measured, layers, zeros, zeros), CalibrationUnderdetermined);
}

TEST_CASE("constant selection size folds the per-layer count into the offset") {
  const Index layers = 12;
  const auto flops = uniform_units(layers, 1.0);
  const auto act = uniform_units(layers, 1.0);
  CostCoeffs truth;
  truth.t0 = 2.0;
  truth.t1 = 1.0;
  truth.t2 = 5.0;
  truth.m0 = 1.0;
  truth.m1 = 1.0;
  const std::vector<LayerSet> sets = {
      {1, 2, 3, 4}, {5, 6, 7, 8}, {9, 10, 11, 12}};
  std::vector<CostMeasurement> measured;
  for (const LayerSet& s : sets) {
    const CostEstimate e = estimate(s, layers, flops, act, truth);
    measured.push_back({s, e.time_units, e.memory_units});
  }
  const CalibrationResult r = calibrate(measured, layers, flops, act);
  CHECK(r.coeffs.t2 == 0.0);
  CHECK(r.time_residual <= 1e-9);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const CostEstimate e = estimate(sets[i], layers, flops, act, r.coeffs);
    CHECK(e.time_units == doctest::Approx(measured[i].time_units).epsilon(1e-9));
    CHECK(e.time_units < prev);
    prev = e.time_units;
  }
  const double shallow = estimate(sets[0], layers, flops, act, r.coeffs).time_units;
  const double deep = estimate(sets[2], layers, flops, act, r.coeffs).time_units;
  CHECK(deep < shallow);
}

TEST_CASE("fitted coefficients stay nonnegative even on adversarial data") {
  const Index layers = 4;
  const auto flops = uniform_units(layers, 1.0);
  const auto act = uniform_units(layers, 1.0);
  // Time that grows as the backward path shrinks would need t1 < 0; the fit
  // must land on a feasible face instead and report the misfit.
  std::vector<CostMeasurement> measured = {
      {{1}, 1.0, 1.0}, {{2, 3}, 5.0, 5.0}, {{4}, 10.0, 10.0}};
  const CalibrationResult r = calibrate(measured, layers, flops, act);
  CHECK(r.coeffs.t0 >= 0.0);
  CHECK(r.coeffs.t1 >= 0.0);
  CHECK(r.coeffs.t2 >= 0.0);
  CHECK(r.coeffs.m0 >= 0.0);
  CHECK(r.coeffs.m1 >= 0.0);
  CHECK(r.time_residual > 0.1);
  CHECK(r.memory_residual > 0.1);
}

TEST_CASE("toy finetune work counters follow the fitted model exactly") {
  ToyModelSpec spec;
  spec.layers = 8;
  spec.width = 8;
  spec.head_dim = 1;
  spec.teacher_layers = {2};
  spec.teacher_scale = 0.4;
  spec.seed = 11;
  const ToyModel model = generate(spec);
  const Index n = 16;
  const Batch batch = sample_batch(model, n, 501);
  const auto flops = layer_flop_units(model, n);
  const auto act = layer_act_units(model, n);

  FinetuneConfig cfg;
  cfg.rank = 2;
  cfg.steps = 3;
  const std::vector<LayerSet> sets = {
      {8}, {4}, {1}, {1, 2}, {7, 8}, {1, 2, 3, 4}, {3, 4, 5, 6}, {5, 6, 7, 8}};
  std::vector<CostMeasurement> measured;
  for (const LayerSet& s : sets) {
    const FinetuneResult f = finetune(model, s, batch, cfg);
    measured.push_back({s, f.time_units, f.memory_units});
  }
  const CalibrationResult r = calibrate(measured, spec.layers, flops, act);
  CHECK(r.time_residual <= 1e-9 * (1.0 + measured[0].time_units));
  CHECK(r.memory_residual <= 1e-9 * (1.0 + measured[0].memory_units));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const CostEstimate e = estimate(sets[i], spec.layers, flops, act, r.coeffs);
    CHECK(e.time_units ==
          doctest::Approx(measured[i].time_units).epsilon(1e-9));
    CHECK(e.memory_units ==
          doctest::Approx(measured[i].memory_units).epsilon(1e-9));
  }

  // Depth ordering with a real margin: the deepest regime must undercut the
  // shallowest by at least 15 percent in fitted time.
  const double top = estimate({5, 6, 7, 8}, spec.layers, flops, act, r.coeffs).time_units;
  const double mid = estimate({3, 4, 5, 6}, spec.layers, flops, act, r.coeffs).time_units;
  const double bottom = estimate({1, 2, 3, 4}, spec.layers, flops, act, r.coeffs).time_units;
  CHECK(top < mid);
  CHECK(mid < bottom);
  CHECK((bottom - top) / bottom >= 0.15);
  const double top_mem = estimate({5, 6, 7, 8}, spec.layers, flops, act, r.coeffs).memory_units;
  const double bottom_mem = estimate({1, 2, 3, 4}, spec.layers, flops, act, r.coeffs).memory_units;
  CHECK(top_mem < bottom_mem);
}

}

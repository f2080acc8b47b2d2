#include "layercard/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "layercard/diagnostics.hpp"
#include "layercard/errors.hpp"
#include "layercard/quadratic.hpp"
#include "layercard/rng.hpp"

namespace layercard {

namespace {

CheckRow make_row(std::uint64_t seed, const char* check, double lhs, double rhs) {
  CheckRow row;
  row.seed = seed;
  row.check = check;
  row.lhs = lhs;
  row.rhs = rhs;
  row.margin = rhs - lhs;
  const double slack = 1e-9 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
  row.pass = row.margin >= -slack;
  return row;
}

}  // namespace

VerifyReport run_verify(Index instances, std::uint64_t base_seed) {
  if (instances < 1) throw InvalidArgument("verify: need at least one instance");
  VerifyReport report;
  for (Index i = 0; i < instances; ++i) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    CounterRng rng(seed, fnv1a64("verify"));

    const Index layers = rng.uniform_int(2, 5);
    std::vector<Index> sizes;
    for (Index l = 0; l < layers; ++l) sizes.push_back(rng.uniform_int(1, 8));
    const double decay = rng.uniform(0.2, 0.8);
    double strength = rng.uniform(0.0, 0.45);
    const std::uint64_t instance_seed = rng.next_u64();
    // The audited bounds presuppose subunit coupling, and the freeze upper
    // bound additionally needs kappa < 1; kappa <= rho^2/(1-rho), so capping
    // rho at 0.6 keeps every hypothesis satisfied with margin.
    QuadraticModel m = gen_coupled_instance(layers, sizes, decay, strength, instance_seed);
    while (coupling_rho(m) > 0.6) {
      strength *= 0.5;
      m = gen_coupled_instance(layers, sizes, decay, strength, instance_seed);
    }

    const GapBound gb = additivity_gap(m);
    report.rows.push_back(make_row(seed, "thm1_gap", gb.gap, gb.bound));

    LayerSet s;
    for (Index l = 1; l <= layers; ++l) {
      if (rng.uniform() < 0.5) s.push_back(l);
    }
    if (s.empty()) s.push_back(static_cast<Index>(rng.uniform_int(1, static_cast<int>(layers))));
    const SandwichReport sr = sandwich_check(m, s);
    report.rows.push_back(make_row(seed, "sandwich_lower", sr.lower, sr.delta));
    report.rows.push_back(
        make_row(seed, "sandwich_upper", sr.delta, sr.delta_add / (1.0 - sr.rho_s)));

    const Index layer = static_cast<Index>(rng.uniform_int(1, static_cast<int>(layers)));
    const FreezeReport fr = freeze_penalty(m, layer);
    report.rows.push_back(make_row(seed, "freeze_lower", fr.lower, fr.penalty));
    report.rows.push_back(make_row(seed, "freeze_upper", fr.penalty, fr.upper));
    report.rows.push_back(make_row(seed, "freeze_slack", 0.5 * fr.s * fr.s, fr.penalty));

    const auto [d_part, e_part] = block_split(m.h, m.partition);
    double lam_min = std::numeric_limits<double>::infinity();
    double d_norm = 0.0;
    for (Index l = 1; l <= layers; ++l) {
      const Index off = m.partition.offset(l);
      const Index sz = m.partition.size(l);
      const SymMatrix block = SymMatrix(Matrix(d_part.mat().block(off, off, sz, sz)));
      const Spectrum sp = eigendecompose(block);
      lam_min = std::min(lam_min, sp.eigenvalues(sp.eigenvalues.size() - 1));
      d_norm = std::max(d_norm, spectral_norm(block));
    }
    const double e_norm = spectral_norm(e_part);
    const double m_norm = spectral_norm(whitened_offdiag(m.h, m.partition));
    report.rows.push_back(make_row(seed, "lemma_lower", lam_min * m_norm, e_norm));
    report.rows.push_back(make_row(seed, "lemma_upper", e_norm, d_norm * m_norm));

    // feature-covariance reading of the instance: the same SPD matrix acts as
    // the second-moment matrix and its whitened coupling dominates the
    // projector-based lower bound
    const double sigma_lower = sigma_coupling_bound(m.h, m.partition);
    report.rows.push_back(make_row(seed, "sigma_coupling", sigma_lower, coupling_rho(m)));
  }
  for (const CheckRow& row : report.rows) {
    if (!row.pass) ++report.violations;
  }
  return report;
}

Csv verify_to_csv(const VerifyReport& report) {
  Csv csv;
  csv.header = {"seed", "check", "lhs", "rhs", "margin", "pass"};
  for (const CheckRow& row : report.rows) {
    csv.rows.push_back({std::to_string(row.seed), row.check, format_double(row.lhs),
                        format_double(row.rhs), format_double(row.margin),
                        row.pass ? "1" : "0"});
  }
  return csv;
}

}  // namespace layercard

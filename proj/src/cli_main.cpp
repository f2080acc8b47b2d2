#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "layercard/card.hpp"
#include "layercard/errors.hpp"
#include "layercard/io.hpp"
#include "layercard/toynet.hpp"
#include "layercard/verify.hpp"

namespace {

using namespace layercard;

ToyModel load_model(const std::string& path) { return model_from_json(read_json(path)); }

Csv profile_to_csv(const std::vector<LayerProfile>& profiles) {
  Csv csv;
  csv.header = {"layer", "grad_norm", "sigma_hat", "resnorm", "erank"};
  for (const LayerProfile& p : profiles) {
    csv.rows.push_back({std::to_string(p.layer), format_double(p.grad_norm),
                        format_double(p.sigma_hat), format_double(p.resnorm),
                        format_double(p.erank)});
  }
  return csv;
}

struct GenArgs {
  Index layers = 2;
  Index width = 4;
  Index head_dim = 1;
  std::string nonlinearity = "tanh";
  std::vector<Index> teacher_layers;
  double teacher_scale = 0.0;
  std::uint64_t seed = 0;
  std::string output;
};

int cmd_gen(const GenArgs& a) {
  ToyModelSpec spec;
  spec.layers = a.layers;
  spec.width = a.width;
  spec.head_dim = a.head_dim;
  spec.nonlinearity = nonlinearity_from_name(a.nonlinearity);
  spec.teacher_layers = a.teacher_layers;
  spec.teacher_scale = a.teacher_scale;
  spec.seed = a.seed;
  const ToyModel m = generate(spec);
  write_file(a.output, canonical_dump(model_to_json(m), 2) + "\n");
  std::cout << model_id(m) << "\n";
  return 0;
}

struct ProfileArgs {
  std::string model;
  Index probe_n = 64;
  std::uint64_t probe_seed = 0;
  Index rank = 2;
  std::string output;
};

int cmd_profile(const ProfileArgs& a) {
  const ToyModel m = load_model(a.model);
  const Batch probe = sample_batch(m, a.probe_n, a.probe_seed);
  ProfileOptions opts;
  opts.rank = a.rank;
  const std::string text = csv_dump(profile_to_csv(profile_layers(m, probe, opts)));
  if (a.output.empty()) {
    std::cout << text;
  } else {
    write_file(a.output, text);
  }
  return 0;
}

struct CardBuildArgs {
  std::string model;
  Index probe_n = 64;
  std::uint64_t probe_seed = 1;
  Index eval_n = 64;
  std::uint64_t eval_seed = 2;
  Index regimes = 3;
  Index per_regime = 2;
  Index rank = 2;
  int steps = 200;
  std::string output;
};

int cmd_card_build(const CardBuildArgs& a) {
  const ToyModel m = load_model(a.model);
  const Batch probe = sample_batch(m, a.probe_n, a.probe_seed);
  const Batch eval_data = sample_batch(m, a.eval_n, a.eval_seed);
  FinetuneConfig cfg;
  cfg.rank = a.rank;
  cfg.steps = a.steps;
  const LayerCard card = build_card(m, probe, eval_data, a.regimes, a.per_regime, cfg);
  write_file(a.output, canonical_dump(card_to_json(card), 2) + "\n");
  std::cout << card.model_id << "\n";
  return 0;
}

struct CardTransferArgs {
  std::vector<std::string> cards;
  std::string target_model;
  Index probe_n = 64;
  std::uint64_t probe_seed = 1;
  Index rank = 2;
  double tau = 0.9;
  std::string objective = "max_performance";
  std::string output;
};

int cmd_card_transfer(const CardTransferArgs& a) {
  std::vector<LayerCard> cards;
  for (const std::string& path : a.cards) cards.push_back(card_from_json(read_json(path)));
  const ToyModel target = load_model(a.target_model);
  const Batch probe = sample_batch(target, a.probe_n, a.probe_seed);
  ProfileOptions opts;
  opts.rank = a.rank;
  const std::vector<LayerProfile> profiles = profile_layers(target, probe, opts);
  const TransferDecision d =
      transfer_select(cards, profiles, a.tau, objective_from_name(a.objective));
  std::cout << decision_table(d);
  if (!a.output.empty()) write_file(a.output, canonical_dump(decision_to_json(d), 2) + "\n");
  return 0;
}

struct VerifyArgs {
  Index instances = 200;
  std::uint64_t seed = 0;
  std::string output;
};

int cmd_verify(const VerifyArgs& a) {
  const VerifyReport report = run_verify(a.instances, a.seed);
  if (!a.output.empty()) write_file(a.output, csv_dump(verify_to_csv(report)));
  if (report.violations > 0) {
    for (const CheckRow& row : report.rows) {
      if (!row.pass) {
        std::cerr << "violation: seed=" << row.seed << " check=" << row.check
                  << " margin=" << format_double(row.margin) << "\n";
      }
    }
    std::cerr << report.violations << " of " << report.rows.size() << " checks violated\n";
    return 1;
  }
  std::cout << report.rows.size() << " checks on " << a.instances
            << " instances, all bounds hold\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-rank adapter layer selection toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from an INI/TOML file");

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "generate a frozen model with a planted teacher");
  gen->add_option("--layers", gen_args.layers, "number of residual blocks")->required();
  gen->add_option("--width", gen_args.width, "hidden width")->required();
  gen->add_option("--head-dim", gen_args.head_dim, "output head dimension");
  gen->add_option("--nonlinearity", gen_args.nonlinearity, "identity or tanh");
  gen->add_option("--teacher-layers", gen_args.teacher_layers, "layers carrying the teacher shift")
      ->delimiter(',');
  gen->add_option("--teacher-scale", gen_args.teacher_scale, "teacher shift magnitude");
  gen->add_option("--seed", gen_args.seed, "generation seed");
  gen->add_option("-o,--output", gen_args.output, "model JSON path")->required();

  ProfileArgs profile_args;
  CLI::App* profile = app.add_subcommand("profile", "per-layer gradient and activation profile");
  profile->add_option("--model", profile_args.model, "model JSON path")->required();
  profile->add_option("--probe-n", profile_args.probe_n, "probe batch size");
  profile->add_option("--probe-seed", profile_args.probe_seed, "probe batch seed");
  profile->add_option("--rank", profile_args.rank, "probe adapter rank");
  profile->add_option("-o,--output", profile_args.output, "profile CSV path (default stdout)");

  CardBuildArgs build_args;
  CLI::App* card_build = app.add_subcommand("card-build", "profile, stratify and measure regimes");
  card_build->add_option("--model", build_args.model, "model JSON path")->required();
  card_build->add_option("--probe-n", build_args.probe_n, "probe batch size");
  card_build->add_option("--probe-seed", build_args.probe_seed, "probe batch seed");
  card_build->add_option("--eval-n", build_args.eval_n, "gain evaluation batch size");
  card_build->add_option("--eval-seed", build_args.eval_seed, "gain evaluation batch seed");
  card_build->add_option("--regimes", build_args.regimes, "number of resnorm strata");
  card_build->add_option("--per-regime", build_args.per_regime, "layers per stratum");
  card_build->add_option("--rank", build_args.rank, "adapter rank");
  card_build->add_option("--steps", build_args.steps, "finetune steps per stratum");
  card_build->add_option("-o,--output", build_args.output, "card JSON path")->required();

  CardTransferArgs transfer_args;
  CLI::App* card_transfer =
      app.add_subcommand("card-transfer", "select layers on a target from stored cards");
  card_transfer->add_option("--card", transfer_args.cards, "card JSON path (repeatable)")
      ->required();
  card_transfer->add_option("--target-model", transfer_args.target_model, "target model JSON")
      ->required();
  card_transfer->add_option("--probe-n", transfer_args.probe_n, "target probe batch size");
  card_transfer->add_option("--probe-seed", transfer_args.probe_seed, "target probe batch seed");
  card_transfer->add_option("--rank", transfer_args.rank, "probe adapter rank");
  card_transfer->add_option("--tau", transfer_args.tau, "similarity acceptance threshold");
  card_transfer->add_option("--objective", transfer_args.objective,
                            "max_performance, min_cost or balanced");
  card_transfer->add_option("-o,--output", transfer_args.output, "decision JSON path");

  VerifyArgs verify_args;
  CLI::App* verify = app.add_subcommand("verify", "audit the surrogate bounds on random instances");
  verify->add_option("--instances", verify_args.instances, "number of random instances");
  verify->add_option("--seed", verify_args.seed, "base seed (instance i uses seed + i)");
  verify->add_option("-o,--output", verify_args.output, "report CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_args);
    if (profile->parsed()) return cmd_profile(profile_args);
    if (card_build->parsed()) return cmd_card_build(build_args);
    if (card_transfer->parsed()) return cmd_card_transfer(transfer_args);
    if (verify->parsed()) return cmd_verify(verify_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

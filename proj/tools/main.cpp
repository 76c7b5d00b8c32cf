#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace ecodrive::cli;

int main(int argc, char ** argv)
{
  CLI::App app{"Eco-driving MPC with learned terminal sets and cost-to-go"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::string csv, json_out, config, out_dir, artifacts, dataset, target, baseline, candidate;
  int t = 0;

  auto * reg = app.add_subcommand("regress-energy", "Fit the quadratic energy model to v,u,dE samples");
  reg->add_option("--csv", csv, "Input CSV")->required();
  reg->add_option("--out", json_out, "Model JSON")->required();

  auto * tr = app.add_subcommand("train", "Learn sets and cost-to-go by closed-loop data augmentation");
  tr->add_option("--config", config, "Config JSON")->required();
  tr->add_option("--out", out_dir, "Output directory")->required();

  auto * rn = app.add_subcommand("run", "One closed-loop run");
  auto * ev = app.add_subcommand("evaluate", "Monte Carlo evaluation");
  for (auto * sub : {rn, ev}) {
    sub->add_option("--config", config, "Config JSON")->required();
    sub->add_option("--artifacts", artifacts, "Directory written by train (mpc only)");
    sub->add_option("--out", out_dir, "Output directory")->required();
  }

  auto * st = app.add_subcommand("sets", "Robust controllable set R_t from a dataset");
  st->add_option("--config", config, "Config JSON")->required();
  st->add_option("--dataset", dataset, "Dataset CSV")->required();
  st->add_option("--t", t, "Stage")->required();
  st->add_option("--target", target, "before | after | after-absorbing")->required();
  st->add_option("--out", json_out, "Region JSON")->required();

  auto * cmp = app.add_subcommand("compare", "Percentage deltas between two summaries");
  cmp->add_option("--baseline", baseline, "Baseline summary JSON")->required();
  cmp->add_option("--candidate", candidate, "Candidate summary JSON")->required();
  cmp->add_option("--out", json_out, "Report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  return guarded(
    [&] {
      if (*reg) { return regress_energy(csv, json_out, std::cout); }
      if (*tr) { return train(config, out_dir, std::cout); }
      if (*rn) { return run(config, artifacts, out_dir, std::cout); }
      if (*ev) { return evaluate(config, artifacts, out_dir, std::cout); }
      if (*st) { return sets(config, dataset, t, target, json_out); }
      return compare(baseline, candidate, json_out, std::cout);
    },
    std::cerr);
}

// vcnet: run the investment-network pipeline from a key-value config.
//
//   vcnet run    --config run.cfg [--key value ...]
//   vcnet stage  <name> --config run.cfg [--key value ...]
//   vcnet synth  --output data/ [--seed 7] [--synth_n_firms 500 ...]
//   vcnet report --output out/
//
// Exit codes: 0 ok, 1 internal error, 2 input or config error,
// 3 missing upstream artifact.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "vcnet/pipeline.hpp"

namespace {

struct Overrides {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_options(CLI::App* sub, Overrides& ov) {
  sub->add_option("-c,--config", ov.config_file, "key = value config file");
  for (const auto& key : vcnet::RunConfig::keys())
    sub->add_option_function<std::string>("--" + key, [&ov, key](const std::string& v) { ov.values[key] = v; },
                                          "override config key '" + key + "'");
}

vcnet::RunConfig resolve(const Overrides& ov) {
  vcnet::RunConfig cfg;
  if (!ov.config_file.empty()) cfg.load_file(ov.config_file);
  for (const auto& [k, v] : ov.values) cfg.set(k, v);
  return cfg;
}

int report(const vcnet::RunConfig& cfg) {
  const vcnet::fs::path dir(cfg.output);
  if (!vcnet::fs::is_directory(dir)) throw vcnet::InputError("output directory not found: " + dir.string());
  const auto path = vcnet::detail::require(dir / "manifest.json");
  const auto m = vcnet::json::parse(vcnet::detail::read_file(path));
  std::cout << "vcnet " << m.value("version", "?") << "  seed " << m.value("seed", 0ULL) << "  status "
            << m.value("status", "partial") << "\n";
  if (m.contains("failed_stage"))
    std::cout << "failed at " << m["failed_stage"].get<std::string>() << ": " << m["error"].get<std::string>() << "\n";
  for (const char* s : vcnet::kStages) {
    if (!m["stages"].contains(s)) {
      std::cout << "  " << s << ": not run\n";
      continue;
    }
    std::cout << "  " << s << ":";
    for (const auto& [k, v] : m["stages"][s].items())
      if (v.is_primitive()) std::cout << " " << k << "=" << v.dump();
    std::cout << "\n";
  }
  return 0;
}

int synth(vcnet::RunConfig cfg) {
  auto sc = cfg.synth;
  sc.seed = cfg.seed;
  const auto s = vcnet::generate_synthetic(sc);
  const vcnet::fs::path dir(cfg.output);
  vcnet::detail::write_csv(dir / "deals.csv", [&](std::ostream& os) { vcnet::write_deals(os, s.data.deals); });
  vcnet::detail::write_csv(dir / "firms.csv", [&](std::ostream& os) { vcnet::write_firms(os, s.data.firms); });
  vcnet::detail::write_csv(dir / "truth.csv", [&](std::ostream& os) { vcnet::write_truth(os, s.truth); });
  std::cout << "wrote " << s.data.deals.size() << " deals for " << s.data.firms.size() << " firms to " << dir.string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Venture investment-network analytics pipeline"};
  app.require_subcommand(1);
  Overrides run_ov, stage_ov, synth_ov, report_ov;
  std::string stage_name;

  auto* run = app.add_subcommand("run", "run every stage and write the manifest");
  add_config_options(run, run_ov);
  auto* stage = app.add_subcommand("stage", "run one stage from prior stage outputs");
  stage->add_option("name", stage_name, "ingest|graph|centrality|features|trajectories|regress|backtest")->required();
  add_config_options(stage, stage_ov);
  auto* syn = app.add_subcommand("synth", "write a synthetic deal set (deals.csv, firms.csv, truth.csv)");
  add_config_options(syn, synth_ov);
  auto* rep = app.add_subcommand("report", "summarize a run's manifest");
  add_config_options(rep, report_ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      vcnet::Pipeline p(resolve(run_ov));
      p.run_all();
      std::cout << "run complete: " << p.out().string() << "\n";
      return 0;
    }
    if (stage->parsed()) {
      vcnet::Pipeline p(resolve(stage_ov));
      p.run_one(stage_name);
      std::cout << "stage " << stage_name << " complete\n";
      return 0;
    }
    if (syn->parsed()) {
      auto cfg = resolve(synth_ov);
      cfg.synth.validate();
      return synth(cfg);
    }
    return report(resolve(report_ov));
  } catch (const vcnet::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const vcnet::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const vcnet::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const vcnet::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

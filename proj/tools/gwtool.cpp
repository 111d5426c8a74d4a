// gwtool: guided-wave damage localisation from a run configuration.
//
// Every subcommand takes --config and works inside a run directory, by
// default $GWTOOL_RUN_ROOT/<run name> (or runs/<run name>). Stages read the
// artifacts of the previous stage from that directory.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "guidedwave/config.hpp"
#include "guidedwave/error.hpp"
#include "guidedwave/pipeline.hpp"

namespace {

using gw::ErrorKind;

// 0 ok, 1 unexpected, 2.. one per stage-error class.
int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::io: return 3;
    case ErrorKind::dispersion: return 4;
    case ErrorKind::synthesis: return 5;
    case ErrorKind::dictionary: return 6;
    case ErrorKind::regression: return 7;
    case ErrorKind::onset: return 8;
    case ErrorKind::localisation: return 9;
  }
  return 1;
}

struct Options {
  std::string config;
  std::optional<std::string> run_dir;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("-c,--config", o.config, "run configuration (INI)")->required();
  sub->add_option("-o,--run-dir", o.run_dir, "run directory (overrides $GWTOOL_RUN_ROOT/<name>)");
}

}  // namespace

int main(int argc, char** argv) {
  namespace pl = gw::pipeline;
  CLI::App app{"Guided-wave damage localisation toolkit"};
  app.require_subcommand(1);
  Options o;
  auto* dispersion = app.add_subcommand("dispersion", "trace dispersion curves, write dispersion.csv");
  auto* synth = app.add_subcommand("synth", "synthesise the baseline field and the damaged sensor signals");
  auto* dictionary = app.add_subcommand("dictionary", "build the nominal wave dictionary from baseline.gwf");
  auto* decompose = app.add_subcommand("decompose", "decompose every sensor signal against the dictionary");
  auto* onset = app.add_subcommand("onset", "decompose and pick incident and reflection onsets");
  auto* localise = app.add_subcommand("localise", "decompose, pick onsets and localise the reflector");
  auto* run = app.add_subcommand("run", "every stage in order");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "do not print the summary");
  for (auto* sub : {dispersion, synth, dictionary, decompose, onset, localise, run}) add_common(sub, o);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; usage errors share the config class.
    return app.exit(e) == 0 ? 0 : exit_code(ErrorKind::config);
  }

  try {
    const auto cfg = gw::config::load_config(o.config);
    pl::RunDir dir(pl::run_directory(cfg, o.run_dir ? std::optional<pl::fs::path>(*o.run_dir) : std::nullopt));
    pl::Summary summary = pl::run_header(cfg);
    std::string name = "summary.txt";
    auto finish = [&] {
      pl::write_summary(dir, summary, name);
      if (!quiet) std::cout << summary.text();
    };
    try {
      if (*dispersion) {
        name = "dispersion.txt";
        pl::dispersion_stage(cfg, dir, summary);
      } else if (*synth) {
        name = "synth.txt";
        pl::synth_stage(cfg, dir, summary);
      } else if (*dictionary) {
        name = "dictionary.txt";
        pl::dictionary_stage(cfg, dir, summary);
      } else if (*decompose) {
        name = "decompose.txt";
        pl::analyse(cfg, dir, summary, pl::Until::decompose);
      } else if (*onset) {
        name = "onset.txt";
        pl::analyse(cfg, dir, summary, pl::Until::onset);
      } else if (*localise) {
        pl::analyse(cfg, dir, summary, pl::Until::localise);
      } else {
        pl::synth_stage(cfg, dir, summary);
        pl::dictionary_stage(cfg, dir, summary);
        pl::analyse(cfg, dir, summary, pl::Until::localise);
      }
    } catch (const gw::Error&) {
      finish();
      throw;
    }
    finish();
    std::cerr << "run directory: " << dir.root().string() << "\n";
    return 0;
  } catch (const gw::Error& e) {
    std::cerr << "gwtool: " << gw::to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "gwtool: unexpected error: " << e.what() << "\n";
    return 1;
  }
}

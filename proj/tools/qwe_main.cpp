#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qwe/cli/commands.hpp"

namespace {

constexpr int kExitUnexpected = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Flags {
  std::map<std::string, std::string> values;
  std::string config;
};

void add_common(CLI::App* sub, Flags& f) {
  static const std::vector<std::pair<std::string, std::string>> opts{
      {"steps", "QW steps per pair"},
      {"lattice", "walker sites per pair (default steps + 1)"},
      {"coin", "identity | hadamard | random"},
      {"seed", "seed for random coins"},
      {"grid", "<n_theta>x<n_phi>"},
      {"iterations", "accumulation iterations"},
      {"p1", "weight of |up,up> in the initial coin state"},
      {"p2", "weight of |down,down> (must equal 1 - p1)"},
      {"out", "output path (default stdout)"},
      {"summary", "JSON summary path (scan, accumulate)"},
      {"strategy", "accumulation projection: pm | grid"},
      {"input", "retrieval input: bell | minus | product"},
      {"threads", "worker threads (0 = QWE_THREADS or all cores)"},
  };
  for (const auto& [name, help] : opts) {
    sub->add_option_function<std::string>(
        "--" + name, [&f, key = name](const std::string& v) { f.values[key] = v; }, help);
  }
  sub->add_option("--config", f.config, "flat key=value config file; flags win");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entanglement transfer, accumulation and retrieval with coined quantum walks"};
  app.require_subcommand(1);
  Flags flags;
  for (const auto& [name, help] :
       std::vector<std::pair<std::string, std::string>>{{"transfer", "single transfer report (JSON)"},
                                                        {"scan", "projection scans (CSV)"},
                                                        {"accumulate", "accumulation trace (CSV)"},
                                                        {"retrieve", "retrieval outcomes (JSON)"},
                                                        {"photonic-reload", "optical reload model (JSON)"}}) {
    add_common(app.add_subcommand(name, help), flags);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    qwe::cli::RunConfig cfg;
    cfg.command = app.get_subcommands().front()->get_name();
    if (!flags.config.empty()) {
      for (const auto& [k, v] : qwe::cli::read_config_file(flags.config)) qwe::cli::apply_setting(cfg, k, v);
    }
    for (const auto& [k, v] : flags.values) qwe::cli::apply_setting(cfg, k, v);
    qwe::cli::run(cfg, std::cout);
    std::cout.flush();
    return EXIT_SUCCESS;
  } catch (const qwe::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const qwe::LatticeOverflow& e) {
    std::cerr << "lattice error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const qwe::DegenerateOutcome& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUnexpected;
  }
}

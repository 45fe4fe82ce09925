#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

void print_keys() {
  for (const auto& [k, s] : cwqed::io::schema()) {
    std::cout << k << (s.default_value.empty() ? "" : " = " + s.default_value) << "\n    " << s.help
              << (s.physics ? "" : " [not hashed]") << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chiral waveguide QED photon-correlation calculator"};
  app.require_subcommand(0, 1);
  bool keys = false;
  app.add_flag("--keys", keys, "List the documented configuration keys");

  std::string config_path;
  std::vector<std::string> overrides;
  bool gc_all = false;
  const std::vector<std::string> names = {"grid", "scan", "verify", "countrate", "cache-gc"};
  const std::vector<std::string> help = {
      "Observable on the (eta, zeta) Jacobi grid as CSV + JSON",
      "Origin correlations and count rates over an atom range as JSON lines",
      "Analytic grids against the master equation with Frobenius errors",
      "Integrated connected count rate",
      "Remove corrupt, stale or all cache entries",
  };
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto* s = app.add_subcommand(names[i], help[i]);
    s->add_option("-c,--config", config_path, "key=value configuration file");
    s->add_option("-s,--set", overrides, "key=value override (repeatable)");
    if (names[i] == "cache-gc") s->add_flag("--all", gc_all, "Remove every entry");
    subs.push_back(s);
  }

  CLI11_PARSE(app, argc, argv);
  if (keys) {
    print_keys();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    cwqed::io::RunConfig cfg;
    if (!config_path.empty()) cfg = cwqed::io::load_config(config_path);
    for (const auto& o : overrides) {
      const auto [k, v] = cwqed::io::split_assignment(o);
      cfg.set(k, v);
    }
    cwqed::cli::Outcome r;
    if (cmd == "grid")
      r = cwqed::cli::cmd_grid(cfg, std::cerr);
    else if (cmd == "scan")
      r = cwqed::cli::cmd_scan(cfg, std::cerr);
    else if (cmd == "verify")
      r = cwqed::cli::cmd_verify(cfg, std::cerr);
    else if (cmd == "countrate")
      r = cwqed::cli::cmd_countrate(cfg, std::cerr);
    else
      r = cwqed::cli::cmd_cache_gc(cfg, gc_all, std::cerr);
    for (const auto& f : r.files) std::cout << f.string() << '\n';
    return r.exit_code;
  } catch (const cwqed::io::config_error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const cwqed::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

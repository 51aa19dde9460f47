#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gflow/experiments/config.hpp"
#include "gflow/experiments/runner.hpp"
#include "gflow/experiments/svg.hpp"
#include "gflow/version.hpp"

namespace ex = gflow::experiments;

namespace {

struct RunFlags {
  std::string config_path;
  std::string output_dir;
  std::optional<std::int64_t> seed;
  bool no_svg = false;
};

int run_experiment(ex::Experiment which, const RunFlags& f) {
  ex::ExperimentConfig cfg;
  try {
    std::string text;
    if (!f.config_path.empty()) {
      std::ifstream in(f.config_path, std::ios::binary);
      if (!in) {
        std::cerr << "error: cannot read config file " << f.config_path << '\n';
        return ex::exit_config;
      }
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    cfg = ex::parse_config(text, which);
  } catch (const ex::ConfigError& e) {
    std::cerr << "error: " << (f.config_path.empty() ? std::string("defaults") : f.config_path) << ": " << e.what()
              << '\n';
    return ex::exit_config;
  }
  if (f.seed) cfg.set_seed(*f.seed);
  if (!f.output_dir.empty()) cfg.set_output_dir(f.output_dir);
  if (f.no_svg) cfg.set_svg(false);

  const ex::RunManifest m = ex::run(cfg);
  for (const auto& a : m.audits)
    std::cout << (a.passed ? "  ok    " : "  FAIL  ") << a.name << ": " << ex::format_real(a.value) << ' '
              << a.relation << ' ' << ex::format_real(a.threshold) << '\n';
  for (const auto& e : m.errors) std::cerr << "error (" << e.kind << "): " << e.message << '\n';
  std::cout << ex::experiment_name(cfg.experiment) << ": exit " << m.exit_code << ", outputs in " << cfg.output_dir
            << '\n';
  return m.exit_code;
}

std::vector<std::string> split_columns(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments on JSD gradient flows and their GAN counterparts"};
  app.set_version_flag("--version", std::string(gflow::version_string));
  app.require_subcommand(1);

  std::vector<RunFlags> flags(std::size(ex::all_experiments));
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    const ex::Experiment e = ex::all_experiments[i];
    auto* sub = app.add_subcommand(ex::experiment_name(e), std::string("run the ") + ex::experiment_name(e) + " experiment");
    sub->add_option("--config", flags[i].config_path, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--output", flags[i].output_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", flags[i].seed, "root seed (overrides seed)");
    sub->add_flag("--no-svg", flags[i].no_svg, "skip SVG plots");
    subs.push_back(sub);
  }

  std::string csv_path;
  std::string x_col;
  std::string y_cols;
  std::string svg_path;
  std::string title;
  bool log_y = false;
  auto* plot = app.add_subcommand("plot", "render columns of a trace CSV as an SVG line plot");
  plot->add_option("--csv", csv_path, "input CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--x", x_col, "column for the horizontal axis")->required();
  plot->add_option("--y", y_cols, "comma-separated columns to plot")->required();
  plot->add_option("--out", svg_path, "output SVG path")->required();
  plot->add_option("--title", title, "plot title");
  plot->add_flag("--log-y", log_y, "logarithmic vertical axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ex::exit_config;
  }

  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) return run_experiment(ex::all_experiments[i], flags[i]);

  try {
    std::ifstream in(csv_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto ys = split_columns(y_cols);
    const std::string svg = ex::svg_from_csv(ss.str(), x_col, ys, {title, x_col, ys.size() == 1 ? ys[0] : "value", log_y, 640, 400});
    ex::write_atomically(svg_path, svg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ex::exit_config;
  }
  return 0;
}

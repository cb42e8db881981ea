#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpground/gpground.hpp"

using namespace gpground;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Frame load_frame(const std::string& path) {
  Frame f = ends_with(path, ".bin") ? load_kitti_bin(path) : load_labeled_csv(path);
  if (f.dropped_nonfinite > 0)
    std::cerr << "gpground: " << path << ": dropped " << f.dropped_nonfinite << " non-finite points\n";
  return f;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json report_json(const Metrics& m, const Hyperparams& theta) {
  json r;
  r["sr_overall"] = number(m.sr_overall);
  r["sr_flat_region"] = number(m.sr_flat_region);
  r["sr_sloped_region"] = number(m.sr_sloped_region);
  r["sr_high_ground"] = number(m.sr_high_ground);
  r["false_ground_rate"] = number(m.false_ground_rate);
  r["runtime_ms"] = number(m.runtime_ms);
  r["stage_ms"] = {{"grid", m.timings.grid_ms},
                   {"lines", m.timings.lines_ms},
                   {"opt", m.timings.opt_ms},
                   {"gp", m.timings.gp_ms},
                   {"classify", m.timings.classify_ms}};
  r["theta"] = {{"sigma_f", theta.sigma_f}, {"a", theta.a}, {"sigma_n", theta.sigma_n}};
  r["counts"] = {{"ground", m.ground.total},
                 {"ground_hit", m.ground.hit},
                 {"non_ground", m.non_ground},
                 {"non_ground_as_ground", m.non_ground_as_ground}};
  return r;
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t threads = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file (flat dotted or nested keys)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override a config key, key=value (repeatable)");
  }

  RunConfig resolve(std::string_view bare_prefix = {}) const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path, bare_prefix);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      const bool bare = !bare_prefix.empty() && eq != std::string::npos && o.substr(0, eq).find('.') == std::string::npos;
      apply_override(cfg, bare ? std::string(bare_prefix) + "." + o : o);
    }
    if (threads > 0) cfg.pipeline.threads = threads;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground segmentation of LiDAR scans with segment-wise Gaussian processes"};
  app.set_version_flag("--version", std::string("gpground ") + kVersion);
  app.footer("Config keys (defaults):\n" + describe_config() +
             "\nExit codes: 0 success, 1 usage or config error, 2 data error.");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Common common;
  app.add_option("--threads", common.threads, "worker threads (overrides run.threads)");

  std::string input, output, report, format = "csv";
  std::size_t segment = 0;

  auto* seg = app.add_subcommand("segment", "label every point of a scan as ground or non-ground");
  seg->add_option("--input", input, "scan: KITTI .bin or labeled .csv")->required();
  seg->add_option("--output", output, "labeled output file")->required();
  seg->add_option("--format", format, "csv or ply")->check(CLI::IsMember({"csv", "ply"}));
  common.attach(seg);

  auto* ev = app.add_subcommand("eval", "segment a labeled scan and score it against its labels");
  ev->add_option("--input", input, "labeled CSV")->required();
  ev->add_option("--report", report, "write the JSON report here (also printed to stdout)");
  common.attach(ev);

  auto* syn = app.add_subcommand("synth", "generate a labeled synthetic scan");
  syn->add_option("--spec", common.config_path, "JSON scene spec (scene.* keys, bare keys allowed)")
      ->check(CLI::ExistingFile);
  syn->add_option("--output", output, "labeled CSV, or KITTI .bin without labels")->required();
  syn->add_option("--set", common.overrides, "override a config key, key=value (repeatable)");

  auto* plot = app.add_subcommand("plotdata", "dump one wedge's candidates and GP predictions");
  plot->add_option("--input", input, "scan: KITTI .bin or labeled .csv")->required();
  plot->add_option("--segment", segment, "wedge index")->required();
  plot->add_option("--output", output, "CSV destination")->required();
  common.attach(plot);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  RunConfig cfg;
  try {
    cfg = common.resolve(syn->parsed() ? "scene" : "");
    cfg.pipeline.validate();
    cfg.scene.validate();
  } catch (const Error& e) {
    std::cerr << "gpground: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (seg->parsed()) {
      const Frame frame = load_frame(input);
      const auto labeled = segment_frame(frame, cfg.pipeline);
      write_labeled_output(frame, labeled.predictions, output,
                           format == "ply" ? OutputFormat::Ply : OutputFormat::Csv);
      const auto& t = labeled.timings;
      std::cerr << "gpground: " << frame.size() << " points, " << t.total_ms() << " ms (grid " << t.grid_ms
                << ", lines " << t.lines_ms << ", opt " << t.opt_ms << ", gp " << t.gp_ms << ", classify "
                << t.classify_ms << ")\n";
    } else if (ev->parsed()) {
      const Frame frame = load_labeled_csv(input);
      const auto labeled = segment_frame(frame, cfg.pipeline);
      const auto r = report_json(evaluate(labeled), labeled.model->theta);
      std::cout << r.dump(2) << '\n';
      if (!report.empty()) io_detail::write_text(report, r.dump(2) + "\n");
    } else if (syn->parsed()) {
      const Frame frame = generate_scene(cfg.scene);
      if (ends_with(output, ".bin"))
        write_kitti_bin(frame, output);
      else
        write_labeled_csv(frame, output);
    } else if (plot->parsed()) {
      const Frame frame = load_frame(input);
      const auto labeled = segment_frame(frame, cfg.pipeline);
      emit_plot_data(labeled, segment, output);
    }
  } catch (const Error& e) {
    std::cerr << "gpground: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return e.kind() == ErrorKind::Config || e.kind() == ErrorKind::InvalidArgument ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "gpground: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "llmpa/harness.hpp"
#include "llmpa/json_util.hpp"
#include "llmpa/world.hpp"

namespace fs = std::filesystem;
using llmpa::jsonu::json;

namespace {

struct CliOptions {
  std::string world_path;
  std::string script_path;
  std::string backend = "scripted";
  std::string task_filter;
  std::string out_dir = "out";
  std::string config_file;
  std::string matrix_path;
  std::string keypaths_path;
  std::string chain_cache_dir;
  std::string endpoint;
  std::string model;
  std::string label;
  bool no_grouping = false;
  bool no_icpad = false;
  bool no_calibration = false;
  int max_attempts = 3;
  int step_cap = 0;
  int jobs = 1;
  int max_candidates = 50;
  int prompt_budget = 8000;
  int digest_budget = 2000;
  int gap_threshold = 8;
  int timeout_ms = 30000;
  int max_retries = 2;
  double min_score = 0.3;
  double threshold = 0.5;
  unsigned seed = 0;
};

// Config file (JSON) supplies defaults; explicitly passed flags win.
void apply_config_file(const CLI::App& cmd, CliOptions& opt) {
  if (opt.config_file.empty()) return;
  json cfg = llmpa::jsonu::load_file(opt.config_file);
  auto overridden = [&](const std::string& flag) {
    const CLI::Option* o = cmd.get_option_no_throw(flag);
    return o && o->count() > 0;
  };
  auto set_str = [&](const char* key, const char* flag, std::string& out) {
    if (cfg.contains(key) && !overridden(flag)) out = cfg.at(key).get<std::string>();
  };
  auto set_int = [&](const char* key, const char* flag, int& out) {
    if (cfg.contains(key) && !overridden(flag)) out = cfg.at(key).get<int>();
  };
  auto set_double = [&](const char* key, const char* flag, double& out) {
    if (cfg.contains(key) && !overridden(flag)) out = cfg.at(key).get<double>();
  };
  set_str("world", "--world", opt.world_path);
  set_str("script", "--script", opt.script_path);
  set_str("backend", "--backend", opt.backend);
  set_str("task", "--task", opt.task_filter);
  set_str("out", "--out", opt.out_dir);
  set_str("matrix", "--matrix", opt.matrix_path);
  set_str("keypaths", "--keypaths", opt.keypaths_path);
  set_str("chain_cache", "--chain-cache", opt.chain_cache_dir);
  set_str("endpoint", "--endpoint", opt.endpoint);
  set_str("model", "--model", opt.model);
  set_str("label", "--label", opt.label);
  set_int("max_attempts", "--max-attempts", opt.max_attempts);
  set_int("step_cap", "--step-cap", opt.step_cap);
  set_int("jobs", "--jobs", opt.jobs);
  set_int("max_candidates", "--max-candidates", opt.max_candidates);
  set_int("prompt_budget", "--prompt-budget", opt.prompt_budget);
  set_int("digest_budget", "--digest-budget", opt.digest_budget);
  set_int("gap_threshold", "--gap-threshold", opt.gap_threshold);
  set_double("min_score", "--min-score", opt.min_score);
  set_double("threshold", "--threshold", opt.threshold);
  if (cfg.contains("grouping") && !overridden("--no-grouping"))
    opt.no_grouping = !cfg.at("grouping").get<bool>();
  if (cfg.contains("icpad") && !overridden("--no-icpad"))
    opt.no_icpad = !cfg.at("icpad").get<bool>();
  if (cfg.contains("calibration") && !overridden("--no-calibration"))
    opt.no_calibration = !cfg.at("calibration").get<bool>();
}

void add_common_flags(CLI::App* cmd, CliOptions& opt, bool needs_world) {
  auto* world = cmd->add_option("--world", opt.world_path, "world file");
  if (needs_world) world->required();
  cmd->add_option("--script", opt.script_path, "scripted-backend reply file");
  cmd->add_option("--backend", opt.backend,
                  "backend kind: scripted|template|http");
  cmd->add_option("--task", opt.task_filter, "task id substring filter");
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_option("--config", opt.config_file, "JSON config file");
  cmd->add_option("--keypaths", opt.keypaths_path, "key path fixture file");
  cmd->add_option("--chain-cache", opt.chain_cache_dir,
                  "directory for cached instruction chains");
  cmd->add_option("--endpoint", opt.endpoint, "chat-completions URL (http)");
  cmd->add_option("--model", opt.model, "model name (http)");
  cmd->add_option("--label", opt.label, "report label override");
  cmd->add_flag("--no-grouping", opt.no_grouping, "disable section grouping");
  cmd->add_flag("--no-icpad", opt.no_icpad,
                "disable instruction chains and action descriptions");
  cmd->add_flag("--no-calibration", opt.no_calibration,
                "disable controllable calibration");
  cmd->add_option("--max-attempts", opt.max_attempts, "attempts per step");
  cmd->add_option("--step-cap", opt.step_cap,
                  "episode step cap (0: 2*gold+3)");
  cmd->add_option("--jobs", opt.jobs, "parallel episodes");
  cmd->add_option("--max-candidates", opt.max_candidates, "candidate cap");
  cmd->add_option("--prompt-budget", opt.prompt_budget,
                  "prompt character budget");
  cmd->add_option("--digest-budget", opt.digest_budget,
                  "page digest character budget");
  cmd->add_option("--gap-threshold", opt.gap_threshold,
                  "grouping gap threshold in pixels");
  cmd->add_option("--min-score", opt.min_score,
                  "alignment similarity threshold");
  cmd->add_option("--threshold", opt.threshold, "executability threshold");
  cmd->add_option("--timeout-ms", opt.timeout_ms, "http timeout");
  cmd->add_option("--max-retries", opt.max_retries, "http retry cap");
  cmd->add_option("--seed", opt.seed,
                  "reserved; deterministic backends ignore it");
}

llmpa::RunConfig run_config_from(const CliOptions& opt) {
  llmpa::RunConfig config;
  config.grouping = !opt.no_grouping;
  config.icpad = !opt.no_icpad;
  config.calibration = !opt.no_calibration;
  config.max_attempts = opt.max_attempts;
  config.step_cap = opt.step_cap;
  config.max_candidates = static_cast<size_t>(opt.max_candidates);
  config.prompt_budget = static_cast<size_t>(opt.prompt_budget);
  config.digest_budget = static_cast<size_t>(opt.digest_budget);
  config.grouping_params.gap_threshold = opt.gap_threshold;
  config.min_score = opt.min_score;
  config.calibration_config.threshold = opt.threshold;
  config.chain_cache_dir = opt.chain_cache_dir;
  config.seed = opt.seed;
  if (!opt.keypaths_path.empty())
    config.key_paths = llmpa::load_key_paths_file(opt.keypaths_path);
  return config;
}

llmpa::BackendConfig backend_config_from(const CliOptions& opt) {
  llmpa::BackendConfig cfg;
  if (opt.backend == "scripted") cfg.kind = llmpa::BackendKind::scripted;
  else if (opt.backend == "template")
    cfg.kind = llmpa::BackendKind::template_render;
  else if (opt.backend == "http") cfg.kind = llmpa::BackendKind::http;
  else throw llmpa::ConfigError("unknown backend kind: " + opt.backend);
  cfg.endpoint = opt.endpoint;
  cfg.model_name = opt.model;
  cfg.timeout_ms = opt.timeout_ms;
  cfg.max_retries = opt.max_retries;
  return cfg;
}

std::vector<const llmpa::TaskSpec*> select_tasks(const llmpa::WorldSpec& world,
                                                 const std::string& filter) {
  std::vector<const llmpa::TaskSpec*> tasks;
  for (const llmpa::TaskSpec& t : world.tasks)
    if (filter.empty() || t.task_id.find(filter) != std::string::npos)
      tasks.push_back(&t);
  if (tasks.empty())
    throw llmpa::ConfigError("no task matches filter '" + filter + "'");
  return tasks;
}

std::string default_label(const CliOptions& opt) {
  if (!opt.label.empty()) return opt.label;
  if (opt.no_grouping && opt.no_icpad && opt.no_calibration)
    return "Baseline (all off)";
  std::string label = "LLMPA";
  if (opt.no_grouping) label += " w/o Object Detection";
  if (opt.no_icpad) label += " w/o IC & PAD";
  if (opt.no_calibration) label += " w/o Controllable Calibration";
  return label;
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw llmpa::ConfigError("cannot write " + path.string());
  out << body;
}

void write_outputs(const fs::path& out_dir,
                   const std::vector<llmpa::MetricsReport>& reports,
                   const std::vector<std::vector<llmpa::EpisodeResult>>&
                       episodes_per_config) {
  fs::create_directories(out_dir / "traces");
  for (const auto& episodes : episodes_per_config) {
    for (const llmpa::EpisodeResult& ep : episodes) {
      std::string name = ep.task_id;
      if (!ep.config_label.empty() && episodes_per_config.size() > 1)
        name = sanitize(ep.config_label) + "." + name;
      write_file(out_dir / "traces" / (name + ".jsonl"),
                 llmpa::episode_trace_jsonl(ep));
    }
  }
  write_file(out_dir / "report.json",
             llmpa::reports_to_json(reports).dump(2) + "\n");
  write_file(out_dir / "report.txt", llmpa::render_report_table(reports));
}

int cmd_run(const CliOptions& opt) {
  llmpa::WorldSpec world = llmpa::load_world(opt.world_path);
  std::vector<const llmpa::TaskSpec*> tasks =
      select_tasks(world, opt.task_filter);
  llmpa::RunConfig config = run_config_from(opt);
  llmpa::BackendConfig backend_cfg = backend_config_from(opt);

  std::vector<llmpa::AblationConfig> matrix{{default_label(opt),
                                             config.grouping, config.icpad,
                                             config.calibration}};
  llmpa::SuiteResult suite = llmpa::run_suite(
      world, tasks, config, matrix,
      [&]() { return llmpa::make_backend(backend_cfg, opt.script_path); },
      opt.jobs);

  write_outputs(opt.out_dir, suite.reports, suite.episodes);
  std::cout << llmpa::render_report_table(suite.reports);
  size_t ok = 0;
  for (const llmpa::EpisodeResult& ep : suite.episodes[0]) ok += ep.task_success;
  std::cout << "tasks: " << ok << "/" << suite.episodes[0].size()
            << " successful; outputs in " << opt.out_dir << "\n";
  return 0;
}

int cmd_eval(const CliOptions& opt) {
  if (opt.matrix_path.empty())
    throw llmpa::ConfigError("eval requires --matrix");
  llmpa::WorldSpec world = llmpa::load_world(opt.world_path);
  std::vector<const llmpa::TaskSpec*> tasks =
      select_tasks(world, opt.task_filter);
  llmpa::RunConfig config = run_config_from(opt);
  llmpa::BackendConfig backend_cfg = backend_config_from(opt);
  std::vector<llmpa::AblationConfig> matrix =
      llmpa::load_matrix(opt.matrix_path);

  llmpa::SuiteResult suite = llmpa::run_suite(
      world, tasks, config, matrix,
      [&]() { return llmpa::make_backend(backend_cfg, opt.script_path); },
      opt.jobs);

  write_outputs(opt.out_dir, suite.reports, suite.episodes);
  std::cout << llmpa::render_report_table(suite.reports);
  return 0;
}

int cmd_inspect(const std::string& page_path, const CliOptions& opt) {
  std::ifstream in(page_path);
  if (!in) throw llmpa::LoadError("cannot open page file: " + page_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  llmpa::PageSnapshot page = llmpa::parse_page(buf.str());
  page = llmpa::redact(page, llmpa::default_redaction_rules());

  llmpa::GroupingParams params;
  params.gap_threshold = opt.gap_threshold;
  auto result =
      llmpa::disambiguate(llmpa::group_sections(page, params), page);

  std::cout << "page: " << page.page_id << "\n";
  std::cout << "sections: " << result.sections.size() << "\n";
  for (const llmpa::Section& s : result.sections) {
    std::cout << "  " << s.section_id << " [" << s.box.x << "," << s.box.y
              << " " << s.box.width << "x" << s.box.height << "] '"
              << s.representative_text << "'";
    if (s.qualifier) std::cout << " (" << *s.qualifier << ")";
    std::cout << " members=" << s.member_node_ids.size() << "\n";
  }
  for (const std::string& w : result.warnings)
    std::cout << "warning: " << w << "\n";
  std::cout << "digest:\n"
            << llmpa::extract_text(result.sections,
                                   static_cast<size_t>(opt.digest_budget))
            << "\n";
  llmpa::CandidateSet candidates = llmpa::build_candidates(
      result.sections, "", {}, static_cast<size_t>(opt.max_candidates));
  std::cout << "candidates:\n";
  for (size_t i = 0; i < candidates.entries.size(); ++i)
    std::cout << i + 1 << ". " << candidates.entries[i].display_text << "\n";
  return 0;
}

int cmd_validate(const std::vector<std::string>& worlds,
                 const std::vector<std::string>& pages,
                 const std::vector<std::string>& scripts,
                 const std::vector<std::string>& keypaths,
                 const std::vector<std::string>& detections) {
  int failures = 0;
  auto check = [&](const std::string& path, const char* kind,
                   const std::function<void()>& load) {
    try {
      load();
      std::cout << "OK " << kind << " " << path << "\n";
    } catch (const std::exception& e) {
      std::cout << "ERROR " << kind << " " << path << ": " << e.what()
                << "\n";
      ++failures;
    }
  };
  for (const auto& p : worlds)
    check(p, "world", [&] { llmpa::load_world(p); });
  for (const auto& p : pages)
    check(p, "page", [&] {
      std::ifstream in(p);
      if (!in) throw llmpa::LoadError("cannot open " + p);
      std::ostringstream buf;
      buf << in.rdbuf();
      llmpa::parse_page(buf.str());
    });
  for (const auto& p : scripts)
    check(p, "script", [&] { llmpa::load_script(p); });
  for (const auto& p : keypaths)
    check(p, "keypaths", [&] { llmpa::load_key_paths_file(p); });
  for (const auto& p : detections)
    check(p, "detection", [&] { llmpa::load_detection_fixture(p); });
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"process-automation agent over simulated app worlds"};
  app.require_subcommand(1);

  CliOptions opt;
  CLI::App* run = app.add_subcommand("run", "run tasks in one configuration");
  add_common_flags(run, opt, true);

  CliOptions eval_opt;
  CLI::App* eval = app.add_subcommand("eval", "run an ablation matrix");
  add_common_flags(eval, eval_opt, true);
  eval->add_option("--matrix", eval_opt.matrix_path,
                   "ablation matrix file (required)");

  CliOptions inspect_opt;
  std::string page_path;
  CLI::App* inspect =
      app.add_subcommand("inspect-page", "print sections and digest");
  inspect->add_option("page", page_path, "page fixture file")->required();
  inspect->add_option("--gap-threshold", inspect_opt.gap_threshold,
                      "grouping gap threshold in pixels");
  inspect->add_option("--digest-budget", inspect_opt.digest_budget,
                      "digest character budget");
  inspect->add_option("--max-candidates", inspect_opt.max_candidates,
                      "candidate cap");

  std::vector<std::string> v_worlds, v_pages, v_scripts, v_keypaths,
      v_detections;
  CLI::App* validate = app.add_subcommand("validate", "lint fixture files");
  validate->add_option("--world", v_worlds, "world files");
  validate->add_option("--page", v_pages, "page files");
  validate->add_option("--script", v_scripts, "script files");
  validate->add_option("--keypath", v_keypaths, "key path files");
  validate->add_option("--detection", v_detections, "detection fixtures");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      apply_config_file(*run, opt);
      return cmd_run(opt);
    }
    if (eval->parsed()) {
      apply_config_file(*eval, eval_opt);
      return cmd_eval(eval_opt);
    }
    if (inspect->parsed()) return cmd_inspect(page_path, inspect_opt);
    if (validate->parsed())
      return cmd_validate(v_worlds, v_pages, v_scripts, v_keypaths,
                          v_detections);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

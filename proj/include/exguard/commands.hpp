// Copyright 2026 The exguard Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Machine output (JSON) goes to `out`, human
// messages to `err`. Exit codes: 0 ok, 1 usage, 2 input, 3 backend,
// 4 validation.

#pragma once

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "exguard/pipeline.hpp"
#include "exguard/remote_backend.hpp"

namespace exguard::cli {

using json = nlohmann::json;

enum Exit : int { ok = 0, usage = 1, input = 2, backend = 3, validation = 4 };

inline int exit_code_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::precondition:
      return usage;
    case ErrorCode::backend:
    case ErrorCode::timeout:
    case ErrorCode::malformed_output:
    case ErrorCode::no_json:
    case ErrorCode::schema_mismatch:
      return backend;
    case ErrorCode::validation:
      return validation;
    default:
      return input;
  }
}

struct Options {
  std::string config_file;
  bool live = false;
  std::string output_dir;
  std::optional<int> workers;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // setting key -> value
};

inline void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_file, "Config file (key = value sections)");
  cmd->add_flag("--live", o.live, "Use the remote backend instead of the offline mock");
  cmd->add_option("--out", o.output_dir, "Output directory");
  cmd->add_option("--workers", o.workers, "Worker pool size K")->check(CLI::PositiveNumber);
  cmd->add_option("--set", o.sets, "Override a setting, e.g. --set rank.gamma=0.5");
  static const std::vector<std::pair<std::string, std::string>> mirrored = {
      {"alpha", "rank.alpha"}, {"beta", "rank.beta"},       {"gamma", "rank.gamma"},   {"theta", "rag.theta"},
      {"delta", "rag.delta"},  {"depth", "rag.max_depth"},  {"limit", "planner.limit"}, {"cee", "cee.path"},
      {"labels", "rag.labels"}};
  for (const auto& [flag, key] : mirrored) {
    cmd->add_option_function<std::string>(
        "--" + flag, [&o, key = key](const std::string& v) { o.flags[key] = v; }, "Sets " + key);
  }
}

/// Defaults, then the config file, then flags.
inline pipeline::PipelineConfig resolve(const Options& o) {
  pipeline::PipelineConfig c;
  if (!o.config_file.empty()) pipeline::load_config_file(c, o.config_file);
  for (const auto& [key, value] : o.flags) pipeline::apply_setting(c, key, value);
  for (const std::string& s : o.sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::config, "--set expects key=value, got '" + s + "'");
    pipeline::apply_setting(c, javasrc::trim(s.substr(0, eq)), javasrc::trim(s.substr(eq + 1)));
  }
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (o.workers) c.workers = *o.workers;
  c.live = o.live;
  c.validate();
  return c;
}

inline pipeline::Session session_for(const pipeline::PipelineConfig& c, std::ostream& err) {
  if (!c.live) return pipeline::open_session(c);
  // Only the variable name is ever printed, never its value.
  const char* key = std::getenv(c.backend.api_key_env.c_str());
  if (!key || !*key) err << "exguard: warning: " << c.backend.api_key_env << " is not set; sending no credential\n";
  err << "exguard: live mode, endpoint " << c.backend.endpoint << ", model " << c.backend.model << "\n";
  return pipeline::open_session(c, std::make_shared<llm::RemoteBackend>(c.backend));
}

inline int cmd_analyze(const std::string& path, const Options& o, std::ostream& out, std::ostream& err) {
  const pipeline::PipelineConfig c = resolve(o);
  const std::vector<pipeline::SourceInput> sources = pipeline::find_sources(path, c.output_dir);
  pipeline::Session s = session_for(c, err);
  const pipeline::RunResult run = pipeline::analyze(sources, c, s);
  const json report = pipeline::report_json(run, c);
  pipeline::write_outputs(run, report, c.output_dir);
  out << report.dump(2) << "\n";
  err << "exguard: " << run.files.size() << " files, " << report["totals"]["patches"].get<std::size_t>()
      << " patches, " << run.degraded << " degraded calls; output in " << c.output_dir << "\n";
  if (!run.valid()) {
    err << "exguard: " << run.issue_count << " validation issue(s) in patched units\n";
    return validation;
  }
  return ok;
}

inline int cmd_evaluate(const std::string& path, const Options& o, const std::string& format, std::ostream& out,
                        std::ostream& err) {
  const pipeline::PipelineConfig c = resolve(o);
  const std::vector<pipeline::SourceInput> sources = pipeline::find_sources(path, c.output_dir);
  pipeline::Session s = session_for(c, err);
  const std::vector<metrics::GroundTruth> truth = pipeline::load_truth(sources, *s.tree);
  for (const metrics::GroundTruth& g : truth) {
    for (const std::string& t : g.unknown_types) err << "exguard: warning: " << g.name << " expects unknown type " << t << "\n";
  }
  const pipeline::RunResult run = pipeline::analyze(sources, c, s);
  pipeline::write_outputs(run, pipeline::report_json(run, c), c.output_dir);
  const metrics::EvaluationReport report =
      metrics::evaluate(truth, pipeline::detections(run), *s.tree, c.rules, *s.backend, c.workers);
  if (format == "table") {
    out << metrics::render_table(report);
  } else {
    out << metrics::to_json(report).dump(2) << "\n";
  }
  return run.valid() ? ok : validation;
}

inline int cmd_cee(const std::string& sub, const std::string& path, std::ostream& out, std::ostream& err) {
  const json doc = cee::parse_json_text(cee::read_file(path), path);
  if (sub == "validate") {
    std::vector<std::string> warnings;
    const std::vector<cee::Violation> v = cee::CeeTree::validate_document(doc, cee::Strictness::strict, &warnings);
    for (const std::string& w : warnings) err << "exguard: warning: " << w << "\n";
    json list = json::array();
    for (const cee::Violation& x : v) list.push_back({{"node", x.node}, {"message", x.message}});
    out << json{{"valid", v.empty()}, {"violations", list}}.dump(2) << "\n";
    return v.empty() ? ok : validation;
  }
  const cee::CeeTree tree = cee::CeeTree::from_json(doc, cee::Strictness::lenient);
  const cee::TreeStats st = tree.stats();
  out << json{{"nodes", st.node_count}, {"branches", st.branch_count}, {"max_depth", st.max_depth}}.dump(2) << "\n";
  return ok;
}

inline int cmd_rag_verify(const std::string& cee_path, const std::string& samples_path, Options o, std::ostream& out,
                          std::ostream& err) {
  o.flags["cee.path"] = cee_path;
  const pipeline::PipelineConfig c = resolve(o);
  pipeline::Session s = session_for(c, err);
  const std::vector<rag::VerificationSample> samples = rag::load_samples(samples_path, *s.tree);
  if (samples.empty()) err << "exguard: warning: no verification samples; nothing to verify\n";
  const rag::Labels labels = pipeline::session_labels(c, s);
  const rag::VerificationRun run = rag::run_verification(samples, *s.tree, labels, c.rag, *s.backend, c.workers);
  json reports = json::array(), env = json::array();
  for (const rag::BranchReport& r : run.reports) reports.push_back(rag::to_json(r));
  for (const rag::FailurePattern& p : run.env) env.push_back(rag::to_json(p));
  const json result = {{"reports", reports},
                       {"refinements", run.refinements},
                       {"insufficient_data", samples.empty()},
                       {"env", env},
                       {"labels", rag::to_json(run.labels)},
                       {"degraded_calls", run.degraded}};
  pipeline::write_file(std::filesystem::path(c.output_dir) / "labels.json", rag::to_json(run.labels).dump(2) + "\n");
  out << result.dump(2) << "\n";
  err << "exguard: " << run.reports.size() << " branches verified, " << run.refinements << " refined; labels in "
      << c.output_dir << "/labels.json\n";
  return ok;
}

inline int cmd_bench(int latency, int branches, const Options& o, std::ostream& out) {
  const pipeline::PipelineConfig c = resolve(o);
  if (c.live) throw Error(ErrorCode::config, "bench runs against the mock backend only");
  auto tree = std::make_shared<const cee::CeeTree>(cee::load_cee(c.cee_path));
  out << pipeline::to_json(pipeline::bench(tree, branches, latency, c.workers)).dump(2) << "\n";
  return ok;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"exguard: exception handling analysis and repair for Java sources"};
  app.require_subcommand(1);

  Options analyze_o, evaluate_o, rag_o, bench_o;
  std::string analyze_path, evaluate_path, format = "json", cee_path, samples_path, cee_file;
  int latency = 100, branches = 12;

  CLI::App* analyze = app.add_subcommand("analyze", "Detect fragile code and write patched sources");
  analyze->add_option("path", analyze_path, "A .java file or a directory")->required();
  add_common(analyze, analyze_o);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Analyze a corpus and score it against .expect.json sidecars");
  evaluate->add_option("path", evaluate_path, "Corpus directory")->required();
  evaluate->add_option("--format", format, "json or table")->check(CLI::IsMember({"json", "table"}));
  add_common(evaluate, evaluate_o);

  CLI::App* cee_cmd = app.add_subcommand("cee", "Inspect an exception enumeration file");
  cee_cmd->require_subcommand(1);
  CLI::App* cee_validate = cee_cmd->add_subcommand("validate", "Check every structural invariant");
  cee_validate->add_option("FILE", cee_file)->required();
  CLI::App* cee_stats = cee_cmd->add_subcommand("stats", "Node, branch and depth counts");
  cee_stats->add_option("FILE", cee_file)->required();

  CLI::App* rag_verify = app.add_subcommand("rag-verify", "Verify branch labels on samples and refine failing ones");
  rag_verify->add_option("CEE", cee_path, "Exception enumeration file")->required();
  rag_verify->add_option("SAMPLES", samples_path, "Verification samples file")->required();
  add_common(rag_verify, rag_o);

  CLI::App* bench_cmd = app.add_subcommand("bench", "Sequential versus parallel branch calls with simulated latency");
  bench_cmd->add_option("--latency", latency, "Per-call latency in ms")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--branches", branches, "Number of synthetic branches")->check(CLI::NonNegativeNumber);
  add_common(bench_cmd, bench_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return ok;
    }
    err << "exguard: " << e.what() << "\n";
    return usage;
  }

  try {
    if (*analyze) return cmd_analyze(analyze_path, analyze_o, out, err);
    if (*evaluate) return cmd_evaluate(evaluate_path, evaluate_o, format, out, err);
    if (*cee_validate) return cmd_cee("validate", cee_file, out, err);
    if (*cee_stats) return cmd_cee("stats", cee_file, out, err);
    if (*rag_verify) return cmd_rag_verify(cee_path, samples_path, rag_o, out, err);
    if (*bench_cmd) return cmd_bench(latency, branches, bench_o, out);
  } catch (const Error& e) {
    err << "exguard: " << e.what() << "\n";
    return exit_code_of(e.code());
  } catch (const std::exception& e) {
    err << "exguard: " << e.what() << "\n";
    return input;
  }
  return usage;
}

}  // namespace exguard::cli

#ifndef PROBE_CLI_HPP
#define PROBE_CLI_HPP

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "probe/bank.hpp"
#include "probe/llm.hpp"
#include "probe/manifest.hpp"
#include "probe/participants.hpp"
#include "probe/pipeline.hpp"
#include "probe/prompt.hpp"
#include "probe/reconstruct.hpp"
#include "probe/session.hpp"
#include "probe/taskgen.hpp"

namespace probe::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kDataError = 1, kUsageError = 2 };

// A bad flag combination found after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  fs::path out = ".";
  bool quiet = false;
};

// Collects inputs and outputs of one subcommand and writes the sidecars.
class Run {
 public:
  Run(const Globals& g, const CLI::App& sub, std::vector<std::string> argv, std::ostream& log)
      : globals_(g), log_(log) {
    manifest_.command_line = std::move(argv);
    manifest_.working_dir = fs::current_path().string();
    manifest_.seed = g.seed;
    manifest_.started_at = utc_timestamp();
    Json config = Json::object();
    config["subcommand"] = sub.get_name();
    config["--out"] = g.out.string();
    for (const auto* o : sub.get_options()) {
      if (o->get_name() == "--help") continue;
      const auto& res = o->results();
      if (!res.empty())
        config[o->get_name()] = res.size() == 1 ? Json(res[0]) : Json(res);
      else if (!o->get_default_str().empty())
        config[o->get_name()] = o->get_default_str();
    }
    manifest_.config = config;
  }

  void input(const fs::path& p) { manifest_.add_input(p); }

  fs::path write(const std::string& name, const std::string& content) {
    const auto path = globals_.out / name;
    io::write_file_atomic(path, content);
    manifest_.add_output(path);
    info("wrote " + path.string());
    return path;
  }

  void info(const std::string& line) const {
    if (!globals_.quiet) log_ << line << "\n";
  }

  void finish() {
    manifest_.finished_at = utc_timestamp();
    write_manifests(manifest_);
  }

  const RunManifest& manifest() const { return manifest_; }

 private:
  const Globals& globals_;
  std::ostream& log_;
  RunManifest manifest_;
};

// Input hashes keyed by file name, embedded in outputs that must stay
// byte-identical across reruns (no paths, no clock).
inline Json stable_inputs(const RunManifest& m) {
  Json j = Json::object();
  for (const auto& f : m.inputs) j[fs::path(f.path).filename().string()] = f.sha256;
  return j;
}

inline std::string lines_count(std::size_t n, const std::string& what) {
  return std::to_string(n) + " " + what;
}

// ---------------------------------------------------------------------------
// Subcommand options

struct IngestOpts {
  fs::path trees;
  std::string lang = "en";
  std::string output = "bank.jsonl";
  bool keep_punct = false;
  bool no_filter = false;
  FilterCriteria criteria;
};

struct GenOpts {
  std::string experiment;
  fs::path bank;
  std::string output = "trials.jsonl";
  int runs = 1;
  std::size_t trials_per_run = 24;
  bool no_single_token = false;
  std::size_t tests_per_depth = 2;
  int min_depth = 3, max_depth = 8;
  std::size_t per_combo = 1;
  std::optional<std::size_t> combo_limit;
  fs::path ambiguous, demos;
  std::size_t per_condition = 6;
};

struct RespondOpts {
  fs::path trials;
  std::string backend;
  std::string output = "responses.jsonl";
  std::string endpoint, model;
  double temperature = 0;
  int max_tokens = 200;
  double timeout_s = 60;
  int retries = 3;
  std::string cache;
  std::size_t parallel = 4;
  std::string template_id = "default";
  fs::path template_file;
  std::string template_lang = "en";
};

struct ImportOpts {
  fs::path trials;
  std::vector<fs::path> sessions;
  std::string output = "responses.jsonl";
};

struct ClassifyOpts {
  fs::path responses, trials;
  std::string output = "classified.jsonl";
};

struct AnalyzeOpts {
  fs::path classified, trials;
  std::string output = "metrics.csv";
};

struct ReconstructOpts {
  fs::path classified, trials;
  std::string backend;
  int f1_min_length = 2;
  bool f1_exclude_root = false;
};

struct StatsOpts {
  fs::path classified, trials;
  std::vector<std::string> metrics = {"constituent_rate"};
  std::vector<std::string> compare;
  bool paired = false;
  bool dissociation = false;
  std::size_t n_sims = 1000, n_resamples = 10000, ci_resamples = 1000;
  std::size_t threads = 1;
  int f1_min_length = 2;
  bool f1_exclude_root = false;
  std::string output = "stats.json";
};

struct ServeOpts {
  fs::path trials;
  std::string listen = "127.0.0.1:8080";
  std::string sessions_dir;
  fs::path static_dir;
  std::size_t per_session = 0;
  std::string template_id = "session";
  std::string cors_origin = "*";
};

struct VerifyOpts {
  fs::path manifest;
  bool rerun = false;
};

struct DotOpts {
  fs::path bank;
  std::string id;
  std::string bracketed;
  std::string lang = "en";
};

// ---------------------------------------------------------------------------
// Subcommands

inline void cmd_ingest(const IngestOpts& o, Run& run) {
  run.input(o.trees);
  const auto all = read_trees(o.trees, parse_lang(o.lang), !o.keep_punct);
  const auto bank = o.no_filter ? all : filter_bank(all, o.criteria);
  run.info("read " + lines_count(all.size(), "trees") + ", kept " + std::to_string(bank.size()));
  run.write(o.output, bank_to_jsonl(bank));
}

inline void cmd_gen(const GenOpts& o, const Globals& g, Run& run) {
  const auto exp = parse_experiment(o.experiment);
  std::vector<Trial> trials;
  auto append = [&](std::vector<Trial> ts) {
    trials.insert(trials.end(), std::make_move_iterator(ts.begin()),
                  std::make_move_iterator(ts.end()));
  };
  if (exp == Experiment::e4) {
    if (o.ambiguous.empty() || o.demos.empty())
      throw UsageError("--ambiguous and --demos are required for experiment 4");
    run.input(o.ambiguous);
    run.input(o.demos);
    const auto sents = read_ambiguous(o.ambiguous);
    const auto demos = read_exp4_demos(o.demos);
    for (int r = 0; r < o.runs; ++r)
      append(gen_exp4(sents, demos, derive_seed(g.seed, static_cast<std::uint64_t>(r)), r,
                      o.per_condition));
  } else {
    if (o.bank.empty()) throw UsageError("--bank is required for experiment " + o.experiment);
    run.input(o.bank);
    const auto bank = read_bank(o.bank);
    for (int r = 0; r < o.runs && exp != Experiment::e3; ++r) {
      const auto seed = derive_seed(g.seed, static_cast<std::uint64_t>(r));
      switch (exp) {
        case Experiment::e1a:
          append(gen_exp1(bank, o.trials_per_run, seed, Exp1Variant::a, r));
          break;
        case Experiment::e1b:
          append(gen_exp1(bank, o.trials_per_run, seed, Exp1Variant::b, r));
          break;
        default:
          append(gen_exp2(bank, o.trials_per_run, seed, r, !o.no_single_token));
      }
    }
    if (exp == Experiment::e3) {
      const auto tests =
          select_tests_by_depth(bank, o.tests_per_depth, o.min_depth, o.max_depth, g.seed);
      append(gen_exp3(bank, tests, o.per_combo, o.combo_limit, g.seed));
    }
  }
  run.info("generated " + lines_count(trials.size(), "trials"));
  run.write(o.output, trials_to_jsonl(trials));
}

inline void cmd_respond(const RespondOpts& o, const Globals& g, Run& run) {
  run.input(o.trials);
  const auto trials = read_trials(o.trials);
  std::vector<ResponseRecord> records;
  if (o.backend.rfind("sim:", 0) == 0) {
    const auto spec = parse_agent_spec(o.backend.substr(4));
    for (const auto& t : trials) records.push_back(sim_respond(t, spec, g.seed));
  } else if (o.backend == "llm" || o.backend.rfind("llm:", 0) == 0) {
    BackendConfig config;
    config.kind = BackendKind::llm;
    config.endpoint_url = o.endpoint;
    config.model_name = o.backend.size() > 4 ? o.backend.substr(4) : o.model;
    if (config.endpoint_url.empty()) throw UsageError("--endpoint is required for llm backends");
    if (config.model_name.empty()) throw UsageError("--model is required for llm backends");
    config.temperature = o.temperature;
    config.max_tokens = o.max_tokens;
    config.request_timeout = std::chrono::milliseconds(static_cast<long>(o.timeout_s * 1000));
    config.max_retries = o.retries;
    config.cache_dir = o.cache.empty() ? g.out / "cache" : fs::path(o.cache);
    config.parallelism = o.parallel;
    try {
      config.validate();
    } catch (const SpecError& e) {
      throw UsageError(e.what());
    }
    auto templates = TemplateSet::builtin();
    if (!o.template_file.empty()) {
      run.input(o.template_file);
      templates.load(o.template_file, o.template_id, parse_lang(o.template_lang));
    }
    records = respond_llm(trials, config, templates, o.template_id,
                          [&](std::size_t done, std::size_t total) {
                            if (done == total || done % 50 == 0)
                              run.info(std::to_string(done) + "/" + std::to_string(total));
                          });
    const auto failed = std::count_if(records.begin(), records.end(),
                                      [](const auto& r) { return !r.ok(); });
    if (failed) run.info(std::to_string(failed) + " requests failed; see \"error\" fields");
  } else {
    throw UsageError("--backend must be sim:<agent> or llm[:<model>], got '" + o.backend + "'");
  }
  run.write(o.output, responses_to_jsonl(records));
}

inline void cmd_import(const ImportOpts& o, Run& run) {
  run.input(o.trials);
  const auto trials = read_trials(o.trials);
  std::set<std::string> known;
  for (const auto& t : trials) known.insert(t.trial_id);
  for (const auto& s : o.sessions) run.input(s);
  const auto rep = import_sessions(o.sessions, known);
  for (const auto& [sid, tid] : rep.unanswered)
    run.info("warning: session " + sid + " did not answer " + tid);
  for (const auto& sid : rep.constant_answer_sessions)
    run.info("warning: session " + sid + " gave the same answer to every trial");
  Json report;
  report["records"] = rep.records.size();
  Json unanswered = Json::array();
  for (const auto& [sid, tid] : rep.unanswered)
    unanswered.push_back({{"session_id", sid}, {"trial_id", tid}});
  report["unanswered"] = unanswered;
  report["constant_answer_sessions"] = rep.constant_answer_sessions;
  run.write(o.output, responses_to_jsonl(rep.records));
  run.write("import_report.json", report.dump(2) + "\n");
}

inline void cmd_classify(const ClassifyOpts& o, Run& run) {
  run.input(o.responses);
  run.input(o.trials);
  const auto cs = classify_responses(read_trials(o.trials), read_responses(o.responses));
  run.info("classified " + lines_count(cs.size(), "responses"));
  run.write(o.output, classified_to_jsonl(cs));
}

inline void cmd_analyze(const AnalyzeOpts& o, Run& run) {
  run.input(o.classified);
  run.input(o.trials);
  const auto rows = analyze(read_trials(o.trials), read_classified(o.classified));
  run.write(o.output, metrics_to_csv(rows));
}

inline void cmd_reconstruct(const ReconstructOpts& o, Run& run) {
  run.input(o.classified);
  run.input(o.trials);
  const auto trials = read_trials(o.trials);
  auto cs = read_classified(o.classified);
  std::set<std::string> backends;
  for (const auto& c : cs) backends.insert(backend_family(c.backend));
  if (!o.backend.empty()) {
    std::erase_if(cs, [&](const auto& c) { return backend_family(c.backend) != o.backend; });
    if (cs.empty()) throw EmptyGroup("no responses from backend '" + o.backend + "'");
  } else if (backends.size() > 1) {
    std::string list;
    for (const auto& b : backends) list += (list.empty() ? "" : ", ") + b;
    throw EmptyGroup("responses from several backends (" + list + "); pick one with --backend");
  }
  const F1Options f1{o.f1_min_length, !o.f1_exclude_root};
  const auto rows = reconstruct_all(trials, cs, f1);
  if (rows.empty()) throw EmptyPool("no sentence received a single-span deletion");
  std::string jsonl;
  std::vector<ConstituencyTree> deletion, linguistic;
  for (const auto& r : rows) {
    jsonl += to_json(r.reconstructed, r.distribution).dump() + "\n";
    deletion.push_back(r.reconstructed.tree);
    linguistic.push_back(r.linguistic);
  }
  Json tree_stats;
  tree_stats["deletion"] = to_json(aggregate_tree_stats(deletion));
  tree_stats["linguistic"] = to_json(aggregate_tree_stats(linguistic));
  run.info("reconstructed " + lines_count(rows.size(), "sentences"));
  run.write("reconstructed.jsonl", jsonl);
  run.write("scores.csv", scores_to_csv(rows));
  run.write("tree_stats.json", tree_stats.dump(2) + "\n");
}

inline void cmd_stats(const StatsOpts& o, const Globals& g, Run& run) {
  run.input(o.classified);
  run.input(o.trials);
  StatsOptions opt;
  opt.metrics = o.metrics;
  for (const auto& m : opt.metrics)
    if (!known_metrics().count(m)) throw UsageError("--metric: unknown metric '" + m + "'");
  if (!o.compare.empty()) {
    if (o.compare.size() != 2) throw UsageError("--compare takes exactly two group labels");
    opt.compare = std::make_pair(o.compare[0], o.compare[1]);
  }
  opt.paired = o.paired;
  opt.dissociation_only = o.dissociation;
  opt.n_sims = o.n_sims;
  opt.n_resamples = o.n_resamples;
  opt.ci_resamples = o.ci_resamples;
  opt.seed = g.seed;
  opt.chunks = o.threads;
  opt.f1 = {o.f1_min_length, !o.f1_exclude_root};
  const auto res = compute_stats(read_trials(o.trials), read_classified(o.classified), opt);
  Json j;
  j["manifest"] = {{"tool_version", kToolVersion},
                   {"seed", g.seed},
                   {"inputs", stable_inputs(run.manifest())},
                   {"config", run.manifest().config}};
  for (const char* path_option : {"--out", "--classified", "--trials"})
    j["manifest"]["config"].erase(path_option);
  Json reports = Json::array();
  for (const auto& r : res.reports) {
    reports.push_back(to_json(r));
    run.info(r.metric + " [" + r.group + "] observed=" + io::fmt_double(r.observed) +
             (r.test.empty() ? "" : " p=" + io::fmt_double(r.p_raw) + " p_fdr=" +
                                        io::fmt_double(r.p_fdr)));
  }
  j["reports"] = reports;
  Json anova = Json::array();
  for (const auto& a : res.anova) anova.push_back(to_json(a));
  j["anova"] = anova;
  run.write(o.output, j.dump(2) + "\n");
}

inline int cmd_serve(const ServeOpts& o, const Globals& g, std::ostream& log) {
  const auto colon = o.listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("--listen expects HOST:PORT");
  const auto host = o.listen.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(o.listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--listen: bad port in '" + o.listen + "'");
  }
  SessionServiceConfig config;
  config.dir = o.sessions_dir.empty() ? g.out / "sessions" : fs::path(o.sessions_dir);
  config.seed = g.seed;
  config.template_id = o.template_id;
  config.trials_per_session = o.per_session;
  config.cors_origin = o.cors_origin;
  SessionService service(read_trials(o.trials), config);
  httplib::Server server;
  service.register_routes(server);
  if (!o.static_dir.empty() && !server.set_mount_point("/", o.static_dir.string()))
    throw UsageError("--static: cannot serve " + o.static_dir.string());
  if (!g.quiet)
    log << "serving " << service.session_count() << " existing sessions on " << o.listen
        << std::endl;
  if (!server.listen(host, port)) throw IoError("cannot listen on " + o.listen);
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Replays the recorded command into a scratch directory and compares
// output hashes file by file.
inline std::vector<VerifyIssue> rerun_and_compare(const RunManifest& m, std::ostream& err) {
  const auto scratch = fs::temp_directory_path() /
                       ("probe-verify-" + hash::sha256_hex(utc_timestamp() + m.started_at +
                                                          std::to_string(::getpid()))
                                              .substr(0, 12));
  fs::create_directories(scratch);
  std::vector<std::string> args;
  for (std::size_t i = 0; i < m.command_line.size(); ++i) {
    const auto& a = m.command_line[i];
    if (a == "--out" && i + 1 < m.command_line.size()) {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0) continue;
    args.push_back(a);
  }
  args.insert(args.begin(), {"--out", scratch.string(), "--quiet"});
  const auto cwd = fs::current_path();
  if (!m.working_dir.empty()) fs::current_path(m.working_dir);
  std::ostringstream sink;
  const int code = run(args, sink, err);
  fs::current_path(cwd);
  std::vector<VerifyIssue> issues;
  if (code != kOk) issues.push_back({"<rerun>", "exit code " + std::to_string(code)});
  for (const auto& f : m.outputs) {
    const auto fresh = scratch / fs::path(f.path).filename();
    if (!fs::exists(fresh))
      issues.push_back({f.path, "not produced by rerun"});
    else if (hash::sha256_file(fresh) != f.sha256)
      issues.push_back({f.path, "rerun differs"});
  }
  fs::remove_all(scratch);
  return issues;
}

inline int cmd_verify(const VerifyOpts& o, std::ostream& out, std::ostream& err) {
  const auto m = read_manifest(o.manifest);
  auto issues = verify_hashes(m);
  if (o.rerun && issues.empty()) issues = rerun_and_compare(m, err);
  for (const auto& i : issues) out << i.path << ": " << i.problem << "\n";
  if (issues.empty()) out << "ok: " << m.inputs.size() << " inputs, " << m.outputs.size()
                          << " outputs" << (o.rerun ? ", rerun identical" : "") << "\n";
  return issues.empty() ? kOk : kDataError;
}

inline void cmd_dot(const DotOpts& o, std::ostream& out) {
  if (!o.bracketed.empty()) {
    out << to_dot(parse_bracketed(o.bracketed, parse_lang(o.lang), o.id.empty() ? "tree" : o.id));
    return;
  }
  if (o.bank.empty() || o.id.empty()) throw UsageError("tree dot needs --tree, or --bank and --id");
  const auto bank = read_bank(o.bank);
  const auto* e = bank.find(o.id);
  if (!e) throw UnknownSentence(o.id);
  out << to_dot(e->tree);
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Word-deletion probing toolkit", "probe"};
  app.set_version_flag("--version", kToolVersion);
  app.fallthrough();
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress progress output");
  app.set_config("--config", "", "TOML/INI file with option defaults");
  app.allow_config_extras(CLI::config_extras_mode::error);

  IngestOpts ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Read bracketed trees into a sentence bank");
  s_ingest->add_option("--trees", ingest.trees)->required()->check(CLI::ExistingFile);
  s_ingest->add_option("--lang", ingest.lang)->check(CLI::IsMember({"en", "zh"}))
      ->capture_default_str();
  s_ingest->add_option("--output", ingest.output)->capture_default_str();
  s_ingest->add_flag("--keep-final-punct", ingest.keep_punct);
  s_ingest->add_flag("--no-filter", ingest.no_filter);
  s_ingest->add_option("--min-len", ingest.criteria.min_len)->capture_default_str();
  s_ingest->add_option("--max-len", ingest.criteria.max_len)->capture_default_str();
  s_ingest->add_option("--min-depth", ingest.criteria.min_depth)->capture_default_str();
  s_ingest->add_option("--max-depth", ingest.criteria.max_depth)->capture_default_str();

  GenOpts gen;
  auto* s_gen = app.add_subcommand("gen", "Generate trials for one experiment");
  s_gen->add_option("--experiment", gen.experiment)->required()
      ->check(CLI::IsMember({"1a", "1b", "2", "3", "4"}));
  s_gen->add_option("--bank", gen.bank)->check(CLI::ExistingFile);
  s_gen->add_option("--output", gen.output)->capture_default_str();
  s_gen->add_option("--runs", gen.runs)->check(CLI::PositiveNumber)->capture_default_str();
  s_gen->add_option("--trials-per-run", gen.trials_per_run)->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_gen->add_flag("--no-single-token", gen.no_single_token,
                  "Experiment 2: demos never delete a single word");
  s_gen->add_option("--tests-per-depth", gen.tests_per_depth)->capture_default_str();
  s_gen->add_option("--min-depth", gen.min_depth)->capture_default_str();
  s_gen->add_option("--max-depth", gen.max_depth)->capture_default_str();
  s_gen->add_option("--per-combo", gen.per_combo)->capture_default_str();
  s_gen->add_option("--combo-limit", gen.combo_limit);
  s_gen->add_option("--ambiguous", gen.ambiguous)->check(CLI::ExistingFile);
  s_gen->add_option("--demos", gen.demos)->check(CLI::ExistingFile);
  s_gen->add_option("--per-condition", gen.per_condition)->capture_default_str();

  RespondOpts respond;
  auto* s_respond = app.add_subcommand("respond", "Collect responses from an LLM or agent");
  s_respond->add_option("--trials", respond.trials)->required()->check(CLI::ExistingFile);
  s_respond->add_option("--backend", respond.backend, "sim:<agent> or llm[:<model>]")
      ->required();
  s_respond->add_option("--output", respond.output)->capture_default_str();
  s_respond->add_option("--endpoint", respond.endpoint);
  s_respond->add_option("--model", respond.model);
  s_respond->add_option("--temperature", respond.temperature)->capture_default_str();
  s_respond->add_option("--max-tokens", respond.max_tokens)->capture_default_str();
  s_respond->add_option("--timeout", respond.timeout_s, "Seconds per request")
      ->capture_default_str();
  s_respond->add_option("--retries", respond.retries)->capture_default_str();
  s_respond->add_option("--cache", respond.cache, "Cache directory (default OUT/cache)");
  s_respond->add_option("--parallel", respond.parallel)->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_respond->add_option("--template", respond.template_id)->capture_default_str();
  s_respond->add_option("--template-file", respond.template_file)->check(CLI::ExistingFile);
  s_respond->add_option("--template-lang", respond.template_lang)
      ->check(CLI::IsMember({"en", "zh"}))->capture_default_str();

  ImportOpts import;
  auto* s_import = app.add_subcommand("import", "Import human session files");
  s_import->add_option("--trials", import.trials)->required()->check(CLI::ExistingFile);
  s_import->add_option("--sessions", import.sessions)->required()->check(CLI::ExistingFile);
  s_import->add_option("--output", import.output)->capture_default_str();

  ClassifyOpts classify_o;
  auto* s_classify = app.add_subcommand("classify", "Classify deletions in responses");
  s_classify->add_option("--responses", classify_o.responses)->required()
      ->check(CLI::ExistingFile);
  s_classify->add_option("--trials", classify_o.trials)->required()->check(CLI::ExistingFile);
  s_classify->add_option("--output", classify_o.output)->capture_default_str();

  AnalyzeOpts analyze_o;
  auto* s_analyze = app.add_subcommand("analyze", "Per-run constituent and rule metrics");
  s_analyze->add_option("--classified", analyze_o.classified)->required()
      ->check(CLI::ExistingFile);
  s_analyze->add_option("--trials", analyze_o.trials)->required()->check(CLI::ExistingFile);
  s_analyze->add_option("--output", analyze_o.output)->capture_default_str();

  ReconstructOpts recon;
  auto* s_recon = app.add_subcommand("reconstruct", "Deletion-based trees by weighted CKY");
  s_recon->add_option("--classified", recon.classified)->required()->check(CLI::ExistingFile);
  s_recon->add_option("--trials", recon.trials)->required()->check(CLI::ExistingFile);
  s_recon->add_option("--backend", recon.backend, "Pool only this backend (human = all sessions)");
  s_recon->add_option("--f1-min-length", recon.f1_min_length)->capture_default_str();
  s_recon->add_flag("--f1-exclude-root", recon.f1_exclude_root);

  StatsOpts st;
  auto* s_stats = app.add_subcommand("stats", "Significance tests and intervals");
  s_stats->add_option("--classified", st.classified)->required()->check(CLI::ExistingFile);
  s_stats->add_option("--trials", st.trials)->required()->check(CLI::ExistingFile);
  s_stats->add_option("--metric", st.metrics)->capture_default_str()->delimiter(',');
  s_stats->add_option("--compare", st.compare, "Two group labels, e.g. human/en,human/zh")
      ->delimiter(',');
  s_stats->add_flag("--paired", st.paired);
  s_stats->add_flag("--dissociation", st.dissociation,
                    "Rule ratios on dissociation trials only");
  s_stats->add_option("--n-sims", st.n_sims)->check(CLI::PositiveNumber)->capture_default_str();
  s_stats->add_option("--n-resamples", st.n_resamples)->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_stats->add_option("--ci-resamples", st.ci_resamples)->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_stats->add_option("--threads", st.threads)->check(CLI::PositiveNumber)->capture_default_str();
  s_stats->add_option("--f1-min-length", st.f1_min_length)->capture_default_str();
  s_stats->add_flag("--f1-exclude-root", st.f1_exclude_root);
  s_stats->add_option("--output", st.output)->capture_default_str();

  ServeOpts serve;
  auto* s_serve = app.add_subcommand("serve", "Run the participant session API");
  s_serve->add_option("--trials", serve.trials)->required()->check(CLI::ExistingFile);
  s_serve->add_option("--listen", serve.listen)->capture_default_str();
  s_serve->add_option("--sessions-dir", serve.sessions_dir, "Default OUT/sessions");
  s_serve->add_option("--static", serve.static_dir, "Directory with the UI bundle")
      ->check(CLI::ExistingDirectory);
  s_serve->add_option("--trials-per-session", serve.per_session)->capture_default_str();
  s_serve->add_option("--template", serve.template_id)->capture_default_str();
  s_serve->add_option("--cors-origin", serve.cors_origin)->capture_default_str();

  VerifyOpts verify;
  auto* s_verify = app.add_subcommand("verify", "Re-hash the files listed in a manifest");
  s_verify->add_option("manifest", verify.manifest)->required()->check(CLI::ExistingFile);
  s_verify->add_flag("--rerun", verify.rerun, "Also replay the command and compare outputs");

  DotOpts dot;
  auto* s_tree = app.add_subcommand("tree", "Tree utilities");
  s_tree->require_subcommand(1);
  auto* s_dot = s_tree->add_subcommand("dot", "Print a tree as Graphviz DOT");
  s_dot->add_option("--bank", dot.bank)->check(CLI::ExistingFile);
  s_dot->add_option("--id", dot.id);
  s_dot->add_option("--tree", dot.bracketed, "Bracketed tree text");
  s_dot->add_option("--lang", dot.lang)->check(CLI::IsMember({"en", "zh"}))->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  std::vector<std::string> argv = args;
  try {
    auto with_run = [&](CLI::App* sub, auto&& fn) {
      Run run(g, *sub, argv, out);
      fn(run);
      run.finish();
      return kOk;
    };
    if (s_ingest->parsed()) return with_run(s_ingest, [&](Run& r) { cmd_ingest(ingest, r); });
    if (s_gen->parsed()) return with_run(s_gen, [&](Run& r) { cmd_gen(gen, g, r); });
    if (s_respond->parsed())
      return with_run(s_respond, [&](Run& r) { cmd_respond(respond, g, r); });
    if (s_import->parsed()) return with_run(s_import, [&](Run& r) { cmd_import(import, r); });
    if (s_classify->parsed())
      return with_run(s_classify, [&](Run& r) { cmd_classify(classify_o, r); });
    if (s_analyze->parsed())
      return with_run(s_analyze, [&](Run& r) { cmd_analyze(analyze_o, r); });
    if (s_recon->parsed()) return with_run(s_recon, [&](Run& r) { cmd_reconstruct(recon, r); });
    if (s_stats->parsed()) return with_run(s_stats, [&](Run& r) { cmd_stats(st, g, r); });
    if (s_serve->parsed()) return cmd_serve(serve, g, out);
    if (s_verify->parsed()) return cmd_verify(verify, out, err);
    if (s_dot->parsed()) {
      cmd_dot(dot, out);
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}

}  // namespace probe::cli

#endif  // PROBE_CLI_HPP

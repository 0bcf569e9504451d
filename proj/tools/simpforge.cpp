#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simpforge/corpus.hpp"
#include "simpforge/engine.hpp"
#include "simpforge/errors.hpp"
#include "simpforge/matcher.hpp"
#include "simpforge/miner.hpp"
#include "simpforge/rng.hpp"
#include "simpforge/synth.hpp"
#include "simpforge/tuner.hpp"

namespace fs = std::filesystem;
using namespace simpforge;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read manifest " + path.string());
  std::vector<std::string> files;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) files.push_back(line);
  return files;
}

void save_manifest(const fs::path& path, const std::vector<std::string>& files) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  for (const std::string& f : files) out << f << '\n';
  if (!out.flush()) throw FormatError("cannot write manifest " + path.string());
}

std::vector<std::string> list_corpus(const std::string& corpus_dir,
                                     const std::string& manifest) {
  if (!corpus_dir.empty() && !manifest.empty())
    throw ValidationError("give either --corpus or --manifest, not both");
  if (!manifest.empty()) return load_manifest(manifest);
  if (corpus_dir.empty()) throw ValidationError("a corpus is required: --corpus or --manifest");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(corpus_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".aux")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no .aux benchmarks under " + corpus_dir);
  return files;
}

FormulaDag load_dag_file(const std::string& path) {
  try {
    return parse_dag(slurp(path));
  } catch (const Error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::vector<FormulaDag> load_dags(const std::vector<std::string>& files) {
  std::vector<FormulaDag> dags;
  dags.reserve(files.size());
  for (const std::string& f : files) dags.push_back(load_dag_file(f));
  return dags;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s)
    if (c == '\'') out += "'\\''";
    else out += c;
  out += '\'';
  return out;
}

double command_cost(const std::string& cmd, const std::string& file) {
  std::string full = cmd + " " + shell_quote(file);
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) throw FormatError("cannot run: " + full);
  std::string out;
  char buf[256];
  while (::fgets(buf, sizeof buf, pipe)) out += buf;
  int rc = ::pclose(pipe);
  if (rc != 0) throw FormatError("command exited with " + std::to_string(rc) + ": " + full);
  try {
    return std::stod(out);
  } catch (const std::exception&) {
    throw FormatError("command printed no number: " + full);
  }
}

Matcher matcher_for(const std::vector<RewriteRule>& rules,
                    const std::vector<std::size_t>& order, bool order_given) {
  if (!order_given) return Matcher::compile(rules);
  if (order.empty()) return Matcher::compile({});
  return Matcher::compile(rules, order);
}

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t workers = 0;

  PipelineConfig resolve(const CLI::App* sub) const {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = read_pipeline_config(config_path);
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--workers")) {
      cfg.synth.workers = workers;
      cfg.fopt.workers = workers;
    }
    return cfg;
  }
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path, "pipeline configuration file (JSON)");
  sub->add_option("--seed", flags.seed, "random seed override");
  sub->add_option("--workers", flags.workers, "worker threads (0 = hardware)");
}

int run_verify(const std::vector<RewriteRule>& rules, const PipelineConfig& cfg) {
  std::size_t failures = 0;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    VerifyStats stats;
    bool ok = verify_rule(rules[i], cfg.synth.oracle_width, cfg.synth, &stats);
    std::uint64_t wide_checked = 0;
    bool wide_ok = true;
    if (ok) {
      Rng rng(mix_seed(cfg.seed, i));
      wide_ok = verify_rule_sampled(rules[i], cfg.synth.oracle_width + cfg.synth.recheck_extra_bits,
                                    cfg.synth.recheck_envs, rng, cfg.synth, &wide_checked);
    }
    if (ok && wide_ok) {
      std::cout << "rule " << i << ": ok (" << (stats.exhaustive ? "exhaustive" : "sampled")
                << ", " << stats.checked << " envs, wide recheck " << wide_checked << ")\n";
    } else {
      ++failures;
      std::cout << "rule " << i << ": FAILED ("
                << (!ok ? "bounded verification" : "wide recheck") << ")\n";
    }
  }
  if (failures) {
    std::cerr << "error: " << failures << " of " << rules.size() << " rules failed verification\n";
    return 1;
  }
  std::cout << rules.size() << " rules verified\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus-driven rewrite-rule learning and formula simplification"};
  app.require_subcommand(1);

  // config
  auto* c_config = app.add_subcommand("config", "write the default pipeline configuration");
  std::string config_out;
  c_config->add_option("--out", config_out, "destination file")->required();

  // split
  auto* c_split = app.add_subcommand("split", "deal a corpus into search/train/test manifests");
  CommonFlags split_common;
  add_common(c_split, split_common);
  std::string split_corpus_dir, split_manifest, split_out_dir;
  bool split_swap = false;
  c_split->add_option("--corpus", split_corpus_dir, "directory of .aux benchmarks");
  c_split->add_option("--manifest", split_manifest, "benchmark list file");
  c_split->add_option("--out-dir", split_out_dir, "directory for the three manifests")->required();
  c_split->add_flag("--swap-train-test", split_swap, "exchange train and test for the second fold");

  // filter
  auto* c_filter = app.add_subcommand("filter", "drop benchmarks below a size floor or outside cost bounds");
  CommonFlags filter_common;
  add_common(c_filter, filter_common);
  std::string filter_corpus_dir, filter_manifest, filter_out, filter_cost_cmd;
  std::size_t filter_min_terms = 0;
  double filter_min_cost = 0, filter_max_cost = 0;
  c_filter->add_option("--corpus", filter_corpus_dir, "directory of .aux benchmarks");
  c_filter->add_option("--manifest", filter_manifest, "benchmark list file");
  c_filter->add_option("--min-terms", filter_min_terms, "minimum operation count");
  c_filter->add_option("--min-cost", filter_min_cost, "minimum external cost");
  c_filter->add_option("--max-cost", filter_max_cost, "maximum external cost");
  c_filter->add_option("--cost-cmd", filter_cost_cmd,
                       "command printing a cost for the appended benchmark path");
  c_filter->add_option("--out", filter_out, "filtered manifest")->required();

  // mine
  auto* c_mine = app.add_subcommand("mine", "sample frequent patterns from a corpus");
  CommonFlags mine_common;
  add_common(c_mine, mine_common);
  std::string mine_corpus_dir, mine_manifest, mine_out_patterns, mine_out_configs;
  std::size_t mine_n = 0, mine_batch = 0, mine_arity = 0;
  double mine_epsilon = 0;
  c_mine->add_option("--corpus", mine_corpus_dir, "directory of .aux benchmarks");
  c_mine->add_option("--manifest", mine_manifest, "benchmark list file");
  c_mine->add_option("--n", mine_n, "pattern size in operation nodes");
  c_mine->add_option("--epsilon", mine_epsilon, "significance threshold");
  c_mine->add_option("--batch", mine_batch, "accepted samples per batch");
  c_mine->add_option("--arity-bound", mine_arity, "in-degree bound for the boundary list");
  c_mine->add_option("--out-patterns", mine_out_patterns, "pattern statistics file")->required();
  c_mine->add_option("--out-configs", mine_out_configs, "per-pattern static configurations file")
      ->required();

  // synth
  auto* c_synth = app.add_subcommand("synth", "synthesize guarded rewrite rules from mined patterns");
  CommonFlags synth_common;
  add_common(c_synth, synth_common);
  std::string synth_patterns, synth_configs, synth_out;
  c_synth->add_option("--patterns", synth_patterns, "pattern statistics file")->required();
  c_synth->add_option("--configs", synth_configs, "per-pattern static configurations file")
      ->required();
  c_synth->add_option("--out", synth_out, "rule directory")->required();

  // compile
  auto* c_compile = app.add_subcommand("compile", "compile a rule directory into a matcher image");
  std::string compile_rules, compile_order, compile_out;
  c_compile->add_option("--rules", compile_rules, "rule directory")->required();
  c_compile->add_option("--order", compile_order, "rule order manifest (active subset)");
  c_compile->add_option("--out", compile_out, "matcher image file")->required();

  // tune
  auto* c_tune = app.add_subcommand("tune", "search rule subsets and orders against a training corpus");
  CommonFlags tune_common;
  add_common(c_tune, tune_common);
  std::string tune_rules, tune_corpus_dir, tune_manifest, tune_out_order, tune_log, tune_metric_cmd;
  std::size_t tune_budget = 0;
  int tune_metric_reps = 0;
  c_tune->add_option("--rules", tune_rules, "rule directory")->required();
  c_tune->add_option("--corpus", tune_corpus_dir, "directory of .aux benchmarks");
  c_tune->add_option("--manifest", tune_manifest, "training benchmark list");
  c_tune->add_option("--budget", tune_budget, "objective evaluations allowed");
  c_tune->add_option("--metric-cmd", tune_metric_cmd,
                     "command printing a cost for the appended simplified-benchmark path");
  c_tune->add_option("--metric-reps", tune_metric_reps,
                     "median-of-R draws for a noisy metric (default 5 with --metric-cmd)");
  c_tune->add_option("--out-order", tune_out_order, "best rule order manifest")->required();
  c_tune->add_option("--log", tune_log, "append-only JSON-lines evaluation log");

  // simplify
  auto* c_simplify = app.add_subcommand("simplify", "rewrite benchmarks with a compiled matcher");
  CommonFlags simplify_common;
  add_common(c_simplify, simplify_common);
  std::string simp_matcher, simp_corpus_dir, simp_manifest, simp_out_dir;
  c_simplify->add_option("--matcher", simp_matcher,
                         "matcher image; omit for the rule-free baseline");
  c_simplify->add_option("--corpus", simp_corpus_dir, "directory of .aux benchmarks");
  c_simplify->add_option("--manifest", simp_manifest, "benchmark list file");
  c_simplify->add_option("--out-dir", simp_out_dir, "directory for simplified benchmarks and traces")
      ->required();

  // verify
  auto* c_verify = app.add_subcommand("verify", "re-run the verifier over a rule directory");
  CommonFlags verify_common;
  add_common(c_verify, verify_common);
  std::string verify_rules_dir;
  int verify_width = 0;
  c_verify->add_option("--rules", verify_rules_dir, "rule directory")->required();
  c_verify->add_option("--width", verify_width, "bounded-verifier bit width override");

  // report
  auto* c_report = app.add_subcommand("report", "emit CSV and percentile tables for a simplification run");
  std::string report_manifest, report_baseline_dir, report_simplified_dir, report_metrics;
  std::string report_csv_out, report_table_out;
  c_report->add_option("--manifest", report_manifest, "benchmark list file")->required();
  c_report->add_option("--baseline-dir", report_baseline_dir, "baseline outputs")->required();
  c_report->add_option("--simplified-dir", report_simplified_dir, "simplified outputs")->required();
  c_report->add_option("--metrics", report_metrics,
                       "external metric values: name,baseline,simplified per line");
  c_report->add_option("--csv", report_csv_out, "CSV destination");
  c_report->add_option("--table", report_table_out, "percentile table destination");

  try {
    app.parse(argc, argv);

    if (c_config->parsed()) {
      write_pipeline_config(config_out, PipelineConfig{});
      std::cout << "wrote " << config_out << '\n';
      return 0;
    }

    if (c_split->parsed()) {
      PipelineConfig cfg = split_common.resolve(c_split);
      auto files = list_corpus(split_corpus_dir, split_manifest);
      SplitManifests split = split_corpus(files, cfg.search_frac, cfg.train_frac,
                                          cfg.test_frac, cfg.seed);
      if (split_swap) std::swap(split.train, split.test);
      fs::create_directories(split_out_dir);
      save_manifest(fs::path(split_out_dir) / "search.txt", split.search);
      save_manifest(fs::path(split_out_dir) / "train.txt", split.train);
      save_manifest(fs::path(split_out_dir) / "test.txt", split.test);
      std::cout << "split " << files.size() << " benchmarks into " << split.search.size()
                << "/" << split.train.size() << "/" << split.test.size() << '\n';
      return 0;
    }

    if (c_filter->parsed()) {
      PipelineConfig cfg = filter_common.resolve(c_filter);
      auto files = list_corpus(filter_corpus_dir, filter_manifest);
      FilterOptions opts;
      opts.min_terms = c_filter->count("--min-terms") ? filter_min_terms : cfg.min_terms;
      if (c_filter->count("--min-cost")) opts.min_cost = filter_min_cost;
      if (c_filter->count("--max-cost")) opts.max_cost = filter_max_cost;
      if (!filter_cost_cmd.empty())
        opts.cost = [&](const std::string& f) { return command_cost(filter_cost_cmd, f); };
      auto kept = filter_corpus(
          files, [](const std::string& f) { return size_metric(load_dag_file(f)); }, opts);
      save_manifest(filter_out, kept);
      std::cout << "kept " << kept.size() << " of " << files.size() << " benchmarks\n";
      return 0;
    }

    if (c_mine->parsed()) {
      PipelineConfig cfg = mine_common.resolve(c_mine);
      if (c_mine->count("--n")) cfg.miner.N = mine_n;
      if (c_mine->count("--epsilon")) cfg.miner.epsilon = mine_epsilon;
      if (c_mine->count("--batch")) cfg.miner.M = mine_batch;
      if (c_mine->count("--arity-bound")) cfg.miner.T = mine_arity;
      cfg.miner.seed = cfg.seed;
      auto corpus = load_dags(list_corpus(mine_corpus_dir, mine_manifest));
      auto stats = mine(corpus, cfg.miner);
      std::ofstream lines(mine_out_patterns), config_lines(mine_out_configs);
      if (!lines || !config_lines) throw FormatError("cannot open pattern outputs");
      write_pattern_stats(lines, config_lines, stats);
      std::cout << "mined " << stats.size() << " patterns\n";
      return 0;
    }

    if (c_synth->parsed()) {
      PipelineConfig cfg = synth_common.resolve(c_synth);
      cfg.synth.seed = cfg.seed;
      std::ifstream lines(synth_patterns), config_lines(synth_configs);
      if (!lines || !config_lines) throw FormatError("cannot open pattern inputs");
      auto stats = read_pattern_stats(lines, config_lines);
      std::vector<RewriteRule> rules;
      std::set<std::string> seen;
      for (const PatternStats& ps : stats) {
        Pattern lhs = parse_signature(ps.signature);
        std::vector<StaticConfig> configs;
        for (const std::string& annotated : ps.configs)
          configs.push_back(parse_annotated_signature(annotated).second);
        for (RewriteRule& rule : synthesize_rules(lhs, configs, cfg.synth)) {
          RuleText text = rule_to_text(rule);
          if (seen.insert(text.d + "\x1f" + text.p + "\x1f" + text.f).second)
            rules.push_back(std::move(rule));
        }
      }
      write_rules(synth_out, rules);
      std::cout << "synthesized " << rules.size() << " rules from " << stats.size()
                << " patterns\n";
      return 0;
    }

    if (c_compile->parsed()) {
      auto rules = read_rules(compile_rules);
      bool order_given = !compile_order.empty();
      std::vector<std::size_t> order;
      if (order_given) order = read_order_manifest(compile_order);
      Matcher m = matcher_for(rules, order, order_given);
      write_matcher(compile_out, m);
      std::cout << "compiled " << m.order().size() << " active rules, " << m.test_count()
                << " structural tests\n";
      return 0;
    }

    if (c_tune->parsed()) {
      PipelineConfig cfg = tune_common.resolve(c_tune);
      auto rules = read_rules(tune_rules);
      auto train = load_dags(list_corpus(tune_corpus_dir, tune_manifest));
      std::size_t budget = c_tune->count("--budget") ? tune_budget : cfg.tune_budget;

      Metric metric;
      if (tune_metric_cmd.empty()) {
        metric = simplified_size_metric(cfg.eval, cfg.limits);
      } else {
        static std::atomic<std::uint64_t> temp_counter{0};
        std::string cmd = tune_metric_cmd;
        EvalOptions eval = cfg.eval;
        SimplifyLimits limits = cfg.limits;
        Metric raw = [cmd, eval, limits](const FormulaDag& dag, const Matcher& m) {
          FormulaDag out = simplify(dag, m, limits, nullptr, eval);
          fs::path tmp = fs::temp_directory_path() /
                         ("sf_metric_" + std::to_string(::getpid()) + "_" +
                          std::to_string(temp_counter++) + ".aux");
          std::ofstream f(tmp);
          f << serialize_dag(out);
          f.close();
          double v;
          try {
            v = command_cost(cmd, tmp.string());
          } catch (...) {
            fs::remove(tmp);
            throw;
          }
          fs::remove(tmp);
          return v;
        };
        int reps = c_tune->count("--metric-reps") ? tune_metric_reps : 5;
        metric = reps > 1 ? median_of(raw, reps) : raw;
        cfg.fopt.repetitions = reps;
      }

      TuneOptions opts;
      opts.fopt = cfg.fopt;
      std::ofstream log;
      if (!tune_log.empty()) {
        log.open(tune_log, std::ios::app);
        if (!log) throw FormatError("cannot open tuning log " + tune_log);
        opts.log = &log;
      }
      TuneResult res = tune(rules, train, metric, budget, cfg.seed, opts);
      write_order_manifest(tune_out_order, active_rules(rules, res.config));
      std::cout << "best score " << res.report.score << " with "
                << res.config.selected_count << " of " << rules.size() << " rules after "
                << res.evaluations << " evaluations\n";
      return 0;
    }

    if (c_simplify->parsed()) {
      PipelineConfig cfg = simplify_common.resolve(c_simplify);
      Matcher m = simp_matcher.empty() ? Matcher::compile({}) : read_matcher(simp_matcher);
      auto files = list_corpus(simp_corpus_dir, simp_manifest);
      fs::create_directories(simp_out_dir);
      for (const std::string& f : files) {
        FormulaDag dag = load_dag_file(f);
        SimplifyTrace trace;
        FormulaDag out = simplify(dag, m, cfg.limits, &trace, cfg.eval);
        fs::path name = fs::path(f).filename();
        std::ofstream dag_out(fs::path(simp_out_dir) / name);
        dag_out << serialize_dag(out);
        std::ofstream trace_out(fs::path(simp_out_dir) / (name.string() + ".trace.jsonl"));
        for (const RewriteStep& step : trace.steps)
          trace_out << nlohmann::json{{"rule", step.rule}, {"node", step.node}, {"pass", step.pass}}
                           .dump()
                    << '\n';
        std::cout << name.string() << ": " << size_metric(dag) << " -> " << size_metric(out)
                  << " ops, " << trace.steps.size() << " rewrites"
                  << (trace.limit_hit ? " (limit hit)" : "") << '\n';
      }
      return 0;
    }

    if (c_verify->parsed()) {
      PipelineConfig cfg = verify_common.resolve(c_verify);
      if (c_verify->count("--width")) cfg.synth.oracle_width = verify_width;
      return run_verify(read_rules(verify_rules_dir), cfg);
    }

    if (c_report->parsed()) {
      auto files = load_manifest(report_manifest);
      std::map<std::string, std::pair<double, double>> metrics;
      if (!report_metrics.empty()) {
        std::ifstream in(report_metrics);
        if (!in) throw FormatError("cannot read metrics " + report_metrics);
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty() || line.rfind("benchmark", 0) == 0) continue;
          std::istringstream row(line);
          std::string name, b, s;
          if (!std::getline(row, name, ',') || !std::getline(row, b, ',') ||
              !std::getline(row, s))
            throw FormatError("metrics line is not name,baseline,simplified: " + line);
          metrics[name] = {std::stod(b), std::stod(s)};
        }
      }
      std::vector<BenchReport> rows;
      for (const std::string& f : files) {
        std::string name = fs::path(f).filename().string();
        BenchReport row;
        row.name = name;
        row.baseline_size = size_metric(load_dag_file((fs::path(report_baseline_dir) / name).string()));
        row.simplified_size =
            size_metric(load_dag_file((fs::path(report_simplified_dir) / name).string()));
        if (auto it = metrics.find(name); it != metrics.end()) {
          row.baseline_metric = it->second.first;
          row.simplified_metric = it->second.second;
        }
        rows.push_back(std::move(row));
      }
      std::string csv = report_csv(rows);
      std::string table = percentile_table(rows);
      if (!report_csv_out.empty()) {
        std::ofstream out(report_csv_out);
        out << csv;
      }
      if (!report_table_out.empty()) {
        std::ofstream out(report_table_out);
        out << table;
      }
      std::cout << table;
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

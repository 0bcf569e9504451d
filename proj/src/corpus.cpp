#include "simpforge/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "simpforge/errors.hpp"
#include "simpforge/rng.hpp"

namespace simpforge {

SplitManifests split_corpus(std::vector<std::string> files, double search_frac,
                            double train_frac, double test_frac, std::uint64_t seed) {
  if (files.empty()) throw ValidationError("cannot split an empty corpus");
  double fracs[3] = {search_frac, train_frac, test_frac};
  double sum = 0;
  for (double f : fracs) {
    if (f < 0) throw ValidationError("split fractions must be nonnegative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("split fractions must sum to one");

  // Deal counts by largest remainder so they always cover the corpus exactly.
  std::size_t n = files.size();
  std::size_t counts[3];
  double remainders[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double exact = fracs[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(exact);
    remainders[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    int pick = 0;
    for (int i = 1; i < 3; ++i)
      if (remainders[i] > remainders[pick]) pick = i;
    ++counts[pick];
    remainders[pick] = -1;
    ++assigned;
  }

  std::sort(files.begin(), files.end());
  Rng rng(seed);
  for (std::size_t i = files.size() - 1; i > 0; --i)
    std::swap(files[i], files[rng.below(i + 1)]);

  SplitManifests out;
  auto take = [&](std::vector<std::string>& dest, std::size_t from, std::size_t count) {
    dest.assign(files.begin() + static_cast<std::ptrdiff_t>(from),
                files.begin() + static_cast<std::ptrdiff_t>(from + count));
    std::sort(dest.begin(), dest.end());
  };
  take(out.search, 0, counts[0]);
  take(out.train, counts[0], counts[1]);
  take(out.test, counts[0] + counts[1], counts[2]);
  return out;
}

std::vector<std::string> filter_corpus(
    const std::vector<std::string>& files,
    const std::function<std::size_t(const std::string&)>& size_of,
    const FilterOptions& opts) {
  if ((opts.min_cost || opts.max_cost) && !opts.cost)
    throw ValidationError("cost bounds need an external cost hook");
  std::vector<std::string> kept;
  for (const std::string& f : files) {
    if (size_of(f) < opts.min_terms) continue;
    if (opts.cost && (opts.min_cost || opts.max_cost)) {
      double c = opts.cost(f);
      if (opts.min_cost && c < *opts.min_cost) continue;
      if (opts.max_cost && c > *opts.max_cost) continue;
    }
    kept.push_back(f);
  }
  return kept;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string report_csv(const std::vector<BenchReport>& rows) {
  std::ostringstream out;
  out << "benchmark,baseline_size,simplified_size,baseline_metric,simplified_metric\n";
  for (const BenchReport& r : rows) {
    out << r.name << ',' << r.baseline_size << ',' << r.simplified_size << ',';
    if (r.baseline_metric) out << fmt(*r.baseline_metric);
    out << ',';
    if (r.simplified_metric) out << fmt(*r.simplified_metric);
    out << '\n';
  }
  return out.str();
}

double percentile(std::vector<double> values, double percent) {
  if (values.empty()) throw ValidationError("percentile of an empty sample");
  if (percent < 0 || percent > 100) throw ValidationError("percent must be in [0, 100]");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  auto rank = static_cast<std::size_t>(
      std::ceil(percent / 100.0 * static_cast<double>(n)));
  if (rank == 0) rank = 1;
  return values[rank - 1];
}

std::string percentile_table(const std::vector<BenchReport>& rows) {
  static const double percents[] = {10, 25, 50, 75, 90};
  std::vector<double> baseline, simplified, reduction;
  for (const BenchReport& r : rows) {
    baseline.push_back(static_cast<double>(r.baseline_size));
    simplified.push_back(static_cast<double>(r.simplified_size));
    double b = static_cast<double>(r.baseline_size);
    reduction.push_back(b > 0 ? 100.0 * (b - static_cast<double>(r.simplified_size)) / b : 0.0);
  }
  std::ostringstream out;
  char buf[64];
  out << "quantity            ";
  for (double p : percents) {
    std::snprintf(buf, sizeof buf, "%10s", ("p" + fmt(p)).c_str());
    out << buf;
  }
  out << '\n';
  auto line = [&](const char* label, const std::vector<double>& vals) {
    std::snprintf(buf, sizeof buf, "%-20s", label);
    out << buf;
    for (double p : percents) {
      std::snprintf(buf, sizeof buf, "%10s", vals.empty() ? "-" : fmt(percentile(vals, p)).c_str());
      out << buf;
    }
    out << '\n';
  };
  line("baseline_size", baseline);
  line("simplified_size", simplified);
  line("reduction_pct", reduction);
  return out.str();
}

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end())
      throw ValidationError("unknown configuration key '" + key + "' in " + where);
  }
}

template <typename T>
void load(const json& j, const char* key, T& into) {
  if (auto it = j.find(key); it != j.end()) into = it->get<T>();
}

}  // namespace

PipelineConfig read_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read pipeline configuration: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("pipeline configuration is not valid JSON: " + std::string(e.what()));
  }

  PipelineConfig cfg;
  try {
    check_keys(j, {"seed", "split", "filter", "mine", "synth", "tune", "simplify", "eval"},
               "the top level");
    load(j, "seed", cfg.seed);
    if (j.contains("split")) {
      const json& s = j["split"];
      check_keys(s, {"search", "train", "test"}, "split");
      load(s, "search", cfg.search_frac);
      load(s, "train", cfg.train_frac);
      load(s, "test", cfg.test_frac);
    }
    if (j.contains("filter")) {
      const json& s = j["filter"];
      check_keys(s, {"min_terms"}, "filter");
      load(s, "min_terms", cfg.min_terms);
    }
    if (j.contains("mine")) {
      const json& s = j["mine"];
      check_keys(s, {"pattern_size", "batch", "epsilon", "arity_bound"}, "mine");
      load(s, "pattern_size", cfg.miner.N);
      load(s, "batch", cfg.miner.M);
      load(s, "epsilon", cfg.miner.epsilon);
      load(s, "arity_bound", cfg.miner.T);
    }
    if (j.contains("synth")) {
      const json& s = j["synth"];
      check_keys(s,
                 {"k_max", "oracle_width", "const_pool", "max_predicates", "candidate_budget",
                  "exhaustive_cap", "random_checks", "recheck_envs", "recheck_extra_bits",
                  "array_len", "workers"},
                 "synth");
      load(s, "k_max", cfg.synth.k_max);
      load(s, "oracle_width", cfg.synth.oracle_width);
      load(s, "const_pool", cfg.synth.const_pool);
      load(s, "max_predicates", cfg.synth.max_predicates);
      load(s, "candidate_budget", cfg.synth.candidate_budget);
      load(s, "exhaustive_cap", cfg.synth.exhaustive_cap);
      load(s, "random_checks", cfg.synth.random_checks);
      load(s, "recheck_envs", cfg.synth.recheck_envs);
      load(s, "recheck_extra_bits", cfg.synth.recheck_extra_bits);
      load(s, "array_len", cfg.synth.array_len);
      load(s, "workers", cfg.synth.workers);
    }
    if (j.contains("tune")) {
      const json& s = j["tune"];
      check_keys(s, {"budget", "penalty_factor", "repetitions", "workers"}, "tune");
      load(s, "budget", cfg.tune_budget);
      load(s, "penalty_factor", cfg.fopt.penalty_factor);
      load(s, "repetitions", cfg.fopt.repetitions);
      load(s, "workers", cfg.fopt.workers);
    }
    if (j.contains("simplify")) {
      const json& s = j["simplify"];
      check_keys(s, {"max_passes", "max_rewrites"}, "simplify");
      load(s, "max_passes", cfg.limits.max_passes);
      load(s, "max_rewrites", cfg.limits.max_rewrites);
    }
    if (j.contains("eval")) {
      const json& s = j["eval"];
      check_keys(s, {"int_bits", "array_len", "strict_arrays"}, "eval");
      load(s, "int_bits", cfg.eval.int_bits);
      load(s, "array_len", cfg.eval.array_len);
      load(s, "strict_arrays", cfg.eval.strict_arrays);
    }
  } catch (const json::exception& e) {
    throw FormatError("pipeline configuration has a mistyped value: " + std::string(e.what()));
  }
  return cfg;
}

void write_pipeline_config(const std::filesystem::path& path, const PipelineConfig& cfg) {
  json j{
      {"seed", cfg.seed},
      {"split", {{"search", cfg.search_frac}, {"train", cfg.train_frac}, {"test", cfg.test_frac}}},
      {"filter", {{"min_terms", cfg.min_terms}}},
      {"mine",
       {{"pattern_size", cfg.miner.N},
        {"batch", cfg.miner.M},
        {"epsilon", cfg.miner.epsilon},
        {"arity_bound", cfg.miner.T}}},
      {"synth",
       {{"k_max", cfg.synth.k_max},
        {"oracle_width", cfg.synth.oracle_width},
        {"const_pool", cfg.synth.const_pool},
        {"max_predicates", cfg.synth.max_predicates},
        {"candidate_budget", cfg.synth.candidate_budget},
        {"exhaustive_cap", cfg.synth.exhaustive_cap},
        {"random_checks", cfg.synth.random_checks},
        {"recheck_envs", cfg.synth.recheck_envs},
        {"recheck_extra_bits", cfg.synth.recheck_extra_bits},
        {"array_len", cfg.synth.array_len},
        {"workers", cfg.synth.workers}}},
      {"tune",
       {{"budget", cfg.tune_budget},
        {"penalty_factor", cfg.fopt.penalty_factor},
        {"repetitions", cfg.fopt.repetitions},
        {"workers", cfg.fopt.workers}}},
      {"simplify", {{"max_passes", cfg.limits.max_passes}, {"max_rewrites", cfg.limits.max_rewrites}}},
      {"eval",
       {{"int_bits", cfg.eval.int_bits},
        {"array_len", cfg.eval.array_len},
        {"strict_arrays", cfg.eval.strict_arrays}}},
  };
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write pipeline configuration: " + path.string());
  out << j.dump(2) << '\n';
  if (!out.flush()) throw FormatError("cannot write pipeline configuration: " + path.string());
}

}  // namespace simpforge

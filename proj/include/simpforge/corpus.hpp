#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "simpforge/miner.hpp"
#include "simpforge/synth.hpp"
#include "simpforge/tuner.hpp"

namespace simpforge {

struct SplitManifests {
  std::vector<std::string> search;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Shuffles the benchmark names by seed and deals them into three disjoint
// covering sets; set sizes follow the fractions by largest remainder, so
// 10 files at (0.4, 0.3, 0.3) give 4/3/3. Fractions must be nonnegative and
// sum to one, and the corpus must be nonempty. Each manifest comes back
// sorted.
SplitManifests split_corpus(std::vector<std::string> files, double search_frac,
                            double train_frac, double test_frac, std::uint64_t seed);

struct FilterOptions {
  std::size_t min_terms = 0;
  std::optional<double> min_cost;  // both bounds inclusive
  std::optional<double> max_cost;
  std::function<double(const std::string&)> cost;  // external solve-cost hook
};

// Keeps benchmarks whose operation count reaches min_terms and, when a cost
// hook is configured, whose cost lies within the configured bounds. Cost
// bounds without a hook are a configuration error.
std::vector<std::string> filter_corpus(
    const std::vector<std::string>& files,
    const std::function<std::size_t(const std::string&)>& size_of,
    const FilterOptions& opts = {});

struct BenchReport {
  std::string name;
  std::size_t baseline_size = 0;
  std::size_t simplified_size = 0;
  std::optional<double> baseline_metric;  // external metric values, when run
  std::optional<double> simplified_metric;
};

// benchmark,baseline_size,simplified_size,baseline_metric,simplified_metric
// with metric cells left empty when no external metric ran.
std::string report_csv(const std::vector<BenchReport>& rows);

// Nearest-rank percentile: the smallest element covering percent% of the
// sorted values. Values must be nonempty, percent in [0, 100].
double percentile(std::vector<double> values, double percent);

// Text table of size and reduction percentiles across the benchmark rows.
std::string percentile_table(const std::vector<BenchReport>& rows);

// Every knob of the pipeline in one declarative document, JSON on disk.
// Partial files overlay these defaults; unknown keys are rejected.
struct PipelineConfig {
  std::uint64_t seed = 0;
  double search_frac = 0.4;
  double train_frac = 0.3;
  double test_frac = 0.3;
  std::size_t min_terms = 0;
  MinerConfig miner;
  SynthConfig synth;
  FoptConfig fopt;
  std::size_t tune_budget = 150;
  SimplifyLimits limits;
  EvalOptions eval;
};

PipelineConfig read_pipeline_config(const std::filesystem::path& path);
void write_pipeline_config(const std::filesystem::path& path, const PipelineConfig& cfg);

}  // namespace simpforge

#pragma once

// End-to-end driver: partitions data into candidate clients, probes them in
// a random arrival order, runs the selection policies on identical probe
// results and trains a global model on each selected set.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedsec/data_pipeline.hpp"
#include "fedsec/fl_core.hpp"
#include "fedsec/selection_math.hpp"
#include "fedsec/selection_policies.hpp"

namespace fedsec {

struct DataSource {
  enum class Kind { kSynthetic, kFeatureCsv };
  Kind kind = Kind::kSynthetic;
  int n_samples = 5000;
  int n_features = 10;
  int n_classes = 28;
  std::filesystem::path path;

  // "synthetic:5000x10x28" or "csv:<features.csv>".
  static DataSource parse(std::string_view text);
  std::string describe() const;
};

// Normalized, split base dataset shared by every run of a sweep.
struct PreparedData {
  Dataset<double> train;
  Dataset<double> test;
  int n_classes = 0;
};

PreparedData prepare_data(const DataSource& source, double test_fraction, std::uint64_t data_seed);

// Global init used by candidate probes: one per selection cycle (shared by
// every probe and by training) or a fresh one per candidate.
enum class ProbeInit { kSharedPerCycle, kPerCandidate };

struct ExperimentConfig {
  int n_candidates = 100;
  int budget = 10;
  int r_min = 1;
  int r_max = 4;
  TrainingPlan plan;
  DataSource data;
  std::vector<Policy> policies{Policy::kSecretary, Policy::kRandom, Policy::kBest};
  int cycle_count = 1;
  double test_fraction = 0.2;
  double fat_fraction = 0.20;
  double fat_share = 0.10;
  double thin_share = 0.01;
  std::vector<int> hidden_dims{25, 25};
  std::uint64_t data_seed = 0;
  BudgetCheck budget_check = BudgetCheck::kStrict;
  Aggregation aggregation = Aggregation::kUnweighted;
  ProbeInit probe_init = ProbeInit::kSharedPerCycle;
  // Replaces probe results by arrival position (1-based index - 1). Clients
  // still train on their real data.
  std::optional<std::vector<double>> probe_override;
};

struct RunResult {
  int n = 0;
  int r = 0;
  int r2 = 0;
  int alpha_index = 0;
  Policy policy = Policy::kSecretary;
  std::uint64_t seed = 0;
  int cycle = 0;
  double final_test_accuracy = 0.0;
  double mean_selected_probe_accuracy = 0.0;
  double fat_fraction_selected = 0.0;
  int probe_count = 0;           // decision probes + metric-parity probes
  int decision_probe_count = 0;  // probes that drove accept/reject decisions
  std::vector<double> history;
  std::vector<int> selected_arrivals;  // arrival indices, selection order
  SelectionAudit audit;
};

// One entry per policy per cycle, policies in config order.
std::vector<RunResult> run_experiment(const ExperimentConfig& config, std::uint64_t seed);
std::vector<RunResult> run_experiment(const ExperimentConfig& config, const PreparedData& data,
                                      std::uint64_t seed);

struct SweepGrid {
  std::vector<int> n{100, 200, 400, 800, 1600};
  std::vector<int> r{10, 20, 30, 40, 50};
  std::vector<int> r2{1, 2, 3, 4, 5};
  int r1 = 1;

  std::size_t cell_count() const { return n.size() * r.size() * r2.size(); }
};

// {"n": [...], "r": [...], "r2": [...], optional "r1", and TrainingPlan
// overrides either at top level or under "plan": rounds, epochs, batch_size}.
SweepGrid parse_grid_json(const std::string& text, TrainingPlan& plan);

// "1..10" or "1,2,7".
std::vector<std::uint64_t> parse_seeds(std::string_view text);

// Cross product grid x seeds x policies in (n, r, r2, seed, policy) order.
// Probes are shared between cells with the same (n, seed). `jobs` > 1 runs
// (n, seed) groups on worker threads; output order is unchanged.
std::vector<RunResult> sweep(const SweepGrid& grid, const std::vector<std::uint64_t>& seeds,
                             const ExperimentConfig& base, int jobs = 1);

inline constexpr std::string_view kResultsHeader =
    "n,r,r2,alpha_index,policy,seed,final_acc,mean_sel_probe_acc,fat_frac,probe_count";

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results);

struct ResultRow {
  int n = 0, r = 0, r2 = 0, alpha_index = 0;
  std::string policy;
  std::uint64_t seed = 0;
  double final_acc = 0.0, mean_sel_probe_acc = 0.0, fat_frac = 0.0, probe_count = 0.0;
};

std::vector<ResultRow> read_results_csv(std::istream& in);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single run
};

struct SummaryRow {
  int n = 0, r = 0, r2 = 0;
  std::string policy;
  int runs = 0;
  MetricSummary final_acc, mean_sel_probe_acc, fat_frac, probe_count;
};

// Group-by (n, r, r2, policy), sorted by key with policies in
// secretary/random/best order.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
// Plot-ready: n,r,r2,policy,metric,mean,std.
void write_summary_long_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace fedsec

// fedsec: command-line front end for the selection math, the policies, the
// federated trainer, data preparation, flow-feature extraction and the
// experiment sweep.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedsec/data_pipeline.hpp"
#include "fedsec/experiment.hpp"
#include "fedsec/fl_core.hpp"
#include "fedsec/flow_features.hpp"
#include "fedsec/io.hpp"
#include "fedsec/selection_math.hpp"
#include "fedsec/selection_policies.hpp"

namespace fs = std::filesystem;
using namespace fedsec;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_alpha(int n, int r1, int r2, int budget, bool table_variant, bool numeric_check) {
  const auto formula = table_variant ? AlphaFormula::kTableVariant : AlphaFormula::kClosedForm;
  const double a = alpha_star(n, r1, r2, formula);
  const int idx = alpha_index(a, n, budget);
  std::cout << "n,r1,r2,alpha_star,alpha_index,p_max\n";
  std::cout << n << ',' << r1 << ',' << r2 << ',' << format_number(a) << ',' << idx << ','
            << format_number(selection_probability(n, a, r1, r2).value) << '\n';
  if (numeric_check) {
    const double numeric = alpha_star_numeric(n, r1, r2, 100000);
    const double tol = std::max(0.5, n * 1e-3);
    const bool ok = std::abs(numeric - a) <= tol;
    std::cerr << "numeric optimum " << format_number(numeric) << " (|diff| "
              << format_number(std::abs(numeric - a)) << ", tol " << format_number(tol) << ") "
              << (ok ? "agrees" : "DISAGREES") << '\n';
    return ok ? 0 : 3;
  }
  return 0;
}

nlohmann::json audit_line(const DecisionRecord& rec) {
  nlohmann::json j{{"type", "decision"},
                   {"arrival_index", rec.candidate.arrival_index},
                   {"client_id", rec.candidate.client_id},
                   {"verdict", std::string(to_string(rec.decision.verdict))},
                   {"reason", std::string(to_string(rec.decision.reason))},
                   {"probed", rec.probed}};
  j["probe_accuracy"] = rec.probed ? nlohmann::json(*rec.candidate.probe_accuracy) : nlohmann::json(nullptr);
  return j;
}

int cmd_simulate(const std::string& policy_name, const fs::path& stream_path, int budget, int r1,
                 int r2, int alpha_override, std::uint64_t seed) {
  std::ifstream in(stream_path);
  if (!in) throw std::runtime_error("cannot open " + stream_path.string());
  const auto stream = read_candidates_csv(in);
  const int n = static_cast<int>(stream.size());
  const BudgetSpec spec = alpha_override >= 0
                              ? budget_with_alpha_index(n, budget, alpha_override)
                              : make_budget(n, budget, r1, r2, AlphaFormula::kClosedForm,
                                            BudgetCheck::kRelaxed);
  const auto audit = run_stream(parse_policy(policy_name), spec, stream, seed);
  for (const auto& rec : audit.decisions) std::cout << audit_line(rec).dump() << '\n';
  nlohmann::json summary{{"type", "summary"},
                         {"policy", std::string(to_string(audit.policy))},
                         {"n", n},
                         {"budget", budget},
                         {"alpha_index", spec.alpha_star_index},
                         {"forced_acceptances", audit.forced_acceptances},
                         {"probes_used", audit.probes_used}};
  auto& sel = summary["selected"] = nlohmann::json::array();
  for (const auto& c : audit.selected) sel.push_back(c.arrival_index);
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_fl_run(const fs::path& clients_dir, const fs::path& test_path, TrainingPlan plan,
               std::uint64_t seed, const fs::path& out_path) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(clients_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv" && e.path().filename() != "test.csv") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no client CSV files in " + clients_dir.string());
  std::vector<Dataset<double>> clients;
  for (const auto& f : files) clients.push_back(read_dataset_csv(f));
  const auto test = read_dataset_csv(test_path);
  int classes = test.labels.maxCoeff() + 1;
  for (const auto& c : clients) classes = std::max(classes, c.labels.maxCoeff() + 1);
  const MlpSpec spec{static_cast<int>(test.dim()), {25, 25}, classes};
  const auto init = init_model<double>(spec, derive_seed(seed, {seed_tag::kInit}));
  const auto result = federated_train<double>(init, clients, test, plan, seed);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file = open_out(out_path);
    out = &file;
  }
  *out << "round,test_accuracy\n";
  for (std::size_t k = 0; k < result.history.size(); ++k) {
    *out << (k + 1) << ',' << format_number(result.history[k]) << '\n';
  }
  return 0;
}

int cmd_prepare(const fs::path& input, double test_frac, int n_clients, std::uint64_t seed,
                const fs::path& out_dir) {
  std::ifstream in(input);
  if (!in) throw std::runtime_error("cannot open " + input.string());
  std::string header_line;
  std::getline(in, header_line);
  auto names = split_csv_line(header_line);
  names.pop_back();
  in.seekg(0);
  auto table = read_dataset_csv(in);

  auto norm = minmax_normalize(table.features);
  table.features = norm.values;
  auto split = shuffle_split(table, test_frac, seed);
  PartitionSpec ps;
  ps.n_clients = n_clients;
  ps.seed = seed;
  auto part = partition_clients(split.train, ps);

  fs::create_directories(out_dir);
  write_dataset_csv(out_dir / "test.csv", split.test, names);
  nlohmann::json manifest{{"seed", seed},
                          {"test_fraction", test_frac},
                          {"n_clients", n_clients},
                          {"train_rows", split.train.size()},
                          {"test_rows", split.test.size()},
                          {"fat_fraction", ps.fat_fraction},
                          {"fat_share", ps.fat_share},
                          {"thin_share", ps.thin_share}};
  manifest["scaler"] = {{"columns", names},
                        {"min", std::vector<double>(norm.scaler.min.begin(), norm.scaler.min.end())},
                        {"max", std::vector<double>(norm.scaler.max.begin(), norm.scaler.max.end())}};
  auto& clients = manifest["clients"] = nlohmann::json::array();
  for (std::size_t c = 0; c < part.clients.size(); ++c) {
    char name[32];
    std::snprintf(name, sizeof(name), "client_%04zu.csv", c + 1);
    write_dataset_csv(out_dir / name, part.clients[c], names);
    clients.push_back({{"file", name},
                       {"kind", part.fat[c] ? "fat" : "thin"},
                       {"rows", part.clients[c].size()}});
  }
  open_out(out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return 0;
}

int cmd_extract(const fs::path& flows_path, const fs::path& devices_path, double max_period,
                const fs::path& out_path) {
  const auto flows = read_flow_records(flows_path);
  const auto table = devices_path.empty() ? DeviceTable::iot_testbed() : DeviceTable::read_csv(devices_path);
  const auto streams = label_stream(flows, table);
  std::ofstream file;
  std::ostream* sink = &std::cout;
  if (out_path != "-") {
    file = open_out(out_path);
    sink = &file;
  }
  auto& out = *sink;
  write_feature_header(out);
  std::size_t rows = 0;
  for (const auto& [id, device_flows] : streams.by_device) {
    const auto features = extract_features(device_flows, max_period, id);
    write_feature_rows(out, features);
    rows += features.size();
  }
  std::cerr << rows << " feature rows from " << streams.by_device.size() << " devices; "
            << streams.dropped << " flows with unknown MAC dropped\n";
  return 0;
}

int cmd_sweep(const fs::path& grid_path, const std::string& seeds_text, const std::string& data,
              const fs::path& out_path, int jobs) {
  ExperimentConfig base;
  const auto grid = parse_grid_json(read_file(grid_path), base.plan);
  base.data = DataSource::parse(data);
  const auto seeds = parse_seeds(seeds_text);
  const auto results = sweep(grid, seeds, base, jobs);
  auto out = open_out(out_path);
  write_results_csv(out, results);
  std::cerr << results.size() << " runs written to " << out_path.string() << '\n';
  return 0;
}

int cmd_summarize(const fs::path& in_path, const fs::path& out_path, const fs::path& long_path) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open " + in_path.string());
  const auto summary = summarize(read_results_csv(in));
  auto out = open_out(out_path);
  write_summary_csv(out, summary);
  if (!long_path.empty()) {
    auto lout = open_out(long_path);
    write_summary_long_csv(lout, summary);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted online client selection for federated learning"};
  app.require_subcommand(1);
  int rc = 0;

  auto* alpha = app.add_subcommand("alpha", "Optimal threshold alpha* and its selection probability");
  int a_n = 0, a_r1 = 1, a_r2 = 1, a_budget = 1;
  bool a_table = false, a_check = false;
  alpha->add_option("--n", a_n, "Number of candidates")->required()->check(CLI::PositiveNumber);
  alpha->add_option("--r1", a_r1, "Minimum R")->required();
  alpha->add_option("--r2", a_r2, "Maximum R")->required();
  alpha->add_option("--budget", a_budget, "Budget used to clamp the index")->capture_default_str();
  alpha->add_flag("--table-variant", a_table, "Division-form exponent");
  alpha->add_flag("--numeric-check", a_check, "Cross-check against a grid maximization");
  alpha->callback([&] { rc = cmd_alpha(a_n, a_r1, a_r2, a_budget, a_table, a_check); });

  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo estimate of the selection probability");
  int m_n = 0, m_r = 1, m_alpha = 0;
  std::int64_t m_trials = 100000;
  std::uint64_t m_seed = 0;
  std::string m_event = "record-chain";
  mc->add_option("--n", m_n)->required();
  mc->add_option("--r", m_r)->required();
  mc->add_option("--alpha", m_alpha, "Threshold index")->required();
  mc->add_option("--trials", m_trials)->capture_default_str();
  mc->add_option("--seed", m_seed)->capture_default_str();
  mc->add_option("--event", m_event, "record-chain or top-set")
      ->check(CLI::IsMember({"record-chain", "top-set"}))
      ->capture_default_str();
  mc->callback([&] {
    const auto ev = m_event == "top-set" ? SuccessEvent::kTopSet : SuccessEvent::kRecordChain;
    const auto est = monte_carlo_top_r_probability(m_n, m_r, m_alpha, m_trials, m_seed, ev);
    std::cout << "n,r,alpha,trials,p_hat,std_err\n"
              << m_n << ',' << m_r << ',' << m_alpha << ',' << m_trials << ','
              << format_number(est.value) << ',' << format_number(est.std_error) << '\n';
  });

  auto* sim = app.add_subcommand("simulate", "Run a policy over a candidate stream; JSON-lines audit");
  std::string s_policy = "secretary";
  std::string s_stream;
  int s_budget = 1, s_r1 = 1, s_r2 = 1, s_alpha = -1;
  std::uint64_t s_seed = 0;
  sim->add_option("--policy", s_policy)->check(CLI::IsMember({"secretary", "random", "best"}))->capture_default_str();
  sim->add_option("--stream", s_stream, "CSV arrival_index,client_id,probe_accuracy")->required();
  sim->add_option("--r", s_budget, "Budget R")->capture_default_str();
  sim->add_option("--r1", s_r1)->capture_default_str();
  sim->add_option("--r2", s_r2)->capture_default_str();
  sim->add_option("--alpha", s_alpha, "Fixed threshold index (overrides r1/r2)");
  sim->add_option("--seed", s_seed)->capture_default_str();
  sim->callback([&] { rc = cmd_simulate(s_policy, s_stream, s_budget, s_r1, s_r2, s_alpha, s_seed); });

  auto* flr = app.add_subcommand("fl-run", "Federated training over a directory of client CSVs");
  std::string f_clients, f_test, f_out;
  TrainingPlan f_plan;
  std::uint64_t f_seed = 0;
  flr->add_option("--clients", f_clients)->required();
  flr->add_option("--test", f_test)->required();
  flr->add_option("--rounds", f_plan.rounds)->capture_default_str();
  flr->add_option("--epochs", f_plan.epochs)->capture_default_str();
  flr->add_option("--batch", f_plan.batch_size)->capture_default_str();
  flr->add_option("--seed", f_seed)->capture_default_str();
  flr->add_option("--out", f_out, "Write CSV here instead of stdout");
  flr->callback([&] { rc = cmd_fl_run(f_clients, f_test, f_plan, f_seed, f_out); });

  auto* prep = app.add_subcommand("prepare", "Normalize, split and partition a feature CSV");
  std::string p_in, p_out;
  double p_frac = 0.2;
  int p_clients = 100;
  std::uint64_t p_seed = 0;
  prep->add_option("--input", p_in)->required();
  prep->add_option("--test-frac", p_frac)->capture_default_str();
  prep->add_option("--n-clients", p_clients)->capture_default_str();
  prep->add_option("--seed", p_seed)->capture_default_str();
  prep->add_option("--out", p_out)->required();
  prep->callback([&] { rc = cmd_prepare(p_in, p_frac, p_clients, p_seed, p_out); });

  auto* ext = app.add_subcommand("extract-features", "Windowed behavioral features from JSON-lines flows");
  std::string e_flows, e_devices, e_out;
  double e_period = kDefaultMaxPeriod;
  ext->add_option("--flows", e_flows)->required();
  ext->add_option("--devices", e_devices, "mac,name,device_id CSV (default: built-in testbed)");
  ext->add_option("--max-period", e_period)->capture_default_str();
  ext->add_option("--out", e_out, "Output CSV, - for stdout")->required();
  ext->callback([&] { rc = cmd_extract(e_flows, e_devices, e_period, e_out); });

  auto* sw = app.add_subcommand("sweep", "Run the experiment grid");
  std::string w_grid, w_seeds = "1..10", w_data = "synthetic:5000x10x28", w_out;
  int w_jobs = 1;
  sw->add_option("--grid", w_grid)->required();
  sw->add_option("--seeds", w_seeds)->capture_default_str();
  sw->add_option("--data", w_data)->capture_default_str();
  sw->add_option("--out", w_out)->required();
  sw->add_option("--jobs", w_jobs)->capture_default_str();
  sw->callback([&] { rc = cmd_sweep(w_grid, w_seeds, w_data, w_out, w_jobs); });

  auto* sum = app.add_subcommand("summarize", "Mean and std per cell and policy");
  std::string u_in, u_out, u_long;
  sum->add_option("--in", u_in)->required();
  sum->add_option("--out", u_out)->required();
  sum->add_option("--long", u_long, "Also write long-format CSV");
  sum->callback([&] { rc = cmd_summarize(u_in, u_out, u_long); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}

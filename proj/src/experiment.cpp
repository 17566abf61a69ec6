#include "fedsec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "fedsec/errors.hpp"
#include "fedsec/io.hpp"
#include "json.hpp"

namespace fedsec {

DataSource DataSource::parse(std::string_view text) {
  DataSource src;
  if (text.starts_with("synthetic:")) {
    auto spec = std::string(text.substr(10));
    std::replace(spec.begin(), spec.end(), 'x', ',');
    const auto parts = split_csv_line(spec);
    if (parts.size() != 3) throw ParseError("expected synthetic:<samples>x<features>x<classes>");
    src.kind = Kind::kSynthetic;
    src.n_samples = static_cast<int>(parse_int(parts[0]));
    src.n_features = static_cast<int>(parse_int(parts[1]));
    src.n_classes = static_cast<int>(parse_int(parts[2]));
    return src;
  }
  if (text.starts_with("csv:")) {
    src.kind = Kind::kFeatureCsv;
    src.path = std::string(text.substr(4));
    return src;
  }
  throw ParseError("unknown data source '" + std::string(text) + "'");
}

std::string DataSource::describe() const {
  if (kind == Kind::kFeatureCsv) return "csv:" + path.string();
  return "synthetic:" + std::to_string(n_samples) + "x" + std::to_string(n_features) + "x" +
         std::to_string(n_classes);
}

PreparedData prepare_data(const DataSource& source, double test_fraction, std::uint64_t data_seed) {
  Dataset<double> raw = source.kind == DataSource::Kind::kSynthetic
                            ? synth_dataset(source.n_samples, source.n_features, source.n_classes,
                                            data_seed)
                            : read_dataset_csv(source.path);
  raw.features = minmax_normalize(raw.features).values;
  auto split = shuffle_split(raw, test_fraction, data_seed);
  PreparedData out;
  out.n_classes = raw.labels.size() == 0 ? 0 : raw.labels.maxCoeff() + 1;
  out.train = std::move(split.train);
  out.test = std::move(split.test);
  return out;
}

namespace {

struct TrainOutcome {
  double final_accuracy = 0.0;
  std::vector<double> history;
};

// Everything one selection cycle of one (n, seed) pair shares across cells
// and policies: client data, global init, arrival order and probe results.
class CycleContext {
 public:
  CycleContext(const ExperimentConfig& cfg, const PreparedData& data, int n, std::uint64_t seed,
               int cycle)
      : cfg_(cfg), data_(data), seed_(seed), cycle_(cycle) {
    PartitionSpec ps;
    ps.n_clients = n;
    ps.fat_fraction = cfg.fat_fraction;
    ps.fat_share = cfg.fat_share;
    ps.thin_share = cfg.thin_share;
    ps.seed = derive_seed(seed, {seed_tag::kPartition, static_cast<std::uint64_t>(cycle)});
    partition_ = partition_clients(data.train, ps);

    spec_ = MlpSpec{static_cast<int>(data.train.dim()), cfg.hidden_dims, data.n_classes};
    init_ = init_model<double>(spec_, derive_seed(seed, {seed_tag::kInit, static_cast<std::uint64_t>(cycle)}));

    arrival_.resize(static_cast<std::size_t>(n));
    std::iota(arrival_.begin(), arrival_.end(), 0);
    Rng rng(derive_seed(seed, {seed_tag::kArrival, static_cast<std::uint64_t>(cycle)}));
    std::shuffle(arrival_.begin(), arrival_.end(), rng);
    probes_.resize(static_cast<std::size_t>(n));
  }

  int n() const { return static_cast<int>(arrival_.size()); }
  int client_at(int position) const { return arrival_[static_cast<std::size_t>(position - 1)]; }
  bool fat_at(int position) const { return partition_.fat[static_cast<std::size_t>(client_at(position))]; }

  double probe_at(int position) {
    if (cfg_.probe_override) {
      const auto& o = *cfg_.probe_override;
      if (static_cast<int>(o.size()) != n()) throw std::invalid_argument("probe override length != n");
      return o[static_cast<std::size_t>(position - 1)];
    }
    const int client = client_at(position);
    auto& slot = probes_[static_cast<std::size_t>(client)];
    if (!slot) {
      const auto s = derive_seed(seed_, {seed_tag::kProbe, static_cast<std::uint64_t>(cycle_),
                                         static_cast<std::uint64_t>(client)});
      const auto& local = partition_.clients[static_cast<std::size_t>(client)];
      if (cfg_.probe_init == ProbeInit::kPerCandidate) {
        const auto fresh = init_model<double>(spec_, derive_seed(s, {seed_tag::kInit}));
        slot = probe_client(fresh, local, data_.test, cfg_.plan, s);
      } else {
        slot = probe_client(init_, local, data_.test, cfg_.plan, s);
      }
    }
    return *slot;
  }

  Candidate candidate(int position, bool probed) {
    Candidate c;
    c.arrival_index = position;
    c.client_id = "client_" + std::to_string(client_at(position));
    if (probed) c.probe_accuracy = probe_at(position);
    return c;
  }

  // Trains on the selected positions sorted by arrival, cached per set.
  const TrainOutcome& train(std::vector<int> positions) {
    std::sort(positions.begin(), positions.end());
    auto it = trained_.find(positions);
    if (it != trained_.end()) return it->second;
    std::vector<Dataset<double>> clients;
    clients.reserve(positions.size());
    for (int p : positions) clients.push_back(partition_.clients[static_cast<std::size_t>(client_at(p))]);
    auto fr = federated_train<double>(init_, clients, data_.test, cfg_.plan,
                                      derive_seed(seed_, {seed_tag::kTrain, static_cast<std::uint64_t>(cycle_)}),
                                      cfg_.aggregation);
    TrainOutcome out;
    out.history = std::move(fr.history);
    out.final_accuracy = out.history.empty() ? evaluate(init_, data_.test) : out.history.back();
    return trained_.emplace(std::move(positions), std::move(out)).first->second;
  }

 private:
  const ExperimentConfig& cfg_;
  const PreparedData& data_;
  std::uint64_t seed_;
  int cycle_;
  ClientPartition partition_;
  MlpSpec spec_;
  ModelParams<double> init_;
  std::vector<int> arrival_;
  std::vector<std::optional<double>> probes_;
  std::map<std::vector<int>, TrainOutcome> trained_;
};

SelectionAudit select_secretary(CycleContext& ctx, const BudgetSpec& spec) {
  SelectionAudit audit;
  audit.policy = Policy::kSecretary;
  SelectionState state(spec);
  for (int pos = 1; pos <= ctx.n(); ++pos) {
    const bool probed = secretary_next_action(state, pos) == SecretaryAction::kProbe;
    auto c = ctx.candidate(pos, probed);
    const Decision d = secretary_observe(state, c);
    if (probed) ++audit.probes_used;
    audit.decisions.push_back({std::move(c), d, probed});
  }
  audit.selected.assign(state.selected().begin(), state.selected().end());
  audit.forced_acceptances = state.forced_acceptances();
  return audit;
}

SelectionAudit select_random(CycleContext& ctx, const BudgetSpec& spec, std::uint64_t seed, int cycle) {
  SelectionAudit audit;
  audit.policy = Policy::kRandom;
  SelectionState state(spec);
  Rng rng(derive_seed(seed, {seed_tag::kRandomPolicy, static_cast<std::uint64_t>(cycle)}));
  for (int pos = 1; pos <= ctx.n(); ++pos) {
    auto c = ctx.candidate(pos, false);
    const Decision d = random_observe(state, c, rng);
    audit.decisions.push_back({std::move(c), d, false});
  }
  audit.selected.assign(state.selected().begin(), state.selected().end());
  return audit;
}

SelectionAudit select_best(CycleContext& ctx, const BudgetSpec& spec) {
  std::vector<Candidate> all;
  all.reserve(static_cast<std::size_t>(ctx.n()));
  for (int pos = 1; pos <= ctx.n(); ++pos) all.push_back(ctx.candidate(pos, true));
  return run_stream(Policy::kBest, spec, all, 0);
}

RunResult finish_run(CycleContext& ctx, const ExperimentConfig& cfg, const BudgetSpec& spec,
                     SelectionAudit audit, std::uint64_t seed, int cycle) {
  RunResult res;
  res.n = spec.n_candidates;
  res.r = spec.budget;
  res.r2 = cfg.r_max;
  res.alpha_index = spec.alpha_star_index;
  res.policy = audit.policy;
  res.seed = seed;
  res.cycle = cycle;
  res.decision_probe_count = audit.probes_used;

  double acc_sum = 0.0;
  int fat = 0;
  int parity = 0;
  for (auto& c : audit.selected) {
    if (!c.probe_accuracy) {
      c.probe_accuracy = ctx.probe_at(c.arrival_index);
      ++parity;
    }
    acc_sum += *c.probe_accuracy;
    if (ctx.fat_at(c.arrival_index)) ++fat;
    res.selected_arrivals.push_back(c.arrival_index);
  }
  const auto k = static_cast<double>(audit.selected.size());
  res.mean_selected_probe_accuracy = acc_sum / k;
  res.fat_fraction_selected = static_cast<double>(fat) / k;
  res.probe_count = audit.probes_used + parity;

  const auto& trained = ctx.train(res.selected_arrivals);
  res.final_test_accuracy = trained.final_accuracy;
  res.history = trained.history;
  res.audit = std::move(audit);
  return res;
}

std::vector<RunResult> run_cell(const ExperimentConfig& cfg, std::vector<CycleContext>& cycles,
                                std::uint64_t seed) {
  const BudgetSpec spec = make_budget(cfg.n_candidates, cfg.budget, cfg.r_min, cfg.r_max,
                                      AlphaFormula::kClosedForm, cfg.budget_check);
  std::vector<RunResult> out;
  for (int cycle = 0; cycle < static_cast<int>(cycles.size()); ++cycle) {
    auto& ctx = cycles[static_cast<std::size_t>(cycle)];
    for (Policy p : cfg.policies) {
      SelectionAudit audit;
      switch (p) {
        case Policy::kSecretary: audit = select_secretary(ctx, spec); break;
        case Policy::kRandom: audit = select_random(ctx, spec, seed, cycle); break;
        case Policy::kBest: audit = select_best(ctx, spec); break;
      }
      out.push_back(finish_run(ctx, cfg, spec, std::move(audit), seed, cycle));
    }
  }
  return out;
}

std::vector<CycleContext> make_cycles(const ExperimentConfig& cfg, const PreparedData& data,
                                      std::uint64_t seed) {
  if (cfg.cycle_count < 1) throw std::invalid_argument("cycle_count must be positive");
  std::vector<CycleContext> cycles;
  cycles.reserve(static_cast<std::size_t>(cfg.cycle_count));
  for (int c = 0; c < cfg.cycle_count; ++c) cycles.emplace_back(cfg, data, cfg.n_candidates, seed, c);
  return cycles;
}

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentConfig& config, const PreparedData& data,
                                      std::uint64_t seed) {
  if (config.policies.empty()) throw std::invalid_argument("no policies requested");
  auto cycles = make_cycles(config, data, seed);
  return run_cell(config, cycles, seed);
}

std::vector<RunResult> run_experiment(const ExperimentConfig& config, std::uint64_t seed) {
  const auto data = prepare_data(config.data, config.test_fraction, config.data_seed);
  return run_experiment(config, data, seed);
}

SweepGrid parse_grid_json(const std::string& text, TrainingPlan& plan) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("grid JSON: ") + e.what());
  }
  SweepGrid grid;
  auto ints = [&](const char* key, std::vector<int>& dst) {
    if (!j.contains(key)) return;
    dst = j.at(key).get<std::vector<int>>();
    if (dst.empty()) throw ParseError(std::string("grid `") + key + "` is empty");
  };
  ints("n", grid.n);
  ints("r", grid.r);
  ints("r2", grid.r2);
  if (j.contains("r1")) grid.r1 = j.at("r1").get<int>();
  auto apply_plan = [&](const nlohmann::json& p) {
    if (p.contains("rounds")) plan.rounds = p.at("rounds").get<int>();
    if (p.contains("epochs")) plan.epochs = p.at("epochs").get<int>();
    if (p.contains("batch_size")) plan.batch_size = p.at("batch_size").get<int>();
  };
  apply_plan(j);
  if (j.contains("plan")) apply_plan(j.at("plan"));
  return grid;
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    const auto lo = parse_int(text.substr(0, dots));
    const auto hi = parse_int(text.substr(dots + 2));
    if (lo < 0 || hi < lo) throw ParseError("bad seed range");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    for (const auto& f : split_csv_line(text)) {
      const auto s = parse_int(f);
      if (s < 0) throw ParseError("seeds must be nonnegative");
      seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (seeds.empty()) throw ParseError("no seeds given");
  return seeds;
}

std::vector<RunResult> sweep(const SweepGrid& grid, const std::vector<std::uint64_t>& seeds,
                             const ExperimentConfig& base, int jobs) {
  if (grid.cell_count() == 0 || seeds.empty()) throw std::invalid_argument("empty sweep");
  const auto data = prepare_data(base.data, base.test_fraction, base.data_seed);

  // One group per (n, seed); each holds results for every (r, r2) cell.
  struct Group {
    int n;
    std::uint64_t seed;
    std::map<std::pair<int, int>, std::vector<RunResult>> cells;
  };
  std::vector<Group> groups;
  for (int n : grid.n)
    for (auto s : seeds) groups.push_back({n, s, {}});

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t g; (g = next.fetch_add(1)) < groups.size();) {
      try {
        auto& group = groups[g];
        ExperimentConfig cfg = base;
        cfg.n_candidates = group.n;
        cfg.r_min = grid.r1;
        auto cycles = make_cycles(cfg, data, group.seed);
        for (int r : grid.r) {
          for (int r2 : grid.r2) {
            cfg.budget = r;
            cfg.r_max = r2;
            group.cells[{r, r2}] = run_cell(cfg, cycles, group.seed);
          }
        }
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(groups.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<RunResult> out;
  for (std::size_t ni = 0; ni < grid.n.size(); ++ni) {
    for (int r : grid.r) {
      for (int r2 : grid.r2) {
        for (std::size_t si = 0; si < seeds.size(); ++si) {
          auto& cell = groups[ni * seeds.size() + si].cells.at({r, r2});
          for (auto& res : cell) out.push_back(std::move(res));
        }
      }
    }
  }
  return out;
}

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results) {
  out << kResultsHeader << '\n';
  for (const auto& r : results) {
    out << r.n << ',' << r.r << ',' << r.r2 << ',' << r.alpha_index << ',' << to_string(r.policy)
        << ',' << r.seed << ',' << format_number(r.final_test_accuracy) << ','
        << format_number(r.mean_selected_probe_accuracy) << ','
        << format_number(r.fat_fraction_selected) << ',' << r.probe_count << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("results CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw ParseError("unexpected results header: " + line);
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 10) throw ParseError("line " + std::to_string(line_no) + ": expected 10 fields");
    ResultRow r;
    r.n = static_cast<int>(parse_int(f[0]));
    r.r = static_cast<int>(parse_int(f[1]));
    r.r2 = static_cast<int>(parse_int(f[2]));
    r.alpha_index = static_cast<int>(parse_int(f[3]));
    r.policy = std::string(to_string(parse_policy(f[4])));
    r.seed = static_cast<std::uint64_t>(parse_int(f[5]));
    r.final_acc = parse_double(f[6]);
    r.mean_sel_probe_acc = parse_double(f[7]);
    r.fat_frac = parse_double(f[8]);
    r.probe_count = parse_double(f[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

MetricSummary describe(const std::vector<double>& xs) {
  MetricSummary s;
  const auto n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  using Key = std::tuple<int, int, int, int>;
  struct Acc {
    std::string policy;
    std::vector<double> final_acc, probe_acc, fat, probes;
  };
  std::map<Key, Acc> groups;
  for (const auto& r : rows) {
    const Key key{r.n, r.r, r.r2, static_cast<int>(parse_policy(r.policy))};
    auto& g = groups[key];
    g.policy = r.policy;
    g.final_acc.push_back(r.final_acc);
    g.probe_acc.push_back(r.mean_sel_probe_acc);
    g.fat.push_back(r.fat_frac);
    g.probes.push_back(r.probe_count);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, g] : groups) {
    SummaryRow s;
    std::tie(s.n, s.r, s.r2, std::ignore) = key;
    s.policy = g.policy;
    s.runs = static_cast<int>(g.final_acc.size());
    s.final_acc = describe(g.final_acc);
    s.mean_sel_probe_acc = describe(g.probe_acc);
    s.fat_frac = describe(g.fat);
    s.probe_count = describe(g.probes);
    out.push_back(std::move(s));
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "n,r,r2,policy,runs,final_acc_mean,final_acc_std,mean_sel_probe_acc_mean,"
         "mean_sel_probe_acc_std,fat_frac_mean,fat_frac_std,probe_count_mean,probe_count_std\n";
  for (const auto& s : rows) {
    out << s.n << ',' << s.r << ',' << s.r2 << ',' << s.policy << ',' << s.runs;
    for (const auto* m : {&s.final_acc, &s.mean_sel_probe_acc, &s.fat_frac, &s.probe_count}) {
      out << ',' << format_number(m->mean) << ',' << format_number(m->std);
    }
    out << '\n';
  }
}

void write_summary_long_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "n,r,r2,policy,metric,mean,std\n";
  for (const auto& s : rows) {
    const std::pair<const char*, const MetricSummary*> metrics[] = {
        {"final_acc", &s.final_acc},
        {"mean_sel_probe_acc", &s.mean_sel_probe_acc},
        {"fat_frac", &s.fat_frac},
        {"probe_count", &s.probe_count}};
    for (const auto& [name, m] : metrics) {
      out << s.n << ',' << s.r << ',' << s.r2 << ',' << s.policy << ',' << name << ','
          << format_number(m->mean) << ',' << format_number(m->std) << '\n';
    }
  }
}

}  // namespace fedsec

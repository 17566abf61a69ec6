#pragma once

// Online, irrevocable accept/reject policies over a stream of probed
// candidates: the three-stage threshold heuristic, an exactly-R online
// random baseline and the offline best-R baseline.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsec/random.hpp"
#include "fedsec/selection_math.hpp"

namespace fedsec {

struct Candidate {
  int arrival_index = 0;  // 1-based
  std::string client_id;
  // Unset when the candidate was never probed (forced or skipped).
  std::optional<double> probe_accuracy;
};

enum class Verdict { kReject, kAccept, kAcceptForced, kSkipUnprobed };

enum class Reason {
  kCalibration,     // stage 1: observed to set the threshold
  kBelowThreshold,  // stage 2: accuracy <= threshold
  kAboveThreshold,  // stage 2: accuracy > threshold
  kForcedTail,      // remaining arrivals == remaining slots
  kBudgetFilled,    // budget already spent, not probed
  kRandomDraw,      // random policy accepted
  kRandomPass,      // random policy rejected
  kRankedIn,        // offline best: in the top R
  kRankedOut,       // offline best: outside the top R
};

struct Decision {
  Verdict verdict = Verdict::kReject;
  Reason reason = Reason::kCalibration;
};

enum class Policy { kSecretary, kRandom, kBest };

// What the threshold policy needs before it can decide on a candidate.
enum class SecretaryAction { kProbe, kForce, kSkip };

std::string_view to_string(Verdict v);
std::string_view to_string(Reason r);
std::string_view to_string(Policy p);
Policy parse_policy(std::string_view name);

// Mutable per-run state. Only the observe functions change it, and they
// only ever append to the selected set.
class SelectionState {
 public:
  explicit SelectionState(BudgetSpec spec);

  const BudgetSpec& spec() const { return spec_; }
  double best_observed_accuracy() const { return best_accuracy_; }
  int best_observed_index() const { return best_index_; }
  std::span<const Candidate> selected() const { return selected_; }
  int n_selected() const { return static_cast<int>(selected_.size()); }
  int n_observed() const { return n_observed_; }
  int forced_acceptances() const { return forced_; }
  bool finished() const { return n_observed_ == spec_.n_candidates; }

 private:
  friend Decision secretary_observe(SelectionState&, const Candidate&);
  friend Decision random_observe(SelectionState&, const Candidate&, Rng&);

  void admit_next(const Candidate& c);
  void accept(const Candidate& c, bool forced);

  BudgetSpec spec_;
  double best_accuracy_ = 0.0;
  int best_index_ = 0;
  std::vector<Candidate> selected_;
  int n_observed_ = 0;
  int forced_ = 0;
};

// Tells the caller whether the next candidate must be probed before
// secretary_observe can decide on it.
SecretaryAction secretary_next_action(const SelectionState& state, int arrival_index);

// Stage 1 (index <= alpha): reject and track the best accuracy.
// Stage 2: skip once the budget is full, force-accept when the remaining
// arrivals equal the remaining slots, otherwise accept iff accuracy > A_b.
Decision secretary_observe(SelectionState& state, const Candidate& candidate);

// Accepts with probability (R - N_b) / (N - i + 1).
Decision random_observe(SelectionState& state, const Candidate& candidate, Rng& rng);

// Top `budget` by probe accuracy, ties to the earlier arrival. Returned in
// ranking order.
std::vector<Candidate> offline_best_select(std::span<const Candidate> candidates, int budget);

struct DecisionRecord {
  Candidate candidate;
  Decision decision;
  bool probed = false;
};

struct SelectionAudit {
  Policy policy = Policy::kSecretary;
  std::vector<DecisionRecord> decisions;
  std::vector<Candidate> selected;
  int forced_acceptances = 0;
  int probes_used = 0;  // probes that drove a decision
};

SelectionAudit run_stream(Policy policy, const BudgetSpec& spec,
                          std::span<const Candidate> stream, std::uint64_t seed);

// Success event counted by the Monte Carlo oracle.
enum class SuccessEvent {
  // Exactly `budget` successive records appear after alpha, the last one
  // being the overall best. This is the event whose probability the
  // closed form approximates.
  kRecordChain,
  // The threshold rule's selected set equals the global top-`budget` set.
  kTopSet,
};

// Random permutations of n i.i.d. uniform scores, threshold rule with the
// given alpha index. std_error = sqrt(p (1 - p) / trials).
ProbabilityEstimate monte_carlo_top_r_probability(int n, int budget, int alpha_index,
                                                  std::int64_t trials, std::uint64_t seed,
                                                  SuccessEvent event = SuccessEvent::kRecordChain);

}  // namespace fedsec

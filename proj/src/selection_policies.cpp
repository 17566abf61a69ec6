#include "fedsec/selection_policies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedsec/errors.hpp"

namespace fedsec {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kReject: return "reject";
    case Verdict::kAccept: return "accept";
    case Verdict::kAcceptForced: return "accept_forced";
    case Verdict::kSkipUnprobed: return "skip_unprobed";
  }
  return "?";
}

std::string_view to_string(Reason r) {
  switch (r) {
    case Reason::kCalibration: return "calibration";
    case Reason::kBelowThreshold: return "below_threshold";
    case Reason::kAboveThreshold: return "above_threshold";
    case Reason::kForcedTail: return "forced_tail";
    case Reason::kBudgetFilled: return "budget_filled";
    case Reason::kRandomDraw: return "random_draw";
    case Reason::kRandomPass: return "random_pass";
    case Reason::kRankedIn: return "ranked_in";
    case Reason::kRankedOut: return "ranked_out";
  }
  return "?";
}

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::kSecretary: return "secretary";
    case Policy::kRandom: return "random";
    case Policy::kBest: return "best";
  }
  return "?";
}

Policy parse_policy(std::string_view name) {
  if (name == "secretary") return Policy::kSecretary;
  if (name == "random") return Policy::kRandom;
  if (name == "best") return Policy::kBest;
  throw std::invalid_argument("unknown policy: " + std::string(name));
}

SelectionState::SelectionState(BudgetSpec spec) : spec_(spec) {
  if (spec_.budget < 1 || spec_.budget > spec_.n_candidates) {
    throw std::domain_error("budget must lie in [1, n_candidates]");
  }
  if (spec_.alpha_star_index < 0 || spec_.alpha_star_index > spec_.n_candidates - spec_.budget) {
    throw std::domain_error("alpha index must lie in [0, n - budget]");
  }
  selected_.reserve(static_cast<std::size_t>(spec_.budget));
}

void SelectionState::admit_next(const Candidate& c) {
  if (finished()) throw StateError("all candidates have already been observed");
  if (c.arrival_index != n_observed_ + 1) {
    throw SequencingError("expected arrival " + std::to_string(n_observed_ + 1) + ", got " +
                          std::to_string(c.arrival_index));
  }
  if (c.probe_accuracy && !(*c.probe_accuracy >= 0.0 && *c.probe_accuracy <= 1.0)) {
    throw std::domain_error("probe accuracy must lie in [0, 1]");
  }
  ++n_observed_;
}

void SelectionState::accept(const Candidate& c, bool forced) {
  selected_.push_back(c);
  if (forced) ++forced_;
}

SecretaryAction secretary_next_action(const SelectionState& state, int arrival_index) {
  const auto& spec = state.spec();
  if (state.n_selected() == spec.budget) return SecretaryAction::kSkip;
  if (arrival_index <= spec.alpha_star_index) return SecretaryAction::kProbe;
  const int remaining = spec.n_candidates - arrival_index + 1;
  if (remaining <= spec.budget - state.n_selected()) return SecretaryAction::kForce;
  return SecretaryAction::kProbe;
}

Decision secretary_observe(SelectionState& state, const Candidate& candidate) {
  const SecretaryAction action = secretary_next_action(state, candidate.arrival_index);
  if (action == SecretaryAction::kProbe && !candidate.probe_accuracy) {
    throw std::invalid_argument("candidate " + std::to_string(candidate.arrival_index) +
                                " must be probed");
  }
  state.admit_next(candidate);

  switch (action) {
    case SecretaryAction::kSkip:
      return {Verdict::kSkipUnprobed, Reason::kBudgetFilled};
    case SecretaryAction::kForce:
      state.accept(candidate, true);
      return {Verdict::kAcceptForced, Reason::kForcedTail};
    case SecretaryAction::kProbe:
      break;
  }

  const double acc = *candidate.probe_accuracy;
  if (candidate.arrival_index <= state.spec_.alpha_star_index) {
    if (acc > state.best_accuracy_) {
      state.best_accuracy_ = acc;
      state.best_index_ = candidate.arrival_index;
    }
    return {Verdict::kReject, Reason::kCalibration};
  }
  if (acc > state.best_accuracy_) {
    state.accept(candidate, false);
    return {Verdict::kAccept, Reason::kAboveThreshold};
  }
  return {Verdict::kReject, Reason::kBelowThreshold};
}

Decision random_observe(SelectionState& state, const Candidate& candidate, Rng& rng) {
  state.admit_next(candidate);
  const auto& spec = state.spec_;
  const int open = spec.budget - state.n_selected();
  if (open == 0) return {Verdict::kSkipUnprobed, Reason::kBudgetFilled};
  const int remaining = spec.n_candidates - candidate.arrival_index + 1;
  // Integer draw keeps the probability exact: accept iff U{0..remaining-1} < open.
  std::uniform_int_distribution<int> draw(0, remaining - 1);
  if (draw(rng) < open) {
    state.accept(candidate, false);
    return {Verdict::kAccept, Reason::kRandomDraw};
  }
  return {Verdict::kReject, Reason::kRandomPass};
}

std::vector<Candidate> offline_best_select(std::span<const Candidate> candidates, int budget) {
  if (budget < 1) throw std::domain_error("budget must be positive");
  if (static_cast<int>(candidates.size()) < budget) {
    throw std::length_error("fewer candidates than budget");
  }
  for (const auto& c : candidates) {
    if (!c.probe_accuracy) throw std::invalid_argument("offline selection needs probed candidates");
  }
  std::vector<Candidate> ranked(candidates.begin(), candidates.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const Candidate& a, const Candidate& b) {
    if (*a.probe_accuracy != *b.probe_accuracy) return *a.probe_accuracy > *b.probe_accuracy;
    return a.arrival_index < b.arrival_index;
  });
  ranked.resize(static_cast<std::size_t>(budget));
  return ranked;
}

SelectionAudit run_stream(Policy policy, const BudgetSpec& spec,
                          std::span<const Candidate> stream, std::uint64_t seed) {
  if (static_cast<int>(stream.size()) != spec.n_candidates) {
    throw std::length_error("stream length must equal n_candidates");
  }
  SelectionAudit audit;
  audit.policy = policy;
  audit.decisions.reserve(stream.size());

  if (policy == Policy::kBest) {
    auto top = offline_best_select(stream, spec.budget);
    std::vector<bool> chosen(stream.size() + 1, false);
    for (const auto& c : top) chosen[static_cast<std::size_t>(c.arrival_index)] = true;
    for (const auto& c : stream) {
      const bool in = chosen[static_cast<std::size_t>(c.arrival_index)];
      audit.decisions.push_back({c,
                                 in ? Decision{Verdict::kAccept, Reason::kRankedIn}
                                    : Decision{Verdict::kReject, Reason::kRankedOut},
                                 true});
    }
    audit.selected = std::move(top);
    audit.probes_used = spec.n_candidates;
    return audit;
  }

  SelectionState state(spec);
  Rng rng(derive_seed(seed, {seed_tag::kRandomPolicy}));
  for (const auto& c : stream) {
    if (policy == Policy::kSecretary) {
      const bool probed = secretary_next_action(state, c.arrival_index) == SecretaryAction::kProbe;
      const Decision d = secretary_observe(state, c);
      audit.decisions.push_back({c, d, probed});
      if (probed) ++audit.probes_used;
    } else {
      const Decision d = random_observe(state, c, rng);
      audit.decisions.push_back({c, d, false});
    }
  }
  audit.selected.assign(state.selected().begin(), state.selected().end());
  audit.forced_acceptances = state.forced_acceptances();
  return audit;
}

ProbabilityEstimate monte_carlo_top_r_probability(int n, int budget, int alpha_idx,
                                                  std::int64_t trials, std::uint64_t seed,
                                                  SuccessEvent event) {
  if (trials < 10000) throw std::domain_error("at least 10^4 trials are required");
  if (n < 1 || budget < 1 || budget > n) throw std::domain_error("budget must lie in [1, n]");
  if (alpha_idx < 0 || alpha_idx > n - budget) {
    throw std::domain_error("alpha index must lie in [0, n - budget]");
  }

  Rng rng(derive_seed(seed, {}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> scores(static_cast<std::size_t>(n));
  std::vector<double> scratch(static_cast<std::size_t>(n));
  std::int64_t hits = 0;

  for (std::int64_t t = 0; t < trials; ++t) {
    for (auto& s : scores) s = unif(rng);
    double threshold = -1.0;
    for (int i = 0; i < alpha_idx; ++i) threshold = std::max(threshold, scores[i]);

    if (event == SuccessEvent::kRecordChain) {
      int records = 0;
      double running = threshold;
      for (int i = alpha_idx; i < n && records <= budget; ++i) {
        if (scores[i] > running) {
          running = scores[i];
          ++records;
        }
      }
      if (records == budget) ++hits;
      continue;
    }

    // Threshold rule with forced tail; success iff all picks are top-R.
    scratch = scores;
    std::nth_element(scratch.begin(), scratch.begin() + (budget - 1), scratch.end(),
                     std::greater<>());
    const double cutoff = scratch[static_cast<std::size_t>(budget - 1)];
    int picked = 0;
    bool ok = true;
    for (int i = alpha_idx; i < n && picked < budget; ++i) {
      const bool forced = (n - i) <= (budget - picked);
      if (forced || scores[i] > threshold) {
        ++picked;
        if (scores[i] < cutoff) {
          ok = false;
          break;
        }
      }
    }
    if (ok) ++hits;
  }

  const double p = static_cast<double>(hits) / static_cast<double>(trials);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials)), trials};
}

}  // namespace fedsec

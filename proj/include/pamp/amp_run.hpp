#pragma once

// Full AMP runs: thresholds either follow a state-evolution policy evaluated at
// the empirical noise level, or are tuned from the data every iteration.

#include "amp.hpp"
#include "state_evolution.hpp"
#include "sure_tuner.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace pamp {

/// FixedChi: tau = chi * sigma_hat. OptimalGreedy: tau minimizes the Bayes risk of
/// the instance's prior at sigma_hat (oracle). ExplicitSequence: tau = taus[t].
struct PolicyFromSe {
  ThresholdPolicy policy;
};

struct SureTuned {
  TunerConfig tuner;
};

using ThresholdSource = std::variant<PolicyFromSe, SureTuned>;

struct AmpRunConfig {
  int max_iters = 200;
  ThresholdSource threshold_source = SureTuned{};
  std::optional<double> mse_tolerance;         // stop once the true MSE drops below (needs beta_o)
  std::optional<double> sigma_rel_tolerance;   // stop once |d sigma_hat| / sigma_hat drops below
  bool keep_states = false;
  int curve_points = 0;  // SURE curve samples recorded per tuned iteration

  void validate() const {
    if (max_iters < 1) throw InvalidConfig("max_iters must be >= 1");
    if (const auto* p = std::get_if<PolicyFromSe>(&threshold_source)) validate_policy(p->policy);
    if (const auto* s = std::get_if<SureTuned>(&threshold_source)) s->tuner.validate();
  }
};

/// One row of a trajectory: the state after `t` iterations.
struct AmpRecord {
  int t = 0;
  double tau = 0.0;         // threshold that produced beta^t (0 for t = 0)
  double gamma = 0.0;       // tau / sigma_hat^{t-1}
  double sigma_hat = 0.0;
  int active_count = 0;
  double mse = 0.0;         // (1/p) ||beta^t - beta_o||^2
  double delta_star = 0.0;  // tuned runs only
};

struct AmpRunResult {
  std::vector<AmpRecord> records;
  std::vector<AmpState> states;  // when keep_states
  std::vector<TuneDiagnostics> diagnostics;
  AmpState final_state;
  OpCounter ops;
};

inline AmpRunResult amp_run(const ProblemInstance& inst, AmpRunConfig config) {
  config.validate();
  AmpRunResult res;
  AmpState s = amp_init(inst, &res.ops);
  auto record = [&](const AmpState& st, double gamma, double delta_star) {
    res.records.push_back({st.t, st.tau_used, gamma, st.sigma_hat, st.active_count,
                           mean_sq_diff(st.beta, inst.beta_o), delta_star});
    if (config.keep_states) res.states.push_back(st);
  };
  record(s, 0.0, 0.0);
  const SignalPrior prior = inst.config.effective_prior();

  for (int it = 0; it < config.max_iters && !s.terminal(); ++it) {
    const double prev_sigma = s.sigma_hat;
    if (auto* tuned = std::get_if<SureTuned>(&config.threshold_source)) {
      auto [next, diag] = tune_and_step(s, inst, tuned->tuner, &res.ops, config.curve_points);
      s = std::move(next);
      record(s, diag.gamma_hat, diag.delta_star);
      res.diagnostics.push_back(std::move(diag));
    } else {
      const auto& policy = std::get<PolicyFromSe>(config.threshold_source).policy;
      const double tau = policy_threshold(policy, prior, s.sigma_hat, static_cast<std::size_t>(it));
      s = amp_step(s, inst, tau, &res.ops);
      record(s, tau / prev_sigma, 0.0);
    }
    if (config.mse_tolerance && res.records.back().mse < *config.mse_tolerance) break;
    if (config.sigma_rel_tolerance && s.sigma_hat > 0.0 &&
        std::abs(s.sigma_hat - prev_sigma) < *config.sigma_rel_tolerance * s.sigma_hat)
      break;
  }
  res.final_state = std::move(s);
  return res;
}

}  // namespace pamp

#pragma once

#include "sonata/algorithm.hpp"

namespace sonata {

enum class BaselineKind { SubgradientPush, GradientProjection };

std::string to_string(BaselineKind k);
BaselineKind baseline_kind_from_string(const std::string& s);

struct BaselineConfig {
  BaselineKind kind = BaselineKind::SubgradientPush;
  StepSizeSchedule schedule;
  WeightRule weights = WeightRule::PushSum;
  bool operator==(const BaselineConfig&) const = default;
};

// Push-sum mixing of the phi-scaled iterates, then a subgradient step on f_i + G / I taken at the
// de-biased point and divided by phi'_i. The y field is left untouched.
ConsensusState subgradient_push_step(const ConsensusState& s, const WeightMatrix& A,
                                     const ProblemInstance& p, double alpha);

// Condensed consensus mix followed by a projected local gradient step.
ConsensusState gradient_projection_step(const ConsensusState& s, const WeightMatrix& A,
                                        const ProblemInstance& p, double alpha);

RunResult run_baseline(const ProblemInstance& p, const BaselineConfig& cfg,
                       const GraphSequence& seq, const RunOptions& opts, std::uint64_t seed);

}  // namespace sonata

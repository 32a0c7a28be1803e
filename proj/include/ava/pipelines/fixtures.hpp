#pragma once

// Small deterministic fixtures shared by the grad-check command and tests.

#include <cstdint>
#include <string>
#include <vector>

#include "ava/data/vocab.hpp"
#include "ava/grad/grad_check.hpp"
#include "ava/objectives/objectives.hpp"

namespace ava::pipelines {

struct GradFixture {
  data::Vocabulary vocab;                   // 5 characters, vocabulary size 8
  tqr::ModelConfig model;                   // d_model 16, 2 layers, 2 heads
  std::vector<data::TokenSequence> sequences;
  std::vector<data::SequencePair> pairs;
  objectives::ObjectiveConfig objective;
};

GradFixture grad_fixture();

// Fixture parameters: normal(0, scale) for weights and biases, unit-centred
// LN gains. A larger scale than training init keeps every gradient component
// well above finite-difference round-off.
tqr::TQRModel<double> fixture_model(const tqr::ModelConfig& config, std::uint64_t seed, double scale = 0.3);

// Objective names: ava_d, ava_p, cer, bradley_terry, sft.
grad::GradCheckResult check_objective_gradients(const std::string& objective, std::uint64_t seed = 0,
                                                double epsilon = 1e-4);

}  // namespace ava::pipelines

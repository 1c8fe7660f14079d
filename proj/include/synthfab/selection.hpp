// Copyright 2026 The Synthfab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "synthfab/gateway.hpp"
#include "synthfab/prompting.hpp"

namespace synthfab::selection {

struct SelectionPolicy {
  std::optional<int> keep_k;
  std::optional<double> keep_fraction;  // (0, 1]
  double class_penalty_weight = 1.0;
  std::string class_prompt_pattern = "a photo of <object>";

  static SelectionPolicy top_k(int k);
  static SelectionPolicy top_fraction(double fraction);

  // Exactly one of keep_k / keep_fraction, weight >= 0, pattern has <object>.
  void validate() const;
  // Number of survivors out of n: min(keep_k, n) or ceil(keep_fraction * n).
  std::size_t keep_count(std::size_t n) const;
  std::string class_prompt(const prompting::ClassLabel& label) const;
};

// Largest similarity over all classes except `exclude`; 0 for an empty set.
double max_class_similarity(const std::map<std::string, double>& class_similarities,
                            std::string_view exclude = {});

double composite_score(double faithfulness,
                       const std::map<std::string, double>& class_similarities,
                       double class_penalty_weight, std::string_view exclude = {});

double composite_score(const gateway::ScoredImage& candidate, const SelectionPolicy& policy);

// Candidate positions ordered best first: composite descending, then
// (seed, index) ascending, then input position.
std::vector<std::size_t> rank(std::span<const gateway::ScoredImage> candidates,
                              const SelectionPolicy& policy);

struct SelectionRecord {
  std::string id;
  double faithfulness = 0.0;
  double max_class_similarity = 0.0;
  double composite = 0.0;
  bool kept = false;
};

struct SelectionResult {
  std::vector<gateway::ScoredImage> kept;  // best first
  std::vector<SelectionRecord> report;     // input order
};

// Throws kEmptyBatch on an empty batch.
SelectionResult select(std::vector<gateway::ScoredImage> candidates, const SelectionPolicy& policy);

std::vector<gateway::ScoredImage> rank_and_select(std::vector<gateway::ScoredImage> candidates,
                                                  const SelectionPolicy& policy);

// id,faithfulness,max_class_sim,composite,kept
std::string report_csv(std::span<const SelectionRecord> records);

// Scores each candidate against [prompt] ++ [class prompt per label]. Gateway
// errors are rethrown with the failing batch position in the message.
// `own_label` is recorded on every result (empty for backgrounds).
std::vector<gateway::ScoredImage> score_batch(std::vector<gateway::Candidate> candidates,
                                              const std::string& prompt,
                                              std::span<const prompting::ClassLabel> interest_classes,
                                              gateway::Gateway& gateway,
                                              const SelectionPolicy& policy,
                                              const std::string& own_label = {},
                                              int workers = 1);

}  // namespace synthfab::selection

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
#include "synthfab/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "synthfab/error.hpp"
#include "synthfab/parallel.hpp"

namespace synthfab::selection {

SelectionPolicy SelectionPolicy::top_k(int k) {
  SelectionPolicy policy;
  policy.keep_k = k;
  return policy;
}

SelectionPolicy SelectionPolicy::top_fraction(double fraction) {
  SelectionPolicy policy;
  policy.keep_fraction = fraction;
  return policy;
}

void SelectionPolicy::validate() const {
  require(keep_k.has_value() != keep_fraction.has_value(), Errc::kInvalidArgument,
          "exactly one of keep_k and keep_fraction must be set");
  if (keep_k) require(*keep_k >= 1, Errc::kInvalidArgument, "keep_k must be >= 1");
  if (keep_fraction) {
    require(*keep_fraction > 0.0 && *keep_fraction <= 1.0, Errc::kInvalidArgument,
            "keep_fraction must be in (0, 1]");
  }
  require(std::isfinite(class_penalty_weight) && class_penalty_weight >= 0.0,
          Errc::kInvalidArgument, "class_penalty_weight must be >= 0");
  require(class_prompt_pattern.find(prompting::kObjectSlot) != std::string::npos,
          Errc::kInvalidArgument, "class_prompt_pattern needs an <object> slot");
}

std::size_t SelectionPolicy::keep_count(std::size_t n) const {
  validate();
  if (keep_k) return std::min(n, static_cast<std::size_t>(*keep_k));
  // The epsilon keeps 0.95 * 600 at 570 despite binary rounding.
  const double want = std::ceil(*keep_fraction * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<std::size_t>(std::max(0.0, want)));
}

std::string SelectionPolicy::class_prompt(const prompting::ClassLabel& label) const {
  std::string out = class_prompt_pattern;
  const std::size_t at = out.find(prompting::kObjectSlot);
  if (at != std::string::npos) out.replace(at, prompting::kObjectSlot.size(), label.name);
  return out;
}

double max_class_similarity(const std::map<std::string, double>& class_similarities,
                            std::string_view exclude) {
  bool any = false;
  double best = 0.0;
  for (const auto& [name, sim] : class_similarities) {
    if (!exclude.empty() && name == exclude) continue;
    best = any ? std::max(best, sim) : sim;
    any = true;
  }
  return best;
}

double composite_score(double faithfulness,
                       const std::map<std::string, double>& class_similarities,
                       double class_penalty_weight, std::string_view exclude) {
  return faithfulness - class_penalty_weight * max_class_similarity(class_similarities, exclude);
}

double composite_score(const gateway::ScoredImage& candidate, const SelectionPolicy& policy) {
  return composite_score(candidate.faithfulness, candidate.class_similarities,
                         policy.class_penalty_weight, candidate.own_label);
}

std::vector<std::size_t> rank(std::span<const gateway::ScoredImage> candidates,
                              const SelectionPolicy& policy) {
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = composite_score(candidates[i], policy);
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (candidates[a].seed != candidates[b].seed) return candidates[a].seed < candidates[b].seed;
    return candidates[a].index < candidates[b].index;
  });
  return order;
}

SelectionResult select(std::vector<gateway::ScoredImage> candidates,
                       const SelectionPolicy& policy) {
  require(!candidates.empty(), Errc::kEmptyBatch, "no candidates to select from");
  const std::size_t keep = policy.keep_count(candidates.size());
  const std::vector<std::size_t> order = rank(candidates, policy);

  SelectionResult result;
  result.report.resize(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const gateway::ScoredImage& c = candidates[i];
    result.report[i] = SelectionRecord{
        c.id, c.faithfulness, max_class_similarity(c.class_similarities, c.own_label),
        composite_score(c, policy), false};
  }
  result.kept.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) {
    result.report[order[r]].kept = true;
    result.kept.push_back(std::move(candidates[order[r]]));
  }
  return result;
}

std::vector<gateway::ScoredImage> rank_and_select(std::vector<gateway::ScoredImage> candidates,
                                                  const SelectionPolicy& policy) {
  return select(std::move(candidates), policy).kept;
}

std::string report_csv(std::span<const SelectionRecord> records) {
  std::string out = "id,faithfulness,max_class_sim,composite,kept\n";
  char line[160];
  for (const SelectionRecord& r : records) {
    std::snprintf(line, sizeof line, ",%.6f,%.6f,%.6f,%d\n", r.faithfulness,
                  r.max_class_similarity, r.composite, r.kept ? 1 : 0);
    out += r.id;
    out += line;
  }
  return out;
}

std::vector<gateway::ScoredImage> score_batch(std::vector<gateway::Candidate> candidates,
                                              const std::string& prompt,
                                              std::span<const prompting::ClassLabel> interest_classes,
                                              gateway::Gateway& gateway,
                                              const SelectionPolicy& policy,
                                              const std::string& own_label, int workers) {
  std::vector<std::string> texts{prompt};
  for (const prompting::ClassLabel& label : interest_classes) {
    texts.push_back(policy.class_prompt(label));
  }

  std::vector<gateway::ScoredImage> out(candidates.size());
  parallel_for(candidates.size(), workers, [&](std::size_t i) {
    std::vector<double> scores;
    try {
      scores = gateway.score_image_text(candidates[i].image, texts);
      require(scores.size() == texts.size(), Errc::kBadResponse,
              "expected " + std::to_string(texts.size()) + " scores, got " +
                  std::to_string(scores.size()));
    } catch (const Error& e) {
      throw Error(e.code(), "batch position " + std::to_string(i) + ": " + e.what());
    }
    gateway::ScoredImage& s = out[i];
    s.faithfulness = scores[0];
    for (std::size_t c = 0; c < interest_classes.size(); ++c) {
      s.class_similarities[interest_classes[c].name] = scores[c + 1];
    }
    s.seed = candidates[i].seed;
    s.index = candidates[i].index;
    s.id = std::to_string(s.seed) + "_" + std::to_string(s.index);
    s.own_label = own_label;
    s.image = std::move(candidates[i].image);
  });
  return out;
}

}  // namespace synthfab::selection

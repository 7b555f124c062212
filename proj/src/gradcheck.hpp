// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "model.hpp"
#include "params.hpp"

namespace s2s {

struct GradCheckParamReport {
  std::string name;
  double max_rel_err = 0.0;
  int coords_checked = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::vector<GradCheckParamReport> per_param;

  const GradCheckParamReport* worst() const;
};

// Central-difference verification of reverse-mode gradients.
// loss_fn(true) must build the graph and run backward (accumulating into
// the store's gradients); loss_fn(false) must evaluate the loss only.
// The loss must be bit-deterministic; a sampled subset of coordinates per
// parameter (at least min_coords, or all) is perturbed by +-h.
GradCheckReport grad_check(const std::function<double(bool compute_grad)>& loss_fn,
                           ParamStore& params, double h, uint64_t seed,
                           int min_coords = 8);

// Builds a deterministic miniature matching task (posteriorgram, gold
// entity, negatives, mask plans) on top of the given architecture and
// checks the full composite loss, so that every parameter group
// participates. Returns the report for this seed.
GradCheckReport run_model_gradient_check(const ModelConfig& base_cfg, uint64_t seed,
                                         double h = 1e-5);

}  // namespace s2s

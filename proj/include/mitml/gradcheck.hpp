/*
 * Copyright 2026 The mitml Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MITML_GRADCHECK_HPP
#define MITML_GRADCHECK_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mitml/tensor.hpp"

// Finite-difference verification of reverse-mode gradients. The scalar loss
// is re-evaluated with central differences per coordinate, so keep the test
// problems small.

namespace mitml {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  bool all_finite = true;
  // Coordinates of the worst mismatch, for diagnostics.
  int worst_input = -1;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  bool ok(double tol) const { return all_finite && max_rel_err < tol; }

  std::string describe() const {
    return detail::cat("max_rel_err=", max_rel_err, " coords=", coords_checked,
                       " finite=", all_finite ? "yes" : "no",
                       " worst(input=", worst_input, " idx=", worst_index,
                       " analytic=", worst_analytic,
                       " numeric=", worst_numeric, ")");
  }
};

/// Compares reverse-mode gradients of a scalar-valued function against
/// central finite differences for every coordinate of every input. The
/// relative error is |ga - gn| / max(1, |ga|, |gn|).
inline GradCheckResult grad_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor>& inputs, double step = 1e-5) {
  GradCheckResult res;
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }

  Tensor loss = f(inputs);
  MITML_CHECK(loss.size() == 1, "grad_check: loss must be scalar, got ",
              shape_str(loss.shape()));
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& t : inputs) {
    analytic.push_back(t.has_grad() ? t.grad()
                                    : std::vector<double>(t.size(), 0.0));
  }

  auto eval = [&]() {
    const Tensor v = f(inputs);
    MITML_CHECK(v.size() == 1, "grad_check: loss must be scalar");
    return v.item();
  };

  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& vals = inputs[ti].mutable_data();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + step;
      const double up = eval();
      vals[i] = orig - step;
      const double down = eval();
      vals[i] = orig;

      const double gn = (up - down) / (2.0 * step);
      const double ga = analytic[ti][i];
      if (!std::isfinite(gn) || !std::isfinite(ga)) res.all_finite = false;
      const double rel =
          std::fabs(ga - gn) /
          std::max({1.0, std::fabs(ga), std::fabs(gn)});
      ++res.coords_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_input = static_cast<int>(ti);
        res.worst_index = i;
        res.worst_analytic = ga;
        res.worst_numeric = gn;
      }
    }
  }
  return res;
}

}  // namespace mitml

#endif  // MITML_GRADCHECK_HPP

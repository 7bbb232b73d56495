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

#ifndef MITML_OPTIMIZER_HPP
#define MITML_OPTIMIZER_HPP

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mitml/io.hpp"
#include "mitml/model.hpp"
#include "mitml/tensor.hpp"

// SGD with momentum and coupled weight decay:
//   v <- momentum * v + (g + weight_decay * w)
//   w <- w - lr * v
// Momentum buffers are keyed by parameter name so they survive checkpoints.

namespace mitml {

class SgdOptimizer {
 public:
  SgdOptimizer(double momentum, double weight_decay)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  /// Updates every parameter that accumulated a gradient; parameters with no
  /// gradient buffer (untouched by the last backward pass) keep their values
  /// and momenta. lr_of maps a parameter's rate class to its current rate.
  void step(const std::vector<ParamEntry>& params,
            const std::function<double(LrClass)>& lr_of) {
    for (const ParamEntry& p : params) {
      if (!p.tensor.has_grad()) continue;
      const double lr = lr_of(p.lr);
      std::vector<double>& v = buffers_[p.name];
      if (v.empty()) v.assign(static_cast<std::size_t>(p.tensor.size()), 0.0);
      MITML_CHECK(v.size() == static_cast<std::size_t>(p.tensor.size()),
                  "optimizer: momentum buffer for '", p.name,
                  "' does not match the parameter");
      Tensor t = p.tensor;  // shares storage; Tensor handles are cheap
      std::vector<double>& w = t.mutable_data();
      const std::vector<double>& g = t.grad();
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = momentum_ * v[i] + (g[i] + weight_decay_ * w[i]);
        w[i] -= lr * v[i];
      }
    }
  }

  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

  /// Appends one "opt.<name>" rank-1 tensor per existing momentum buffer.
  void save_state(Checkpoint& ck) const {
    for (const auto& [name, v] : buffers_)
      ck.add(std::string(kOptPrefix) + name,
             Tensor::from_data({static_cast<int>(v.size())}, v));
  }

  /// Restores momentum buffers from "opt.*" entries; entries for unknown
  /// parameters are rejected so silent drift cannot hide in a resume.
  void load_state(const Checkpoint& ck,
                  const std::vector<ParamEntry>& params) {
    buffers_.clear();
    const std::string prefix(kOptPrefix);
    for (const auto& [name, t] : ck.entries()) {
      if (name.rfind(prefix, 0) != 0) continue;
      const std::string param = name.substr(prefix.size());
      const ParamEntry* match = nullptr;
      for (const ParamEntry& p : params)
        if (p.name == param) { match = &p; break; }
      MITML_CHECK(match != nullptr, "optimizer: momentum entry '", name,
                  "' has no matching parameter");
      MITML_CHECK(t.rank() == 1 && t.size() == match->tensor.size(),
                  "optimizer: momentum entry '", name, "' has wrong size");
      buffers_[param] = t.data();
    }
  }

  const std::map<std::string, std::vector<double>>& buffers() const {
    return buffers_;
  }

 private:
  double momentum_;
  double weight_decay_;
  std::map<std::string, std::vector<double>> buffers_;
};

}  // namespace mitml

#endif  // MITML_OPTIMIZER_HPP

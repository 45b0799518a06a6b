#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dgua/nn.hpp"
#include "dgua/tensor.hpp"

namespace dgua::testing {

struct FdResult {
  double worst_rel = 0.0;
  std::size_t checked = 0;
};

// Central finite differences over every element of every parameter. build must
// recompute the loss from the current parameter values on a fresh tape; a
// parameter the loss never touches counts as gradient zero.
inline FdResult fd_check(const std::vector<NamedParam>& params,
                         const std::function<TensorPtr(Tape&)>& build, double step = 1e-5) {
  Tape tape;
  tape.backward(build(tape));
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    if (p.tensor->has_grad()) {
      analytic.emplace_back(p.tensor->grad().begin(), p.tensor->grad().end());
    } else {
      analytic.emplace_back(p.tensor->numel(), 0.0);
    }
  }

  FdResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto vals = params[pi].tensor->values_mut();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + step;
      Tape up_tape;
      const double up = build(up_tape)->item();
      vals[i] = keep - step;
      Tape down_tape;
      const double down = build(down_tape)->item();
      vals[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      const double rel =
          std::abs(analytic[pi][i] - numeric) / std::max(1.0, std::abs(numeric));
      res.worst_rel = std::max(res.worst_rel, rel);
      ++res.checked;
    }
  }
  for (const auto& p : params) p.tensor->clear_grad();
  return res;
}

}  // namespace dgua::testing

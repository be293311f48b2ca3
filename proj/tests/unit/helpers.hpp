#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "agdc/parameters.hpp"

namespace agdc::testing {

using LossBuilder = std::function<ad::Var(const Bind&)>;

struct FdResult {
  double max_rel_error = 0.0;
  std::string worst_group;
};

/// Central finite differences over every entry of every group in `params`,
/// compared with the gradients backward() writes. Groups in `skip` are not
/// compared.
inline FdResult finite_difference_check(ParameterStore& params, const LossBuilder& loss, double h = 1e-6,
                                        double floor = 1e-8, const std::vector<std::string>& skip = {}) {
  params.zero_grad();
  {
    ad::Tape tape;
    Bind bind(tape, params);
    tape.backward(loss(bind));
  }
  const auto value = [&]() {
    ad::Tape tape;
    Bind bind(tape, std::as_const(params));
    return loss(bind).scalar();
  };
  FdResult r;
  for (auto& [name, p] : params) {
    if (std::find(skip.begin(), skip.end(), name) != skip.end()) continue;
    for (ad::Index i = 0; i < p.value.size(); ++i) {
      double& x = p.value.data()[i];
      const double saved = x;
      x = saved + h;
      const double up = value();
      x = saved - h;
      const double down = value();
      x = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.grad.data()[i];
      const double err =
          std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_group = name;
      }
    }
  }
  return r;
}

}  // namespace agdc::testing

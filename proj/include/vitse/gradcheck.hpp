#pragma once

#include <functional>

#include "vitse/tensor.hpp"

namespace vitse {

// Central-difference check of the gradient stored in x->grad against the
// scalar function f, which must re-evaluate the loss from the current tensor
// values. Returns max over coordinates of
//   |analytic - central| / max(1, |central|).
// Callers fill x->grad with one backward() pass first. Double precision is
// the intended instantiation.
template <typename T>
double finite_diff_check(const std::function<T()>& f, const TensorPtr<T>& x, T eps) {
    if (!x->requires_grad || x->grad.size() != x->data.size())
        throw ContractError("finite_diff_check: x carries no gradient");
    double worst = 0.0;
    for (size_t i = 0; i < x->data.size(); ++i) {
        const T saved = x->data[i];
        x->data[i] = saved + eps;
        const double up = static_cast<double>(f());
        x->data[i] = saved - eps;
        const double down = static_cast<double>(f());
        x->data[i] = saved;
        const double numeric = (up - down) / (2.0 * static_cast<double>(eps));
        const double analytic = static_cast<double>(x->grad[i]);
        const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace vitse

#pragma once

// Test-only central finite difference oracle, independent of the tape.

#include <cmath>
#include <functional>
#include <vector>

#include "pip/tensor.hpp"

namespace pip::testing {

// d loss / d param[i] via central differences; mutates and restores values.
inline std::vector<double> finite_diff_grad(pip::Tensor param,
                                            const std::function<double()>& loss_fn,
                                            double step = 1e-4) {
    auto& v = param.values();
    std::vector<double> grad(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double saved = v[i];
        v[i] = saved + step;
        const double up = loss_fn();
        v[i] = saved - step;
        const double down = loss_fn();
        v[i] = saved;
        grad[i] = (up - down) / (2 * step);
    }
    return grad;
}

// max over entries of |a-b| / max(|a|,|b|,floor)
inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                          double floor = 1e-8) {
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace pip::testing

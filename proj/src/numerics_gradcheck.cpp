#include "mexflow/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mexflow/rng.hpp"

namespace mex::nn {

double grad_check(std::span<Parameter* const> params, const std::function<double()>& loss,
                  const std::function<void()>& compute_gradients, double epsilon, std::size_t samples,
                  std::uint64_t seed, double floor) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) throw std::invalid_argument("grad_check: epsilon must be in [1e-7, 1e-3]");
    std::size_t total = 0;
    for (const Parameter* p : params) total += p->value.size();
    if (!(floor > 0)) throw std::invalid_argument("grad_check: floor must be positive");
    if (total == 0) throw std::invalid_argument("grad_check: no parameters");

    compute_gradients();
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        std::size_t flat = rng.below(total);
        std::size_t which = 0;
        while (flat >= params[which]->value.size()) flat -= params[which++]->value.size();
        Parameter& p = *params[which];
        const double analytic = p.grad[flat];
        const double original = p.value[flat];
        p.value[flat] = original + epsilon;
        const double up = loss();
        p.value[flat] = original - epsilon;
        const double down = loss();
        p.value[flat] = original;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

}  // namespace mex::nn

#include "tbn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tbn/rng.hpp"

namespace tbn {

GradCheckResult grad_check(const std::string& name, const LossFn& loss,
                           const std::vector<Parameter<double>*>& params,
                           const GradCheckOptions& options) {
    GradCheckResult result{name, 0.0, 0, options.tolerance};
    for (auto* p : params) p->zero_grad();
    loss(true);
    std::vector<Tensor<double>> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) analytic.push_back(p->grad);

    Rng rng = substream(options.seed, "gradcheck");
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& w = params[pi]->value;
        std::vector<std::size_t> coords(w.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (coords.size() > options.max_coords) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.max_coords);
        }
        for (std::size_t i : coords) {
            const double saved = w[i];
            w[i] = saved + options.step;
            const double up = loss(false);
            w[i] = saved - options.step;
            const double down = loss(false);
            w[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            const double a = analytic[pi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.denom_floor});
            result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
            ++result.coords_checked;
        }
    }
    for (auto* p : params) p->zero_grad();
    return result;
}

}  // namespace tbn

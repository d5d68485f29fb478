#pragma once

#include <vector>

#include "tbn/tensor.hpp"

namespace tbn {

/// Classical momentum: v <- mu*v + g; w <- w - lr*v. Gradients are zeroed afterwards.
template <typename T>
void sgd_step(const std::vector<Parameter<T>*>& params, double lr, double momentum) {
    const T lr_t = static_cast<T>(lr), mu = static_cast<T>(momentum);
    for (Parameter<T>* p : params) {
        auto& w = p->value;
        auto& g = p->grad;
        auto& v = p->velocity;
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = mu * v[i] + g[i];
            w[i] -= lr_t * v[i];
        }
        p->zero_grad();
    }
}

/// Step decay: lr multiplied by `factor` once `epoch` (0-based) reaches `decay_epoch`.
struct StepSchedule {
    double base_lr = 0.01;
    int decay_epoch = 60;
    double factor = 0.1;

    double at(int epoch) const { return epoch >= decay_epoch ? base_lr * factor : base_lr; }
};

}  // namespace tbn

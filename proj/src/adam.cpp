#include "usseg/adam.hpp"

#include <cmath>

#include "usseg/errors.hpp"

namespace usseg {

AdamState make_adam_state(Network& net) {
    AdamState st;
    for (auto* p : trainable_params(net)) {
        st.m.emplace_back(p->size(), 0.0f);
        st.v.emplace_back(p->size(), 0.0f);
    }
    return st;
}

void adam_update_array(std::vector<float>& param, const std::vector<float>& grad, std::vector<float>& m,
                       std::vector<float>& v, int64_t t, double lr, double beta1, double beta2,
                       double eps) {
    if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size())
        throw ValidationError("adam: parameter/gradient/state size mismatch");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < param.size(); ++i) {
        double g = grad[i];
        double mi = beta1 * m[i] + (1.0 - beta1) * g;
        double vi = beta2 * v[i] + (1.0 - beta2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        double mhat = mi / bc1;
        double vhat = vi / bc2;
        param[i] = static_cast<float>(param[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
}

void adam_step(Network& net, Network& grads, AdamState& state, double lr) {
    auto params = trainable_params(net);
    auto gs = trainable_params(grads);
    if (params.size() != gs.size() || params.size() != state.m.size())
        throw ValidationError("adam: network/gradient/state layout mismatch");
    state.t += 1;
    for (size_t i = 0; i < params.size(); ++i)
        adam_update_array(*params[i], *gs[i], state.m[i], state.v[i], state.t, lr, state.beta1,
                          state.beta2, state.eps);
}

} // namespace usseg

#ifndef USSEG_ADAM_HPP
#define USSEG_ADAM_HPP

#include <cstdint>
#include <vector>

#include "usseg/network.hpp"

namespace usseg {

// First/second moment buffers aligned with the network's trainable_params
// traversal order.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t t = 0;
    std::vector<std::vector<float>> m, v;
};

AdamState make_adam_state(Network& net);

// t += 1; m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2;
// p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(Network& net, Network& grads, AdamState& state, double lr);

// Raw array update, exposed for tests against hand traces.
void adam_update_array(std::vector<float>& param, const std::vector<float>& grad, std::vector<float>& m,
                       std::vector<float>& v, int64_t t, double lr, double beta1, double beta2,
                       double eps);

} // namespace usseg

#endif

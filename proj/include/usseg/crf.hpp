#ifndef USSEG_CRF_HPP
#define USSEG_CRF_HPP

#include <functional>

#include "usseg/prob_map.hpp"
#include "usseg/volume.hpp"

namespace usseg {

enum class FilterPath {
    exact,    // dense O(N^2) pairwise sum, the reference
    truncated // cube window of radius ceil(3*theta), the production path
};

struct CrfParams {
    float w_spatial = 1.0f;
    float theta_gamma = 3.0f; // spatial std, voxels
    float w_bilateral = 1.0f;
    float theta_alpha = 5.0f; // bilateral spatial std, voxels
    float theta_beta = 0.1f;  // bilateral intensity std, standardized units
    int iterations = 5;
    FilterPath path = FilterPath::truncated;

    void validate() const;
};

// Unnormalized Gaussian message sum_{j != i} k(f_i, f_j) q_j where the
// features are voxel positions (spatial kernel) or positions plus the
// standardized intensity (bilateral kernel). Self-contributions excluded.
std::vector<float> spatial_message(const std::vector<float>& q, std::array<int, 3> dims, float theta,
                                   FilterPath path);
std::vector<float> bilateral_message(const std::vector<float>& q, const Volume& vol, float theta_alpha,
                                     float theta_beta, FilterPath path);

// Mean-field refinement with Potts compatibility:
//   U_l = -log(clamp(p_l, 1e-8, 1)), Q^0 = p
//   message_l = w_spatial*G_spatial(Q_l) + w_bilateral*G_bilateral(Q_l)
//   Q_l ∝ exp(-U_l - sum_{l' != l} message_{l'}), renormalized per voxel
// Updates are Jacobi-style (all messages from the previous iterate).
// iterations = 0 returns the input. The observer, when set, sees Q after
// every iteration.
using MeanfieldObserver = std::function<void(int iteration, const ProbabilityMap&)>;
ProbabilityMap meanfield(const ProbabilityMap& pm, const Volume& vol, const CrfParams& params,
                         const MeanfieldObserver& observer = nullptr);

// Per-voxel argmax; ties break toward the smaller label.
LabelMap argmax_labels(const ProbabilityMap& pm);

} // namespace usseg

#endif

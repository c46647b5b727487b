#ifndef USSEG_RUN_CONFIG_HPP
#define USSEG_RUN_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "usseg/crf.hpp"
#include "usseg/cyclic_lr.hpp"
#include "usseg/network.hpp"
#include "usseg/ussim.hpp"

namespace usseg {

// Run configuration, loadable from a JSON file. Unknown keys are rejected.
// Documented keys: seed, batch_size, iterations, activation, lr_base,
// lr_max, lr_step, widths, head_widths, synthetic_fraction,
// checkpoint_every, data_dir, out_dir, and the override objects
// crf {w_spatial, theta_gamma, w_bilateral, theta_alpha, theta_beta,
// iterations, path} and sim {impedance, attenuation, scatter_density,
// scatter_amp, psf_sigmas, per_case}.
struct RunConfig {
    uint64_t seed = 42;
    int batch_size = 10;
    int64_t iterations = 1000;
    Activation activation = Activation::prelu;
    double lr_base = 1e-3;
    double lr_max = 8e-3;
    int64_t lr_step = 1600;
    std::vector<int> widths{30, 30, 40, 40, 40, 40, 50, 50};
    std::vector<int> head_widths{150, 150, 3};
    double synthetic_fraction = 1.0;
    int64_t checkpoint_every = 0; // 0: only the final checkpoint
    std::string data_dir;
    std::string out_dir;
    CrfParams crf;
    TissueAcoustics acoustics;
    SweepPsf psf;
    int sim_per_case = 5;

    void validate() const;
    NetworkConfig network_config() const;
    CyclicLr schedule() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);

} // namespace usseg
#endif

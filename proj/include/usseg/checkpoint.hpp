#ifndef USSEG_CHECKPOINT_HPP
#define USSEG_CHECKPOINT_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "usseg/adam.hpp"
#include "usseg/network.hpp"

namespace usseg {

// A checkpoint is a pair of files: <stem>.json (manifest with tensor
// names, shapes, offsets, dtype, iteration and network config) and
// <stem>.bin (concatenated little-endian f32 blobs). load(save(x)) is
// bit-identical.
void save_checkpoint(const Network& net, const AdamState* opt, int64_t iteration,
                     const std::string& stem);

struct Checkpoint {
    Network net;
    std::optional<AdamState> opt;
    int64_t iteration = 0;
};

Checkpoint load_checkpoint(const std::string& stem);

// Throws ConfigError when the checkpoint's activation disagrees with the
// requested one.
void require_activation(const Checkpoint& ck, Activation want);

} // namespace usseg

#endif

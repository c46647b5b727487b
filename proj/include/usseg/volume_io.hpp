#ifndef USSEG_VOLUME_IO_HPP
#define USSEG_VOLUME_IO_HPP

#include <string>

#include "usseg/volume.hpp"

namespace usseg {

enum class VolumeFormat { nrrd, raw_json };

// Formats:
//   *.nrrd      NRRD subset: dimension 3, type float|uchar, encoding raw,
//               little-endian, diagonal space directions, space origin,
//               attached payload.
//   *.json/.raw raw little-endian payload (<stem>.raw) with a JSON sidecar
//               (<stem>.json) carrying keys dims, spacing, origin, dtype
//               ("f32" or "u8"). Either filename may be passed.
// uchar/u8 payloads are promoted to float on read_volume.
Volume read_volume(const std::string& path);
LabelMap read_labelmap(const std::string& path);

VolumeFormat format_from_path(const std::string& path);

void write_volume(const Volume& vol, const std::string& path, VolumeFormat format);
void write_labelmap(const LabelMap& lm, const std::string& path, VolumeFormat format);

inline void write_volume(const Volume& vol, const std::string& path) {
    write_volume(vol, path, format_from_path(path));
}
inline void write_labelmap(const LabelMap& lm, const std::string& path) {
    write_labelmap(lm, path, format_from_path(path));
}

} // namespace usseg

#endif

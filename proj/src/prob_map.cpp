#include "usseg/prob_map.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "usseg/errors.hpp"

namespace usseg {

namespace {

using nlohmann::json;

std::pair<std::string, std::string> sidecar_paths(const std::string& path) {
    std::filesystem::path p(path);
    std::string ext = p.extension().string();
    if (ext == ".json") return {path, p.replace_extension(".raw").string()};
    if (ext == ".raw") return {std::filesystem::path(path).replace_extension(".json").string(), path};
    throw FormatError("probability map: path must end in .json or .raw: " + path);
}

} // namespace

void validate(const ProbabilityMap& pm) {
    if (pm.dims[0] <= 0 || pm.dims[1] <= 0 || pm.dims[2] <= 0)
        throw ValidationError("probability map dims must be positive");
    if (pm.probs.size() != 3 * pm.voxels())
        throw ValidationError("probability map data length != 3 * voxels");
    for (size_t i = 0; i < pm.voxels(); ++i) {
        float s = 0;
        for (int l = 0; l < 3; ++l) {
            float p = pm.at(i, l);
            if (!(p >= 0.0f) || !std::isfinite(p))
                throw ValidationError("probability map has a negative or non-finite entry");
            s += p;
        }
        if (std::abs(s - 1.0f) > 1e-5f)
            throw ValidationError("probability map voxel does not sum to 1 (got " + std::to_string(s) + ")");
    }
}

ProbabilityMap read_prob_map(const std::string& path) {
    auto [json_path, raw_path] = sidecar_paths(path);
    std::ifstream jf(json_path);
    if (!jf) throw FormatError("cannot open sidecar: " + json_path);
    json j;
    try {
        jf >> j;
    } catch (const json::exception& e) {
        throw FormatError("sidecar " + json_path + ": " + e.what());
    }
    ProbabilityMap pm;
    try {
        for (int a = 0; a < 3; ++a) pm.dims[a] = j.at("dims").at(a).get<int>();
        if (j.at("channels").get<int>() != 3) throw FormatError("probability map must have 3 channels");
        if (j.at("dtype").get<std::string>() != "f32") throw FormatError("probability map dtype must be f32");
        if (j.at("layout").get<std::string>() != "channel-fastest")
            throw FormatError("probability map layout must be channel-fastest");
    } catch (const json::exception& e) {
        throw FormatError("sidecar " + json_path + ": " + e.what());
    }
    std::ifstream rf(raw_path, std::ios::binary);
    if (!rf) throw FormatError("cannot open payload: " + raw_path);
    rf.seekg(0, std::ios::end);
    size_t bytes = static_cast<size_t>(rf.tellg());
    rf.seekg(0, std::ios::beg);
    if (bytes != 3 * pm.voxels() * 4)
        throw IntegrityError("probability map payload is " + std::to_string(bytes) + " bytes, sidecar implies " +
                             std::to_string(3 * pm.voxels() * 4));
    pm.probs.resize(3 * pm.voxels());
    rf.read(reinterpret_cast<char*>(pm.probs.data()), static_cast<std::streamsize>(bytes));
    if (!rf) throw IntegrityError("short read: " + raw_path);
    validate(pm);
    return pm;
}

void write_prob_map(const ProbabilityMap& pm, const std::string& path) {
    validate(pm);
    auto [json_path, raw_path] = sidecar_paths(path);
    json j;
    j["dims"] = pm.dims;
    j["channels"] = 3;
    j["dtype"] = "f32";
    j["layout"] = "channel-fastest";
    std::ofstream jf(json_path);
    if (!jf) throw FormatError("cannot open for writing: " + json_path);
    jf << j.dump(2) << "\n";
    std::ofstream rf(raw_path, std::ios::binary);
    if (!rf) throw FormatError("cannot open for writing: " + raw_path);
    rf.write(reinterpret_cast<const char*>(pm.probs.data()),
             static_cast<std::streamsize>(pm.probs.size() * 4));
    if (!rf) throw FormatError("write failed: " + raw_path);
}

} // namespace usseg

#include "usseg/volume_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "usseg/errors.hpp"

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace usseg {

namespace {

using nlohmann::json;

struct RawImage {
    std::array<int, 3> dims;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    bool is_u8 = false;
    std::vector<float> fdata;  // valid when !is_u8
    std::vector<uint8_t> udata; // valid when is_u8
};

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::byte> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    std::streamoff len = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<std::byte> buf(static_cast<size_t>(len));
    if (len > 0) f.read(reinterpret_cast<char*>(buf.data()), len);
    if (!f) throw IntegrityError("short read: " + path);
    return buf;
}

// --- NRRD ------------------------------------------------------------

std::array<double, 3> parse_vector3(const std::string& s, const char* field) {
    double v[3];
    if (std::sscanf(s.c_str(), " ( %lf , %lf , %lf )", &v[0], &v[1], &v[2]) != 3)
        throw FormatError(std::string(field) + ": cannot parse vector '" + s + "'");
    return {v[0], v[1], v[2]};
}

RawImage read_nrrd(const std::string& path) {
    std::vector<std::byte> file = read_file(path);
    // header = lines up to the first blank line
    size_t pos = 0, header_end = 0;
    std::vector<std::string> lines;
    while (pos < file.size()) {
        size_t eol = pos;
        while (eol < file.size() && static_cast<char>(file[eol]) != '\n') ++eol;
        std::string line(reinterpret_cast<const char*>(file.data()) + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            header_end = eol + 1;
            break;
        }
        lines.push_back(line);
        pos = eol + 1;
        if (eol >= file.size()) throw FormatError("nrrd: missing blank line after header");
    }
    if (lines.empty() || lines[0].rfind("NRRD", 0) != 0)
        throw FormatError("nrrd: missing NRRD magic");

    std::string type, encoding, endian, sizes, space_dirs, space_origin;
    int dimension = -1;
    for (size_t i = 1; i < lines.size(); ++i) {
        const std::string& l = lines[i];
        if (l[0] == '#') continue;
        size_t colon = l.find(": ");
        if (colon == std::string::npos) {
            if (l.find(":=") != std::string::npos) continue; // key-value comments
            throw FormatError("nrrd: malformed header line '" + l + "'");
        }
        std::string key = trim(l.substr(0, colon));
        std::string val = trim(l.substr(colon + 2));
        if (key == "type") type = val;
        else if (key == "dimension") dimension = std::stoi(val);
        else if (key == "sizes") sizes = val;
        else if (key == "encoding") encoding = val;
        else if (key == "endian") endian = val;
        else if (key == "space directions") space_dirs = val;
        else if (key == "space origin") space_origin = val;
        // other fields (space, kinds, ...) are ignored
    }

    if (dimension != 3) throw FormatError("nrrd: dimension must be 3, got " + std::to_string(dimension));
    if (encoding != "raw") throw FormatError("nrrd: encoding '" + encoding + "' unsupported (raw only)");
    if (!endian.empty() && endian != "little") throw FormatError("nrrd: endian '" + endian + "' unsupported");

    RawImage img;
    if (type == "float") img.is_u8 = false;
    else if (type == "uchar" || type == "unsigned char" || type == "uint8") img.is_u8 = true;
    else throw FormatError("nrrd: type '" + type + "' unsupported (float or uchar)");

    if (std::sscanf(sizes.c_str(), "%d %d %d", &img.dims[0], &img.dims[1], &img.dims[2]) != 3)
        throw FormatError("nrrd: cannot parse sizes '" + sizes + "'");
    if (img.dims[0] <= 0 || img.dims[1] <= 0 || img.dims[2] <= 0)
        throw FormatError("nrrd: sizes must be positive");

    if (!space_dirs.empty()) {
        std::istringstream ss(space_dirs);
        std::string tok;
        std::array<std::array<double, 3>, 3> m;
        for (int a = 0; a < 3; ++a) {
            if (!(ss >> tok)) throw FormatError("nrrd: space directions needs 3 vectors");
            m[a] = parse_vector3(tok, "space directions");
        }
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                if (a != b && m[a][b] != 0.0)
                    throw FormatError("nrrd: space directions must be diagonal");
        for (int a = 0; a < 3; ++a) img.spacing[a] = m[a][a];
    }
    if (!space_origin.empty()) img.origin = parse_vector3(space_origin, "space origin");

    size_t n = static_cast<size_t>(img.dims[0]) * img.dims[1] * img.dims[2];
    size_t elem = img.is_u8 ? 1 : 4;
    size_t payload = file.size() - header_end;
    if (payload != n * elem)
        throw IntegrityError("nrrd: payload is " + std::to_string(payload) + " bytes, header implies " +
                             std::to_string(n * elem));
    if (img.is_u8) {
        img.udata.resize(n);
        std::memcpy(img.udata.data(), file.data() + header_end, n);
    } else {
        img.fdata.resize(n);
        std::memcpy(img.fdata.data(), file.data() + header_end, n * 4);
    }
    return img;
}

void write_nrrd(const RawImage& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open for writing: " + path);
    f << "NRRD0004\n";
    f << "type: " << (img.is_u8 ? "uchar" : "float") << "\n";
    f << "dimension: 3\n";
    f << "sizes: " << img.dims[0] << " " << img.dims[1] << " " << img.dims[2] << "\n";
    f << "encoding: raw\n";
    f << "endian: little\n";
    f << "space directions: (" << fmt_double(img.spacing[0]) << ",0,0) (0," << fmt_double(img.spacing[1])
      << ",0) (0,0," << fmt_double(img.spacing[2]) << ")\n";
    f << "space origin: (" << fmt_double(img.origin[0]) << "," << fmt_double(img.origin[1]) << ","
      << fmt_double(img.origin[2]) << ")\n";
    f << "\n";
    if (img.is_u8)
        f.write(reinterpret_cast<const char*>(img.udata.data()), img.udata.size());
    else
        f.write(reinterpret_cast<const char*>(img.fdata.data()), img.fdata.size() * 4);
    if (!f) throw FormatError("write failed: " + path);
}

// --- raw + JSON sidecar ----------------------------------------------

std::pair<std::string, std::string> sidecar_paths(const std::string& path) {
    std::filesystem::path p(path);
    std::string ext = p.extension().string();
    if (ext == ".json") return {path, p.replace_extension(".raw").string()};
    if (ext == ".raw") return {std::filesystem::path(path).replace_extension(".json").string(), path};
    throw FormatError("raw-json: path must end in .json or .raw: " + path);
}

RawImage read_raw_json(const std::string& path) {
    auto [json_path, raw_path] = sidecar_paths(path);
    std::ifstream jf(json_path);
    if (!jf) throw FormatError("cannot open sidecar: " + json_path);
    json j;
    try {
        jf >> j;
    } catch (const json::exception& e) {
        throw FormatError("sidecar " + json_path + ": " + e.what());
    }
    RawImage img;
    try {
        auto dims = j.at("dims");
        for (int a = 0; a < 3; ++a) img.dims[a] = dims.at(a).get<int>();
        if (j.contains("spacing"))
            for (int a = 0; a < 3; ++a) img.spacing[a] = j["spacing"].at(a).get<double>();
        if (j.contains("origin"))
            for (int a = 0; a < 3; ++a) img.origin[a] = j["origin"].at(a).get<double>();
        std::string dtype = j.at("dtype").get<std::string>();
        if (dtype == "f32") img.is_u8 = false;
        else if (dtype == "u8") img.is_u8 = true;
        else throw FormatError("sidecar dtype '" + dtype + "' unsupported (f32 or u8)");
    } catch (const json::exception& e) {
        throw FormatError("sidecar " + json_path + ": " + e.what());
    }
    if (img.dims[0] <= 0 || img.dims[1] <= 0 || img.dims[2] <= 0)
        throw FormatError("sidecar dims must be positive");

    std::vector<std::byte> payload = read_file(raw_path);
    size_t n = static_cast<size_t>(img.dims[0]) * img.dims[1] * img.dims[2];
    size_t elem = img.is_u8 ? 1 : 4;
    if (payload.size() != n * elem)
        throw IntegrityError("raw payload is " + std::to_string(payload.size()) + " bytes, sidecar implies " +
                             std::to_string(n * elem));
    if (img.is_u8) {
        img.udata.resize(n);
        std::memcpy(img.udata.data(), payload.data(), n);
    } else {
        img.fdata.resize(n);
        std::memcpy(img.fdata.data(), payload.data(), n * 4);
    }
    return img;
}

void write_raw_json(const RawImage& img, const std::string& path) {
    auto [json_path, raw_path] = sidecar_paths(path);
    json j;
    j["dims"] = img.dims;
    j["spacing"] = img.spacing;
    j["origin"] = img.origin;
    j["dtype"] = img.is_u8 ? "u8" : "f32";
    std::ofstream jf(json_path);
    if (!jf) throw FormatError("cannot open for writing: " + json_path);
    jf << j.dump(2) << "\n";
    std::ofstream rf(raw_path, std::ios::binary);
    if (!rf) throw FormatError("cannot open for writing: " + raw_path);
    if (img.is_u8)
        rf.write(reinterpret_cast<const char*>(img.udata.data()), img.udata.size());
    else
        rf.write(reinterpret_cast<const char*>(img.fdata.data()), img.fdata.size() * 4);
    if (!rf) throw FormatError("write failed: " + raw_path);
}

RawImage read_any(const std::string& path) {
    return format_from_path(path) == VolumeFormat::nrrd ? read_nrrd(path) : read_raw_json(path);
}

} // namespace

VolumeFormat format_from_path(const std::string& path) {
    std::string ext = std::filesystem::path(path).extension().string();
    if (ext == ".nrrd") return VolumeFormat::nrrd;
    if (ext == ".json" || ext == ".raw") return VolumeFormat::raw_json;
    throw FormatError("cannot infer format from extension '" + ext + "' (use .nrrd, .json or .raw)");
}

Volume read_volume(const std::string& path) {
    RawImage img = read_any(path);
    Volume v;
    v.dims = img.dims;
    v.spacing = img.spacing;
    v.origin = img.origin;
    if (img.is_u8) {
        v.data.resize(img.udata.size());
        for (size_t i = 0; i < img.udata.size(); ++i) v.data[i] = static_cast<float>(img.udata[i]);
    } else {
        v.data = std::move(img.fdata);
    }
    validate(v);
    return v;
}

LabelMap read_labelmap(const std::string& path) {
    RawImage img = read_any(path);
    if (!img.is_u8) throw FormatError("labelmap must be stored as uchar/u8: " + path);
    LabelMap lm;
    lm.dims = img.dims;
    lm.spacing = img.spacing;
    lm.origin = img.origin;
    lm.labels = std::move(img.udata);
    validate(lm);
    return lm;
}

void write_volume(const Volume& vol, const std::string& path, VolumeFormat format) {
    validate(vol);
    RawImage img;
    img.dims = vol.dims;
    img.spacing = vol.spacing;
    img.origin = vol.origin;
    img.is_u8 = false;
    img.fdata = vol.data;
    format == VolumeFormat::nrrd ? write_nrrd(img, path) : write_raw_json(img, path);
}

void write_labelmap(const LabelMap& lm, const std::string& path, VolumeFormat format) {
    validate(lm);
    RawImage img;
    img.dims = lm.dims;
    img.spacing = lm.spacing;
    img.origin = lm.origin;
    img.is_u8 = true;
    img.udata = lm.labels;
    format == VolumeFormat::nrrd ? write_nrrd(img, path) : write_raw_json(img, path);
}

} // namespace usseg

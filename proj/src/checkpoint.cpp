#include "usseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "usseg/errors.hpp"

namespace usseg {

namespace {

using nlohmann::json;

json config_to_json(const NetworkConfig& c) {
    json j;
    j["activation"] = to_string(c.activation);
    j["pathway_widths"] = c.pathway_widths;
    j["head_widths"] = c.head_widths;
    j["factors"] = c.factors;
    j["bn_eps"] = c.bn_eps;
    j["bn_momentum"] = c.bn_momentum;
    j["prelu_init"] = c.prelu_init;
    return j;
}

NetworkConfig config_from_json(const json& j) {
    NetworkConfig c;
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.pathway_widths = j.at("pathway_widths").get<std::vector<int>>();
    c.head_widths = j.at("head_widths").get<std::vector<int>>();
    auto f = j.at("factors").get<std::vector<int>>();
    if (f.size() != 3) throw IntegrityError("checkpoint: factors must have 3 entries");
    c.factors = {f[0], f[1], f[2]};
    c.bn_eps = j.at("bn_eps").get<double>();
    c.bn_momentum = j.at("bn_momentum").get<double>();
    c.prelu_init = j.at("prelu_init").get<double>();
    return c;
}

struct BlobWriter {
    std::ofstream f;
    size_t offset = 0; // bytes
    json entries = json::array();

    explicit BlobWriter(const std::string& path) : f(path, std::ios::binary) {
        if (!f) throw FormatError("cannot open for writing: " + path);
    }
    void add(const std::string& name, const std::vector<float>& v, const std::vector<int>& shape) {
        json e;
        e["name"] = name;
        e["shape"] = shape;
        e["offset"] = offset;
        e["count"] = v.size();
        entries.push_back(e);
        f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
        offset += v.size() * 4;
    }
};

struct BlobReader {
    std::vector<char> bytes;

    explicit BlobReader(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw FormatError("cannot open checkpoint blob: " + path);
        f.seekg(0, std::ios::end);
        bytes.resize(static_cast<size_t>(f.tellg()));
        f.seekg(0, std::ios::beg);
        f.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw IntegrityError("short read on checkpoint blob: " + path);
    }
    void fetch(const json& entry, std::vector<float>& into) const {
        size_t offset = entry.at("offset").get<size_t>();
        size_t count = entry.at("count").get<size_t>();
        if (offset + count * 4 > bytes.size())
            throw IntegrityError("checkpoint blob truncated: tensor '" +
                                 entry.at("name").get<std::string>() + "' exceeds file size");
        into.resize(count);
        std::memcpy(into.data(), bytes.data() + offset, count * 4);
    }
};

} // namespace

void save_checkpoint(const Network& net, const AdamState* opt, int64_t iteration,
                     const std::string& stem) {
    BlobWriter blob(stem + ".bin");
    Network& mut = const_cast<Network&>(net); // traversal only reads
    for_each_state(mut, [&](const std::string& name, std::vector<float>& v, const std::vector<int>& shape) {
        blob.add(name, v, shape);
    });

    json j;
    j["format"] = "usseg-checkpoint-v1";
    j["dtype"] = "f32";
    j["iteration"] = iteration;
    j["config"] = config_to_json(net.config);
    if (opt) {
        json adam_entries = json::array();
        size_t i = 0;
        for_each_param(mut, [&](const std::string& name, std::vector<float>&, const std::vector<int>& shape) {
            blob.add("adam.m." + name, opt->m.at(i), shape);
            blob.add("adam.v." + name, opt->v.at(i), shape);
            adam_entries.push_back(name);
            ++i;
        });
        json o;
        o["t"] = opt->t;
        o["beta1"] = opt->beta1;
        o["beta2"] = opt->beta2;
        o["eps"] = opt->eps;
        o["params"] = adam_entries;
        j["optimizer"] = o;
    } else {
        j["optimizer"] = nullptr;
    }
    j["tensors"] = blob.entries;
    if (!blob.f) throw FormatError("write failed: " + stem + ".bin");
    blob.f.close();

    std::ofstream mf(stem + ".json");
    if (!mf) throw FormatError("cannot open for writing: " + stem + ".json");
    mf << j.dump(2) << "\n";
    if (!mf) throw FormatError("write failed: " + stem + ".json");
}

Checkpoint load_checkpoint(const std::string& stem) {
    std::ifstream mf(stem + ".json");
    if (!mf) throw FormatError("cannot open checkpoint manifest: " + stem + ".json");
    json j;
    try {
        mf >> j;
    } catch (const json::exception& e) {
        throw FormatError("checkpoint manifest " + stem + ".json: " + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "usseg-checkpoint-v1")
            throw FormatError("checkpoint: unknown format tag");
        if (j.at("dtype").get<std::string>() != "f32")
            throw FormatError("checkpoint: dtype must be f32");

        Checkpoint ck;
        ck.iteration = j.at("iteration").get<int64_t>();
        NetworkConfig config = config_from_json(j.at("config"));
        Rng scratch(0);
        ck.net = make_network<float>(config, scratch);

        std::map<std::string, const json*> by_name;
        for (const auto& e : j.at("tensors")) by_name[e.at("name").get<std::string>()] = &e;

        BlobReader blob(stem + ".bin");
        size_t used = 0;
        for_each_state(ck.net, [&](const std::string& name, std::vector<float>& v, const std::vector<int>&) {
            auto it = by_name.find(name);
            if (it == by_name.end()) throw IntegrityError("checkpoint: missing tensor '" + name + "'");
            size_t want = v.size();
            blob.fetch(*it->second, v);
            if (v.size() != want)
                throw IntegrityError("checkpoint: tensor '" + name + "' has count " + std::to_string(v.size()) +
                                     ", network expects " + std::to_string(want));
            ++used;
        });

        if (!j.at("optimizer").is_null()) {
            const json& o = j.at("optimizer");
            AdamState st;
            st.t = o.at("t").get<int64_t>();
            st.beta1 = o.at("beta1").get<double>();
            st.beta2 = o.at("beta2").get<double>();
            st.eps = o.at("eps").get<double>();
            for_each_param(ck.net, [&](const std::string& name, std::vector<float>& v, const std::vector<int>&) {
                auto mi = by_name.find("adam.m." + name);
                auto vi = by_name.find("adam.v." + name);
                if (mi == by_name.end() || vi == by_name.end())
                    throw IntegrityError("checkpoint: missing optimizer state for '" + name + "'");
                std::vector<float> m, vv;
                blob.fetch(*mi->second, m);
                blob.fetch(*vi->second, vv);
                if (m.size() != v.size() || vv.size() != v.size())
                    throw IntegrityError("checkpoint: optimizer state size mismatch for '" + name + "'");
                st.m.push_back(std::move(m));
                st.v.push_back(std::move(vv));
            });
            ck.opt = std::move(st);
        }
        return ck;
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }
}

void require_activation(const Checkpoint& ck, Activation want) {
    if (ck.net.config.activation != want)
        throw ConfigError("checkpoint activation is " + to_string(ck.net.config.activation) +
                          " but the run is configured for " + to_string(want));
}

} // namespace usseg

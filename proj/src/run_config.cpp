#include "usseg/run_config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "usseg/errors.hpp"

namespace usseg {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + scope);
}

std::array<double, 3> triple(const json& j, const std::string& key) {
    auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 3) throw ConfigError("key '" + key + "' needs exactly 3 values");
    return {v[0], v[1], v[2]};
}

RunConfig from_json(const json& j) {
    RunConfig c;
    reject_unknown(j, {"seed", "batch_size", "iterations", "activation", "lr_base", "lr_max", "lr_step",
                       "widths", "head_widths", "synthetic_fraction", "checkpoint_every", "data_dir",
                       "out_dir", "crf", "sim"},
                   "run config");
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("iterations")) c.iterations = j["iterations"].get<int64_t>();
    if (j.contains("activation")) c.activation = activation_from_string(j["activation"].get<std::string>());
    if (j.contains("lr_base")) c.lr_base = j["lr_base"].get<double>();
    if (j.contains("lr_max")) c.lr_max = j["lr_max"].get<double>();
    if (j.contains("lr_step")) c.lr_step = j["lr_step"].get<int64_t>();
    if (j.contains("widths")) c.widths = j["widths"].get<std::vector<int>>();
    if (j.contains("head_widths")) c.head_widths = j["head_widths"].get<std::vector<int>>();
    if (j.contains("synthetic_fraction")) c.synthetic_fraction = j["synthetic_fraction"].get<double>();
    if (j.contains("checkpoint_every")) c.checkpoint_every = j["checkpoint_every"].get<int64_t>();
    if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("crf")) {
        const json& jc = j["crf"];
        reject_unknown(jc, {"w_spatial", "theta_gamma", "w_bilateral", "theta_alpha", "theta_beta",
                            "iterations", "path"},
                       "crf config");
        if (jc.contains("w_spatial")) c.crf.w_spatial = jc["w_spatial"].get<float>();
        if (jc.contains("theta_gamma")) c.crf.theta_gamma = jc["theta_gamma"].get<float>();
        if (jc.contains("w_bilateral")) c.crf.w_bilateral = jc["w_bilateral"].get<float>();
        if (jc.contains("theta_alpha")) c.crf.theta_alpha = jc["theta_alpha"].get<float>();
        if (jc.contains("theta_beta")) c.crf.theta_beta = jc["theta_beta"].get<float>();
        if (jc.contains("iterations")) c.crf.iterations = jc["iterations"].get<int>();
        if (jc.contains("path")) {
            std::string p = jc["path"].get<std::string>();
            if (p == "exact") c.crf.path = FilterPath::exact;
            else if (p == "truncated") c.crf.path = FilterPath::truncated;
            else throw ConfigError("crf path must be 'exact' or 'truncated'");
        }
    }
    if (j.contains("sim")) {
        const json& js = j["sim"];
        reject_unknown(js, {"impedance", "attenuation", "scatter_density", "scatter_amp", "psf_sigmas",
                            "per_case"},
                       "sim config");
        if (js.contains("impedance")) c.acoustics.impedance = triple(js, "impedance");
        if (js.contains("attenuation")) c.acoustics.attenuation = triple(js, "attenuation");
        if (js.contains("scatter_density")) c.acoustics.scatter_density = triple(js, "scatter_density");
        if (js.contains("scatter_amp")) c.acoustics.scatter_amp = triple(js, "scatter_amp");
        if (js.contains("psf_sigmas")) {
            auto p = triple(js, "psf_sigmas"); // axial, lateral, elevational
            c.psf.axial = p[0];
            c.psf.lateral = p[1];
            c.psf.elevational = p[2];
        }
        if (js.contains("per_case")) c.sim_per_case = js["per_case"].get<int>();
    }
    c.validate();
    return c;
}

} // namespace

void RunConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (synthetic_fraction <= 0.0 || synthetic_fraction > 1.0)
        throw ConfigError("synthetic_fraction must be in (0, 1]");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (sim_per_case < 1) throw ConfigError("sim per_case must be >= 1");
    network_config().validate();
    schedule().validate();
    crf.validate();
    acoustics.validate();
}

NetworkConfig RunConfig::network_config() const {
    NetworkConfig nc;
    nc.activation = activation;
    nc.pathway_widths = widths;
    nc.head_widths = head_widths;
    return nc;
}

CyclicLr RunConfig::schedule() const { return CyclicLr{lr_base, lr_max, lr_step}; }

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return from_json(j);
}

RunConfig parse_run_config(const std::string& json_text) {
    try {
        return from_json(json::parse(json_text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

} // namespace usseg

// Propagation run configuration, parsed from flat key=value text.
// Every key is optional; the resolved snapshot always lists all of them.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "segprop/common.hpp"

namespace segprop {

struct HomographyConfig {
    bool enabled = false;
    double weight = 1.0;
    int samples = 500;
    uint64_t seed = 17;
    double reject_px2 = 4.0;
};

struct FilterConfig {
    bool enabled = true;
    double sigma_s = 1.5;
    double sigma_t = 1.0;
    int radius = 2;
};

struct PropagationConfig {
    double lambda = 0.05;
    std::vector<int> offsets = {-10, -5, 5, 10};
    int max_iters = 7;
    double epsilon = 1e-4;        // convergence: changed-argmax pixel fraction
    double total_vote_mass = 1.0;
    std::string tie_rule = "lowest";
    std::string init = "alg1";    // alg1 | uniform
    bool flow_votes = true;       // optical-flow voting on/off (off = plugin sources only)
    std::map<std::string, double> source_weights;  // sources.<id> = weight
    HomographyConfig homography;
    FilterConfig filter;

    double source_weight(const std::string& id, double fallback = 0.25) const {
        auto it = source_weights.find(id);
        return it == source_weights.end() ? fallback : it->second;
    }
};

inline std::vector<int> parse_offsets(const std::string& s) {
    std::vector<int> out;
    for (const std::string& part : split(s, ',')) {
        std::string t = trim(part);
        if (t.empty()) continue;
        size_t pos = 0;
        int v = std::stoi(t, &pos);
        if (pos != t.size() || v == 0) throw Error("bad offset: " + t);
        out.push_back(v);
    }
    if (out.empty()) throw Error("offsets list is empty");
    std::sort(out.begin(), out.end());
    return out;
}

inline PropagationConfig parse_config(const KvMap& kv) {
    PropagationConfig c;
    static const char* known[] = {
        "lambda", "offsets", "max_iters", "epsilon", "total_vote_mass", "tie_rule",
        "init", "flow.enabled", "homography.enabled", "homography.weight",
        "homography.samples", "homography.seed", "homography.reject_px2",
        "filter.enabled", "filter.sigma_s", "filter.sigma_t", "filter.radius"};
    for (const auto& [k, v] : kv) {
        bool ok = k.rfind("sources.", 0) == 0;
        for (const char* name : known) ok = ok || k == name;
        if (!ok) throw Error("unknown config key: " + k);
    }
    c.lambda = kv_double(kv, "lambda", c.lambda);
    if (c.lambda < 0) throw Error("lambda must be >= 0");
    if (auto it = kv.find("offsets"); it != kv.end()) c.offsets = parse_offsets(it->second);
    c.max_iters = kv_int(kv, "max_iters", c.max_iters);
    c.epsilon = kv_double(kv, "epsilon", c.epsilon);
    c.total_vote_mass = kv_double(kv, "total_vote_mass", c.total_vote_mass);
    if (c.total_vote_mass <= 0) throw Error("total_vote_mass must be > 0");
    if (auto it = kv.find("tie_rule"); it != kv.end()) c.tie_rule = it->second;
    if (c.tie_rule != "lowest") throw Error("unsupported tie_rule: " + c.tie_rule);
    if (auto it = kv.find("init"); it != kv.end()) c.init = it->second;
    if (c.init != "alg1" && c.init != "uniform") throw Error("unsupported init: " + c.init);
    c.flow_votes = kv_bool(kv, "flow.enabled", c.flow_votes);
    c.homography.enabled = kv_bool(kv, "homography.enabled", c.homography.enabled);
    c.homography.weight = kv_double(kv, "homography.weight", c.homography.weight);
    c.homography.samples = kv_int(kv, "homography.samples", c.homography.samples);
    c.homography.seed = static_cast<uint64_t>(
        kv_double(kv, "homography.seed", static_cast<double>(c.homography.seed)));
    c.homography.reject_px2 = kv_double(kv, "homography.reject_px2", c.homography.reject_px2);
    c.filter.enabled = kv_bool(kv, "filter.enabled", c.filter.enabled);
    c.filter.sigma_s = kv_double(kv, "filter.sigma_s", c.filter.sigma_s);
    c.filter.sigma_t = kv_double(kv, "filter.sigma_t", c.filter.sigma_t);
    c.filter.radius = kv_int(kv, "filter.radius", c.filter.radius);
    for (const auto& [k, v] : kv) {
        if (k.rfind("sources.", 0) == 0)
            c.source_weights[k.substr(8)] = kv_double(kv, k, 0.25);
    }
    return c;
}

inline KvList config_kv(const PropagationConfig& c) {
    KvList out;
    out.emplace_back("lambda", format_double(c.lambda));
    std::string offs;
    for (size_t i = 0; i < c.offsets.size(); ++i)
        offs += (i ? "," : "") + std::to_string(c.offsets[i]);
    out.emplace_back("offsets", offs);
    out.emplace_back("max_iters", std::to_string(c.max_iters));
    out.emplace_back("epsilon", format_double(c.epsilon));
    out.emplace_back("total_vote_mass", format_double(c.total_vote_mass));
    out.emplace_back("tie_rule", c.tie_rule);
    out.emplace_back("init", c.init);
    out.emplace_back("flow.enabled", c.flow_votes ? "true" : "false");
    out.emplace_back("homography.enabled", c.homography.enabled ? "true" : "false");
    out.emplace_back("homography.weight", format_double(c.homography.weight));
    out.emplace_back("homography.samples", std::to_string(c.homography.samples));
    out.emplace_back("homography.seed", std::to_string(c.homography.seed));
    out.emplace_back("homography.reject_px2", format_double(c.homography.reject_px2));
    out.emplace_back("filter.enabled", c.filter.enabled ? "true" : "false");
    out.emplace_back("filter.sigma_s", format_double(c.filter.sigma_s));
    out.emplace_back("filter.sigma_t", format_double(c.filter.sigma_t));
    out.emplace_back("filter.radius", std::to_string(c.filter.radius));
    for (const auto& [k, v] : c.source_weights)
        out.emplace_back("sources." + k, format_double(v));
    return out;
}

}  // namespace segprop

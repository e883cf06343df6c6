#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinglass/errors.hpp"
#include "spinglass/mixture.hpp"

namespace spinglass::cli {

using nlohmann::json;

struct ParisiBlock {
    int k = 1;
    int restarts = 8;
    int system = 1; // which system the `parisi` command reports on
};

struct FixedPointBlock {
    double tol = 1e-9;
};

struct BoundBlock {
    int u_grid = 21;
    double v1 = -1.0; // negative: default to the support minimum c_j
    double v2 = -1.0;
};

struct SimulateBlock {
    int N = 8;
    int M = 100;
    std::string scheme = "tensor";
};

struct GGBlock {
    int n = 2;
    std::string psi = "x^2";
    std::string f = "1";
};

struct ExperimentConfig {
    CoupledModelSpec model;
    std::uint64_t seed = 0;
    int quad_n = 40;
    std::string out_dir = ".";
    ParisiBlock parisi;
    FixedPointBlock fixed_point;
    BoundBlock bound;
    SimulateBlock simulate;
    GGBlock gg;

    explicit ExperimentConfig(CoupledModelSpec m) : model(std::move(m)) {}
};

namespace detail {

inline void reject_unknown(const json& obj, const std::vector<std::string>& known,
                           const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const auto& k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw domain_error("config: unknown key '" + it.key() + "' in " + where);
    }
}

inline std::vector<double> number_list(const json& j, const std::string& key) {
    if (!j.is_array()) throw domain_error("config: '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw domain_error("config: '" + key + "' must contain numbers only");
        out.push_back(v.get<double>());
    }
    if (out.empty()) throw domain_error("config: '" + key + "' must not be empty");
    return out;
}

template <typename T>
T range_checked(const json& obj, const std::string& key, T lo, T hi, T dflt) {
    if (!obj.contains(key)) return dflt;
    const T v = obj.at(key).get<T>();
    if (v < lo || v > hi)
        throw domain_error("config: '" + key + "' out of range [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
    return v;
}

inline int line_of_offset(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

} // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw domain_error("config: parse error at line " +
                           std::to_string(detail::line_of_offset(text, e.byte)) + ": " + e.what());
    }
    if (!root.is_object()) throw domain_error("config: top level must be an object");
    detail::reject_unknown(
        root, {"model", "seed", "quad_n", "out", "parisi", "fixed_point", "bound", "simulate", "gg"},
        "top level");

    if (!root.contains("model")) throw domain_error("config: missing key 'model'");
    const json& jm = root.at("model");
    detail::reject_unknown(jm, {"beta1", "beta2", "t", "field"}, "'model'");
    if (!jm.contains("beta1")) throw domain_error("config: missing key 'beta1' in 'model'");
    if (!jm.contains("beta2")) throw domain_error("config: missing key 'beta2' in 'model'");
    const auto beta1 = detail::number_list(jm.at("beta1"), "beta1");
    const auto beta2 = detail::number_list(jm.at("beta2"), "beta2");
    std::vector<double> t(std::max(beta1.size(), beta2.size()), 1.0);
    if (jm.contains("t")) t = detail::number_list(jm.at("t"), "t");
    for (double tp : t)
        if (!(tp >= 0.0 && tp <= 1.0)) throw domain_error("config: t_p must lie in [0,1]");

    FieldLaw field;
    if (jm.contains("field")) {
        const json& jf = jm.at("field");
        detail::reject_unknown(jf, {"mean1", "mean2", "std1", "std2", "corr"}, "'field'");
        field.mean1 = jf.value("mean1", 0.0);
        field.mean2 = jf.value("mean2", 0.0);
        field.std1 = jf.value("std1", 0.0);
        field.std2 = jf.value("std2", 0.0);
        field.corr = jf.value("corr", 0.0);
        if (!(field.std1 >= 0.0) || !(field.std2 >= 0.0))
            throw domain_error("config: field std must be >= 0");
        if (!(std::fabs(field.corr) <= 1.0)) throw domain_error("config: |field corr| must be <= 1");
    }

    ExperimentConfig cfg(CoupledModelSpec(MixtureSpec(beta1), MixtureSpec(beta2), t, field));
    cfg.seed = root.value("seed", std::uint64_t{0});
    cfg.quad_n = detail::range_checked<int>(root, "quad_n", 4, 256, 40);
    cfg.out_dir = root.value("out", std::string("."));

    if (root.contains("parisi")) {
        const json& jp = root.at("parisi");
        detail::reject_unknown(jp, {"k", "restarts", "system"}, "'parisi'");
        cfg.parisi.k = detail::range_checked<int>(jp, "k", 0, 8, 1);
        cfg.parisi.restarts = detail::range_checked<int>(jp, "restarts", 1, 64, 8);
        cfg.parisi.system = detail::range_checked<int>(jp, "system", 1, 2, 1);
    }
    if (root.contains("fixed_point")) {
        const json& jf = root.at("fixed_point");
        detail::reject_unknown(jf, {"tol"}, "'fixed_point'");
        cfg.fixed_point.tol = detail::range_checked<double>(jf, "tol", 1e-14, 1e-2, 1e-9);
    }
    if (root.contains("bound")) {
        const json& jb = root.at("bound");
        detail::reject_unknown(jb, {"u_grid", "v1", "v2"}, "'bound'");
        cfg.bound.u_grid = detail::range_checked<int>(jb, "u_grid", 3, 2001, 21);
        if (jb.contains("v1")) cfg.bound.v1 = detail::range_checked<double>(jb, "v1", 1e-6, 0.999999, -1.0);
        if (jb.contains("v2")) cfg.bound.v2 = detail::range_checked<double>(jb, "v2", 1e-6, 0.999999, -1.0);
    }
    if (root.contains("simulate")) {
        const json& js = root.at("simulate");
        detail::reject_unknown(js, {"N", "M", "scheme"}, "'simulate'");
        cfg.simulate.N = detail::range_checked<int>(js, "N", 1, 24, 8);
        cfg.simulate.M = detail::range_checked<int>(js, "M", 2, 1000000, 100);
        cfg.simulate.scheme = js.value("scheme", std::string("tensor"));
        if (cfg.simulate.scheme != "tensor" && cfg.simulate.scheme != "config-cholesky")
            throw domain_error("config: scheme must be 'tensor' or 'config-cholesky'");
    }
    if (root.contains("gg")) {
        const json& jg = root.at("gg");
        detail::reject_unknown(jg, {"n", "psi", "f"}, "'gg'");
        cfg.gg.n = detail::range_checked<int>(jg, "n", 1, 4, 2);
        cfg.gg.psi = jg.value("psi", std::string("x^2"));
        cfg.gg.f = jg.value("f", std::string("1"));
    }
    return cfg;
}

// Normalized experiment form: defaults filled, keys ordered (nlohmann sorts
// object keys).  The output directory is a runtime option, not experiment
// semantics, so it is excluded here and from the config hash.
inline json to_json(const ExperimentConfig& c) {
    json j;
    j["model"]["beta1"] = c.model.spec1().betas();
    j["model"]["beta2"] = c.model.spec2().betas();
    j["model"]["t"] = c.model.correlations();
    const FieldLaw& f = c.model.field_law();
    j["model"]["field"] = {{"mean1", f.mean1}, {"mean2", f.mean2}, {"std1", f.std1},
                           {"std2", f.std2},   {"corr", f.corr}};
    j["seed"] = c.seed;
    j["quad_n"] = c.quad_n;
    j["parisi"] = {{"k", c.parisi.k}, {"restarts", c.parisi.restarts}, {"system", c.parisi.system}};
    j["fixed_point"] = {{"tol", c.fixed_point.tol}};
    j["bound"] = {{"u_grid", c.bound.u_grid}};
    if (c.bound.v1 > 0.0) j["bound"]["v1"] = c.bound.v1;
    if (c.bound.v2 > 0.0) j["bound"]["v2"] = c.bound.v2;
    j["simulate"] = {{"N", c.simulate.N}, {"M", c.simulate.M}, {"scheme", c.simulate.scheme}};
    j["gg"] = {{"n", c.gg.n}, {"psi", c.gg.psi}, {"f", c.gg.f}};
    return j;
}

inline std::uint64_t config_hash(const ExperimentConfig& c) {
    const std::string dump = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace spinglass::cli

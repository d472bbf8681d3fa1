#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapfill/errors.hpp"
#include "gapfill/evaluation.hpp"
#include "gapfill/hpo.hpp"
#include "gapfill/mlp.hpp"
#include "gapfill/space.hpp"

namespace gapfill {

/// One schema violation: a JSON pointer into the config plus a message.
struct ConfigIssue {
    std::string path;
    std::string message;
};

class ConfigValidationError : public ConfigError {
public:
    explicit ConfigValidationError(std::vector<ConfigIssue> issues)
        : ConfigError(summarize(issues)), issues_(std::move(issues)) {}

    const std::vector<ConfigIssue>& issues() const { return issues_; }

    /// `{"errors":[{"path":...,"message":...}, ...]}`
    std::string to_json() const {
        nlohmann::json doc;
        doc["errors"] = nlohmann::json::array();
        for (const auto& i : issues_) doc["errors"].push_back({{"path", i.path}, {"message", i.message}});
        return doc.dump();
    }

private:
    static std::string summarize(const std::vector<ConfigIssue>& issues) {
        std::string s = "invalid configuration";
        for (const auto& i : issues) s += "\n  " + (i.path.empty() ? std::string("/") : i.path) + ": " + i.message;
        return s;
    }

    std::vector<ConfigIssue> issues_;
};

struct RunConfig {
    std::string dataset;
    std::string time_column = "date";
    std::string target_column;
    std::size_t frequency = 365;
    bool temporal_features = true;
    HpoConfig hpo;
    TrainConfig train;
    HyperparameterSpace space = HyperparameterSpace::standard();
    std::vector<Method> methods;
    std::vector<GapWindow> windows;
    std::string output_dir = "gapfill-out";
    std::optional<std::uint64_t> seed;  // unset until resolved
    bool record_wall_clock = false;

    ExperimentPlan plan() const {
        ExperimentPlan p;
        p.dataset = dataset;
        p.time_column = time_column;
        p.target_column = target_column;
        p.windows = windows;
        p.methods = methods;
        p.hpo = hpo;
        p.train = train;
        p.space = space;
        p.frequency = frequency;
        p.temporal_features = temporal_features;
        p.record_wall_clock = record_wall_clock;
        p.seed = seed.value_or(0);
        return p;
    }
};

namespace detail {

class ConfigReader {
public:
    std::vector<ConfigIssue> issues;

    void fail(const std::string& path, const std::string& message) { issues.push_back({path, message}); }

    void reject_unknown(const nlohmann::json& obj, const std::string& path, const std::set<std::string>& allowed) {
        for (const auto& [key, value] : obj.items())
            if (!allowed.count(key)) fail(path + "/" + key, "unknown key");
    }

    template <class T>
    void integer(const nlohmann::json& obj, const std::string& path, const char* key, T& out, long long lo) {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        const std::string p = path + "/" + key;
        if (!v.is_number_integer()) return fail(p, "expected an integer");
        const auto x = v.get<long long>();
        if (x < lo) return fail(p, "must be >= " + std::to_string(lo));
        out = static_cast<T>(x);
    }

    void number(const nlohmann::json& obj, const std::string& path, const char* key, double& out, double lo,
                double hi) {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        const std::string p = path + "/" + key;
        if (!v.is_number()) return fail(p, "expected a number");
        const double x = v.get<double>();
        if (!(x > lo && x < hi))
            return fail(p, "must lie in (" + format_number(lo) + ", " + format_number(hi) + ")");
        out = x;
    }

    void boolean(const nlohmann::json& obj, const std::string& path, const char* key, bool& out) {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        if (!v.is_boolean()) return fail(path + "/" + key, "expected a boolean");
        out = v.get<bool>();
    }

    void string(const nlohmann::json& obj, const std::string& path, const char* key, std::string& out) {
        if (!obj.contains(key)) return;
        const auto& v = obj.at(key);
        if (!v.is_string() || v.get<std::string>().empty()) return fail(path + "/" + key, "expected a non-empty string");
        out = v.get<std::string>();
    }

    bool object(const nlohmann::json& obj, const char* key, const std::string& path) {
        if (!obj.contains(key)) return false;
        if (!obj.at(key).is_object()) {
            fail(path + "/" + key, "expected an object");
            return false;
        }
        return true;
    }
};

}  // namespace detail

/// Parses and validates a config document. Every problem is collected before
/// throwing, so one run reports them all. `base_dir` resolves a relative
/// dataset path.
inline RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
    detail::ConfigReader r;
    RunConfig cfg;
    if (!doc.is_object()) throw ConfigValidationError(std::vector<ConfigIssue>{{"", "config must be a JSON object"}});
    r.reject_unknown(doc, "", {"dataset", "time_column", "target_column", "frequency", "temporal_features", "hpo",
                               "train", "space", "methods", "windows", "output_dir", "seed", "record_wall_clock"});

    r.string(doc, "", "dataset", cfg.dataset);
    r.string(doc, "", "time_column", cfg.time_column);
    r.string(doc, "", "target_column", cfg.target_column);
    if (!doc.contains("dataset")) r.fail("/dataset", "required");
    if (!doc.contains("target_column")) r.fail("/target_column", "required");
    if (!cfg.dataset.empty() && !base_dir.empty() && std::filesystem::path(cfg.dataset).is_relative())
        cfg.dataset = (base_dir / cfg.dataset).lexically_normal().string();
    r.integer(doc, "", "frequency", cfg.frequency, 2);
    r.boolean(doc, "", "temporal_features", cfg.temporal_features);
    r.string(doc, "", "output_dir", cfg.output_dir);
    r.boolean(doc, "", "record_wall_clock", cfg.record_wall_clock);
    if (doc.contains("seed")) {
        const auto& s = doc.at("seed");
        if (s.is_number_unsigned()) cfg.seed = s.get<std::uint64_t>();
        else if (s.is_number_integer()) r.fail("/seed", "must be >= 0");
        else r.fail("/seed", "expected a non-negative integer");
    }

    if (r.object(doc, "hpo", "")) {
        const auto& h = doc.at("hpo");
        r.reject_unknown(h, "/hpo", {"n0", "n", "k", "surrogate", "jobs", "train_fraction"});
        r.integer(h, "/hpo", "n0", cfg.hpo.n0, 1);
        r.integer(h, "/hpo", "n", cfg.hpo.n, 1);
        r.integer(h, "/hpo", "k", cfg.hpo.k, 1);
        r.integer(h, "/hpo", "jobs", cfg.hpo.jobs, 1);
        r.number(h, "/hpo", "train_fraction", cfg.hpo.train_fraction, 0.0, 1.0);
        if (h.contains("surrogate")) {
            const auto& s = h.at("surrogate");
            if (s == "rbf") cfg.hpo.surrogate = SurrogateKind::rbf;
            else if (s == "gp") cfg.hpo.surrogate = SurrogateKind::gp;
            else r.fail("/hpo/surrogate", "expected \"rbf\" or \"gp\"");
        }
    }

    if (r.object(doc, "train", "")) {
        const auto& t = doc.at("train");
        r.reject_unknown(t, "/train", {"learning_rate", "beta1", "beta2", "epsilon", "shuffle"});
        r.number(t, "/train", "learning_rate", cfg.train.learning_rate, 0.0, 1e3);
        r.number(t, "/train", "beta1", cfg.train.beta1, -1e-300, 1.0);
        r.number(t, "/train", "beta2", cfg.train.beta2, -1e-300, 1.0);
        r.number(t, "/train", "epsilon", cfg.train.epsilon, 0.0, 1.0);
        r.boolean(t, "/train", "shuffle", cfg.train.shuffle);
    }

    if (r.object(doc, "space", "")) {
        const auto& s = doc.at("space");
        static const char* names[kSpaceDims] = {"batch", "epochs", "layers", "nodes", "dropout", "lag"};
        r.reject_unknown(s, "/space", {names, names + kSpaceDims});
        auto levels = HyperparameterSpace::standard();
        std::array<std::vector<double>, kSpaceDims> values;
        for (std::size_t d = 0; d < kSpaceDims; ++d) values[d] = levels.values(d);
        for (std::size_t d = 0; d < kSpaceDims; ++d) {
            if (!s.contains(names[d])) continue;
            const auto& v = s.at(names[d]);
            const std::string p = std::string("/space/") + names[d];
            if (!v.is_array() || v.empty()) {
                r.fail(p, "expected a non-empty array of numbers");
                continue;
            }
            std::vector<double> list;
            bool ok = true;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const bool integral = d != 4;
                if (integral ? !v[i].is_number_integer() : !v[i].is_number()) {
                    r.fail(p + "/" + std::to_string(i), integral ? "expected an integer" : "expected a number");
                    ok = false;
                } else {
                    list.push_back(v[i].get<double>());
                }
            }
            if (ok) values[d] = std::move(list);
        }
        try {
            cfg.space = HyperparameterSpace(values);
        } catch (const Error& e) {
            r.fail("/space", e.what());
        }
    }

    if (doc.contains("methods")) {
        const auto& m = doc.at("methods");
        if (!m.is_array() || m.empty()) {
            r.fail("/methods", "expected a non-empty array");
        } else {
            for (std::size_t i = 0; i < m.size(); ++i) {
                const auto parsed = m[i].is_string() ? parse_method(m[i].get<std::string>()) : std::nullopt;
                if (!parsed)
                    r.fail("/methods/" + std::to_string(i),
                           "expected one of mlp-rbf, mlp-gp, linear, locf, spline, seasonal");
                else cfg.methods.push_back(*parsed);
            }
        }
    }

    if (doc.contains("windows")) {
        const auto& w = doc.at("windows");
        if (!w.is_array()) {
            r.fail("/windows", "expected an array");
        } else {
            for (std::size_t i = 0; i < w.size(); ++i) {
                const std::string p = "/windows/" + std::to_string(i);
                if (!w[i].is_object()) {
                    r.fail(p, "expected an object with \"from\" and \"to\"");
                    continue;
                }
                r.reject_unknown(w[i], p, {"from", "to"});
                GapWindow gw;
                for (auto [key, dst] : {std::pair{"from", &gw.from}, std::pair{"to", &gw.to}}) {
                    if (!w[i].contains(key) || !w[i].at(key).is_string() ||
                        !parse_date(w[i].at(key).get<std::string>()))
                        r.fail(p + "/" + key, "expected a YYYY-MM-DD date");
                    else *dst = w[i].at(key).get<std::string>();
                }
                if (!gw.from.empty() && !gw.to.empty() && *parse_date(gw.from) > *parse_date(gw.to))
                    r.fail(p, "from is after to");
                cfg.windows.push_back(gw);
            }
        }
    }

    if (r.issues.empty()) {
        try {
            cfg.hpo.validate();
        } catch (const ConfigError& e) {
            r.fail("/hpo", e.what());
        }
    }
    if (!r.issues.empty()) throw ConfigValidationError(std::move(r.issues));
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigValidationError(std::vector<ConfigIssue>{{"", std::string("not valid JSON: ") + e.what()}});
    }
    return parse_config(doc, path.parent_path());
}

/// Seed precedence: explicit flag, then config value, then GAPFILL_SEED, then 0.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config) {
    if (flag) return *flag;
    if (config) return *config;
    if (const char* env = std::getenv("GAPFILL_SEED"); env && *env) {
        std::uint64_t v = 0;
        const std::string_view s(env);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw ConfigError("GAPFILL_SEED must be a non-negative integer, got '" + std::string(s) + "'");
        return v;
    }
    return 0;
}

}  // namespace gapfill

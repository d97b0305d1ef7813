#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "owdl/questioner.hpp"
#include "owdl/scenario.hpp"

namespace owdl {

enum class Profile { desk, paper };

inline Profile parse_profile(const std::string& s) {
    if (s == "desk") return Profile::desk;
    if (s == "paper") return Profile::paper;
    throw std::invalid_argument("unknown profile: " + s);
}

struct SweepSpec {
    std::vector<Scheme> schemes{Scheme::replay, Scheme::rr, Scheme::entropy, Scheme::mixup};
    std::vector<int> t_values{1, 2, 5, 10, 20, 50};
    std::vector<int> s_values{0, 1, 2, 3, 4, 5};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string output_dir = "out";
    Profile profile = Profile::desk;
};

struct AppConfig {
    ScenarioConfig scenario;
    SweepSpec sweep;
};

// Thrown for malformed config files; carries a line number when known.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline nlohmann::json parse_scalar(const std::string& raw) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    try {
        std::size_t pos = 0;
        if (raw.find_first_of(".eE") == std::string::npos) {
            long long v = std::stoll(raw, &pos);
            if (pos == raw.size()) return v;
        } else {
            double v = std::stod(raw, &pos);
            if (pos == raw.size()) return v;
        }
    } catch (const std::exception&) {
    }
    return raw;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

// Dotted key-value format: "a.b.c = value" per line, '#' comments,
// comma-separated values become arrays.
inline nlohmann::json parse_keyvalue(std::istream& in) {
    nlohmann::json root = nlohmann::json::object();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");

        nlohmann::json* node = &root;
        std::size_t start = 0, dot;
        while ((dot = key.find('.', start)) != std::string::npos) {
            node = &(*node)[key.substr(start, dot - start)];
            start = dot + 1;
        }
        const std::string leaf = key.substr(start);
        if (value.find(',') != std::string::npos) {
            nlohmann::json arr = nlohmann::json::array();
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) arr.push_back(parse_scalar(trim(item)));
            (*node)[leaf] = arr;
        } else {
            (*node)[leaf] = parse_scalar(value);
        }
    }
    return root;
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

// Accepts both an array and a bare scalar (a one-element list in the
// key-value format is indistinguishable from a scalar).
template <typename T>
void get_list_if(const nlohmann::json& j, const char* key, std::vector<T>& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_array()) out = v.get<std::vector<T>>();
    else out = {v.get<T>()};
}

}  // namespace detail

inline nlohmann::json load_config_tree(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
        try {
            return nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("json parse error: " + std::string(e.what()));
        }
    }
    return detail::parse_keyvalue(in);
}

inline AppConfig config_from_tree(const nlohmann::json& j) {
    AppConfig cfg;
    using detail::get_if;
    if (j.contains("world")) {
        const auto& w = j.at("world");
        get_if(w, "grid_side", cfg.scenario.world.grid_side);
        get_if(w, "embedding_dim", cfg.scenario.world.embedding_dim);
        get_if(w, "num_sessions", cfg.scenario.world.num_sessions);
        get_if(w, "session_drift", cfg.scenario.world.session_drift);
        get_if(w, "sample_noise", cfg.scenario.world.sample_noise);
        get_if(w, "khot", cfg.scenario.world.khot);
        get_if(w, "seed", cfg.scenario.world.seed);
    }
    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        get_if(s, "num_teachers", cfg.scenario.num_teachers);
        get_if(s, "classes_per_agent", cfg.scenario.classes_per_agent);
        get_if(s, "supervised_per_class", cfg.scenario.supervised_per_class);
        get_if(s, "self_kt_per_class", cfg.scenario.self_kt_per_class);
        get_if(s, "hidden_dim", cfg.scenario.hidden_dim);
    }
    if (j.contains("questioner")) {
        const auto& q = j.at("questioner");
        get_if(q, "T", cfg.scenario.questioner.T);
        get_if(q, "T_prime", cfg.scenario.questioner.T_prime);
        get_if(q, "k", cfg.scenario.questioner.k);
        get_if(q, "R", cfg.scenario.questioner.R);
        get_if(q, "attempt_cap", cfg.scenario.questioner.attempt_cap);
        if (q.contains("mixup_base"))
            cfg.scenario.questioner.mixup_base = parse_scheme(q.at("mixup_base").get<std::string>());
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        get_if(t, "learning_rate", cfg.scenario.train.learning_rate);
        get_if(t, "epochs", cfg.scenario.train.epochs);
        get_if(t, "batch_size", cfg.scenario.train.batch_size);
        get_if(t, "temperature", cfg.scenario.train.temperature);
        get_if(t, "alpha", cfg.scenario.train.alpha);
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        if (s.contains("schemes")) {
            std::vector<std::string> names;
            detail::get_list_if(s, "schemes", names);
            cfg.sweep.schemes.clear();
            for (const auto& name : names) cfg.sweep.schemes.push_back(parse_scheme(name));
        }
        detail::get_list_if(s, "T_values", cfg.sweep.t_values);
        detail::get_list_if(s, "s_values", cfg.sweep.s_values);
        detail::get_list_if(s, "seeds", cfg.sweep.seeds);
        get_if(s, "output_dir", cfg.sweep.output_dir);
        if (s.contains("profile"))
            cfg.sweep.profile = parse_profile(s.at("profile").get<std::string>());
    }
    return cfg;
}

// The desk profile pins the hidden layer small and caps the seed list so
// the default sweep stays CI-sized; the paper profile uses the full-width
// hidden layer.
inline void apply_profile(AppConfig& cfg) {
    if (cfg.sweep.profile == Profile::desk) {
        cfg.scenario.hidden_dim = 256;
        if (cfg.sweep.seeds.size() > 3) cfg.sweep.seeds.resize(3);
    } else {
        cfg.scenario.hidden_dim = 4096;
    }
}

// Checks every config invariant, reporting violations with field paths.
inline std::vector<std::string> validate_config(const nlohmann::json& tree) {
    std::vector<std::string> diags;
    AppConfig cfg;
    try {
        cfg = config_from_tree(tree);
    } catch (const std::exception& e) {
        diags.push_back(std::string("config: ") + e.what());
        return diags;
    }
    apply_profile(cfg);

    const auto& w = cfg.scenario.world;
    if (w.grid_side <= 0) diags.push_back("world.grid_side: must be positive");
    if (w.embedding_dim < 1) diags.push_back("world.embedding_dim: must be >= 1");
    if (w.embedding_dim < w.num_classes())
        diags.push_back("world.embedding_dim: must be >= grid_side^2 (class-score space)");
    if (w.num_sessions < 3) diags.push_back("world.num_sessions: must be >= 3");
    if (w.session_drift < 0) diags.push_back("world.session_drift: must be >= 0");
    if (w.sample_noise < 0) diags.push_back("world.sample_noise: must be >= 0");
    if (w.khot < 1 || w.khot > w.embedding_dim)
        diags.push_back("world.khot: must be in [1, embedding_dim]");

    const auto& sc = cfg.scenario;
    if (sc.num_teachers < 1) diags.push_back("scenario.num_teachers: must be >= 1");
    if (sc.classes_per_agent < 1 || sc.classes_per_agent > w.num_classes())
        diags.push_back("scenario.classes_per_agent: must be in [1, C]");
    if (sc.supervised_per_class < 1)
        diags.push_back("scenario.supervised_per_class: must be >= 1");
    if (sc.self_kt_per_class < 1) diags.push_back("scenario.self_kt_per_class: must be >= 1");
    if (sc.hidden_dim < 1) diags.push_back("scenario.hidden_dim: must be >= 1");

    const auto& q = cfg.scenario.questioner;
    if (q.T < 0) diags.push_back("questioner.T: must be non-negative");
    if (q.T_prime != -1 && q.T_prime < q.T)
        diags.push_back("questioner.T_prime: must be >= T (probe budget covers selection)");
    if (q.k < 1 || q.k > w.embedding_dim)
        diags.push_back("questioner.k: k-hot constraint requires 1 <= k <= embedding_dim N");
    if (q.R < 0 || q.R > q.T)
        diags.push_back("questioner.R: mixup constraint requires 0 <= R <= T");
    if (q.attempt_cap < -1)
        diags.push_back("questioner.attempt_cap: must be >= 0 or -1 (auto)");

    const auto& t = cfg.scenario.train;
    if (t.learning_rate <= 0) diags.push_back("train.learning_rate: must be positive");
    if (t.epochs <= 0) diags.push_back("train.epochs: must be positive");
    if (t.batch_size <= 0) diags.push_back("train.batch_size: must be positive");
    if (t.temperature <= 0) diags.push_back("train.temperature: must be positive");
    if (t.alpha < 0 || t.alpha > 1) diags.push_back("train.alpha: must be in [0, 1]");

    const auto& sw = cfg.sweep;
    if (sw.schemes.empty()) diags.push_back("sweep.schemes: must be non-empty");
    if (sw.t_values.empty()) diags.push_back("sweep.T_values: must be non-empty");
    for (int tv : sw.t_values)
        if (tv <= 0) diags.push_back("sweep.T_values: entries must be positive");
    if (sw.s_values.empty()) diags.push_back("sweep.s_values: must be non-empty");
    for (int sv : sw.s_values)
        if (sv < 0 || sv >= 6) diags.push_back("sweep.s_values: entries must be in [0, 6)");
    if (sw.seeds.empty()) diags.push_back("sweep.seeds: must be non-empty");
    if (sw.output_dir.empty()) diags.push_back("sweep.output_dir: must be non-empty");
    return diags;
}

inline AppConfig load_config(const std::string& path) {
    nlohmann::json tree = load_config_tree(path);
    auto diags = validate_config(tree);
    if (!diags.empty()) {
        std::string msg = "invalid config:";
        for (const auto& d : diags) msg += "\n  " + d;
        throw ConfigError(msg);
    }
    AppConfig cfg = config_from_tree(tree);
    apply_profile(cfg);
    return cfg;
}

}  // namespace owdl

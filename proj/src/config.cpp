#include "mctd/config.hpp"

#include <fstream>
#include <sstream>

namespace mctd {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse(const std::string& text, const std::set<std::string>& known_keys) {
    Config config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) {
            line = line.substr(0, hash_pos);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error("config line " + std::to_string(line_no) +
                               ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key != "version" && known_keys.count(key) == 0) {
            throw config_error("config line " + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
        }
        if (config.values_.count(key)) {
            throw config_error("config line " + std::to_string(line_no) +
                               ": duplicate key '" + key + "'");
        }
        config.values_[key] = value;
    }
    if (config.get_int("version", -1) != 1) {
        throw config_error("config requires version=1");
    }
    return config;
}

Config Config::load(const std::string& path, const std::set<std::string>& known_keys) {
    std::ifstream in(path);
    if (!in) {
        throw config_error("cannot open config: " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), known_keys);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "' is not an integer: " + it->second);
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    try {
        return std::stoull(it->second);
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "' is not an integer: " + it->second);
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "' is not a number: " + it->second);
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    if (it->second == "true" || it->second == "1") {
        return true;
    }
    if (it->second == "false" || it->second == "0") {
        return false;
    }
    throw config_error("config key '" + key + "' is not a boolean: " + it->second);
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    std::vector<double> out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw config_error("config key '" + key + "' has a bad list entry: " + item);
        }
    }
    if (out.empty()) {
        throw config_error("config key '" + key + "' is an empty list");
    }
    return out;
}

std::vector<std::uint64_t> Config::get_u64s(
    const std::string& key, const std::vector<std::uint64_t>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return fallback;
    }
    std::vector<std::uint64_t> out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw config_error("config key '" + key + "' has a bad list entry: " + item);
        }
    }
    if (out.empty()) {
        throw config_error("config key '" + key + "' is an empty list");
    }
    return out;
}

std::string Config::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [key, value] : values_) {
        mix(key);
        mix("=");
        mix(value);
        mix("\n");
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "maze",
        "out",
        "seed",
        "seeds",
        "tasks",
        "jobs",
        "planner",
        "dataset",
        "checkpoint",
        "trials",
        "plan.horizon",
        "plan.subplans",
        "plan.guidance_set",
        "plan.max_iterations",
        "plan.uct_weight",
        "plan.jump_interval",
        "plan.steps_per_expansion",
        "plan.stabilization",
        "plan.early_stop_threshold",
        "plan.children",
        "plan.subgoal_stride",
        "plan.replan_interval",
        "plan.max_denoiser_steps",
        "base.guidance_scale",
        "base.scale_set",
        "base.samples",
        "base.oneshot_interval",
        "df.guidance_scale",
        "df.replans",
        "greedy.children",
        "data.episodes",
        "data.window",
        "data.stride",
        "train.steps",
        "train.batch",
        "train.lr",
        "train.weight_decay",
        "train.warmup",
        "model.frame_stack",
        "model.token_dim",
        "model.hidden",
        "model.emb_dim",
        "model.goal_dim",
        "model.levels",
        "model.beta_min",
        "model.beta_max",
        "scale.budgets",
        "scale.rs_oneshot_interval",
    };
    return keys;
}

}  // namespace mctd

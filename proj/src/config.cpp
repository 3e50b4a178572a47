#include "llmhg/config.hpp"

#include "llmhg/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace llmhg {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InvalidConfig("bad numeric value for " + key + ": " + value);
    }
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw InvalidConfig("bad integer value for " + key + ": " + value);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw InvalidConfig("bad boolean value for " + key + ": " + value);
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& value, F&& one) {
    std::vector<T> out;
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (!part.empty()) out.push_back(static_cast<T>(one(key, part)));
    }
    if (out.empty()) throw InvalidConfig("empty list for " + key);
    return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::map<std::string, std::string> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line is not key=value: " + t, line_no);
        std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ParseError("empty config key", line_no);
        pairs[key] = trim(t.substr(eq + 1));
    }
    return pairs;
}

RunConfig config_from_pairs(const std::map<std::string, std::string>& pairs) {
    RunConfig c;
    for (const auto& [key, value] : pairs) {
        if (key == "format") c.format = value;
        else if (key == "ratings_path") c.ratings_path = value;
        else if (key == "movies_path") c.movies_path = value;
        else if (key == "csv_path") c.csv_path = value;
        else if (key == "metadata_path") c.metadata_path = value;
        else if (key == "canonical_path") c.canonical_path = value;
        else if (key == "catalog_path") c.catalog_path = value;
        else if (key == "l_tru") c.l_tru = static_cast<std::size_t>(parse_int(key, value));
        else if (key == "llm_mode") c.llm_mode = value;
        else if (key == "model_id") c.model_id = value;
        else if (key == "fixture_path") c.fixture_path = value;
        else if (key == "prompt_template_path") c.prompt_template_path = value;
        else if (key == "max_angles") c.max_angles = static_cast<std::size_t>(parse_int(key, value));
        else if (key == "retries") c.retries = static_cast<int>(parse_int(key, value));
        else if (key == "hypergraph") c.hypergraph = value;
        else if (key == "context_windows")
            c.context_windows = parse_list<std::size_t>(key, value, parse_int);
        else if (key == "intent_k") c.intent_k = static_cast<std::size_t>(parse_int(key, value));
        else if (key == "intent_top_n")
            c.intent_top_n = static_cast<std::size_t>(parse_int(key, value));
        else if (key == "d_f") c.d_f = static_cast<int>(parse_int(key, value));
        else if (key == "beta") c.beta = parse_double(key, value);
        else if (key == "alpha") c.alpha = parse_double(key, value);
        else if (key == "mu") c.mu = parse_double(key, value);
        else if (key == "k_negatives") c.k_negatives = static_cast<int>(parse_int(key, value));
        else if (key == "epochs") c.epochs = static_cast<int>(parse_int(key, value));
        else if (key == "lr") c.lr = parse_double(key, value);
        else if (key == "patience") c.patience = static_cast<int>(parse_int(key, value));
        else if (key == "grad_clip") c.grad_clip = parse_double(key, value);
        else if (key == "weight_refresh_every")
            c.weight_refresh_every = static_cast<int>(parse_int(key, value));
        else if (key == "base_only") c.base_only = parse_bool(key, value);
        else if (key == "seeds") c.seeds = parse_list<std::uint64_t>(key, value, parse_int);
        else if (key == "price_prompt_per_1k") c.price_prompt_per_1k = parse_double(key, value);
        else if (key == "price_completion_per_1k")
            c.price_completion_per_1k = parse_double(key, value);
        else if (key == "out_dir") c.out_dir = value;
        else throw InvalidConfig("unknown config key: " + key);
    }
    validate(c);
    return c;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::map<std::string, std::string> pairs;
    if (!path.empty()) pairs = parse_config_file(path);
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw InvalidConfig("override is not key=value: " + ov);
        pairs[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
    }
    return config_from_pairs(pairs);
}

void validate(const RunConfig& c) {
    auto one_of = [](const std::string& key, const std::string& v,
                     std::initializer_list<const char*> allowed) {
        for (const char* a : allowed)
            if (v == a) return;
        throw InvalidConfig("invalid " + key + ": " + v);
    };
    one_of("format", c.format, {"movielens", "amazon", "canonical"});
    one_of("llm_mode", c.llm_mode, {"live", "record", "replay", "synthetic"});
    one_of("hypergraph", c.hypergraph, {"llm", "transition", "contextual", "intent"});
    if (c.l_tru < 3) throw InvalidConfig("l_tru must be >= 3");
    if (c.max_angles < 1) throw InvalidConfig("max_angles must be >= 1");
    if (c.retries < 0) throw InvalidConfig("retries must be >= 0");
    if (c.d_f < 2) throw InvalidConfig("d_f must be >= 2");
    if (c.beta < 0.0 || c.beta > 1.0) throw InvalidConfig("beta must be in [0,1]");
    if (c.alpha < 0.0) throw InvalidConfig("alpha must be >= 0");
    if (c.mu < 0.0) throw InvalidConfig("mu must be >= 0");
    if (c.k_negatives < 1) throw InvalidConfig("k_negatives must be >= 1");
    if (c.epochs < 1) throw InvalidConfig("epochs must be >= 1");
    if (c.lr <= 0.0) throw InvalidConfig("lr must be positive");
    if (c.patience < 1) throw InvalidConfig("patience must be >= 1");
    if (c.grad_clip <= 0.0) throw InvalidConfig("grad_clip must be positive");
    if (c.weight_refresh_every < 1) throw InvalidConfig("weight_refresh_every must be >= 1");
    if (c.seeds.empty()) throw InvalidConfig("seeds must be nonempty");
    if (c.intent_k < 1) throw InvalidConfig("intent_k must be >= 1");
    if (c.intent_top_n < 2) throw InvalidConfig("intent_top_n must be >= 2");
    for (std::size_t w : c.context_windows)
        if (w < 2) throw InvalidConfig("context windows must be >= 2");
    if (c.llm_mode == "replay") {
        if (c.fixture_path.empty()) throw InvalidConfig("replay mode requires fixture_path");
        if (!std::filesystem::exists(c.fixture_path))
            throw InvalidConfig("replay fixture file does not exist: " + c.fixture_path);
    }
    if ((c.llm_mode == "record") && c.fixture_path.empty())
        throw InvalidConfig("record mode requires fixture_path");
}

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write file: " + tmp.string());
        out << content;
        if (!out) throw IoError("failed writing file: " + tmp.string());
    }
    fs::rename(tmp, target);
}

}  // namespace llmhg

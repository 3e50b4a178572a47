#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace llmhg {

// Flat key=value run configuration; CLI flags override file values.
struct RunConfig {
    // dataset
    std::string format = "canonical";  // movielens | amazon | canonical
    std::string ratings_path;          // movielens
    std::string movies_path;           // movielens
    std::string csv_path;              // amazon
    std::string metadata_path;         // amazon, optional
    std::string canonical_path;        // canonical sequences dump
    std::string catalog_path;          // canonical catalog dump
    std::size_t l_tru = 50;

    // profiling
    std::string llm_mode = "synthetic";  // live | record | replay | synthetic
    std::string model_id = "gpt-3.5-turbo";
    std::string fixture_path;
    std::string prompt_template_path;  // optional, defaults built in
    std::size_t max_angles = 6;
    int retries = 2;

    // hypergraph source
    std::string hypergraph = "llm";  // llm | transition | contextual | intent
    std::vector<std::size_t> context_windows = {2, 3};
    std::size_t intent_k = 4;
    std::size_t intent_top_n = 4;

    // training
    int d_f = 64;
    double beta = 0.7;
    double alpha = 1.0;
    double mu = 0.0;  // 0 => median heuristic
    int k_negatives = 100;
    int epochs = 100;
    double lr = 1e-2;
    int patience = 10;
    double grad_clip = 10.0;
    int weight_refresh_every = 1;
    bool base_only = false;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

    // pricing (USD per 1k tokens) for cost accounting
    double price_prompt_per_1k = 0.0;
    double price_completion_per_1k = 0.0;

    std::string out_dir = "run";
};

// `key=value` lines; '#' comments and blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path);

// Unknown keys and malformed values raise InvalidConfig.
RunConfig config_from_pairs(const std::map<std::string, std::string>& pairs);

// File (optional, "" to skip) merged with `key=value` override strings.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

void validate(const RunConfig& config);

// write-temp-then-rename so partially written artifacts never appear
void write_atomic(const std::string& path, const std::string& content);

}  // namespace llmhg

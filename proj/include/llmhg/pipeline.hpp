#pragma once

#include "llmhg/config.hpp"
#include "llmhg/dataset.hpp"
#include "llmhg/eval.hpp"
#include "llmhg/hgnn.hpp"
#include "llmhg/hypergraph.hpp"
#include "llmhg/llm_profile.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace llmhg {

// History rows for one user: the training prefix with catalog attributes.
// Hypergraphs are always built over this prefix so held-out items never leak
// into the structure.
std::vector<ItemWithAttributes> training_history(const UserSplit& split,
                                                 const ItemCatalog& catalog);

// LLM client for the configured mode; nullptr in synthetic mode.
std::unique_ptr<LlmClient> make_client(const RunConfig& config);

struct ProfileArtifacts {
    std::map<std::string, UserProfile> profiles;
    std::vector<UsageEvent> usage;
};

ProfileArtifacts profile_users(const SplitDataset& split, const ItemCatalog& catalog,
                               const RunConfig& config, LlmClient* client);

// user -> multi-view hypergraph per config.hypergraph; users whose structure
// degenerates (no edges) are simply absent.
std::map<std::string, MultiViewHypergraph> build_hypergraphs(
    const SplitDataset& split, const ItemCatalog& catalog, const RunConfig& config,
    const std::map<std::string, UserProfile>& profiles);

TrainConfig train_config_from(const RunConfig& config);

// Mean per-user profiling cost under the configured prices.
double profiling_cost_per_user(const std::vector<UsageEvent>& usage, const RunConfig& config);

}  // namespace llmhg

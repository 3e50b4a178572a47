#include "llmhg/pipeline.hpp"

#include "llmhg/errors.hpp"

#include <algorithm>
#include <set>

namespace llmhg {

std::vector<ItemWithAttributes> training_history(const UserSplit& split,
                                                 const ItemCatalog& catalog) {
    std::vector<ItemWithAttributes> history;
    history.reserve(split.train.size());
    for (const auto& item : split.train) {
        auto it = catalog.find(item);
        history.push_back({item, it != catalog.end() ? it->second : std::vector<std::string>{}});
    }
    return history;
}

std::unique_ptr<LlmClient> make_client(const RunConfig& config) {
    if (config.llm_mode == "synthetic") return nullptr;
    if (config.llm_mode == "replay") {
        auto store = std::make_shared<FixtureStore>(config.fixture_path, /*must_exist=*/true);
        return std::make_unique<ReplayClient>(std::move(store));
    }
    if (config.llm_mode == "record") {
        auto store = std::make_shared<FixtureStore>(config.fixture_path);
        return std::make_unique<RecordingClient>(HttpChatClient::from_env(), std::move(store));
    }
    return HttpChatClient::from_env();  // live
}

ProfileArtifacts profile_users(const SplitDataset& split, const ItemCatalog& catalog,
                               const RunConfig& config, LlmClient* client) {
    ProfileOptions options;
    options.model_id = config.model_id;
    options.max_angles = config.max_angles;
    options.retries = config.retries;
    if (!config.prompt_template_path.empty())
        options.templates = PromptTemplates::from_file(config.prompt_template_path);

    ProfileArtifacts out;
    for (const auto& [user, s] : split.users) {
        auto history = training_history(s, catalog);
        if (config.llm_mode == "synthetic") {
            out.profiles.emplace(user, synthetic_profile(user, history));
        } else {
            if (!client) throw InvalidConfig("LLM mode " + config.llm_mode + " needs a client");
            out.profiles.emplace(user, profile_user(*client, user, history, options, &out.usage));
        }
    }
    return out;
}

namespace {

MultiViewHypergraph llm_view_hypergraph(const std::string& user, const UserSplit& s,
                                        const UserProfile& profile, int d_f) {
    HashEmbeddingProvider provider;
    std::map<std::string, TextEmbedding> embeddings;
    for (const auto& assignment : profile.assignments)
        for (const auto& [item, labels] : assignment.labels)
            for (const auto& label : labels)
                if (label != "unknown" && !embeddings.count(label))
                    embeddings.emplace(label, embed_label(provider, label, d_f));
    return assemble(user, s.train, profile.angles, profile.assignments, embeddings);
}

MultiViewHypergraph intent_view_hypergraph(const std::string& user, const UserSplit& s,
                                           const RunConfig& config) {
    HashEmbeddingProvider provider;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(s.train.size()), config.d_f);
    for (std::size_t i = 0; i < s.train.size(); ++i)
        X.row(static_cast<Eigen::Index>(i)) = provider.embed(s.train[i], config.d_f).transpose();
    std::uint64_t seed = 0;
    std::string hex = sha256_hex("llmhg-intent\x1f" + user).substr(0, 16);
    for (char c : hex) seed = seed * 16 + static_cast<std::uint64_t>(
                                             c <= '9' ? c - '0' : c - 'a' + 10);
    std::size_t k = std::min<std::size_t>(config.intent_k, s.train.size());
    auto prototypes = kmeans_centroids(X, k, seed);
    return intent_hyperedges(user, s.train, X, prototypes, config.intent_top_n);
}

}  // namespace

std::map<std::string, MultiViewHypergraph> build_hypergraphs(
    const SplitDataset& split, const ItemCatalog& catalog, const RunConfig& config,
    const std::map<std::string, UserProfile>& profiles) {
    std::map<std::string, MultiViewHypergraph> out;
    for (const auto& [user, s] : split.users) {
        try {
            MultiViewHypergraph hg;
            if (config.hypergraph == "llm") {
                auto it = profiles.find(user);
                if (it == profiles.end()) continue;
                hg = llm_view_hypergraph(user, s, it->second, config.d_f);
            } else if (config.hypergraph == "transition") {
                hg = transition_hyperedges(user, s.train);
            } else if (config.hypergraph == "contextual") {
                hg = contextual_hyperedges(user, s.train, config.context_windows);
            } else if (config.hypergraph == "intent") {
                hg = intent_view_hypergraph(user, s, config);
            } else {
                throw InvalidConfig("unknown hypergraph mode: " + config.hypergraph);
            }
            if (hg.n_e() > 0) out.emplace(user, std::move(hg));
        } catch (const DegenerateHypergraph&) {
            // all categories unknown (or a single-item prefix): user trains base-only
        }
    }
    (void)catalog;
    return out;
}

TrainConfig train_config_from(const RunConfig& config) {
    TrainConfig tc;
    tc.alpha = config.alpha;
    tc.beta = config.beta;
    tc.learning_rate = config.lr;
    tc.negatives_per_positive = config.k_negatives;
    tc.epochs = config.epochs;
    tc.d_f = config.d_f;
    tc.patience = config.patience;
    tc.weight_refresh_every = config.weight_refresh_every;
    tc.grad_clip = config.grad_clip;
    tc.mu_override = config.mu;
    tc.base_only = config.base_only;
    tc.seed = config.seeds.front();
    return tc;
}

double profiling_cost_per_user(const std::vector<UsageEvent>& usage, const RunConfig& config) {
    PriceTable prices;
    prices[config.model_id] = {config.price_prompt_per_1k, config.price_completion_per_1k};
    return account_cost(usage, prices).per_user_mean_usd;
}

}  // namespace llmhg

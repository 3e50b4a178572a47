#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace llmhg {

enum class PromptPurpose { AngleExtraction, Categorization };

std::string to_string(PromptPurpose purpose);
PromptPurpose purpose_from_string(const std::string& s);

struct PromptRequest {
    PromptPurpose purpose = PromptPurpose::AngleExtraction;
    std::string rendered_text;
    std::string user_id;
    std::string angle;  // set for Categorization
    std::string model_id;
};

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct LlmResponse {
    std::string text;
    TokenUsage usage;
};

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual LlmResponse complete(const PromptRequest& request) = 0;
};

// hex SHA-256 of (purpose, model_id, rendered_text); prompt edits invalidate
// stale fixtures automatically
std::string fixture_key(PromptPurpose purpose, const std::string& model_id,
                        const std::string& rendered_text);

std::string sha256_hex(const std::string& data);

struct FixtureRecord {
    std::string key;
    std::string purpose;
    std::string model_id;
    std::string prompt;
    std::string response;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

// Append-only JSONL store. Reads are lock-free once loaded; appends are
// serialized and flushed per record.
class FixtureStore {
public:
    explicit FixtureStore(std::string path, bool must_exist = false);

    std::optional<FixtureRecord> lookup(const std::string& key) const;
    void append(const FixtureRecord& record);
    std::size_t size() const { return records_.size(); }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::map<std::string, FixtureRecord> records_;
    std::mutex append_mutex_;
};

// Strict replay: every response comes from the store or fails with FixtureMiss.
class ReplayClient : public LlmClient {
public:
    explicit ReplayClient(std::shared_ptr<FixtureStore> store) : store_(std::move(store)) {}
    LlmResponse complete(const PromptRequest& request) override;

private:
    std::shared_ptr<FixtureStore> store_;
};

class RecordingClient : public LlmClient {
public:
    RecordingClient(std::unique_ptr<LlmClient> inner, std::shared_ptr<FixtureStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}
    LlmResponse complete(const PromptRequest& request) override;

private:
    std::unique_ptr<LlmClient> inner_;
    std::shared_ptr<FixtureStore> store_;
};

// Counts every attempted live request; replay/synthetic runs must leave it at 0.
std::atomic<std::int64_t>& live_request_count();

// Chat-completion client over HTTPS. Base URL and API key come from
// LLMHG_API_BASE / LLMHG_API_KEY when constructed via from_env().
class HttpChatClient : public LlmClient {
public:
    HttpChatClient(std::string base_url, std::string api_key, int timeout_seconds = 60);
    static std::unique_ptr<HttpChatClient> from_env();
    LlmResponse complete(const PromptRequest& request) override;

private:
    std::string base_url_;
    std::string api_key_;
    int timeout_seconds_;
};

struct InterestAngleSet {
    std::string user_id;
    std::vector<std::string> angles;  // lowercase-normalized, unique, ordered
};

struct CategoryAssignment {
    std::string angle;
    std::map<std::string, std::vector<std::string>> labels;  // item_id -> category labels
};

struct PromptTemplates {
    // placeholders: {history} for angle extraction; {angle} and {items} for
    // categorization
    std::string angle_template;
    std::string categorize_template;

    static PromptTemplates defaults();
    static PromptTemplates from_file(const std::string& path);
};

struct ItemWithAttributes {
    std::string item_id;
    std::vector<std::string> attributes;
};

std::string render_angle_prompt(const PromptTemplates& templates,
                                const std::vector<ItemWithAttributes>& history);
std::string render_categorize_prompt(const PromptTemplates& templates, const std::string& angle,
                                     const std::vector<ItemWithAttributes>& items);

std::string normalize_label(const std::string& raw);

// numbered or dash list, one angle per line
std::vector<std::string> parse_angle_list(const std::string& response, std::size_t max_angles);

// `item -> label[, label]*` lines
std::map<std::string, std::vector<std::string>> parse_category_lines(const std::string& response);

struct UsageEvent {
    std::string user_id;
    std::string model_id;
    TokenUsage usage;
};

struct ProfileOptions {
    PromptTemplates templates = PromptTemplates::defaults();
    std::string model_id = "gpt-3.5-turbo";
    std::size_t max_angles = 6;
    int retries = 2;  // identical prompt re-sent R times before failing
};

InterestAngleSet extract_interest_angles(LlmClient& client,
                                         const std::vector<ItemWithAttributes>& history,
                                         const std::string& user_id, const ProfileOptions& options,
                                         std::vector<UsageEvent>* usage_log = nullptr);

// Every input item ends up mapped; items absent from the response get "unknown".
CategoryAssignment categorize_items(LlmClient& client, const std::string& angle,
                                    const std::vector<ItemWithAttributes>& items,
                                    const std::string& user_id, const ProfileOptions& options,
                                    std::vector<UsageEvent>* usage_log = nullptr);

struct UserProfile {
    InterestAngleSet angles;
    std::vector<CategoryAssignment> assignments;  // one per angle, same order
};

UserProfile profile_user(LlmClient& client, const std::string& user_id,
                         const std::vector<ItemWithAttributes>& history,
                         const ProfileOptions& options,
                         std::vector<UsageEvent>* usage_log = nullptr);

// No-LLM profiling: the catalog attribute facet becomes the single view and
// each attribute string is a category.
UserProfile synthetic_profile(const std::string& user_id,
                              const std::vector<ItemWithAttributes>& history);

struct TextEmbedding {
    std::string label;
    Eigen::VectorXd vector;  // unit L2 norm, dimension d_f
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual Eigen::VectorXd embed(const std::string& label, int d_f) = 0;
};

// Deterministic fallback: seed a stream from SHA-256(label), expand to d_f
// normal draws, L2-normalize.
class HashEmbeddingProvider : public EmbeddingProvider {
public:
    Eigen::VectorXd embed(const std::string& label, int d_f) override;
};

TextEmbedding embed_label(EmbeddingProvider& provider, const std::string& label, int d_f);

struct PriceEntry {
    double usd_per_1k_prompt = 0.0;
    double usd_per_1k_completion = 0.0;
};

using PriceTable = std::map<std::string, PriceEntry>;

double usd_cost(const TokenUsage& usage, const PriceEntry& price);

struct CostReport {
    double total_usd = 0.0;
    std::map<std::string, double> per_user_usd;
    double per_user_mean_usd = 0.0;
};

CostReport account_cost(const std::vector<UsageEvent>& usages, const PriceTable& prices);

}  // namespace llmhg

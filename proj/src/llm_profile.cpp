#include "llmhg/llm_profile.hpp"

#include "llmhg/errors.hpp"
#include "llmhg/rng.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace llmhg {

namespace {

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string format_items(const std::vector<ItemWithAttributes>& items) {
    std::ostringstream out;
    for (const auto& it : items) {
        out << "- " << it.item_id;
        if (!it.attributes.empty()) {
            out << " (";
            for (std::size_t i = 0; i < it.attributes.size(); ++i) {
                if (i) out << ", ";
                out << it.attributes[i];
            }
            out << ")";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace

std::string to_string(PromptPurpose purpose) {
    return purpose == PromptPurpose::AngleExtraction ? "angle_extraction" : "categorization";
}

PromptPurpose purpose_from_string(const std::string& s) {
    if (s == "angle_extraction") return PromptPurpose::AngleExtraction;
    if (s == "categorization") return PromptPurpose::Categorization;
    throw InvalidConfig("unknown prompt purpose: " + s);
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &digest_len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw NumericalError("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string fixture_key(PromptPurpose purpose, const std::string& model_id,
                        const std::string& rendered_text) {
    return sha256_hex(to_string(purpose) + "\x1f" + model_id + "\x1f" + rendered_text);
}

FixtureStore::FixtureStore(std::string path, bool must_exist) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) {
        if (must_exist) throw IoError("fixture file not found: " + path_);
        return;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError(std::string("bad fixture record: ") + e.what(), line_no);
        }
        FixtureRecord rec;
        rec.key = j.at("key").get<std::string>();
        rec.purpose = j.at("purpose").get<std::string>();
        rec.model_id = j.at("model_id").get<std::string>();
        rec.prompt = j.at("prompt").get<std::string>();
        rec.response = j.at("response").get<std::string>();
        rec.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
        rec.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
        records_[rec.key] = std::move(rec);
    }
}

std::optional<FixtureRecord> FixtureStore::lookup(const std::string& key) const {
    auto it = records_.find(key);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void FixtureStore::append(const FixtureRecord& record) {
    std::lock_guard<std::mutex> lock(append_mutex_);
    nlohmann::json j{{"key", record.key},
                     {"purpose", record.purpose},
                     {"model_id", record.model_id},
                     {"prompt", record.prompt},
                     {"response", record.response},
                     {"prompt_tokens", record.prompt_tokens},
                     {"completion_tokens", record.completion_tokens}};
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to fixture file: " + path_);
    out << j.dump() << '\n';
    out.flush();
    records_[record.key] = record;
}

LlmResponse ReplayClient::complete(const PromptRequest& request) {
    auto key = fixture_key(request.purpose, request.model_id, request.rendered_text);
    auto rec = store_->lookup(key);
    if (!rec) throw FixtureMiss("no fixture for key " + key);
    return LlmResponse{rec->response, {rec->prompt_tokens, rec->completion_tokens}};
}

LlmResponse RecordingClient::complete(const PromptRequest& request) {
    auto key = fixture_key(request.purpose, request.model_id, request.rendered_text);
    if (auto rec = store_->lookup(key)) {
        return LlmResponse{rec->response, {rec->prompt_tokens, rec->completion_tokens}};
    }
    LlmResponse response = inner_->complete(request);
    FixtureRecord rec{key,
                      to_string(request.purpose),
                      request.model_id,
                      request.rendered_text,
                      response.text,
                      response.usage.prompt_tokens,
                      response.usage.completion_tokens};
    store_->append(rec);
    return response;
}

std::atomic<std::int64_t>& live_request_count() {
    static std::atomic<std::int64_t> count{0};
    return count;
}

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.angle_template =
        "Below is a user's interaction history with item attributes.\n"
        "{history}\n"
        "List the interest angles (facets such as genre, brand, era, style) that best "
        "explain this user's preferences.\n"
        "Answer with a numbered list only, one short lowercase angle name per line, "
        "like:\n1. genre\n2. era\n";
    t.categorize_template =
        "Angle: {angle}\n"
        "Items:\n{items}\n"
        "Assign each item to one or more categories under this angle.\n"
        "Answer with one line per item, exactly in the form:\n"
        "item -> category[, category]\n"
        "Use the item identifiers verbatim.\n";
    return t;
}

PromptTemplates PromptTemplates::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open template file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InvalidConfig(std::string("bad template file: ") + e.what());
    }
    PromptTemplates t = defaults();
    if (j.contains("angle_template")) t.angle_template = j["angle_template"].get<std::string>();
    if (j.contains("categorize_template"))
        t.categorize_template = j["categorize_template"].get<std::string>();
    return t;
}

std::string render_angle_prompt(const PromptTemplates& templates,
                                const std::vector<ItemWithAttributes>& history) {
    return replace_all(templates.angle_template, "{history}", format_items(history));
}

std::string render_categorize_prompt(const PromptTemplates& templates, const std::string& angle,
                                     const std::vector<ItemWithAttributes>& items) {
    auto text = replace_all(templates.categorize_template, "{angle}", angle);
    return replace_all(text, "{items}", format_items(items));
}

std::string normalize_label(const std::string& raw) {
    std::string out = strip(raw);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> parse_angle_list(const std::string& response, std::size_t max_angles) {
    std::vector<std::string> angles;
    std::set<std::string> seen;
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        line = strip(line);
        if (line.empty()) continue;
        std::size_t pos = 0;
        // accept "1. genre", "2) era", "- genre", "* genre"
        while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
        if (pos > 0 && pos < line.size() && (line[pos] == '.' || line[pos] == ')')) {
            ++pos;
        } else if (pos == 0 && (line[0] == '-' || line[0] == '*')) {
            pos = 1;
        } else if (pos > 0) {
            continue;  // bare number or something else; not a list line
        }
        std::string angle = normalize_label(line.substr(pos));
        if (angle.empty()) continue;
        if (seen.insert(angle).second) angles.push_back(angle);
        if (angles.size() == max_angles) break;
    }
    return angles;
}

std::map<std::string, std::vector<std::string>> parse_category_lines(const std::string& response) {
    std::map<std::string, std::vector<std::string>> out;
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t arrow = line.find("->");
        if (arrow == std::string::npos) continue;
        std::string item = strip(line.substr(0, arrow));
        if (!item.empty() && item.front() == '-') item = strip(item.substr(1));
        if (item.empty()) continue;
        std::vector<std::string> labels;
        std::istringstream rhs(line.substr(arrow + 2));
        std::string label;
        while (std::getline(rhs, label, ',')) {
            label = normalize_label(label);
            if (!label.empty()) labels.push_back(label);
        }
        if (!labels.empty()) out[item] = std::move(labels);
    }
    return out;
}

namespace {

LlmResponse complete_with_retries(LlmClient& client, const PromptRequest& request, int retries,
                                  const std::function<bool(const std::string&)>& parse_ok) {
    LlmResponse response;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        response = client.complete(request);
        if (parse_ok(response.text)) return response;
    }
    throw LlmParseError("unparseable response after " + std::to_string(retries + 1) +
                        " attempts for " + to_string(request.purpose));
}

}  // namespace

InterestAngleSet extract_interest_angles(LlmClient& client,
                                         const std::vector<ItemWithAttributes>& history,
                                         const std::string& user_id, const ProfileOptions& options,
                                         std::vector<UsageEvent>* usage_log) {
    if (history.empty()) throw EmptyHistory("empty history for user " + user_id);
    PromptRequest request;
    request.purpose = PromptPurpose::AngleExtraction;
    request.rendered_text = render_angle_prompt(options.templates, history);
    request.user_id = user_id;
    request.model_id = options.model_id;

    auto response = complete_with_retries(client, request, options.retries,
                                          [&](const std::string& text) {
                                              return !parse_angle_list(text, options.max_angles)
                                                          .empty();
                                          });
    if (usage_log) usage_log->push_back({user_id, options.model_id, response.usage});
    return InterestAngleSet{user_id, parse_angle_list(response.text, options.max_angles)};
}

CategoryAssignment categorize_items(LlmClient& client, const std::string& angle,
                                    const std::vector<ItemWithAttributes>& items,
                                    const std::string& user_id, const ProfileOptions& options,
                                    std::vector<UsageEvent>* usage_log) {
    if (items.empty()) throw EmptyHistory("no items to categorize for user " + user_id);
    PromptRequest request;
    request.purpose = PromptPurpose::Categorization;
    request.rendered_text = render_categorize_prompt(options.templates, angle, items);
    request.user_id = user_id;
    request.angle = angle;
    request.model_id = options.model_id;

    auto response = complete_with_retries(client, request, options.retries,
                                          [](const std::string& text) {
                                              return !parse_category_lines(text).empty();
                                          });
    if (usage_log) usage_log->push_back({user_id, options.model_id, response.usage});

    auto parsed = parse_category_lines(response.text);
    CategoryAssignment assignment;
    assignment.angle = angle;
    for (const auto& item : items) {
        auto it = parsed.find(item.item_id);
        assignment.labels[item.item_id] =
            (it != parsed.end()) ? it->second : std::vector<std::string>{"unknown"};
    }
    return assignment;
}

UserProfile profile_user(LlmClient& client, const std::string& user_id,
                         const std::vector<ItemWithAttributes>& history,
                         const ProfileOptions& options, std::vector<UsageEvent>* usage_log) {
    UserProfile profile;
    profile.angles = extract_interest_angles(client, history, user_id, options, usage_log);
    for (const auto& angle : profile.angles.angles) {
        profile.assignments.push_back(
            categorize_items(client, angle, history, user_id, options, usage_log));
    }
    return profile;
}

UserProfile synthetic_profile(const std::string& user_id,
                              const std::vector<ItemWithAttributes>& history) {
    if (history.empty()) throw EmptyHistory("empty history for user " + user_id);
    UserProfile profile;
    profile.angles = InterestAngleSet{user_id, {"attribute"}};
    CategoryAssignment assignment;
    assignment.angle = "attribute";
    for (const auto& item : history) {
        std::vector<std::string> labels;
        for (const auto& attr : item.attributes) {
            auto label = normalize_label(attr);
            if (!label.empty()) labels.push_back(label);
        }
        if (labels.empty()) labels.push_back("unknown");
        assignment.labels[item.item_id] = std::move(labels);
    }
    profile.assignments.push_back(std::move(assignment));
    return profile;
}

Eigen::VectorXd HashEmbeddingProvider::embed(const std::string& label, int d_f) {
    if (d_f < 2) throw InvalidConfig("embedding dimension must be >= 2");
    std::string digest = sha256_hex("llmhg-label-embedding\x1f" + label);
    // first 16 hex chars -> 64-bit seed
    std::uint64_t seed = std::stoull(digest.substr(0, 16), nullptr, 16);
    Rng rng(seed);
    Eigen::VectorXd v(d_f);
    for (int i = 0; i < d_f; ++i) v[i] = rng.normal();
    double norm = v.norm();
    if (norm < 1e-300) {
        v.setZero();
        v[0] = 1.0;
        return v;
    }
    return v / norm;
}

TextEmbedding embed_label(EmbeddingProvider& provider, const std::string& label, int d_f) {
    if (label.empty()) throw InvalidConfig("empty label");
    if (d_f < 2) throw InvalidConfig("embedding dimension must be >= 2");
    TextEmbedding e;
    e.label = label;
    e.vector = provider.embed(label, d_f);
    return e;
}

double usd_cost(const TokenUsage& usage, const PriceEntry& price) {
    if (usage.prompt_tokens < 0 || usage.completion_tokens < 0)
        throw InvalidUsage("negative token count");
    return static_cast<double>(usage.prompt_tokens) / 1000.0 * price.usd_per_1k_prompt +
           static_cast<double>(usage.completion_tokens) / 1000.0 * price.usd_per_1k_completion;
}

CostReport account_cost(const std::vector<UsageEvent>& usages, const PriceTable& prices) {
    if (usages.empty()) throw InvalidUsage("no usages to account");
    CostReport report;
    for (const auto& u : usages) {
        auto it = prices.find(u.model_id);
        PriceEntry price = (it != prices.end()) ? it->second : PriceEntry{};
        double cost = usd_cost(u.usage, price);
        report.total_usd += cost;
        report.per_user_usd[u.user_id] += cost;
    }
    report.per_user_mean_usd =
        report.total_usd / static_cast<double>(report.per_user_usd.size());
    return report;
}

}  // namespace llmhg

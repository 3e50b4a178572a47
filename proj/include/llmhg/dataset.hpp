#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace llmhg {

struct Interaction {
    std::string user_id;
    std::string item_id;
    std::int64_t timestamp = 0;
};

// item_id -> attribute strings (genres for MovieLens, category/brand for Amazon)
using ItemCatalog = std::map<std::string, std::vector<std::string>>;

struct InteractionDataset {
    // user_id -> chronologically ordered, duplicate-free item sequence
    std::map<std::string, std::vector<std::string>> sequences;
    ItemCatalog catalog;
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::size_t n_actions = 0;
};

struct UserSplit {
    std::vector<std::string> train;
    std::string valid;
    std::string test;
};

struct SplitDataset {
    std::map<std::string, UserSplit> users;
};

struct CorpusStats {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    double avg_length = 0.0;
    std::size_t n_actions = 0;
    double sparsity = 0.0;
};

// `UserID::MovieID::Rating::Timestamp` ratings plus `MovieID::Title::Genres` metadata.
InteractionDataset parse_movielens(const std::string& ratings_path,
                                   const std::string& movies_path);

// `user,item,rating,timestamp` lines; metadata_path may be empty or point to a
// TSV `item<TAB>category<TAB>brand`.
InteractionDataset parse_amazon_csv(const std::string& path,
                                    const std::string& metadata_path = "");

// Shared preprocessing: dedup keeping the earliest timestamp, chronological
// order (file order breaks ties), drop users with < 3 interactions.
InteractionDataset preprocess(std::vector<Interaction> raw, ItemCatalog catalog);

InteractionDataset truncate_sequences(const InteractionDataset& dataset, std::size_t l_tru);

SplitDataset leave_one_out(const InteractionDataset& dataset);

CorpusStats corpus_stats(const InteractionDataset& dataset);

// Canonical dump: one line per user, `user_id<TAB>item_1,item_2,...`.
void write_canonical(const InteractionDataset& dataset, const std::string& path);
InteractionDataset read_canonical(const std::string& sequences_path,
                                  const std::string& catalog_path = "");

// Catalog dump: `item<TAB>attr|attr|...`.
void write_catalog(const ItemCatalog& catalog, const std::string& path);
ItemCatalog read_catalog(const std::string& path);

}  // namespace llmhg

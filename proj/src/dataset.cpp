#include "llmhg/dataset.hpp"

#include "llmhg/errors.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace llmhg {

namespace {

std::vector<std::string> split_on(const std::string& s, const std::string& delim) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = s.find(delim, pos);
        if (next == std::string::npos) {
            out.push_back(s.substr(pos));
            break;
        }
        out.push_back(s.substr(pos, next - pos));
        pos = next + delim.size();
    }
    return out;
}

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    return in;
}

std::int64_t parse_timestamp(const std::string& s, std::size_t line_no) {
    // Amazon dumps sometimes carry float timestamps; truncate toward zero.
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used == 0 || v < 0) throw ParseError("bad timestamp: " + s, line_no);
        return static_cast<std::int64_t>(v);
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError("bad timestamp: " + s, line_no);
    }
}

}  // namespace

InteractionDataset preprocess(std::vector<Interaction> raw, ItemCatalog catalog) {
    struct Seen {
        std::int64_t timestamp;
        std::size_t file_index;
    };
    // (user,item) -> earliest occurrence
    std::map<std::pair<std::string, std::string>, Seen> first;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto& r = raw[i];
        auto key = std::make_pair(r.user_id, r.item_id);
        auto it = first.find(key);
        if (it == first.end() || r.timestamp < it->second.timestamp) {
            first[key] = Seen{r.timestamp, i};
        }
    }

    std::map<std::string, std::vector<std::tuple<std::int64_t, std::size_t, std::string>>> per_user;
    for (const auto& [key, seen] : first) {
        per_user[key.first].emplace_back(seen.timestamp, seen.file_index, key.second);
    }

    InteractionDataset out;
    std::set<std::string> items;
    for (auto& [user, events] : per_user) {
        if (events.size() < 3) continue;  // leave-one-out needs train/valid/test
        std::sort(events.begin(), events.end());
        std::vector<std::string> seq;
        seq.reserve(events.size());
        for (const auto& [ts, idx, item] : events) {
            seq.push_back(item);
            items.insert(item);
        }
        out.n_actions += seq.size();
        out.sequences.emplace(user, std::move(seq));
    }
    if (out.sequences.empty()) throw EmptyDataset("no users with >= 3 interactions");

    // keep the catalog restricted to items that remain rankable
    for (const auto& item : items) {
        auto it = catalog.find(item);
        out.catalog[item] = (it != catalog.end()) ? it->second : std::vector<std::string>{};
    }
    out.n_users = out.sequences.size();
    out.n_items = out.catalog.size();
    return out;
}

InteractionDataset parse_movielens(const std::string& ratings_path,
                                   const std::string& movies_path) {
    auto ratings = open_or_throw(ratings_path);
    std::vector<Interaction> raw;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ratings, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (strip(line).empty()) continue;
        auto fields = split_on(line, "::");
        if (fields.size() != 4 || fields[0].empty() || fields[1].empty())
            throw ParseError("expected UserID::MovieID::Rating::Timestamp", line_no);
        // rating discarded: implicit feedback
        raw.push_back({fields[0], fields[1], parse_timestamp(fields[3], line_no)});
    }

    ItemCatalog catalog;
    auto movies = open_or_throw(movies_path);
    line_no = 0;
    while (std::getline(movies, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (strip(line).empty()) continue;
        auto fields = split_on(line, "::");
        if (fields.size() < 3 || fields[0].empty())
            throw ParseError("expected MovieID::Title::Genres", line_no);
        std::vector<std::string> genres;
        for (auto& g : split_on(fields.back(), "|")) {
            g = strip(g);
            if (!g.empty()) genres.push_back(g);
        }
        catalog[fields[0]] = std::move(genres);
    }
    return preprocess(std::move(raw), std::move(catalog));
}

InteractionDataset parse_amazon_csv(const std::string& path, const std::string& metadata_path) {
    auto in = open_or_throw(path);
    std::vector<Interaction> raw;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (strip(line).empty()) continue;
        auto fields = split_on(line, ",");
        if (fields.size() != 4)
            throw ParseError("expected user,item,rating,timestamp", line_no);
        std::string user = strip(fields[0]);
        std::string item = strip(fields[1]);
        if (line_no == 1 && (user == "user" || user == "user_id" || user == "reviewerID"))
            continue;  // header row
        if (user.empty() || item.empty())
            throw ParseError("empty user or item id", line_no);
        raw.push_back({user, item, parse_timestamp(strip(fields[3]), line_no)});
    }

    ItemCatalog catalog;
    if (!metadata_path.empty()) {
        auto meta = open_or_throw(metadata_path);
        line_no = 0;
        while (std::getline(meta, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (strip(line).empty()) continue;
            auto fields = split_on(line, "\t");
            if (fields.empty() || fields[0].empty())
                throw ParseError("expected item<TAB>category<TAB>brand", line_no);
            std::vector<std::string> attrs;
            for (std::size_t i = 1; i < fields.size(); ++i) {
                auto a = strip(fields[i]);
                if (!a.empty()) attrs.push_back(a);
            }
            catalog[fields[0]] = std::move(attrs);
        }
    }
    return preprocess(std::move(raw), std::move(catalog));
}

InteractionDataset truncate_sequences(const InteractionDataset& dataset, std::size_t l_tru) {
    if (l_tru < 3) throw InvalidConfig("l_tru must be >= 3");
    InteractionDataset out;
    std::set<std::string> items;
    for (const auto& [user, seq] : dataset.sequences) {
        std::size_t keep = std::min(seq.size(), l_tru);
        std::vector<std::string> tail(seq.end() - static_cast<std::ptrdiff_t>(keep), seq.end());
        for (const auto& item : tail) items.insert(item);
        out.n_actions += tail.size();
        out.sequences.emplace(user, std::move(tail));
    }
    for (const auto& item : items) {
        auto it = dataset.catalog.find(item);
        out.catalog[item] = (it != dataset.catalog.end()) ? it->second : std::vector<std::string>{};
    }
    out.n_users = out.sequences.size();
    out.n_items = out.catalog.size();
    return out;
}

SplitDataset leave_one_out(const InteractionDataset& dataset) {
    SplitDataset split;
    for (const auto& [user, seq] : dataset.sequences) {
        if (seq.size() < 3)
            throw InternalInvariantViolation("sequence shorter than 3 for user " + user);
        UserSplit s;
        s.train.assign(seq.begin(), seq.end() - 2);
        s.valid = seq[seq.size() - 2];
        s.test = seq.back();
        split.users.emplace(user, std::move(s));
    }
    return split;
}

CorpusStats corpus_stats(const InteractionDataset& dataset) {
    CorpusStats st;
    st.n_users = dataset.n_users;
    st.n_items = dataset.n_items;
    st.n_actions = dataset.n_actions;
    st.avg_length = static_cast<double>(dataset.n_actions) / static_cast<double>(dataset.n_users);
    st.sparsity = 1.0 - static_cast<double>(dataset.n_actions) /
                            (static_cast<double>(dataset.n_users) *
                             static_cast<double>(dataset.n_items));
    return st;
}

void write_canonical(const InteractionDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    for (const auto& [user, seq] : dataset.sequences) {
        out << user << '\t';
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i) out << ',';
            out << seq[i];
        }
        out << '\n';
    }
}

void write_catalog(const ItemCatalog& catalog, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    for (const auto& [item, attrs] : catalog) {
        out << item << '\t';
        for (std::size_t i = 0; i < attrs.size(); ++i) {
            if (i) out << '|';
            out << attrs[i];
        }
        out << '\n';
    }
}

ItemCatalog read_catalog(const std::string& path) {
    auto in = open_or_throw(path);
    ItemCatalog catalog;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_on(line, "\t");
        if (fields.empty() || fields[0].empty())
            throw ParseError("expected item<TAB>attrs", line_no);
        std::vector<std::string> attrs;
        if (fields.size() > 1 && !fields[1].empty()) {
            for (auto& a : split_on(fields[1], "|")) {
                a = strip(a);
                if (!a.empty()) attrs.push_back(a);
            }
        }
        catalog[fields[0]] = std::move(attrs);
    }
    return catalog;
}

InteractionDataset read_canonical(const std::string& sequences_path,
                                  const std::string& catalog_path) {
    auto in = open_or_throw(sequences_path);
    InteractionDataset out;
    std::set<std::string> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_on(line, "\t");
        if (fields.size() != 2 || fields[0].empty())
            throw ParseError("expected user<TAB>items", line_no);
        std::vector<std::string> seq;
        for (auto& item : split_on(fields[1], ",")) {
            if (item.empty()) throw ParseError("empty item id", line_no);
            seq.push_back(item);
            items.insert(item);
        }
        out.n_actions += seq.size();
        out.sequences.emplace(fields[0], std::move(seq));
    }
    if (out.sequences.empty()) throw EmptyDataset("empty canonical dump: " + sequences_path);

    ItemCatalog catalog;
    if (!catalog_path.empty()) catalog = read_catalog(catalog_path);
    for (const auto& item : items) {
        auto it = catalog.find(item);
        out.catalog[item] = (it != catalog.end()) ? it->second : std::vector<std::string>{};
    }
    out.n_users = out.sequences.size();
    out.n_items = out.catalog.size();
    return out;
}

}  // namespace llmhg

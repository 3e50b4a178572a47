#pragma once

#include "llmhg/dataset.hpp"
#include "llmhg/rng.hpp"

#include <cstdio>
#include <set>
#include <string>
#include <vector>

namespace llmhg::test {

// Synthetic corpus with planted interest structure: items partition into
// latent clusters (exposed as the catalog attribute), and each user draws 90%
// of interactions from two home clusters.
inline InteractionDataset planted_corpus(std::size_t n_users = 500, std::size_t n_items = 200,
                                         std::size_t n_clusters = 8, std::size_t seq_len = 12,
                                         std::uint64_t seed = 20240501ULL) {
    const std::size_t per_cluster = n_items / n_clusters;
    char buf[32];

    ItemCatalog catalog;
    std::vector<std::string> item_ids(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
        std::snprintf(buf, sizeof(buf), "i%03zu", i);
        item_ids[i] = buf;
        std::size_t cluster = std::min(i / per_cluster, n_clusters - 1);
        std::snprintf(buf, sizeof(buf), "cluster-%zu", cluster);
        catalog[item_ids[i]] = {buf};
    }

    std::vector<Interaction> raw;
    Rng root(seed);
    for (std::size_t u = 0; u < n_users; ++u) {
        std::snprintf(buf, sizeof(buf), "u%03zu", u);
        std::string user = buf;
        Rng r = root.fork(u + 1);
        std::size_t home1 = static_cast<std::size_t>(r.next_below(n_clusters));
        std::size_t home2 =
            (home1 + 1 + static_cast<std::size_t>(r.next_below(n_clusters - 1))) % n_clusters;
        std::set<std::string> used;
        std::int64_t t = 0;
        while (used.size() < seq_len) {
            std::size_t cluster;
            if (r.next_double() < 0.9)
                cluster = r.next_double() < 0.5 ? home1 : home2;
            else
                cluster = static_cast<std::size_t>(r.next_below(n_clusters));
            std::size_t idx = cluster * per_cluster +
                              static_cast<std::size_t>(r.next_below(per_cluster));
            const std::string& item = item_ids[idx];
            if (!used.insert(item).second) continue;
            raw.push_back({user, item, t++});
        }
    }
    return preprocess(std::move(raw), catalog);
}

}  // namespace llmhg::test

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "llmhg/dataset.hpp"
#include "llmhg/errors.hpp"
#include "llmhg/rng.hpp"
#include "support/planted.hpp"
#include "support/tmpdir.hpp"

#include <algorithm>
#include <map>
#include <set>

using namespace llmhg;
using llmhg::test::TempDir;
using llmhg::test::write_file;

TEST_CASE("parse_movielens: order, dedup, rating discarded, short users dropped") {
    TempDir dir;
    write_file(dir.file("ratings.dat"),
               "1::10::5::300\n"
               "1::11::1::100\n"
               "1::12::3::200\n"
               "1::10::4::50\n"   // duplicate, earlier timestamp wins
               "2::10::2::100\n"  // user 2 has only 2 interactions -> dropped
               "2::11::2::200\n");
    write_file(dir.file("movies.dat"),
               "10::Movie A::Comedy|Drama\n"
               "11::Movie B::Action\n"
               "12::Movie C::Drama\n");
    auto ds = parse_movielens(dir.file("ratings.dat"), dir.file("movies.dat"));
    REQUIRE(ds.sequences.size() == 1);
    // earliest timestamps: 10@50, 11@100, 12@200
    CHECK(ds.sequences.at("1") == std::vector<std::string>{"10", "11", "12"});
    CHECK(ds.n_users == 1);
    CHECK(ds.n_items == 3);
    CHECK(ds.n_actions == 3);
    CHECK(ds.catalog.at("10") == std::vector<std::string>{"Comedy", "Drama"});
}

TEST_CASE("parse_movielens: malformed line reports its line number") {
    TempDir dir;
    write_file(dir.file("ratings.dat"), "1::10::5::100\nbroken line\n");
    write_file(dir.file("movies.dat"), "10::A::Drama\n");
    try {
        parse_movielens(dir.file("ratings.dat"), dir.file("movies.dat"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line_number == 2);
    }
}

TEST_CASE("parse_movielens: missing file raises IoError") {
    CHECK_THROWS_AS(parse_movielens("/nonexistent/r.dat", "/nonexistent/m.dat"), IoError);
}

TEST_CASE("parse_amazon_csv: header row, float timestamps, metadata attrs") {
    TempDir dir;
    write_file(dir.file("reviews.csv"),
               "user,item,rating,timestamp\n"
               "u1,a,5,100.7\n"
               "u1,b,4,200.2\n"
               "u1,c,3,300.9\n");
    write_file(dir.file("meta.tsv"), "a\tBeauty\tAcme\nb\tBeauty\n");
    auto ds = parse_amazon_csv(dir.file("reviews.csv"), dir.file("meta.tsv"));
    CHECK(ds.sequences.at("u1") == std::vector<std::string>{"a", "b", "c"});
    CHECK(ds.catalog.at("a") == std::vector<std::string>{"Beauty", "Acme"});
    CHECK(ds.catalog.at("b") == std::vector<std::string>{"Beauty"});
    CHECK(ds.catalog.at("c").empty());
}

TEST_CASE("preprocess: empty survivor set raises EmptyDataset") {
    std::vector<Interaction> raw{{"u", "a", 1}, {"u", "b", 2}};
    CHECK_THROWS_AS(preprocess(raw, {}), EmptyDataset);
}

TEST_CASE("preprocess: equal timestamps keep file order") {
    std::vector<Interaction> raw{
        {"u", "x", 10}, {"u", "y", 10}, {"u", "z", 10}, {"u", "w", 5}};
    auto ds = preprocess(raw, {});
    CHECK(ds.sequences.at("u") == std::vector<std::string>{"w", "x", "y", "z"});
}

TEST_CASE("preprocess matches a brute-force group-by oracle on random input") {
    // oracle built from different primitives: per-(user,item) min scan + stable sort
    Rng rng(77);
    std::vector<Interaction> raw;
    for (int i = 0; i < 400; ++i) {
        std::string user = "u" + std::to_string(rng.next_below(12));
        std::string item = "i" + std::to_string(rng.next_below(30));
        auto ts = static_cast<std::int64_t>(rng.next_below(50));
        raw.push_back({user, item, ts});
    }
    auto ds = preprocess(raw, {});

    std::map<std::string, std::map<std::string, std::pair<std::int64_t, std::size_t>>> oracle;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto& slot = oracle[raw[i].user_id];
        auto it = slot.find(raw[i].item_id);
        if (it == slot.end() || raw[i].timestamp < it->second.first)
            slot[raw[i].item_id] = {raw[i].timestamp, i};
    }
    std::size_t expected_users = 0, expected_actions = 0;
    std::set<std::string> expected_items;
    for (const auto& [user, items] : oracle) {
        if (items.size() < 3) continue;
        ++expected_users;
        expected_actions += items.size();
        std::vector<std::pair<std::pair<std::int64_t, std::size_t>, std::string>> order;
        for (const auto& [item, key] : items) {
            order.push_back({key, item});
            expected_items.insert(item);
        }
        std::sort(order.begin(), order.end());
        std::vector<std::string> seq;
        for (const auto& [key, item] : order) seq.push_back(item);
        REQUIRE(ds.sequences.count(user) == 1);
        CHECK(ds.sequences.at(user) == seq);
    }
    CHECK(ds.n_users == expected_users);
    CHECK(ds.n_actions == expected_actions);
    CHECK(ds.n_items == expected_items.size());
}

TEST_CASE("truncate_sequences keeps the most recent suffix and restricts the catalog") {
    std::vector<Interaction> raw;
    for (int i = 0; i < 6; ++i) raw.push_back({"u", "i" + std::to_string(i), i});
    ItemCatalog cat;
    for (int i = 0; i < 6; ++i) cat["i" + std::to_string(i)] = {"g"};
    auto ds = preprocess(raw, cat);
    auto t = truncate_sequences(ds, 4);
    CHECK(t.sequences.at("u") == std::vector<std::string>{"i2", "i3", "i4", "i5"});
    CHECK(t.n_items == 4);
    CHECK(t.catalog.count("i0") == 0);
    CHECK_THROWS_AS(truncate_sequences(ds, 2), InvalidConfig);
    // l_tru longer than every sequence is the identity
    auto same = truncate_sequences(ds, 100);
    CHECK(same.sequences == ds.sequences);
}

TEST_CASE("leave_one_out holds out the last two items") {
    std::vector<Interaction> raw;
    for (int i = 0; i < 5; ++i) raw.push_back({"u", "i" + std::to_string(i), i});
    auto split = leave_one_out(preprocess(raw, {}));
    const auto& s = split.users.at("u");
    CHECK(s.train == std::vector<std::string>{"i0", "i1", "i2"});
    CHECK(s.valid == "i3");
    CHECK(s.test == "i4");
}

TEST_CASE("corpus_stats reproduces the published table arithmetic") {
    InteractionDataset beauty;
    beauty.n_users = 22363;
    beauty.n_items = 12101;
    beauty.n_actions = 198502;
    auto st = corpus_stats(beauty);
    CHECK(std::abs(100.0 * st.sparsity - 99.93) < 0.005);
    CHECK(st.avg_length == doctest::Approx(198502.0 / 22363.0));

    InteractionDataset ml;
    ml.n_users = 6041;
    ml.n_items = 3417;
    ml.n_actions = 999611;
    auto mst = corpus_stats(ml);
    CHECK(std::abs(100.0 * mst.sparsity - 95.16) < 0.01);
    CHECK(std::abs(mst.avg_length - 165.5) < 0.05);
}

TEST_CASE("canonical and catalog dumps round-trip byte-identically") {
    TempDir dir;
    auto ds = llmhg::test::planted_corpus(20, 40, 4, 6);
    write_canonical(ds, dir.file("seq.tsv"));
    write_catalog(ds.catalog, dir.file("cat.tsv"));
    auto back = read_canonical(dir.file("seq.tsv"), dir.file("cat.tsv"));
    CHECK(back.sequences == ds.sequences);
    CHECK(back.catalog == ds.catalog);
    CHECK(back.n_actions == ds.n_actions);

    write_canonical(back, dir.file("seq2.tsv"));
    CHECK(llmhg::test::read_file(dir.file("seq.tsv")) ==
          llmhg::test::read_file(dir.file("seq2.tsv")));
}

TEST_CASE("planted corpus has the declared shape") {
    auto ds = llmhg::test::planted_corpus();
    CHECK(ds.n_users == 500);
    CHECK(ds.n_items <= 200);
    for (const auto& [user, seq] : ds.sequences) CHECK(seq.size() == 12);
    for (const auto& [item, attrs] : ds.catalog) {
        REQUIRE(attrs.size() == 1);
        CHECK(attrs[0].rfind("cluster-", 0) == 0);
    }
}

#include "llmhg/config.hpp"
#include "llmhg/dataset.hpp"
#include "llmhg/errors.hpp"
#include "llmhg/eval.hpp"
#include "llmhg/hgnn.hpp"
#include "llmhg/hypergraph.hpp"
#include "llmhg/llm_profile.hpp"
#include "llmhg/pipeline.hpp"
#include "llmhg/structure_learning.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace llmhg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;     // parse / IO / config problems
constexpr int kExitFixture = 3;  // fixture miss or unusable LLM output
constexpr int kExitTraining = 4;
constexpr int kExitUsage = 5;  // unknown user / bad invocation

InteractionDataset load_source_dataset(const RunConfig& config) {
    InteractionDataset dataset;
    if (config.format == "movielens")
        dataset = parse_movielens(config.ratings_path, config.movies_path);
    else if (config.format == "amazon")
        dataset = parse_amazon_csv(config.csv_path, config.metadata_path);
    else
        dataset = read_canonical(config.canonical_path, config.catalog_path);
    return truncate_sequences(dataset, config.l_tru);
}

InteractionDataset load_ingested(const RunConfig& config) {
    fs::path dir(config.out_dir);
    return read_canonical((dir / "sequences.tsv").string(), (dir / "catalog.tsv").string());
}

void print_stats(const InteractionDataset& dataset) {
    CorpusStats st = corpus_stats(dataset);
    std::printf("users      %zu\n", st.n_users);
    std::printf("items      %zu\n", st.n_items);
    std::printf("avg length %.1f\n", st.avg_length);
    std::printf("actions    %zu\n", st.n_actions);
    std::printf("sparsity   %.4f%%\n", 100.0 * st.sparsity);
}

// write-then-rename wrapper around direct-writing dump helpers
template <typename WriteFn>
void atomic_dump(const std::string& path, WriteFn&& write_fn) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::string tmp = path + ".tmp";
    write_fn(tmp);
    fs::rename(tmp, path);
}

int cmd_ingest(const RunConfig& config, bool stats_only) {
    InteractionDataset dataset = load_source_dataset(config);
    print_stats(dataset);
    if (!stats_only) {
        fs::create_directories(config.out_dir);
        fs::path dir(config.out_dir);
        atomic_dump((dir / "sequences.tsv").string(),
                    [&](const std::string& p) { write_canonical(dataset, p); });
        atomic_dump((dir / "catalog.tsv").string(),
                    [&](const std::string& p) { write_catalog(dataset.catalog, p); });
        std::printf("wrote %s\n", (dir / "sequences.tsv").c_str());
    }
    return kExitOk;
}

int cmd_profile(const RunConfig& config) {
    InteractionDataset dataset = load_ingested(config);
    SplitDataset split = leave_one_out(dataset);
    std::unique_ptr<LlmClient> client = make_client(config);
    ProfileArtifacts artifacts = profile_users(split, dataset.catalog, config, client.get());
    auto hgs = build_hypergraphs(split, dataset.catalog, config, artifacts.profiles);

    fs::path dir(config.out_dir);
    std::ostringstream angles;
    for (const auto& [user, profile] : artifacts.profiles) {
        angles << user;
        char sep = '\t';
        for (const auto& angle : profile.angles.angles) {
            angles << sep << angle;
            sep = ',';
        }
        angles << '\n';
    }
    write_atomic((dir / "angles.tsv").string(), angles.str());
    for (const auto& [user, hg] : hgs)
        atomic_dump((dir / "hypergraphs" / (user + ".tsv")).string(),
                    [&](const std::string& p) { write_hypergraph_dump(hg, p); });

    double cost = profiling_cost_per_user(artifacts.usage, config);
    char cost_line[64];
    std::snprintf(cost_line, sizeof(cost_line), "%.17g\n", cost);
    write_atomic((dir / "cost_per_user.txt").string(), cost_line);

    std::printf("profiled users     %zu\n", artifacts.profiles.size());
    std::printf("hypergraphs        %zu\n", hgs.size());
    std::printf("llm requests live  %lld\n",
                static_cast<long long>(live_request_count().load()));
    std::printf("cost per user usd  %.6f\n", cost);
    return kExitOk;
}

std::map<std::string, MultiViewHypergraph> load_or_build_hypergraphs(
    const RunConfig& config, const InteractionDataset& dataset, const SplitDataset& split) {
    if (config.hypergraph == "llm") {
        std::map<std::string, MultiViewHypergraph> hgs;
        fs::path dir = fs::path(config.out_dir) / "hypergraphs";
        for (const auto& [user, s] : split.users) {
            fs::path p = dir / (user + ".tsv");
            if (fs::exists(p)) hgs.emplace(user, read_hypergraph_dump(p.string(), user, s.train));
        }
        return hgs;
    }
    return build_hypergraphs(split, dataset.catalog, config, {});
}

MetricReport run_all_seeds_with_artifacts(const RunConfig& config,
                                          const InteractionDataset& dataset,
                                          const SplitDataset& split,
                                          const std::map<std::string, MultiViewHypergraph>& hgs,
                                          bool base_only, const std::string& tag) {
    TrainConfig tc = train_config_from(config);
    tc.base_only = base_only;
    MetricReport report;
    double h5 = 0, h10 = 0, n5 = 0, n10 = 0;
    std::size_t completed = 0;
    fs::path dir(config.out_dir);
    for (std::uint64_t seed : config.seeds) {
        tc.seed = seed;
        TrainResult tr = train(split, dataset, hgs, tc);
        EvalMetrics m = evaluate_test(tr.model, split, hgs, tc.beta, tc.base_only);
        report.per_seed.push_back({seed, m.hr5, m.hr10, m.ndcg5, m.ndcg10});
        h5 += m.hr5;
        h10 += m.hr10;
        n5 += m.ndcg5;
        n10 += m.ndcg10;
        ++completed;
        std::string suffix = tag + "_seed" + std::to_string(seed);
        save_checkpoint(tr.model, (dir / ("checkpoint_" + suffix + ".bin")).string());
        write_loss_curve_csv(tr.curve, (dir / ("loss_curve_" + suffix + ".csv")).string());
    }
    auto d = static_cast<double>(completed);
    report.hr5 = h5 / d;
    report.hr10 = h10 / d;
    report.ndcg5 = n5 / d;
    report.ndcg10 = n10 / d;
    return report;
}

int cmd_train_eval(const RunConfig& config) {
    InteractionDataset dataset = load_ingested(config);
    SplitDataset split = leave_one_out(dataset);
    auto hgs = load_or_build_hypergraphs(config, dataset, split);

    fs::path dir(config.out_dir);
    if (config.base_only) {
        MetricReport report =
            run_all_seeds_with_artifacts(config, dataset, split, {}, true, "base");
        write_report_csv(report, (dir / "report_base.csv").string());
        std::printf("base-only HR@10 %.4f NDCG@10 %.4f\n", report.hr10, report.ndcg10);
        return kExitOk;
    }

    MetricReport treatment = run_all_seeds_with_artifacts(config, dataset, split, hgs, false,
                                                          config.hypergraph);
    MetricReport baseline = run_all_seeds_with_artifacts(config, dataset, split, {}, true, "base");
    write_report_csv(treatment, (dir / "report.csv").string());
    write_report_csv(baseline, (dir / "report_base.csv").string());

    double cost = 0.0;
    std::ifstream cost_in(dir / "cost_per_user.txt");
    if (cost_in) cost_in >> cost;
    ComparisonReport cmp = improvement_and_cir(baseline, treatment, cost);
    write_comparison_markdown(cmp, (dir / "comparison.md").string());

    std::printf("treatment HR@10 %.4f  baseline HR@10 %.4f\n", treatment.hr10, baseline.hr10);
    if (cmp.cir_defined) std::printf("CIR %.2f\n", cmp.cir);
    return kExitOk;
}

int cmd_inspect(const RunConfig& config, const std::string& user) {
    InteractionDataset dataset = load_ingested(config);
    SplitDataset split = leave_one_out(dataset);
    auto it = split.users.find(user);
    fs::path hg_path = fs::path(config.out_dir) / "hypergraphs" / (user + ".tsv");
    if (it == split.users.end() || !fs::exists(hg_path)) {
        std::fprintf(stderr, "unknown user: %s\n", user.c_str());
        return kExitUsage;
    }
    MultiViewHypergraph hg = read_hypergraph_dump(hg_path.string(), user, it->second.train);

    std::vector<std::string> items;
    for (const auto& [item, attrs] : dataset.catalog) items.push_back(item);
    fs::path ckpt;
    for (const auto& entry : fs::directory_iterator(config.out_dir)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("checkpoint_", 0) == 0 && name.find("base") == std::string::npos) {
            ckpt = entry.path();
            break;
        }
    }
    Model model;
    if (ckpt.empty()) {
        TrainConfig tc = train_config_from(config);
        model = initialize_model(dataset, {{user, hg}}, tc);
        std::printf("(no checkpoint found; using initialized parameters)\n");
    } else {
        model = load_checkpoint(ckpt.string(), items);
    }

    Eigen::MatrixXd X(static_cast<Eigen::Index>(hg.n_v()), model.table.d_f());
    for (std::size_t i = 0; i < hg.n_v(); ++i)
        X.row(static_cast<Eigen::Index>(i)) =
            model.table.embeddings.row(model.table.row_of(hg.vertices[i]));
    Eigen::VectorXd w = compute_weights(hg, X, model.kernel, model.gate, config.beta);
    PrototypeSet prototypes = compute_prototypes(hg, X, model.gate);

    std::vector<int> order(hg.n_e());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return w[a] > w[b]; });

    std::printf("user %s: %zu vertices, %zu edges, %zu views\n", user.c_str(), hg.n_v(),
                hg.n_e(), hg.angle_order.size());
    std::printf("%-14s %-20s %8s %8s  members\n", "view", "label", "weight", "lambda");
    for (int e : order) {
        const Hyperedge& edge = hg.edges[static_cast<std::size_t>(e)];
        std::ostringstream members;
        for (std::size_t i = 0; i < edge.members.size(); ++i) {
            if (i) members << ',';
            members << hg.vertices[static_cast<std::size_t>(edge.members[i])];
        }
        std::printf("%-14s %-20s %8.4f %8.4f  %s\n", edge.angle.c_str(), edge.label.c_str(),
                    w[e], prototypes[static_cast<std::size_t>(e)].lambda,
                    members.str().c_str());
    }
    return kExitOk;
}

int cmd_sweep(const RunConfig& config, const std::vector<int>& l_tru_grid,
              const std::vector<double>& beta_grid) {
    InteractionDataset full = load_ingested(config);
    auto runner = [&](int l_tru, double beta) {
        RunConfig point = config;
        point.l_tru = static_cast<std::size_t>(l_tru);
        point.beta = beta;
        InteractionDataset dataset = truncate_sequences(full, point.l_tru);
        SplitDataset split = leave_one_out(dataset);
        std::unique_ptr<LlmClient> client = make_client(point);
        ProfileArtifacts artifacts = profile_users(split, dataset.catalog, point, client.get());
        auto hgs = build_hypergraphs(split, dataset.catalog, point, artifacts.profiles);
        TrainConfig tc = train_config_from(point);
        return run_seeds(split, dataset, hgs, tc, point.seeds);
    };
    std::vector<int> lg = l_tru_grid.empty()
                              ? std::vector<int>{static_cast<int>(config.l_tru)}
                              : l_tru_grid;
    std::vector<double> bg = beta_grid.empty() ? std::vector<double>{config.beta} : beta_grid;
    auto points = sensitivity_sweep(lg, bg, runner);
    fs::create_directories(config.out_dir);
    write_sweep_csv(points, (fs::path(config.out_dir) / "sweep.csv").string());
    std::printf("sweep: %zu grid points written\n", points.size());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"llmhg: LLM-profiled multi-view hypergraph recommendation laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "key=value config file");
    app.add_option("-s,--set", overrides, "config override key=value (repeatable)");

    bool stats_only = false;
    auto* ingest = app.add_subcommand("ingest", "parse + preprocess + dump a dataset");
    ingest->add_flag("--stats-only", stats_only, "print corpus stats without writing dumps");

    auto* profile = app.add_subcommand("profile", "extract angles + build hypergraph dumps");

    bool base_only_flag = false;
    std::string hypergraph_flag;
    auto* train_eval = app.add_subcommand("train-eval", "train, evaluate, report");
    train_eval->add_flag("--base-only", base_only_flag, "train the sequential encoder alone");
    train_eval->add_option("--hypergraph", hypergraph_flag,
                           "hypergraph source: llm|transition|contextual|intent");

    std::string inspect_user;
    auto* inspect = app.add_subcommand("inspect", "dump angles/edges/weights for one user");
    inspect->add_option("--user", inspect_user, "user id")->required();

    std::string l_tru_grid_arg, beta_grid_arg;
    auto* sweep = app.add_subcommand("sweep", "sensitivity grid over l_tru and beta");
    sweep->add_option("--l-tru", l_tru_grid_arg, "comma list of truncation lengths");
    sweep->add_option("--beta", beta_grid_arg, "comma list of beta values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        RunConfig config = load_run_config(config_path, overrides);
        if (base_only_flag) config.base_only = true;
        if (!hypergraph_flag.empty()) config.hypergraph = hypergraph_flag;
        validate(config);

        if (ingest->parsed()) return cmd_ingest(config, stats_only);
        if (profile->parsed()) return cmd_profile(config);
        if (train_eval->parsed()) return cmd_train_eval(config);
        if (inspect->parsed()) return cmd_inspect(config, inspect_user);
        if (sweep->parsed()) {
            std::vector<int> lg;
            std::vector<double> bg;
            std::stringstream ls(l_tru_grid_arg), bs(beta_grid_arg);
            std::string part;
            while (std::getline(ls, part, ','))
                if (!part.empty()) lg.push_back(std::stoi(part));
            while (std::getline(bs, part, ','))
                if (!part.empty()) bg.push_back(std::stod(part));
            return cmd_sweep(config, lg, bg);
        }
        return kExitUsage;
    } catch (const FixtureMiss& e) {
        std::fprintf(stderr, "fixture miss: %s\n", e.what());
        return kExitFixture;
    } catch (const LlmParseError& e) {
        std::fprintf(stderr, "llm output unusable: %s\n", e.what());
        return kExitFixture;
    } catch (const TrainingDiverged& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return kExitTraining;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitTraining;
    } catch (const UnknownItem& e) {
        std::fprintf(stderr, "unknown item/user: %s\n", e.what());
        return kExitUsage;
    } catch (const InvalidUsage& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
}

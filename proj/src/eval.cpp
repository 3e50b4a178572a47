#include "llmhg/eval.hpp"

#include "llmhg/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace llmhg {

int rank_target(const Eigen::VectorXd& scores, Eigen::Index target) {
    if (target < 0 || target >= scores.size())
        throw UnknownItem("rank target index out of range");
    double t = scores[target];
    int rank = 1;
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        if (i != target && scores[i] >= t) ++rank;
    return rank;
}

double hr_at_n(const std::vector<int>& ranks, int n) {
    if (ranks.empty()) return 0.0;
    std::size_t hits = 0;
    for (int r : ranks)
        if (r <= n) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at_n(const std::vector<int>& ranks, int n) {
    if (ranks.empty()) return 0.0;
    double acc = 0.0;
    for (int r : ranks)
        if (r <= n) acc += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    return acc / static_cast<double>(ranks.size());
}

EvalMetrics evaluate_test(const Model& model, const SplitDataset& split,
                          const std::map<std::string, MultiViewHypergraph>& hypergraphs,
                          double beta, bool base_only) {
    EvalMetrics out;
    std::vector<int> ranks;
    for (const auto& [user, s] : split.users) {
        const MultiViewHypergraph* hg = nullptr;
        if (!base_only) {
            auto it = hypergraphs.find(user);
            if (it != hypergraphs.end() && it->second.n_e() > 0) hg = &it->second;
        }
        std::vector<int> input;
        input.reserve(s.train.size() + 1);
        for (const auto& item : s.train) input.push_back(model.table.row_of(item));
        input.push_back(model.table.row_of(s.valid));
        int target = model.table.row_of(s.test);

        Eigen::RowVectorXd u = user_vector(model, hg, input, beta);
        Eigen::VectorXd scores = predict_scores(u, model.table);
        int rank = rank_target(scores, target);
        ranks.push_back(rank);
        out.ranks.push_back({user, rank});
    }
    out.hr5 = hr_at_n(ranks, 5);
    out.hr10 = hr_at_n(ranks, 10);
    out.ndcg5 = ndcg_at_n(ranks, 5);
    out.ndcg10 = ndcg_at_n(ranks, 10);
    return out;
}

MetricReport run_seeds(const SplitDataset& split, const InteractionDataset& dataset,
                       const std::map<std::string, MultiViewHypergraph>& hypergraphs,
                       const TrainConfig& base_config, const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw InvalidConfig("run_seeds requires at least one seed");
    MetricReport report;
    double h5 = 0.0, h10 = 0.0, n5 = 0.0, n10 = 0.0;
    std::size_t completed = 0;
    for (std::uint64_t seed : seeds) {
        TrainConfig config = base_config;
        config.seed = seed;
        try {
            TrainResult tr = train(split, dataset, hypergraphs, config);
            EvalMetrics m = evaluate_test(tr.model, split, hypergraphs, config.beta,
                                          config.base_only);
            report.per_seed.push_back({seed, m.hr5, m.hr10, m.ndcg5, m.ndcg10});
            h5 += m.hr5;
            h10 += m.hr10;
            n5 += m.ndcg5;
            n10 += m.ndcg10;
            ++completed;
        } catch (const TrainingDiverged&) {
            report.complete = false;
            report.failed_seeds.push_back(seed);
        }
    }
    if (completed > 0) {
        auto d = static_cast<double>(completed);
        report.hr5 = h5 / d;
        report.hr10 = h10 / d;
        report.ndcg5 = n5 / d;
        report.ndcg10 = n10 / d;
    }
    return report;
}

double improvement_pct(double baseline, double treatment) {
    if (baseline == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return 100.0 * (treatment - baseline) / baseline;
}

double cir(double improvement_percent, double cost_usd) {
    if (cost_usd <= 0.0) throw InvalidConfig("CIR requires a positive cost");
    return improvement_percent / cost_usd;
}

ComparisonReport improvement_and_cir(const MetricReport& baseline, const MetricReport& treatment,
                                     double cost_usd) {
    ComparisonReport report;
    report.baseline = baseline;
    report.treatment = treatment;
    report.cost_usd = cost_usd;
    report.improvement_pct["hr@5"] = improvement_pct(baseline.hr5, treatment.hr5);
    report.improvement_pct["hr@10"] = improvement_pct(baseline.hr10, treatment.hr10);
    report.improvement_pct["ndcg@5"] = improvement_pct(baseline.ndcg5, treatment.ndcg5);
    report.improvement_pct["ndcg@10"] = improvement_pct(baseline.ndcg10, treatment.ndcg10);
    if (cost_usd > 0.0) {
        report.cir = cir(report.improvement_pct.at("hr@10"), cost_usd);
        report.cir_defined = true;
    }
    return report;
}

std::vector<SweepPoint> sensitivity_sweep(
    const std::vector<int>& l_tru_grid, const std::vector<double>& beta_grid,
    const std::function<MetricReport(int l_tru, double beta)>& runner) {
    if (l_tru_grid.empty() || beta_grid.empty())
        throw InvalidConfig("sweep grids must be nonempty");
    std::vector<SweepPoint> points;
    for (int l_tru : l_tru_grid)
        for (double beta : beta_grid) points.push_back({l_tru, beta, runner(l_tru, beta)});
    return points;
}

namespace {

void emit_metric_rows(std::ofstream& out, const MetricReport& report, const char* name,
                      double SeedMetrics::*field, double mean) {
    char line[128];
    for (const auto& s : report.per_seed) {
        std::snprintf(line, sizeof(line), "%s,%llu,%.17g\n", name,
                      static_cast<unsigned long long>(s.seed), s.*field);
        out << line;
    }
    std::snprintf(line, sizeof(line), "%s,mean,%.17g\n", name, mean);
    out << line;
}

}  // namespace

void write_report_csv(const MetricReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << "metric,seed,value\n";
    emit_metric_rows(out, report, "hr@5", &SeedMetrics::hr5, report.hr5);
    emit_metric_rows(out, report, "hr@10", &SeedMetrics::hr10, report.hr10);
    emit_metric_rows(out, report, "ndcg@5", &SeedMetrics::ndcg5, report.ndcg5);
    emit_metric_rows(out, report, "ndcg@10", &SeedMetrics::ndcg10, report.ndcg10);
    if (!report.complete) {
        for (std::uint64_t seed : report.failed_seeds)
            out << "incomplete," << seed << ",diverged\n";
    }
}

void write_comparison_markdown(const ComparisonReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << "| Metric | Baseline | Treatment | Improvement |\n";
    out << "| --- | --- | --- | --- |\n";
    auto row = [&](const char* name, double base, double treat) {
        char line[160];
        double imp = report.improvement_pct.at(name);
        if (std::isnan(imp))
            std::snprintf(line, sizeof(line), "| %s | %.4f | %.4f | n/a |\n", name, base, treat);
        else
            std::snprintf(line, sizeof(line), "| %s | %.4f | %.4f | %+.2f %% |\n", name, base,
                          treat, imp);
        out << line;
    };
    row("hr@5", report.baseline.hr5, report.treatment.hr5);
    row("hr@10", report.baseline.hr10, report.treatment.hr10);
    row("ndcg@5", report.baseline.ndcg5, report.treatment.ndcg5);
    row("ndcg@10", report.baseline.ndcg10, report.treatment.ndcg10);
    char line[160];
    std::snprintf(line, sizeof(line), "\nCost per user (USD): %.6f\n", report.cost_usd);
    out << line;
    if (report.cir_defined) {
        std::snprintf(line, sizeof(line), "CIR (HR@10 improvement %% / cost): %.2f\n",
                      report.cir);
        out << line;
    }
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << "l_tru,beta,hr@5,hr@10,ndcg@5,ndcg@10\n";
    char line[192];
    for (const auto& p : points) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.l_tru, p.beta,
                      p.report.hr5, p.report.hr10, p.report.ndcg5, p.report.ndcg10);
        out << line;
    }
}

}  // namespace llmhg

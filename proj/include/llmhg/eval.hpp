#pragma once

#include "llmhg/hgnn.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace llmhg {

struct RankResult {
    std::string user_id;
    int target_rank = 0;  // 1-based, pessimistic under ties
};

// rank = 1 + |{v != target : score(v) >= score(target)}|
int rank_target(const Eigen::VectorXd& scores, Eigen::Index target);

double hr_at_n(const std::vector<int>& ranks, int n);

// mean over users of [rank <= n ? 1/log2(rank+1) : 0]
double ndcg_at_n(const std::vector<int>& ranks, int n);

struct EvalMetrics {
    double hr5 = 0.0;
    double hr10 = 0.0;
    double ndcg5 = 0.0;
    double ndcg10 = 0.0;
    std::vector<RankResult> ranks;
};

// Leave-one-out test evaluation: input = train + valid, target = test, scored
// against the full catalog.
EvalMetrics evaluate_test(const Model& model, const SplitDataset& split,
                          const std::map<std::string, MultiViewHypergraph>& hypergraphs,
                          double beta, bool base_only);

struct SeedMetrics {
    std::uint64_t seed = 0;
    double hr5 = 0.0;
    double hr10 = 0.0;
    double ndcg5 = 0.0;
    double ndcg10 = 0.0;
};

struct MetricReport {
    std::vector<SeedMetrics> per_seed;
    double hr5 = 0.0;  // means over completed seeds
    double hr10 = 0.0;
    double ndcg5 = 0.0;
    double ndcg10 = 0.0;
    bool complete = true;  // false when some seed diverged
    std::vector<std::uint64_t> failed_seeds;
};

// Train + evaluate once per seed; mean over the seeds that completed.
MetricReport run_seeds(const SplitDataset& split, const InteractionDataset& dataset,
                       const std::map<std::string, MultiViewHypergraph>& hypergraphs,
                       const TrainConfig& base_config, const std::vector<std::uint64_t>& seeds);

struct ComparisonReport {
    MetricReport baseline;
    MetricReport treatment;
    // metric name -> improvement %; NaN where the baseline value is zero
    std::map<std::string, double> improvement_pct;
    double cost_usd = 0.0;
    double cir = 0.0;  // HR@10 improvement % / cost; set only when cost > 0
    bool cir_defined = false;
};

double improvement_pct(double baseline, double treatment);

// CIR from an already-computed improvement percentage; cost <= 0 -> InvalidConfig
double cir(double improvement_percent, double cost_usd);

ComparisonReport improvement_and_cir(const MetricReport& baseline, const MetricReport& treatment,
                                     double cost_usd);

struct SweepPoint {
    int l_tru = 0;
    double beta = 0.0;
    MetricReport report;
};

// One full run per grid point; `runner` owns dataset rebuilding for l_tru.
std::vector<SweepPoint> sensitivity_sweep(
    const std::vector<int>& l_tru_grid, const std::vector<double>& beta_grid,
    const std::function<MetricReport(int l_tru, double beta)>& runner);

// `metric,seed,value` rows followed by mean rows (seed column "mean")
void write_report_csv(const MetricReport& report, const std::string& path);

// Markdown table: one metric per row, baseline / treatment / signed % columns
void write_comparison_markdown(const ComparisonReport& report, const std::string& path);

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);

}  // namespace llmhg

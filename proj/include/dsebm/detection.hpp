#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsebm/datasets.hpp"
#include "dsebm/model.hpp"

namespace dsebm {

struct ScoreRow {
    std::string id;
    int truth = -1;  // 1 outlier, 0 inlier, -1 unknown
    double energy = 0.0;
    double recon_error = 0.0;
};

/// Per-sample energies and reconstruction errors, with the decision
/// thresholds once chosen. A sample is flagged when its value is strictly
/// above the threshold; boundary samples count as inliers.
struct ScoreReport {
    std::vector<ScoreRow> rows;
    std::optional<double> energy_threshold;
    std::optional<double> error_threshold;
    std::vector<std::pair<std::string, std::string>> config_echo;

    bool energy_flag(std::size_t i) const { return rows[i].energy > *energy_threshold; }
    bool error_flag(std::size_t i) const { return rows[i].recon_error > *error_threshold; }
};

/// Scores every item of the chosen split (energy and squared input-gradient
/// norm; sequences sum over steps). Workers > 1 partitions the rows over a
/// small thread pool; results land by index so the report is identical for
/// any worker count.
ScoreReport score_samples(const TrainedModel& model, const LabeledDataset& dataset,
                          Split split, std::size_t workers = 1);

/// (1 - rho)-quantile of the scores: the k-th smallest with
/// k = ceil((1 - rho) * n). Samples strictly above it get flagged, so the
/// flagged fraction is at most rho.
double choose_threshold(const std::vector<double>& scores, double rho);

/// Threshold maximizing F1 over all distinct score values (analysis mode).
double best_f1_threshold(const std::vector<double>& scores, const std::vector<int>& truth);

struct RuleMetrics {
    std::optional<double> precision;  // absent when nothing was flagged
    std::optional<double> recall;     // absent when ground truth has no positives
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct SweepPoint {
    double threshold = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    RuleMetrics energy_rule;
    RuleMetrics error_rule;
    double energy_threshold = 0.0;
    double error_threshold = 0.0;
    std::vector<SweepPoint> energy_sweep;
    std::vector<SweepPoint> error_sweep;
};

/// Confusion metrics for both criteria at the report's thresholds, plus the
/// threshold -> F1 sweep over all distinct score values. Requires ground
/// truth on every row and thresholds already chosen.
EvalReport evaluate(const ScoreReport& report);

/// Metric averages across per-inlier-class runs (the "mean precision /
/// mean recall / mean F1" protocol). Runs with an undefined metric are
/// skipped for that average.
struct MeanMetrics {
    std::optional<double> mean_precision;
    std::optional<double> mean_recall;
    double mean_f1 = 0.0;
};
struct MeanReport {
    MeanMetrics energy_rule;
    MeanMetrics error_rule;
    std::size_t runs = 0;
};
MeanReport evaluate_mean(const std::vector<EvalReport>& reports);

// Line-oriented report format: '#'-prefixed echo lines, then one
// tab-separated row per sample (id, truth, energy, recon_error and, once
// thresholds are set, the two rule labels).
void write_score_report(const ScoreReport& report, const std::string& path);
ScoreReport read_score_report(const std::string& path);

}  // namespace dsebm

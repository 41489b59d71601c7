#include "dsebm/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "dsebm/errors.hpp"

namespace dsebm {

ScoreReport score_samples(const TrainedModel& model, const LabeledDataset& dataset,
                          Split split, std::size_t workers) {
    std::vector<const DatasetItem*> selected;
    for (const auto& item : dataset.items) {
        if (item.split == split) selected.push_back(&item);
    }
    if (selected.empty()) {
        throw DataError(std::string("score_samples: no items in the ") +
                        (split == Split::train ? "train" : "test") + " split");
    }

    ScoreReport report;
    report.rows.resize(selected.size());
    const bool truth_known = !dataset.inlier_classes.empty();

    auto score_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const DatasetItem& item = *selected[i];
            ScoreRow& row = report.rows[i];
            row.id = item.id;
            row.truth = truth_known ? (dataset.is_outlier(item) ? 1 : 0) : -1;
            row.energy = model.energy(item.sample);
            row.recon_error = model.recon_error(item.sample);
        }
    };

    if (workers <= 1 || selected.size() < 2 * workers) {
        score_range(0, selected.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (selected.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(selected.size(), begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(score_range, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    return report;
}

double choose_threshold(const std::vector<double>& scores, double rho) {
    if (scores.empty()) throw DataError("choose_threshold: empty score list");
    if (!(rho > 0.0 && rho < 1.0)) throw DataError("choose_threshold: rho must be in (0, 1)");
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    std::size_t k = static_cast<std::size_t>(
        std::ceil((1.0 - rho) * static_cast<double>(n)));
    if (k == 0) k = 1;
    if (k > n) k = n;
    return sorted[k - 1];
}

namespace {

RuleMetrics confusion_metrics(const std::vector<double>& scores,
                              const std::vector<int>& truth, double threshold) {
    RuleMetrics m;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores[i] > threshold;
        const bool positive = truth[i] == 1;
        if (flagged && positive) ++m.tp;
        else if (flagged && !positive) ++m.fp;
        else if (!flagged && positive) ++m.fn;
        else ++m.tn;
    }
    if (m.tp + m.fp > 0) {
        m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    }
    if (m.tp + m.fn > 0) {
        m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    }
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    }
    return m;
}

std::vector<SweepPoint> f1_sweep(const std::vector<double>& scores,
                                 const std::vector<int>& truth) {
    std::vector<double> distinct = scores;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<SweepPoint> sweep;
    sweep.reserve(distinct.size());
    for (double th : distinct) {
        sweep.push_back({th, confusion_metrics(scores, truth, th).f1});
    }
    return sweep;
}

}  // namespace

double best_f1_threshold(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.empty() || scores.size() != truth.size()) {
        throw DataError("best_f1_threshold: scores and truth must be nonempty and aligned");
    }
    // Flagging is strictly-above, so a threshold just under the minimum
    // score (flag everything) is also a candidate.
    std::vector<SweepPoint> sweep = f1_sweep(scores, truth);
    double best_th = sweep.front().threshold - 1.0;
    double best_f1 = confusion_metrics(scores, truth, best_th).f1;
    for (const SweepPoint& p : sweep) {
        if (p.f1 > best_f1) {
            best_f1 = p.f1;
            best_th = p.threshold;
        }
    }
    return best_th;
}

EvalReport evaluate(const ScoreReport& report) {
    if (!report.energy_threshold || !report.error_threshold) {
        throw DataError("evaluate: thresholds not chosen");
    }
    std::vector<double> energies, errors;
    std::vector<int> truth;
    for (const ScoreRow& row : report.rows) {
        if (row.truth < 0) {
            throw DataError("evaluate: sample '" + row.id + "' has no ground-truth label");
        }
        energies.push_back(row.energy);
        errors.push_back(row.recon_error);
        truth.push_back(row.truth);
    }

    EvalReport out;
    out.energy_threshold = *report.energy_threshold;
    out.error_threshold = *report.error_threshold;
    out.energy_rule = confusion_metrics(energies, truth, out.energy_threshold);
    out.error_rule = confusion_metrics(errors, truth, out.error_threshold);
    out.energy_sweep = f1_sweep(energies, truth);
    out.error_sweep = f1_sweep(errors, truth);
    return out;
}

namespace {

MeanMetrics mean_of(const std::vector<EvalReport>& reports, bool energy) {
    MeanMetrics m;
    double p = 0.0, r = 0.0, f = 0.0;
    std::size_t np = 0, nr = 0;
    for (const EvalReport& rep : reports) {
        const RuleMetrics& rule = energy ? rep.energy_rule : rep.error_rule;
        if (rule.precision) {
            p += *rule.precision;
            ++np;
        }
        if (rule.recall) {
            r += *rule.recall;
            ++nr;
        }
        f += rule.f1;
    }
    if (np > 0) m.mean_precision = p / static_cast<double>(np);
    if (nr > 0) m.mean_recall = r / static_cast<double>(nr);
    m.mean_f1 = reports.empty() ? 0.0 : f / static_cast<double>(reports.size());
    return m;
}

}  // namespace

MeanReport evaluate_mean(const std::vector<EvalReport>& reports) {
    MeanReport out;
    out.runs = reports.size();
    out.energy_rule = mean_of(reports, true);
    out.error_rule = mean_of(reports, false);
    return out;
}

namespace {

std::string real_repr(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_score_report(const ScoreReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    for (const auto& [key, value] : report.config_echo) {
        out << "# " << key << "=" << value << "\n";
    }
    if (report.energy_threshold) {
        out << "# energy_threshold=" << real_repr(*report.energy_threshold) << "\n";
    }
    if (report.error_threshold) {
        out << "# error_threshold=" << real_repr(*report.error_threshold) << "\n";
    }
    const bool flags = report.energy_threshold && report.error_threshold;
    out << "# columns: id\ttruth\tenergy\trecon_error" << (flags ? "\tenergy_flag\terror_flag" : "")
        << "\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const ScoreRow& row = report.rows[i];
        out << row.id << "\t" << (row.truth < 0 ? std::string("?") : std::to_string(row.truth))
            << "\t" << real_repr(row.energy) << "\t" << real_repr(row.recon_error);
        if (flags) {
            out << "\t" << (report.energy_flag(i) ? 1 : 0) << "\t"
                << (report.error_flag(i) ? 1 : 0);
        }
        out << "\n";
    }
}

ScoreReport read_score_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    ScoreReport report;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            const std::size_t eq = body.find('=');
            if (eq == std::string::npos) continue;
            std::string key = body.substr(0, eq);
            key.erase(0, key.find_first_not_of(' '));
            const std::string value = body.substr(eq + 1);
            if (key == "energy_threshold") {
                report.energy_threshold = std::stod(value);
            } else if (key == "error_threshold") {
                report.error_threshold = std::stod(value);
            } else {
                report.config_echo.emplace_back(key, value);
            }
            continue;
        }
        std::istringstream fields(line);
        ScoreRow row;
        std::string truth;
        if (!(fields >> row.id >> truth >> row.energy >> row.recon_error)) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": malformed score row");
        }
        row.truth = (truth == "?") ? -1 : std::stoi(truth);
        if (!std::isfinite(row.energy) || !std::isfinite(row.recon_error)) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": non-finite score");
        }
        report.rows.push_back(std::move(row));
    }
    if (report.rows.empty()) throw DataError(path + ": no score rows");
    return report;
}

}  // namespace dsebm

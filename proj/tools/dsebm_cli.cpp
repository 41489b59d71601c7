#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsebm/datasets.hpp"
#include "dsebm/detection.hpp"
#include "dsebm/errors.hpp"
#include "dsebm/gradcheck.hpp"
#include "dsebm/model.hpp"
#include "dsebm/numerics.hpp"
#include "dsebm/persistence.hpp"
#include "dsebm/training.hpp"

namespace {

using namespace dsebm;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string real_repr(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
    std::vector<std::size_t> widths;
    std::istringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        try {
            const long v = std::stol(token);
            if (v <= 0) throw std::invalid_argument("nonpositive");
            widths.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw DataError("bad layer width '" + token + "' in '" + text + "'");
        }
    }
    if (widths.empty()) throw DataError("no layer widths in '" + text + "'");
    return widths;
}

// "conv:8x3,pool:2,dense:16" -> layer descriptors; filter shapes need the
// input image, so this returns builders applied once the data is known.
ConvEnergyParams build_conv_params(const std::string& stack_text,
                                   const std::vector<std::size_t>& input_shape,
                                   RngStream& rng) {
    ConvEnergyParams params;
    params.prior_center = Tensor::zeros(input_shape);
    std::vector<std::size_t> shape = input_shape;
    std::istringstream in(stack_text);
    std::string token;
    while (std::getline(in, token, ',')) {
        const std::size_t colon = token.find(':');
        if (colon == std::string::npos) throw DataError("bad stack entry '" + token + "'");
        const std::string kind = token.substr(0, colon);
        const std::string arg = token.substr(colon + 1);
        if (kind == "conv") {
            const std::size_t x = arg.find('x');
            if (x == std::string::npos) {
                throw DataError("conv entry must be conv:<filters>x<kernel>, got '" + token + "'");
            }
            const std::size_t filters = std::stoul(arg.substr(0, x));
            const std::size_t kernel = std::stoul(arg.substr(x + 1));
            if (shape.size() != 3) throw DataError("conv layer after flattening in '" + stack_text + "'");
            ConvFilterLayer layer{Tensor::zeros({filters, shape[0], kernel, kernel}),
                                  Tensor::zeros({filters})};
            const double bound =
                std::sqrt(6.0 / static_cast<double>(shape[0] * kernel * kernel + filters));
            for (double& v : layer.filters.data) v = bound * (2.0 * rng.next_uniform01() - 1.0);
            params.layers.push_back(std::move(layer));
            if (shape[1] < kernel || shape[2] < kernel) {
                throw DataError("conv kernel " + std::to_string(kernel) + " larger than plane");
            }
            shape = {filters, shape[1] - kernel + 1, shape[2] - kernel + 1};
        } else if (kind == "pool") {
            const std::size_t window = std::stoul(arg);
            if (shape.size() != 3 || window == 0 || shape[1] % window || shape[2] % window) {
                throw DataError("pool:" + arg + " does not divide plane " +
                                shape_string(Tensor::zeros(shape).shape));
            }
            params.layers.push_back(MaxPoolLayer{window});
            shape = {shape[0], shape[1] / window, shape[2] / window};
        } else if (kind == "dense") {
            const std::size_t width = std::stoul(arg);
            const std::size_t flat = shape_numel(shape);
            FlatDenseLayer layer{Tensor::zeros({flat, width}), Tensor::zeros({width})};
            const double bound = std::sqrt(6.0 / static_cast<double>(flat + width));
            for (double& v : layer.weight.data) v = bound * (2.0 * rng.next_uniform01() - 1.0);
            params.layers.push_back(std::move(layer));
            shape = {width};
        } else {
            throw DataError("unknown stack layer kind '" + kind + "'");
        }
    }
    if (params.layers.empty()) throw DataError("empty conv stack '" + stack_text + "'");
    return params;
}

LabeledDataset load_for_architecture(const std::string& arch, const std::string& path) {
    if (arch == "dense") return load_static(path);
    if (arch == "recurrent") return load_sequences(path);
    if (arch == "conv") return load_images(path);
    throw DataError("unknown architecture '" + arch + "'");
}

struct CommonTrainFlags {
    std::string arch = "dense";
    std::string data_path;
    std::string out_path;
    std::string trace_path;
    std::string hidden = "16,8";
    std::size_t ebm_dim = 16;
    std::size_t rnn_dim = 8;
    std::string stack = "conv:4x3,pool:2,dense:16";
    std::vector<std::string> inlier_classes;
    TrainConfig config;
    std::string normalization = "zscore";
};

int cmd_train(const CommonTrainFlags& flags) {
    TrainConfig config = flags.config;
    config.normalization = flags.normalization == "none" ? TrainConfig::Normalization::none
                                                         : TrainConfig::Normalization::zscore;
    config.validate();

    LabeledDataset dataset = load_for_architecture(flags.arch, flags.data_path);
    if (!flags.inlier_classes.empty()) {
        std::set<std::string> keep(flags.inlier_classes.begin(), flags.inlier_classes.end());
        std::vector<DatasetItem> filtered;
        for (auto& item : dataset.items) {
            if (keep.count(item.label)) filtered.push_back(std::move(item));
        }
        dataset.items = std::move(filtered);
        if (dataset.items.empty()) throw DataError("no samples left after inlier-class filter");
        dataset.inlier_classes = std::move(keep);
    }
    for (auto& item : dataset.items) item.split = Split::train;

    RngStream init_rng(config.seed);
    EnergyModel initial;
    if (flags.arch == "dense") {
        const Tensor& first = std::get<Tensor>(dataset.items.front().sample);
        initial = make_dense_params(first.numel(), parse_widths(flags.hidden), init_rng);
    } else if (flags.arch == "recurrent") {
        const Sequence& first = std::get<Sequence>(dataset.items.front().sample);
        initial = make_recurrent_params(first.step_dim(), flags.ebm_dim, flags.rnn_dim, init_rng);
    } else {
        const Tensor& first = std::get<Tensor>(dataset.items.front().sample);
        initial = build_conv_params(flags.stack, first.shape, init_rng);
    }

    TrainResult result = train_on_dataset(std::move(initial), dataset, config);
    result.model.config_echo.emplace_back("data", flags.data_path);
    result.model.config_echo.emplace_back("arch_spec",
                                          flags.arch == "dense"      ? flags.hidden
                                          : flags.arch == "recurrent"
                                              ? std::to_string(flags.ebm_dim) + "/" +
                                                    std::to_string(flags.rnn_dim)
                                              : flags.stack);
    save_model(result.model, flags.out_path);
    const std::string trace_path =
        flags.trace_path.empty() ? flags.out_path + ".trace.csv" : flags.trace_path;
    write_trace(result.trace, trace_path);

    std::cout << "trained " << flags.arch << " model on " << dataset.items.size()
              << " samples; final objective "
              << real_repr(result.trace.epochs.back().mean_objective) << "\n"
              << "model: " << flags.out_path << "\ntrace: " << trace_path << "\n";
    return kExitOk;
}

struct ScoreFlags {
    std::string model_path;
    std::string data_path;
    std::string out_path;
    std::vector<std::string> inlier_classes;
    std::size_t workers = 1;
};

int cmd_score(const ScoreFlags& flags) {
    TrainedModel model = load_model(flags.model_path);
    LabeledDataset dataset =
        load_for_architecture(architecture_name(model.model), flags.data_path);
    dataset.inlier_classes.insert(flags.inlier_classes.begin(), flags.inlier_classes.end());
    for (auto& item : dataset.items) item.split = Split::test;

    ScoreReport report = score_samples(model, dataset, Split::test, flags.workers);
    report.config_echo = model.config_echo;
    report.config_echo.emplace_back("scored_data", flags.data_path);
    write_score_report(report, flags.out_path);
    std::cout << "scored " << report.rows.size() << " samples -> " << flags.out_path << "\n";
    return kExitOk;
}

struct EvalFlags {
    std::string model_path;
    std::string data_path;
    std::vector<std::string> score_paths;
    std::vector<std::string> inlier_classes;
    std::string out_prefix = "eval";
    std::string threshold_mode = "quantile";
    double rho = 0.2;
    std::size_t workers = 1;
};

nlohmann::json metrics_json(const RuleMetrics& m, double threshold) {
    nlohmann::json out;
    out["threshold"] = threshold;
    if (m.precision) out["precision"] = *m.precision; else out["precision"] = nullptr;
    if (m.recall) out["recall"] = *m.recall; else out["recall"] = nullptr;
    out["f1"] = m.f1;
    out["tp"] = m.tp;
    out["fp"] = m.fp;
    out["fn"] = m.fn;
    out["tn"] = m.tn;
    return out;
}

void print_rule(const char* name, const RuleMetrics& m, double threshold) {
    auto opt = [](const std::optional<double>& v) {
        return v ? real_repr(*v) : std::string("NA");
    };
    std::cout << name << ": threshold=" << real_repr(threshold) << " precision=" << opt(m.precision)
              << " recall=" << opt(m.recall) << " f1=" << real_repr(m.f1) << "\n";
}

int cmd_eval(const EvalFlags& flags) {
    std::vector<ScoreReport> reports;
    if (!flags.score_paths.empty()) {
        for (const std::string& path : flags.score_paths) {
            reports.push_back(read_score_report(path));
        }
    } else {
        if (flags.model_path.empty() || flags.data_path.empty()) {
            throw DataError("eval needs either --scores files or both --model and --data");
        }
        TrainedModel model = load_model(flags.model_path);
        LabeledDataset dataset =
            load_for_architecture(architecture_name(model.model), flags.data_path);
        if (flags.inlier_classes.empty()) {
            throw DataError("eval over raw data needs at least one --inlier-class");
        }
        dataset.inlier_classes.insert(flags.inlier_classes.begin(), flags.inlier_classes.end());
        for (auto& item : dataset.items) item.split = Split::test;
        ScoreReport report = score_samples(model, dataset, Split::test, flags.workers);
        report.config_echo = model.config_echo;
        reports.push_back(std::move(report));
    }

    std::vector<EvalReport> evals;
    for (ScoreReport& report : reports) {
        std::vector<double> energies, errors;
        std::vector<int> truth;
        for (const ScoreRow& row : report.rows) {
            energies.push_back(row.energy);
            errors.push_back(row.recon_error);
            truth.push_back(row.truth);
        }
        if (flags.threshold_mode == "best-f1") {
            report.energy_threshold = best_f1_threshold(energies, truth);
            report.error_threshold = best_f1_threshold(errors, truth);
        } else if (flags.threshold_mode == "quantile") {
            report.energy_threshold = choose_threshold(energies, flags.rho);
            report.error_threshold = choose_threshold(errors, flags.rho);
        } else {
            throw DataError("unknown threshold mode '" + flags.threshold_mode + "'");
        }
        evals.push_back(evaluate(report));
    }

    // Per-run outputs (scores with flags, sweep curves), then the summary.
    nlohmann::json summary;
    summary["threshold_mode"] = flags.threshold_mode;
    if (flags.threshold_mode == "quantile") summary["rho"] = flags.rho;
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t i = 0; i < evals.size(); ++i) {
        const std::string suffix = evals.size() > 1 ? "." + std::to_string(i) : "";
        write_score_report(reports[i], flags.out_prefix + suffix + ".scores.tsv");
        std::ofstream sweep(flags.out_prefix + suffix + ".sweep.csv");
        if (!sweep) throw DataError("cannot write sweep file");
        sweep << "criterion,threshold,f1\n";
        for (const SweepPoint& p : evals[i].energy_sweep) {
            sweep << "energy," << real_repr(p.threshold) << "," << real_repr(p.f1) << "\n";
        }
        for (const SweepPoint& p : evals[i].error_sweep) {
            sweep << "error," << real_repr(p.threshold) << "," << real_repr(p.f1) << "\n";
        }
        nlohmann::json run;
        run["energy"] = metrics_json(evals[i].energy_rule, evals[i].energy_threshold);
        run["error"] = metrics_json(evals[i].error_rule, evals[i].error_threshold);
        runs.push_back(std::move(run));

        std::cout << "run " << i << ":\n";
        print_rule("  energy rule", evals[i].energy_rule, evals[i].energy_threshold);
        print_rule("  error rule ", evals[i].error_rule, evals[i].error_threshold);
    }
    summary["runs"] = std::move(runs);

    if (evals.size() > 1) {
        MeanReport mean = evaluate_mean(evals);
        nlohmann::json m;
        auto fill = [](const MeanMetrics& mm) {
            nlohmann::json j;
            if (mm.mean_precision) j["mean_precision"] = *mm.mean_precision;
            if (mm.mean_recall) j["mean_recall"] = *mm.mean_recall;
            j["mean_f1"] = mm.mean_f1;
            return j;
        };
        m["energy"] = fill(mean.energy_rule);
        m["error"] = fill(mean.error_rule);
        m["runs"] = mean.runs;
        summary["mean"] = std::move(m);
        std::cout << "mean over " << mean.runs << " runs: energy mF1="
                  << real_repr(mean.energy_rule.mean_f1) << ", error mF1="
                  << real_repr(mean.error_rule.mean_f1) << "\n";
    }

    std::ofstream out(flags.out_prefix + ".summary.json");
    if (!out) throw DataError("cannot write summary file");
    out << summary.dump(2) << "\n";
    return kExitOk;
}

struct GradcheckFlags {
    std::uint64_t seed = 1234;
};

int cmd_gradcheck(const GradcheckFlags& flags) {
    GradCheckReport report = run_gradient_checks(flags.seed);
    std::printf("%-28s %14s %10s  %s\n", "suite", "max_rel_error", "tolerance", "status");
    for (const auto& entry : report.entries) {
        std::printf("%-28s %14.3e %10.0e  %s\n", entry.suite.c_str(), entry.max_rel_error,
                    entry.tolerance, entry.pass ? "pass" : "FAIL");
    }
    if (!report.all_pass()) {
        std::cerr << "gradient checks FAILED\n";
        return kExitNumeric;
    }
    return kExitOk;
}

struct LandscapeFlags {
    std::string model_path;
    std::string out_path;
    std::string svg_path;
    double min = -3.0, max = 3.0;
    std::size_t resolution = 512;
    double energy_threshold = std::numeric_limits<double>::quiet_NaN();
    double error_threshold = std::numeric_limits<double>::quiet_NaN();
};

void write_landscape_svg_1d(const LandscapeFlags& flags, const std::vector<double>& xs,
                            const std::vector<double>& energy,
                            const std::vector<double>& error) {
    const double width = 800.0, panel = 260.0, margin = 45.0;
    std::ofstream out(flags.svg_path);
    if (!out) throw DataError("cannot write '" + flags.svg_path + "'");
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
        << (2 * panel + 3 * margin) << "'>\n";

    auto draw_panel = [&](const std::vector<double>& ys, double top, const char* color,
                          const char* title, double threshold) {
        double lo = ys[0], hi = ys[0];
        for (double y : ys) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
        if (hi - lo < 1e-12) hi = lo + 1.0;
        auto px = [&](std::size_t i) {
            return margin + (width - 2 * margin) * static_cast<double>(i) /
                                static_cast<double>(xs.size() - 1);
        };
        auto py = [&](double y) { return top + panel - panel * (y - lo) / (hi - lo); };
        out << "<rect x='" << margin << "' y='" << top << "' width='" << (width - 2 * margin)
            << "' height='" << panel << "' fill='none' stroke='#999'/>\n";
        out << "<text x='" << margin << "' y='" << (top - 6) << "' font-size='13'>" << title
            << "</text>\n<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < ys.size(); ++i) out << px(i) << "," << py(ys[i]) << " ";
        out << "'/>\n";
        if (std::isfinite(threshold) && threshold >= lo && threshold <= hi) {
            out << "<line x1='" << margin << "' y1='" << py(threshold) << "' x2='"
                << (width - margin) << "' y2='" << py(threshold)
                << "' stroke='#444' stroke-dasharray='5,4'/>\n";
        }
    };
    draw_panel(energy, margin, "#b03030", "energy", flags.energy_threshold);
    draw_panel(error, 2 * margin + panel, "#2060a0", "reconstruction error (squared gradient norm)",
               flags.error_threshold);
    out << "</svg>\n";
}

void write_landscape_svg_2d(const LandscapeFlags& flags, std::size_t res,
                            const std::vector<double>& energy) {
    const double cell = std::max(1.0, 640.0 / static_cast<double>(res));
    double lo = energy[0], hi = energy[0];
    for (double e : energy) {
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    std::ofstream out(flags.svg_path);
    if (!out) throw DataError("cannot write '" + flags.svg_path + "'");
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << (cell * res) << "' height='"
        << (cell * res) << "'>\n";
    for (std::size_t i = 0; i < res; ++i) {
        for (std::size_t j = 0; j < res; ++j) {
            const int shade =
                static_cast<int>(255.0 * (energy[i * res + j] - lo) / (hi - lo));
            out << "<rect x='" << (cell * j) << "' y='" << (cell * (res - 1 - i)) << "' width='"
                << cell << "' height='" << cell << "' fill='rgb(" << shade << "," << shade << ","
                << shade << ")'/>\n";
        }
    }
    out << "</svg>\n";
}

int cmd_landscape(const LandscapeFlags& flags) {
    TrainedModel model = load_model(flags.model_path);
    const auto* dense = std::get_if<DenseEnergyParams>(&model.model);
    const std::size_t dim = dense ? dense->input_dim() : 0;
    if (!dense || dim < 1 || dim > 2) {
        std::cerr << "landscape: needs a dense model over 1-D or 2-D inputs\n";
        return kExitUsage;
    }
    if (!(flags.max > flags.min) || flags.resolution < 2) {
        std::cerr << "landscape: need max > min and resolution >= 2\n";
        return kExitUsage;
    }

    const std::size_t res = flags.resolution;
    auto grid_value = [&](std::size_t i) {
        return flags.min + (flags.max - flags.min) * static_cast<double>(i) /
                               static_cast<double>(res - 1);
    };

    std::ofstream out(flags.out_path);
    if (!out) throw DataError("cannot write '" + flags.out_path + "'");
    for (const auto& [key, value] : model.config_echo) out << "# " << key << "=" << value << "\n";
    if (std::isfinite(flags.energy_threshold)) {
        out << "# energy_threshold=" << real_repr(flags.energy_threshold) << "\n";
    }
    if (std::isfinite(flags.error_threshold)) {
        out << "# error_threshold=" << real_repr(flags.error_threshold) << "\n";
    }

    if (dim == 1) {
        out << "x,energy,recon_error\n";
        std::vector<double> xs(res), energies(res), errors(res);
        for (std::size_t i = 0; i < res; ++i) {
            xs[i] = grid_value(i);
            Sample point = Tensor::vector({xs[i]});
            energies[i] = model.energy(point);
            errors[i] = model.recon_error(point);
            out << real_repr(xs[i]) << "," << real_repr(energies[i]) << ","
                << real_repr(errors[i]) << "\n";
        }
        if (!flags.svg_path.empty()) write_landscape_svg_1d(flags, xs, energies, errors);
    } else {
        out << "x0,x1,energy,recon_error\n";
        std::vector<double> energies(res * res);
        for (std::size_t i = 0; i < res; ++i) {
            for (std::size_t j = 0; j < res; ++j) {
                Sample point = Tensor::vector({grid_value(i), grid_value(j)});
                const double e = model.energy(point);
                energies[i * res + j] = e;
                out << real_repr(grid_value(i)) << "," << real_repr(grid_value(j)) << ","
                    << real_repr(e) << "," << real_repr(model.recon_error(point)) << "\n";
            }
        }
        if (!flags.svg_path.empty()) write_landscape_svg_2d(flags, res, energies);
    }
    std::cout << "landscape -> " << flags.out_path << "\n";
    return kExitOk;
}

struct SynthFlags {
    std::string task = "gaussians";
    std::size_t n = 2000;
    std::size_t dim = 2;
    double separation = 6.0;
    double rho = 0.2;
    double train_fraction = 0.5;
    std::uint64_t seed = 1;
    std::string out_train;
    std::string out_test;
    std::string out_all;
};

int cmd_synth(const SynthFlags& flags) {
    LabeledDataset raw = flags.task == "bimodal1d" ? synth_bimodal_1d(flags.n, flags.seed)
                                                   : synth_gaussians(flags.n, flags.dim,
                                                                     flags.separation, flags.seed);
    if (!flags.out_all.empty()) save_static(raw, flags.out_all);
    if (flags.out_train.empty() && flags.out_test.empty()) {
        if (flags.out_all.empty()) {
            std::cerr << "synth: give --out-train/--out-test or --out-all\n";
            return kExitUsage;
        }
        return kExitOk;
    }
    if (flags.out_train.empty() || flags.out_test.empty()) {
        throw DataError("synth: --out-train and --out-test must be given together");
    }

    LabeledDataset split =
        make_contaminated(raw, {"normal"}, flags.rho, flags.train_fraction, flags.seed + 1);
    LabeledDataset train, test;
    train.kind = test.kind = split.kind;
    train.inlier_classes = test.inlier_classes = split.inlier_classes;
    train.rho = test.rho = split.rho;
    for (auto& item : split.items) {
        (item.split == Split::train ? train : test).items.push_back(item);
    }
    train.recompute_feature_stats();
    test.recompute_feature_stats();
    save_static(train, flags.out_train);
    save_static(test, flags.out_test);
    std::cout << "synthesized " << flags.task << ": " << train.items.size() << " train inliers, "
              << test.items.size() << " test samples (rho=" << flags.rho << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep structured energy based anomaly detection"};
    app.set_config("--config", "", "key=value file with flag defaults; flags override");
    app.require_subcommand(1);

    SynthFlags synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate synthetic labeled datasets");
    synth_cmd->add_option("--task", synth.task, "gaussians | bimodal1d")
        ->check(CLI::IsMember({"gaussians", "bimodal1d"}));
    synth_cmd->add_option("--n", synth.n, "total samples");
    synth_cmd->add_option("--dim", synth.dim, "dimensionality (gaussians task)");
    synth_cmd->add_option("--separation", synth.separation, "mode separation in stddev units");
    synth_cmd->add_option("--rho", synth.rho, "test contamination ratio");
    synth_cmd->add_option("--train-fraction", synth.train_fraction, "inlier share used for training");
    synth_cmd->add_option("--seed", synth.seed, "rng seed")->envname("DSEBM_SEED");
    synth_cmd->add_option("--out-train", synth.out_train, "training CSV (inliers only)");
    synth_cmd->add_option("--out-test", synth.out_test, "contaminated test CSV");
    synth_cmd->add_option("--out-all", synth.out_all, "full unsplit CSV");

    CommonTrainFlags train_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model on inlier data");
    train_cmd->add_option("--arch", train_flags.arch, "dense | recurrent | conv")
        ->check(CLI::IsMember({"dense", "recurrent", "conv"}));
    train_cmd->add_option("--data", train_flags.data_path, "training data file")->required();
    train_cmd->add_option("--out", train_flags.out_path, "model artifact path")->required();
    train_cmd->add_option("--trace", train_flags.trace_path, "per-epoch trace CSV");
    train_cmd->add_option("--hidden", train_flags.hidden, "dense hidden widths, e.g. 16,8");
    train_cmd->add_option("--ebm-dim", train_flags.ebm_dim, "recurrent step-energy width");
    train_cmd->add_option("--rnn-dim", train_flags.rnn_dim, "recurrent hidden width");
    train_cmd->add_option("--stack", train_flags.stack,
                          "conv stack, e.g. conv:8x3,pool:2,dense:16");
    train_cmd->add_option("--inlier-class", train_flags.inlier_classes,
                          "keep only these classes for training");
    train_cmd->add_option("--sigma", train_flags.config.noise_sigma, "corruption stddev")
        ->envname("DSEBM_SIGMA");
    train_cmd->add_option("--epochs", train_flags.config.epochs, "training epochs");
    train_cmd->add_option("--batch", train_flags.config.batch_size, "minibatch size");
    train_cmd->add_option("--lr", train_flags.config.learning_rate, "learning rate");
    train_cmd->add_option("--momentum", train_flags.config.momentum, "momentum in [0,1)");
    train_cmd->add_option("--seed", train_flags.config.seed, "rng seed")->envname("DSEBM_SEED");
    train_cmd->add_option("--normalization", train_flags.normalization, "zscore | none")
        ->check(CLI::IsMember({"zscore", "none"}));

    ScoreFlags score_flags;
    CLI::App* score_cmd = app.add_subcommand("score", "score samples with a trained model");
    score_cmd->add_option("--model", score_flags.model_path, "model artifact")->required();
    score_cmd->add_option("--data", score_flags.data_path, "data file")->required();
    score_cmd->add_option("--out", score_flags.out_path, "score report path")->required();
    score_cmd->add_option("--inlier-class", score_flags.inlier_classes,
                          "classes considered inliers (enables ground truth)");
    score_cmd->add_option("--workers", score_flags.workers, "scoring worker threads");

    EvalFlags eval_flags;
    CLI::App* eval_cmd = app.add_subcommand("eval", "thresholds and detection metrics");
    eval_cmd->add_option("--model", eval_flags.model_path, "model artifact");
    eval_cmd->add_option("--data", eval_flags.data_path, "test data file");
    eval_cmd->add_option("--scores", eval_flags.score_paths,
                         "existing score reports (one eval per file, plus the mean)");
    eval_cmd->add_option("--inlier-class", eval_flags.inlier_classes,
                         "classes considered inliers");
    eval_cmd->add_option("--rho", eval_flags.rho, "contamination ratio for quantile thresholds");
    eval_cmd->add_option("--threshold-mode", eval_flags.threshold_mode, "quantile | best-f1")
        ->check(CLI::IsMember({"quantile", "best-f1"}));
    eval_cmd->add_option("--out-prefix", eval_flags.out_prefix, "output file prefix");
    eval_cmd->add_option("--workers", eval_flags.workers, "scoring worker threads");

    GradcheckFlags grad_flags;
    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference oracle suites");
    grad_cmd->add_option("--seed", grad_flags.seed, "rng seed")->envname("DSEBM_SEED");

    LandscapeFlags land_flags;
    CLI::App* land_cmd = app.add_subcommand("landscape", "grid energy/error curves for 1-D or 2-D models");
    land_cmd->add_option("--model", land_flags.model_path, "model artifact")->required();
    land_cmd->add_option("--out", land_flags.out_path, "CSV output")->required();
    land_cmd->add_option("--svg", land_flags.svg_path, "optional SVG rendering");
    land_cmd->add_option("--min", land_flags.min, "grid lower bound (inclusive)");
    land_cmd->add_option("--max", land_flags.max, "grid upper bound (inclusive)");
    land_cmd->add_option("--resolution", land_flags.resolution, "grid points per axis");
    land_cmd->add_option("--energy-threshold", land_flags.energy_threshold, "mark this energy level");
    land_cmd->add_option("--error-threshold", land_flags.error_threshold, "mark this error level");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (train_cmd->parsed()) return cmd_train(train_flags);
        if (score_cmd->parsed()) return cmd_score(score_flags);
        if (eval_cmd->parsed()) return cmd_eval(eval_flags);
        if (grad_cmd->parsed()) return cmd_gradcheck(grad_flags);
        if (land_cmd->parsed()) return cmd_landscape(land_flags);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

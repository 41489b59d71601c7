#include "dsebm/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dsebm/errors.hpp"

namespace dsebm {

const char* sample_kind_name(SampleKind kind) {
    switch (kind) {
        case SampleKind::static_vector: return "static";
        case SampleKind::sequence: return "sequence";
        case SampleKind::image: return "image";
    }
    return "?";
}

std::vector<Sample> LabeledDataset::samples(Split split) const {
    std::vector<Sample> out;
    for (const auto& item : items) {
        if (item.split == split) out.push_back(item.sample);
    }
    return out;
}

std::size_t LabeledDataset::count(Split split) const {
    std::size_t n = 0;
    for (const auto& item : items) {
        if (item.split == split) ++n;
    }
    return n;
}

void LabeledDataset::recompute_feature_stats() {
    std::vector<Sample> all;
    all.reserve(items.size());
    for (const auto& item : items) all.push_back(item.sample);
    NormStats stats = fit_norm_stats(all);
    feature_mean = std::move(stats.mean);
    feature_stddev = std::move(stats.stddev);
}

namespace {

double parse_real(const std::string& text, std::size_t line, std::size_t column) {
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &consumed);
    } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line) + ", column " + std::to_string(column + 1) +
                        ": not a number: '" + text + "'");
    }
    while (consumed < text.size() && std::isspace(static_cast<unsigned char>(text[consumed]))) {
        ++consumed;
    }
    if (consumed != text.size()) {
        throw DataError("line " + std::to_string(line) + ", column " + std::to_string(column + 1) +
                        ": trailing garbage in number: '" + text + "'");
    }
    if (!std::isfinite(value)) {
        throw DataError("line " + std::to_string(line) + ", column " + std::to_string(column + 1) +
                        ": non-finite value: '" + text + "'");
    }
    return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trimmed(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

LabeledDataset load_static(const std::string& path) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file, header row expected");
    const std::size_t columns = split_csv_line(line).size();
    if (columns < 2) throw DataError(path + ": header must have at least one feature and a label");
    const std::size_t d = columns - 1;

    LabeledDataset dataset;
    dataset.kind = SampleKind::static_vector;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != columns) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
        }
        Tensor x = Tensor::zeros({d});
        for (std::size_t c = 0; c < d; ++c) x.data[c] = parse_real(trimmed(fields[c]), line_no, c);
        DatasetItem item;
        item.id = std::to_string(dataset.items.size());
        item.label = trimmed(fields[d]);
        item.sample = std::move(x);
        dataset.items.push_back(std::move(item));
    }
    if (dataset.items.empty()) throw DataError(path + ": no data rows");
    dataset.recompute_feature_stats();
    return dataset;
}

void save_static(const LabeledDataset& dataset, const std::string& path) {
    std::ofstream out = open_output(path);
    const Tensor& first = std::get<Tensor>(dataset.items.front().sample);
    const std::size_t d = first.numel();
    for (std::size_t c = 0; c < d; ++c) out << "f" << c << ",";
    out << "label\n";
    char buf[40];
    for (const auto& item : dataset.items) {
        const Tensor& x = std::get<Tensor>(item.sample);
        for (std::size_t c = 0; c < d; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", x.data[c]);
            out << buf << ",";
        }
        out << item.label << "\n";
    }
}

LabeledDataset load_sequences(const std::string& path) {
    std::ifstream in = open_input(path);
    LabeledDataset dataset;
    dataset.kind = SampleKind::sequence;
    std::string line;
    std::size_t line_no = 0;
    std::size_t step_dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": bad JSON: " + e.what());
        }
        const std::string where = path + ": line " + std::to_string(line_no);
        if (!record.is_object() || !record.contains("steps")) {
            throw DataError(where + ": record must be an object with a 'steps' array");
        }
        DatasetItem item;
        if (record.contains("id")) {
            item.id = record["id"].is_string() ? record["id"].get<std::string>()
                                               : record["id"].dump();
        } else {
            item.id = std::to_string(dataset.items.size());
        }
        if (record.contains("label")) {
            item.label = record["label"].is_string() ? record["label"].get<std::string>()
                                                     : record["label"].dump();
        }
        const auto& steps = record["steps"];
        if (!steps.is_array() || steps.empty()) {
            throw DataError(where + ": 'steps' must be a nonempty array");
        }
        Sequence seq;
        for (const auto& step : steps) {
            if (!step.is_array()) throw DataError(where + ": each step must be an array of reals");
            Tensor t = Tensor::zeros({step.size()});
            for (std::size_t i = 0; i < step.size(); ++i) {
                if (!step[i].is_number()) throw DataError(where + ": non-numeric step entry");
                t.data[i] = step[i].get<double>();
                if (!std::isfinite(t.data[i])) throw DataError(where + ": non-finite step entry");
            }
            if (step_dim == 0) step_dim = t.numel();
            if (t.numel() != step_dim) {
                throw DataError(where + ": step width " + std::to_string(t.numel()) +
                                " does not match dataset width " + std::to_string(step_dim));
            }
            seq.steps.push_back(std::move(t));
        }
        item.sample = std::move(seq);
        dataset.items.push_back(std::move(item));
    }
    if (dataset.items.empty()) throw DataError(path + ": no records");
    dataset.recompute_feature_stats();
    return dataset;
}

void save_sequences(const LabeledDataset& dataset, const std::string& path) {
    std::ofstream out = open_output(path);
    for (const auto& item : dataset.items) {
        nlohmann::json record;
        record["id"] = item.id;
        record["label"] = item.label;
        nlohmann::json steps = nlohmann::json::array();
        for (const Tensor& step : std::get<Sequence>(item.sample).steps) {
            steps.push_back(step.data);
        }
        record["steps"] = std::move(steps);
        out << record.dump() << "\n";
    }
}

namespace {

constexpr char kImageMagic[4] = {'D', 'S', 'B', 'T'};
constexpr unsigned char kImageVersion = 1;

void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated file reading " + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void write_f64_le(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& in, const std::string& what) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated file reading " + what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace

LabeledDataset load_images(const std::string& path) {
    std::ifstream in = open_input(path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kImageMagic, 4) != 0) {
        throw DataError(path + ": not an image container (bad magic)");
    }
    char version = 0;
    if (!in.get(version) || static_cast<unsigned char>(version) != kImageVersion) {
        throw DataError(path + ": unsupported image container version " +
                        std::to_string(static_cast<int>(version)));
    }
    const std::uint32_t count = read_u32_le(in, path + " item count");
    const std::uint32_t channels = read_u32_le(in, path + " channels");
    const std::uint32_t height = read_u32_le(in, path + " height");
    const std::uint32_t width = read_u32_le(in, path + " width");
    if (count == 0 || channels == 0 || height == 0 || width == 0) {
        throw DataError(path + ": degenerate declared shape or zero items");
    }
    const std::size_t payload = static_cast<std::size_t>(channels) * height * width;

    LabeledDataset dataset;
    dataset.kind = SampleKind::image;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string where = path + ": item " + std::to_string(i);
        const std::int32_t label = static_cast<std::int32_t>(read_u32_le(in, where + " label"));
        Tensor image = Tensor::zeros({channels, height, width});
        for (std::size_t j = 0; j < payload; ++j) {
            image.data[j] = read_f64_le(in, where + " payload (expected " +
                                                std::to_string(payload) + " scalars)");
            if (!std::isfinite(image.data[j])) {
                throw DataError(where + ": non-finite payload scalar at offset " + std::to_string(j));
            }
        }
        DatasetItem item;
        item.id = std::to_string(i);
        item.label = std::to_string(label);
        item.sample = std::move(image);
        dataset.items.push_back(std::move(item));
    }
    char extra;
    if (in.read(&extra, 1)) throw DataError(path + ": trailing bytes after declared items");
    dataset.recompute_feature_stats();
    return dataset;
}

void save_images(const LabeledDataset& dataset, const std::string& path) {
    std::ofstream out = open_output(path);
    const Tensor& first = std::get<Tensor>(dataset.items.front().sample);
    if (first.rank() != 3) throw DataError("save_images: samples must be (C x H x W)");
    out.write(kImageMagic, 4);
    out.put(static_cast<char>(kImageVersion));
    write_u32_le(out, static_cast<std::uint32_t>(dataset.items.size()));
    for (std::size_t axis = 0; axis < 3; ++axis) {
        write_u32_le(out, static_cast<std::uint32_t>(first.shape[axis]));
    }
    for (const auto& item : dataset.items) {
        const Tensor& image = std::get<Tensor>(item.sample);
        require_shape(image, first.shape, "save_images item");
        std::int32_t label = 0;
        try {
            label = std::stoi(item.label);
        } catch (const std::exception&) {
            throw DataError("save_images: image labels must be integers, got '" + item.label + "'");
        }
        write_u32_le(out, static_cast<std::uint32_t>(label));
        for (double v : image.data) write_f64_le(out, v);
    }
}

LabeledDataset make_contaminated(const LabeledDataset& dataset,
                                 const std::set<std::string>& inlier_classes,
                                 double rho, double train_fraction,
                                 std::uint64_t seed) {
    if (inlier_classes.empty()) throw DataError("make_contaminated: no inlier classes given");
    if (!(rho >= 0.0 && rho < 1.0)) throw DataError("make_contaminated: rho must be in [0, 1)");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DataError("make_contaminated: train fraction must be in (0, 1)");
    }

    std::vector<std::size_t> inliers, outliers;
    for (std::size_t i = 0; i < dataset.items.size(); ++i) {
        if (inlier_classes.count(dataset.items[i].label)) {
            inliers.push_back(i);
        } else {
            outliers.push_back(i);
        }
    }
    if (inliers.size() < 2) throw DataError("make_contaminated: need at least two inlier samples");

    RngStream rng(seed);
    rng.shuffle(inliers);
    rng.shuffle(outliers);

    std::size_t n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(inliers.size()) + 0.5));
    n_train = std::min(std::max<std::size_t>(n_train, 1), inliers.size() - 1);
    const std::size_t n_test_inliers = inliers.size() - n_train;
    const std::size_t n_outliers = static_cast<std::size_t>(
        std::ceil(rho * static_cast<double>(n_test_inliers) / (1.0 - rho)));
    if (n_outliers > outliers.size()) {
        throw DataError("make_contaminated: insufficient outlier pool: need " +
                        std::to_string(n_outliers) + ", have " + std::to_string(outliers.size()));
    }

    LabeledDataset result;
    result.kind = dataset.kind;
    result.inlier_classes = inlier_classes;
    result.rho = rho;
    result.items.reserve(inliers.size() + n_outliers);
    for (std::size_t i = 0; i < n_train; ++i) {
        DatasetItem item = dataset.items[inliers[i]];
        item.split = Split::train;
        result.items.push_back(std::move(item));
    }
    for (std::size_t i = n_train; i < inliers.size(); ++i) {
        DatasetItem item = dataset.items[inliers[i]];
        item.split = Split::test;
        result.items.push_back(std::move(item));
    }
    for (std::size_t i = 0; i < n_outliers; ++i) {
        DatasetItem item = dataset.items[outliers[i]];
        item.split = Split::test;
        result.items.push_back(std::move(item));
    }
    result.feature_mean = dataset.feature_mean;
    result.feature_stddev = dataset.feature_stddev;
    return result;
}

namespace {

Tensor gaussian_point(const Tensor& center, RngStream& rng) {
    Tensor x = center;
    for (double& v : x.data) v += rng.next_gaussian();
    return x;
}

}  // namespace

LabeledDataset synth_gaussians(std::size_t n, std::size_t d, double separation,
                               std::uint64_t seed) {
    if (n < 10) throw DataError("synth_gaussians: need n >= 10");
    if (d == 0) throw DataError("synth_gaussians: need d >= 1");
    RngStream rng(seed);

    Tensor mode_a = Tensor::zeros({d}), mode_b = Tensor::zeros({d});
    mode_a.data[0] = separation / 2.0;
    mode_b.data[0] = -separation / 2.0;
    Tensor out_a = Tensor::zeros({d}), out_b = Tensor::zeros({d});
    if (d >= 2) {
        out_a.data[1] = separation;
        out_b.data[1] = -separation;
    } else {
        out_a.data[0] = separation;
        out_b.data[0] = -separation;
    }

    LabeledDataset dataset;
    dataset.kind = SampleKind::static_vector;
    const std::size_t n_inliers = n - n / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const bool inlier = i < n_inliers;
        const bool first = rng.next_uniform01() < 0.5;
        const Tensor& center = inlier ? (first ? mode_a : mode_b) : (first ? out_a : out_b);
        DatasetItem item;
        item.id = "g" + std::to_string(i);
        item.label = inlier ? "normal" : "anomaly";
        item.sample = gaussian_point(center, rng);
        dataset.items.push_back(std::move(item));
    }
    dataset.rho = static_cast<double>(n / 2) / static_cast<double>(n);
    dataset.recompute_feature_stats();
    return dataset;
}

LabeledDataset synth_bimodal_1d(std::size_t n, std::uint64_t seed) {
    if (n < 10) throw DataError("synth_bimodal_1d: need n >= 10");
    RngStream rng(seed);

    LabeledDataset dataset;
    dataset.kind = SampleKind::static_vector;
    const std::size_t n_inliers = n - n / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const bool inlier = i < n_inliers;
        double value;
        if (inlier) {
            const double mode = rng.next_uniform01() < 0.5 ? -4.0 : 4.0;
            value = mode + 0.4 * rng.next_gaussian();
        } else {
            value = -9.0 + 18.0 * rng.next_uniform01();
        }
        DatasetItem item;
        item.id = "b" + std::to_string(i);
        item.label = inlier ? "normal" : "anomaly";
        item.sample = Tensor::vector({value});
        dataset.items.push_back(std::move(item));
    }
    dataset.rho = static_cast<double>(n / 2) / static_cast<double>(n);
    dataset.recompute_feature_stats();
    return dataset;
}

}  // namespace dsebm

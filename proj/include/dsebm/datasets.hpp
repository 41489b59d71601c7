#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "dsebm/model.hpp"
#include "dsebm/tensor.hpp"

namespace dsebm {

enum class SampleKind { static_vector, sequence, image };
enum class Split { unassigned, train, test };

const char* sample_kind_name(SampleKind kind);

struct DatasetItem {
    std::string id;
    std::string label;
    Sample sample;
    Split split = Split::unassigned;
};

struct LabeledDataset {
    SampleKind kind = SampleKind::static_vector;
    std::vector<DatasetItem> items;
    std::set<std::string> inlier_classes;  // empty until a protocol is applied
    double rho = 0.0;                      // requested test contamination

    // Whole-set per-feature statistics, filled on load/synthesis.
    Tensor feature_mean;
    Tensor feature_stddev;

    bool is_outlier(const DatasetItem& item) const {
        return inlier_classes.count(item.label) == 0;
    }
    std::vector<Sample> samples(Split split) const;
    std::size_t count(Split split) const;
    void recompute_feature_stats();
};

// Static vectors: CSV with a header row; last column is the class label,
// all other columns are finite reals.
LabeledDataset load_static(const std::string& path);
void save_static(const LabeledDataset& dataset, const std::string& path);

// Sequences: one JSON object per line, {"id":..., "label":..., "steps":
// [[...d reals...], ...]}. Lengths may vary; the step width may not.
LabeledDataset load_sequences(const std::string& path);
void save_sequences(const LabeledDataset& dataset, const std::string& path);

// Images: binary container, magic "DSBT", version byte, then item count and
// (channels, height, width) as little-endian u32, then per item a
// little-endian i32 label and the row-major payload as little-endian f64.
LabeledDataset load_images(const std::string& path);
void save_images(const LabeledDataset& dataset, const std::string& path);

/// Splits into an inlier-only training set and a contaminated test set.
/// Training takes round(train_fraction * n_inliers) inliers; the test set
/// holds the remaining inliers plus ceil(rho * n_test_inliers / (1 - rho))
/// outliers drawn from the other classes (rho = 0 keeps the test set pure).
/// Deterministic under `seed`.
LabeledDataset make_contaminated(const LabeledDataset& dataset,
                                 const std::set<std::string>& inlier_classes,
                                 double rho, double train_fraction,
                                 std::uint64_t seed);

/// Two inlier Gaussian modes at +-separation/2 along the first axis, unit
/// covariance; anomalies are Gaussian clusters displaced by +-separation
/// along the second axis (along the first when d == 1). separation = 0
/// collapses everything onto the same distribution.
LabeledDataset synth_gaussians(std::size_t n, std::size_t d, double separation,
                               std::uint64_t seed);

/// 1-D set with two well-separated inlier modes and uniform background
/// anomalies covering the gap and the tails.
LabeledDataset synth_bimodal_1d(std::size_t n, std::uint64_t seed);

}  // namespace dsebm

#pragma once

#include <string>

#include "dsebm/model.hpp"

namespace dsebm {

/// Single-file model container: an ASCII banner with a format version, a
/// JSON header (architecture layout, normalization shape, config echo,
/// payload checksum), then every tensor as little-endian 64-bit reals in a
/// fixed canonical order. Round-trips are bit-exact.
void save_model(const TrainedModel& model, const std::string& path);

/// Throws DataError on bad magic, version mismatch, truncation or checksum
/// failure.
TrainedModel load_model(const std::string& path);

}  // namespace dsebm

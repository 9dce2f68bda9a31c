#pragma once

#include <cstddef>
#include <vector>

#include "ghostrnn/imaging.hpp"

namespace ghostrnn {

/// Unnormalized row-major scalar grid.
struct RawGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    bool operator==(const RawGrid&) const = default;
};

/// Basic correlation estimate: out(x,y) = sum_i P_i(x,y) * B_i, accumulated
/// in measurement order. No mean subtraction.
RawGrid correlate(const MeasurementSequence& measurements);

/// (raw - min) / (max - min); an all-zero image when the grid is constant.
ImageTensor normalize_minmax(const RawGrid& raw);

}  // namespace ghostrnn

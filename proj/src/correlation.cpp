#include "ghostrnn/correlation.hpp"

#include <algorithm>

#include "ghostrnn/errors.hpp"

namespace ghostrnn {

RawGrid correlate(const MeasurementSequence& measurements) {
    const auto& speckles = measurements.speckles;
    if (measurements.buckets.empty()) throw InvalidArgument("correlate: no measurements");
    if (measurements.buckets.size() != speckles.count()) {
        throw InvalidArgument("correlate: bucket count differs from speckle count");
    }
    RawGrid out{speckles.height(), speckles.width(),
                std::vector<double>(speckles.pixel_count(), 0.0)};
    for (std::size_t i = 0; i < speckles.count(); ++i) {
        const double bucket = measurements.buckets[i];
        const double* pattern = speckles.column(i).data();
        for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] += pattern[k] * bucket;
    }
    return out;
}

ImageTensor normalize_minmax(const RawGrid& raw) {
    if (raw.values.empty()) throw InvalidArgument("normalize_minmax: empty grid");
    if (raw.values.size() != raw.height * raw.width) {
        throw InvalidArgument("normalize_minmax: shape does not match value count");
    }
    const auto [lo, hi] = std::minmax_element(raw.values.begin(), raw.values.end());
    const double min = *lo;
    const double span = *hi - *lo;
    std::vector<double> out(raw.values.size(), 0.0);
    if (span > 0.0) {
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] = std::clamp((raw.values[k] - min) / span, 0.0, 1.0);
        }
    }
    return {raw.height, raw.width, std::move(out)};
}

}  // namespace ghostrnn

#include "ghostrnn/imaging.hpp"

#include <cmath>
#include <random>

#include "ghostrnn/errors.hpp"

namespace ghostrnn {

namespace {

void require_area(std::size_t height, std::size_t width, const char* what) {
    if (height == 0 || width == 0) {
        throw InvalidArgument(std::string(what) + ": zero-area shape");
    }
}

double dot_in_order(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
    return acc;
}

}  // namespace

ImageTensor::ImageTensor(std::size_t height, std::size_t width)
    : height_(height), width_(width), data_(height * width, 0.0) {}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (height_ * width_ != data_.size()) {
        throw InvalidArgument("ImageTensor: " + std::to_string(height_) + "x" +
                              std::to_string(width_) + " does not match " +
                              std::to_string(data_.size()) + " values");
    }
    for (std::size_t k = 0; k < data_.size(); ++k) {
        const double v = data_[k];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvalidArgument("ImageTensor: value " + std::to_string(v) + " at index " +
                                  std::to_string(k) + " outside [0,1]");
        }
    }
}

SpecklePattern::SpecklePattern(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (height_ * width_ != data_.size()) {
        throw InvalidArgument("SpecklePattern: shape does not match value count");
    }
}

std::string to_string(SpeckleDistribution d) {
    return d == SpeckleDistribution::binary ? "binary" : "uniform";
}

SpeckleDistribution parse_distribution(std::string_view name) {
    if (name == "binary") return SpeckleDistribution::binary;
    if (name == "uniform") return SpeckleDistribution::uniform;
    throw InvalidArgument("unknown speckle distribution '" + std::string(name) + "'");
}

SpeckleSequence::SpeckleSequence(std::size_t height, std::size_t width, Eigen::MatrixXd columns,
                                 std::uint64_t seed, SpeckleDistribution distribution)
    : count_(static_cast<std::size_t>(columns.cols())),
      height_(height),
      width_(width),
      seed_(seed),
      distribution_(distribution) {
    require_area(height, width, "SpeckleSequence");
    if (static_cast<std::size_t>(columns.rows()) != height * width) {
        throw InvalidArgument("SpeckleSequence: pattern length does not match shape");
    }
    storage_ = std::make_shared<const Eigen::MatrixXd>(std::move(columns));
}

SpeckleSequence SpeckleSequence::from_patterns(std::span<const SpecklePattern> patterns,
                                               std::uint64_t seed,
                                               SpeckleDistribution distribution) {
    if (patterns.empty()) throw InvalidArgument("SpeckleSequence: no patterns");
    const auto h = patterns.front().height();
    const auto w = patterns.front().width();
    Eigen::MatrixXd columns(static_cast<Eigen::Index>(h * w),
                            static_cast<Eigen::Index>(patterns.size()));
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        if (patterns[i].height() != h || patterns[i].width() != w) {
            throw InvalidArgument("SpeckleSequence: patterns differ in shape");
        }
        const auto flat = patterns[i].flat();
        for (std::size_t k = 0; k < flat.size(); ++k) {
            columns(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = flat[k];
        }
    }
    return {h, w, std::move(columns), seed, distribution};
}

SpecklePattern SpeckleSequence::pattern(std::size_t i) const {
    if (i >= count_) throw InvalidArgument("SpeckleSequence: pattern index out of range");
    const auto col = column(i);
    return {height_, width_, std::vector<double>(col.data(), col.data() + col.size())};
}

SpeckleSequence SpeckleSequence::prefix(std::size_t n) const {
    if (n > count_) {
        throw InvalidArgument("SpeckleSequence: prefix of " + std::to_string(n) +
                              " requested from " + std::to_string(count_) + " patterns");
    }
    SpeckleSequence out = *this;
    out.count_ = n;
    return out;
}

bool SpeckleSequence::same_patterns(const SpeckleSequence& other) const {
    if (count_ != other.count_ || height_ != other.height_ || width_ != other.width_ ||
        seed_ != other.seed_ || distribution_ != other.distribution_) {
        return false;
    }
    if (storage_ == other.storage_) return true;
    return matrix() == other.matrix();
}

SpeckleSequence generate_speckles(std::uint64_t seed, std::size_t count, std::size_t height,
                                  std::size_t width, SpeckleDistribution distribution) {
    if (count == 0) throw InvalidArgument("generate_speckles: count must be at least 1");
    require_area(height, width, "generate_speckles");

    std::mt19937_64 engine(seed);
    const auto pixels = static_cast<Eigen::Index>(height * width);
    Eigen::MatrixXd columns(pixels, static_cast<Eigen::Index>(count));
    for (Eigen::Index i = 0; i < columns.cols(); ++i) {
        for (Eigen::Index k = 0; k < pixels; ++k) {
            const std::uint64_t bits = engine();
            columns(k, i) = distribution == SpeckleDistribution::binary
                                ? static_cast<double>(bits >> 63)
                                : static_cast<double>(bits >> 11) * 0x1.0p-53;
        }
    }
    return {height, width, std::move(columns), seed, distribution};
}

double bucket_signal(const SpecklePattern& speckle, const ImageTensor& target) {
    if (speckle.height() != target.height() || speckle.width() != target.width()) {
        throw InvalidArgument("bucket_signal: speckle and target shapes differ");
    }
    return dot_in_order(speckle.flat().data(), target.flat().data(), target.size());
}

MeasurementSequence measure_sequence(const SpeckleSequence& speckles, const ImageTensor& target) {
    if (speckles.height() != target.height() || speckles.width() != target.width()) {
        throw InvalidArgument("measure_sequence: speckle and target shapes differ");
    }
    MeasurementSequence out{speckles, std::vector<double>(speckles.count()), std::nullopt};
    for (std::size_t i = 0; i < speckles.count(); ++i) {
        out.buckets[i] = dot_in_order(speckles.column(i).data(), target.flat().data(), target.size());
    }
    return out;
}

std::size_t sampling_count(double rate, std::size_t pixel_count) {
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw InvalidArgument("sampling_count: rate " + std::to_string(rate) + " not in (0,1]");
    }
    if (pixel_count == 0) throw InvalidArgument("sampling_count: pixel_count must be positive");
    const auto n = static_cast<std::size_t>(std::floor(rate * static_cast<double>(pixel_count) + 0.5));
    return n < 1 ? 1 : n;
}

}  // namespace ghostrnn

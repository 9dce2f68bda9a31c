#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ghostrnn {

/// Name of the pseudo-random engine used for every seeded draw in the
/// library. It is the standard's `std::mt19937_64`; only its raw 64-bit
/// output is consumed (no `std::*_distribution`), so sequences are identical
/// across standard libraries.
inline constexpr std::string_view kPrngName = "mt19937_64";

/// 2-D intensity grid in [0,1], row-major.
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(std::size_t height, std::size_t width);
    /// Throws InvalidArgument on a size mismatch or any value outside [0,1].
    ImageTensor(std::size_t height, std::size_t width, std::vector<double> data);

    static ImageTensor zeros(std::size_t height, std::size_t width) { return {height, width}; }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }

    double operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }
    std::span<const double> flat() const noexcept { return data_; }
    Eigen::Map<const Eigen::VectorXd> vector() const {
        return {data_.data(), static_cast<Eigen::Index>(data_.size())};
    }

    bool operator==(const ImageTensor&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

/// One illumination frame, row-major. Values are not range-restricted.
class SpecklePattern {
public:
    SpecklePattern() = default;
    SpecklePattern(std::size_t height, std::size_t width, std::vector<double> data);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    double operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }
    std::span<const double> flat() const noexcept { return data_; }

    bool operator==(const SpecklePattern&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

enum class SpeckleDistribution { binary, uniform };

std::string to_string(SpeckleDistribution d);
SpeckleDistribution parse_distribution(std::string_view name);

/// Ordered stack of equally-shaped patterns. Storage is immutable and
/// shared, so prefixes and copies are cheap.
///
/// Patterns are stored as the columns of a (pixel_count x count) matrix;
/// each column is one row-major flattened frame.
class SpeckleSequence {
public:
    SpeckleSequence() = default;
    /// Wraps explicit patterns (columns of `columns`). `seed` is recorded as provenance only.
    SpeckleSequence(std::size_t height, std::size_t width, Eigen::MatrixXd columns,
                    std::uint64_t seed, SpeckleDistribution distribution);
    static SpeckleSequence from_patterns(std::span<const SpecklePattern> patterns,
                                         std::uint64_t seed = 0,
                                         SpeckleDistribution distribution = SpeckleDistribution::binary);

    std::size_t count() const noexcept { return count_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t pixel_count() const noexcept { return height_ * width_; }
    std::uint64_t seed() const noexcept { return seed_; }
    SpeckleDistribution distribution() const noexcept { return distribution_; }

    SpecklePattern pattern(std::size_t i) const;
    /// Column block (pixel_count x count) view of the active patterns.
    auto matrix() const { return storage_->leftCols(static_cast<Eigen::Index>(count_)); }
    auto column(std::size_t i) const { return storage_->col(static_cast<Eigen::Index>(i)); }

    /// The first `n` patterns, sharing storage. Throws if n > count().
    SpeckleSequence prefix(std::size_t n) const;
    /// Same patterns and provenance (seed, distribution, shape); bitwise.
    bool same_patterns(const SpeckleSequence& other) const;

private:
    std::shared_ptr<const Eigen::MatrixXd> storage_;
    std::size_t count_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::uint64_t seed_ = 0;
    SpeckleDistribution distribution_ = SpeckleDistribution::binary;
};

/// Speckle references paired with the bucket value each produced.
struct MeasurementSequence {
    SpeckleSequence speckles;
    std::vector<double> buckets;
    std::optional<std::string> target_id;

    std::size_t size() const noexcept { return buckets.size(); }
};

/// Deterministic in all arguments. Binary: each pixel is 1 with probability
/// 1/2 (top bit of one engine draw). Uniform: each pixel in [0,1) from the
/// top 53 bits of one draw. Pixels are drawn pattern-major, row-major within
/// a pattern, one draw per pixel from a single engine seeded with `seed`.
SpeckleSequence generate_speckles(std::uint64_t seed, std::size_t count, std::size_t height,
                                  std::size_t width,
                                  SpeckleDistribution distribution = SpeckleDistribution::binary);

/// Sum over pixels of speckle * target.
double bucket_signal(const SpecklePattern& speckle, const ImageTensor& target);

MeasurementSequence measure_sequence(const SpeckleSequence& speckles, const ImageTensor& target);

/// round(rate * pixel_count), halves rounded up, never below 1.
std::size_t sampling_count(double rate, std::size_t pixel_count);

}  // namespace ghostrnn

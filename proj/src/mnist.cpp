#include "ghostrnn/mnist.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "ghostrnn/errors.hpp"
#include "ghostrnn/random.hpp"

namespace ghostrnn {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
    if (bytes.size() < offset + 4) {
        throw FormatError(path.string() + ": truncated header", bytes.size());
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

MnistSet subset_in_order(const MnistSet& set, const std::vector<std::size_t>& indices) {
    MnistSet out;
    out.images.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (auto i : indices) {
        out.images.push_back(set.images[i]);
        out.labels.push_back(set.labels[i]);
    }
    return out;
}

}  // namespace

MnistSet load_mnist_idx(const std::filesystem::path& image_path,
                        const std::filesystem::path& label_path) {
    const auto images = read_all(image_path);
    const auto labels = read_all(label_path);

    const auto image_magic = read_be32(images, 0, image_path);
    if (image_magic != kImageMagic) {
        throw FormatError(image_path.string() + ": bad image magic " + std::to_string(image_magic) +
                              ", expected 2051", 0);
    }
    const auto label_magic = read_be32(labels, 0, label_path);
    if (label_magic != kLabelMagic) {
        throw FormatError(label_path.string() + ": bad label magic " + std::to_string(label_magic) +
                              ", expected 2049", 0);
    }
    const std::size_t count = read_be32(images, 4, image_path);
    const std::size_t rows = read_be32(images, 8, image_path);
    const std::size_t cols = read_be32(images, 12, image_path);
    const std::size_t label_count = read_be32(labels, 4, label_path);
    if (rows == 0 || cols == 0) {
        throw FormatError(image_path.string() + ": zero image dimension", 8);
    }
    if (label_count != count) {
        throw FormatError(label_path.string() + ": " + std::to_string(label_count) +
                              " labels for " + std::to_string(count) + " images", 4);
    }
    const std::size_t pixels = rows * cols;
    if (images.size() < 16 + count * pixels) {
        throw FormatError(image_path.string() + ": truncated pixel data, expected " +
                              std::to_string(16 + count * pixels) + " bytes", images.size());
    }
    if (labels.size() < 8 + count) {
        throw FormatError(label_path.string() + ": truncated label data", labels.size());
    }

    MnistSet set;
    set.images.reserve(count);
    set.labels.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        const std::size_t label_offset = 8 + n;
        if (labels[label_offset] > 9) {
            throw FormatError(label_path.string() + ": label " +
                                  std::to_string(labels[label_offset]) + " out of range",
                              label_offset);
        }
        std::vector<double> values(pixels);
        const unsigned char* src = images.data() + 16 + n * pixels;
        for (std::size_t k = 0; k < pixels; ++k) values[k] = static_cast<double>(src[k]) / 255.0;
        set.images.emplace_back(rows, cols, std::move(values));
        set.labels.push_back(labels[label_offset]);
    }
    return set;
}

MnistSet select_training_subset(const MnistSet& set, std::size_t count, std::uint64_t seed) {
    if (count > set.size()) {
        throw InvalidArgument("select_training_subset: " + std::to_string(count) +
                              " requested from " + std::to_string(set.size()) + " images");
    }
    Engine engine(seed);
    auto order = seeded_permutation(set.size(), engine);
    order.resize(count);
    return subset_in_order(set, order);
}

MnistSet select_test_targets(const MnistSet& set, std::size_t count, std::uint64_t seed) {
    if (count > set.size()) {
        throw InvalidArgument("select_test_targets: " + std::to_string(count) +
                              " requested from " + std::to_string(set.size()) + " images");
    }
    Engine engine(seed);
    const auto order = seeded_permutation(set.size(), engine);
    std::vector<std::size_t> chosen;
    std::vector<bool> taken(set.size(), false);
    for (int digit = 0; digit <= 9 && chosen.size() < count; ++digit) {
        const auto it = std::find_if(order.begin(), order.end(),
                                     [&](std::size_t i) { return set.labels[i] == digit; });
        if (it != order.end()) {
            chosen.push_back(*it);
            taken[*it] = true;
        }
    }
    for (auto i : order) {
        if (chosen.size() >= count) break;
        if (!taken[i]) chosen.push_back(i);
    }
    return subset_in_order(set, chosen);
}

Eigen::VectorXd flatten(const ImageTensor& image) { return image.vector(); }

ImageTensor unflatten(const Eigen::VectorXd& values, std::size_t height, std::size_t width) {
    return {height, width, std::vector<double>(values.data(), values.data() + values.size())};
}

std::vector<TrainingSample> build_sequences(const MnistSet& subset, const SpeckleSequence& speckles,
                                            double rate) {
    const std::size_t needed = sampling_count(rate, speckles.pixel_count());
    if (speckles.count() < needed) {
        throw InvalidArgument("build_sequences: rate " + std::to_string(rate) + " needs " +
                              std::to_string(needed) + " speckles, only " +
                              std::to_string(speckles.count()) + " available");
    }
    const SpeckleSequence used = speckles.prefix(needed);
    std::vector<TrainingSample> out;
    out.reserve(subset.size());
    for (std::size_t n = 0; n < subset.size(); ++n) {
        TrainingSample sample{measure_sequence(used, subset.images[n]), flatten(subset.images[n])};
        sample.measurements.target_id = std::to_string(n) + ":" + std::to_string(subset.labels[n]);
        out.push_back(std::move(sample));
    }
    return out;
}

}  // namespace ghostrnn

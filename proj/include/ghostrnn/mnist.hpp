#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "ghostrnn/imaging.hpp"
#include "ghostrnn/trainer.hpp"

namespace ghostrnn {

struct MnistSet {
    std::vector<ImageTensor> images;  ///< 28x28, values byte/255
    std::vector<int> labels;          ///< 0-9

    std::size_t size() const noexcept { return images.size(); }
};

/// Reads an IDX3 image file (magic 2051) and IDX1 label file (magic 2049).
/// Throws FormatError carrying the byte offset of the first problem.
MnistSet load_mnist_idx(const std::filesystem::path& image_path,
                        const std::filesystem::path& label_path);

/// `count` distinct samples in seeded random order.
MnistSet select_training_subset(const MnistSet& set, std::size_t count, std::uint64_t seed);

/// Seeded selection of test targets: the first `count` slots hold one digit
/// per class 0, 1, 2, ... where available, the rest follow in seeded order.
MnistSet select_test_targets(const MnistSet& set, std::size_t count, std::uint64_t seed);

Eigen::VectorXd flatten(const ImageTensor& image);
ImageTensor unflatten(const Eigen::VectorXd& values, std::size_t height, std::size_t width);

/// Measures every image against the first sampling_count(rate) patterns of
/// `speckles`. target_id is "<index>:<label>".
std::vector<TrainingSample> build_sequences(const MnistSet& subset, const SpeckleSequence& speckles,
                                            double rate);

}  // namespace ghostrnn

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ghostrnn/adam.hpp"
#include "ghostrnn/imaging.hpp"
#include "ghostrnn/lstm.hpp"

namespace ghostrnn {

/// Which fixed illumination sequence a model was trained against.
struct SpeckleProvenance {
    std::uint64_t seed = 0;
    SpeckleDistribution distribution = SpeckleDistribution::binary;
    std::size_t height = 28;
    std::size_t width = 28;

    bool operator==(const SpeckleProvenance&) const = default;
};

/// How a (speckle P, bucket) step is turned into the first layer's input.
/// With s = bucket/pixel_count and s' = (s - mean) / stddev:
///   raw        [P, s]
///   normalized [P, s']
///   modulated  s' * [2P - 1, 1]
enum class InputEncoding { raw, normalized, modulated };

std::string to_string(InputEncoding encoding);
/// Throws InvalidArgument on an unknown name.
InputEncoding parse_input_encoding(std::string_view name);

/// Fixed pre-processing in front of the LSTM. Statistics come from the
/// training set; raw keeps the identity (0, 1).
struct InputPreprocessing {
    InputEncoding encoding = InputEncoding::raw;
    double mean = 0.0;
    double stddev = 1.0;

    double bucket(double scaled_bucket) const { return (scaled_bucket - mean) / stddev; }
    bool operator==(const InputPreprocessing&) const = default;
};

struct GiRnnModel {
    LstmNetwork network;
    SpeckleProvenance speckles;
    std::size_t sequence_length = 0;  ///< measurements per sample seen in training
    InputPreprocessing preprocessing;
};

struct TrainingSample {
    MeasurementSequence measurements;
    Eigen::VectorXd truth;  ///< row-major flattened target
};

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss = 0.0;  ///< mean per-sample MSE over the epoch's batches

    bool operator==(const EpochRecord&) const = default;
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    AdamConfig adam;
    std::uint64_t shuffle_seed = 0;
    /// Batches are always reduced in sample order on one thread, so runs are
    /// bitwise reproducible; the flag is kept for the run record.
    bool deterministic = true;
    InputEncoding encoding = InputEncoding::modulated;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    GiRnnModel model;
    std::vector<EpochRecord> history;
};

/// Packs measurement sequences that share one speckle sequence into a batch.
SequenceBatch make_batch(std::span<const MeasurementSequence* const> samples,
                         const InputPreprocessing& prep = {});

/// The same inputs as make_batch, one explicit vector per step.
std::vector<StepInput> preprocess(const MeasurementSequence& measurements,
                                  const InputPreprocessing& prep);

/// Mean and population standard deviation of bucket/pixel_count over every
/// step of every sample. A zero spread falls back to 1. Raw ignores the data.
InputPreprocessing fit_preprocessing(std::span<const TrainingSample> dataset,
                                     InputEncoding encoding);

/// Mini-batch Adam on batch-mean MSE, reshuffled each epoch from
/// `config.shuffle_seed`. Every sample must use the identical speckles.
TrainResult train(std::span<const TrainingSample> dataset, LstmNetwork initial,
                  const TrainConfig& config);

/// Clipped prediction reshaped to the speckle shape. Throws InvalidArgument
/// when the measurements were not taken with the model's speckle sequence.
ImageTensor predict_image(const GiRnnModel& model, const MeasurementSequence& measurements);

/// Batched form of predict_image; all measurements must share one speckle sequence.
std::vector<ImageTensor> predict_images(const GiRnnModel& model,
                                        std::span<const MeasurementSequence> measurements);

}  // namespace ghostrnn

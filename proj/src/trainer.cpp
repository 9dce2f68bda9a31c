#include "ghostrnn/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "ghostrnn/errors.hpp"
#include "ghostrnn/random.hpp"

namespace ghostrnn {

namespace {

void check_provenance(const GiRnnModel& model, const SpeckleSequence& speckles) {
    const auto& p = model.speckles;
    if (speckles.seed() != p.seed || speckles.distribution() != p.distribution) {
        throw InvalidArgument("speckle mismatch: model was trained with seed " +
                              std::to_string(p.seed) + " (" + to_string(p.distribution) +
                              ") but measurements use seed " + std::to_string(speckles.seed()) +
                              " (" + to_string(speckles.distribution()) + ")");
    }
    if (speckles.height() != p.height || speckles.width() != p.width) {
        throw InvalidArgument("speckle mismatch: shape differs from the training speckles");
    }
}

ImageTensor to_image(const Eigen::VectorXd& prediction, std::size_t height, std::size_t width) {
    if (static_cast<std::size_t>(prediction.size()) != height * width) {
        throw InvalidArgument("predict_image: network output size does not match image shape");
    }
    std::vector<double> values(prediction.size());
    for (Eigen::Index k = 0; k < prediction.size(); ++k) {
        values[static_cast<std::size_t>(k)] = std::clamp(prediction(k), 0.0, 1.0);
    }
    return {height, width, std::move(values)};
}

}  // namespace

std::string to_string(InputEncoding encoding) {
    switch (encoding) {
        case InputEncoding::raw: return "raw";
        case InputEncoding::normalized: return "normalized";
        case InputEncoding::modulated: return "modulated";
    }
    throw InvalidArgument("unknown input encoding");
}

InputEncoding parse_input_encoding(std::string_view name) {
    for (auto e : {InputEncoding::raw, InputEncoding::normalized, InputEncoding::modulated}) {
        if (name == to_string(e)) return e;
    }
    throw InvalidArgument("unknown input encoding '" + std::string(name) +
                          "' (expected raw, normalized or modulated)");
}

SequenceBatch make_batch(std::span<const MeasurementSequence* const> samples,
                         const InputPreprocessing& prep) {
    if (!(prep.stddev > 0.0) || !std::isfinite(prep.mean) || !std::isfinite(prep.stddev)) {
        throw InvalidArgument("make_batch: preprocessing needs a finite mean and stddev > 0");
    }
    if (samples.empty()) throw InvalidArgument("make_batch: no samples");
    const auto& speckles = samples.front()->speckles;
    const auto steps = static_cast<Eigen::Index>(speckles.count());
    if (steps == 0) throw InvalidArgument("make_batch: empty measurement sequence");
    const auto pixels = static_cast<double>(speckles.pixel_count());
    const bool modulated = prep.encoding == InputEncoding::modulated;

    SequenceBatch batch{modulated ? Eigen::MatrixXd((2.0 * speckles.matrix().array() - 1.0).matrix())
                                  : speckles.matrix(),
                        Eigen::MatrixXd(steps, static_cast<Eigen::Index>(samples.size())), modulated};
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const auto& m = *samples[b];
        if (m.buckets.size() != speckles.count() || !m.speckles.same_patterns(speckles)) {
            throw InvalidArgument("make_batch: samples do not share one speckle sequence");
        }
        for (Eigen::Index t = 0; t < steps; ++t) {
            batch.scaled_buckets(t, static_cast<Eigen::Index>(b)) =
                prep.bucket(m.buckets[static_cast<std::size_t>(t)] / pixels);
        }
    }
    return batch;
}

std::vector<StepInput> preprocess(const MeasurementSequence& measurements,
                                  const InputPreprocessing& prep) {
    const MeasurementSequence* one[] = {&measurements};
    const SequenceBatch batch = make_batch(one, prep);
    std::vector<StepInput> out;
    const Eigen::Index rows = batch.shared.rows();
    for (Eigen::Index t = 0; t < batch.steps(); ++t) {
        StepInput x(rows + 1);
        const double s = batch.scaled_buckets(t, 0);
        if (batch.modulated) {
            x.head(rows) = s * batch.shared.col(t);
        } else {
            x.head(rows) = batch.shared.col(t);
        }
        x(rows) = s;
        out.push_back(std::move(x));
    }
    return out;
}

InputPreprocessing fit_preprocessing(std::span<const TrainingSample> dataset, InputEncoding encoding) {
    InputPreprocessing prep{encoding, 0.0, 1.0};
    if (encoding == InputEncoding::raw) return prep;
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& sample : dataset) {
        const auto pixels = static_cast<double>(sample.measurements.speckles.pixel_count());
        for (double b : sample.measurements.buckets) {
            const double s = b / pixels;
            sum += s;
            sum_sq += s * s;
            ++n;
        }
    }
    if (n == 0) throw InvalidArgument("fit_preprocessing: no measurements");
    prep.mean = sum / static_cast<double>(n);
    const double var = std::max(sum_sq / static_cast<double>(n) - prep.mean * prep.mean, 0.0);
    const double stddev = std::sqrt(var);
    prep.stddev = stddev > 1e-12 ? stddev : 1.0;
    return prep;
}

TrainResult train(std::span<const TrainingSample> dataset, LstmNetwork initial,
                  const TrainConfig& config) {
    if (dataset.empty()) throw InvalidArgument("train: empty dataset");
    if (config.batch_size == 0) throw InvalidArgument("train: batch size must be positive");
    initial.validate();

    const auto& reference = dataset.front().measurements.speckles;
    if (reference.count() == 0) throw InvalidArgument("train: empty measurement sequence");
    if (static_cast<std::size_t>(initial.input_size()) != reference.pixel_count() + 1) {
        throw InvalidArgument("train: network input size does not match speckle pixel count + 1");
    }
    for (std::size_t s = 0; s < dataset.size(); ++s) {
        const auto& sample = dataset[s];
        if (!sample.measurements.speckles.same_patterns(reference)) {
            throw InvalidArgument("train: sample " + std::to_string(s) +
                                  " uses a different speckle sequence");
        }
        if (sample.truth.size() != initial.output_size()) {
            throw InvalidArgument("train: sample " + std::to_string(s) +
                                  " truth length does not match network output");
        }
    }

    TrainResult result;
    result.model.network = std::move(initial);
    result.model.speckles = {reference.seed(), reference.distribution(), reference.height(),
                             reference.width()};
    result.model.sequence_length = reference.count();
    result.model.preprocessing = fit_preprocessing(dataset, config.encoding);
    const InputPreprocessing prep = result.model.preprocessing;

    LstmNetwork& net = result.model.network;
    AdamState optimizer = AdamState::fresh(net, config.adam);
    Engine shuffler(config.shuffle_seed);
    const auto outputs = net.output_size();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto order = seeded_permutation(dataset.size(), shuffler);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            std::vector<const MeasurementSequence*> members;
            Eigen::MatrixXd truth(outputs, static_cast<Eigen::Index>(stop - start));
            for (std::size_t k = start; k < stop; ++k) {
                members.push_back(&dataset[order[k]].measurements);
                truth.col(static_cast<Eigen::Index>(k - start)) = dataset[order[k]].truth;
            }
            const ForwardCache cache = forward_batch(net, make_batch(members, prep));
            loss_sum += batch_mse_loss(cache.prediction, truth) * static_cast<double>(stop - start);
            const NetworkGradients grads = backward(net, cache, truth);
            adam_step(net, grads, optimizer);
        }
        if (!net.all_finite()) {
            throw NumericalError("train: parameters became non-finite", static_cast<long>(epoch));
        }
        EpochRecord record{epoch, loss_sum / static_cast<double>(dataset.size())};
        result.history.push_back(record);
        if (config.on_epoch) config.on_epoch(record);
    }
    return result;
}

ImageTensor predict_image(const GiRnnModel& model, const MeasurementSequence& measurements) {
    if (measurements.buckets.empty()) throw InvalidArgument("predict_image: no measurements");
    check_provenance(model, measurements.speckles);
    const MeasurementSequence* one[] = {&measurements};
    const ForwardCache cache = forward_batch(model.network, make_batch(one, model.preprocessing));
    return to_image(cache.prediction.col(0), model.speckles.height, model.speckles.width);
}

std::vector<ImageTensor> predict_images(const GiRnnModel& model,
                                        std::span<const MeasurementSequence> measurements) {
    std::vector<ImageTensor> out;
    if (measurements.empty()) return out;
    std::vector<const MeasurementSequence*> members;
    for (const auto& m : measurements) {
        if (m.buckets.empty()) throw InvalidArgument("predict_images: no measurements");
        check_provenance(model, m.speckles);
        members.push_back(&m);
    }
    const ForwardCache cache = forward_batch(model.network, make_batch(members, model.preprocessing));
    for (Eigen::Index b = 0; b < cache.prediction.cols(); ++b) {
        out.push_back(to_image(cache.prediction.col(b), model.speckles.height, model.speckles.width));
    }
    return out;
}

}  // namespace ghostrnn

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ghostrnn/imaging.hpp"
#include "ghostrnn/mnist.hpp"
#include "ghostrnn/trainer.hpp"

namespace ghostrnn {

/// Zero-MSE result of psnr().
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE); kPsnrCap when the images are identical.
double psnr(const ImageTensor& a, const ImageTensor& b, double peak = 1.0);
double psnr(std::span<const double> a, std::span<const double> b, double peak = 1.0);

/// Everything a run needs. Seeds are explicit; nothing draws from entropy.
struct ExperimentConfig {
    std::vector<double> sampling_rates{0.0038, 0.0102, 0.0625, 0.25};
    double rate = 0.25;

    std::size_t hidden = 256;
    std::size_t layers = 2;
    std::size_t train_size = 1000;
    std::size_t epochs = 20;
    std::size_t batch = 32;
    double learning_rate = 1e-3;
    double weight_decay = 0.0;

    std::uint64_t seed_speckle = 1;
    std::uint64_t seed_init = 2;
    std::uint64_t seed_shuffle = 3;
    std::uint64_t seed_subset = 4;
    std::uint64_t seed_test = 5;
    SpeckleDistribution distribution = SpeckleDistribution::binary;

    std::size_t test_count = 10;
    double cs_lambda_scale = 0.01;
    int cs_max_iterations = 500;
    double cs_tolerance = 1e-6;

    std::filesystem::path mnist_dir = "data/mnist";
    std::filesystem::path output_dir = "out";
    bool deterministic = false;
    /// Sweeps also score a freshly initialized network at each rate.
    bool untrained_baseline = true;
    /// Pre-processing in front of the first LSTM layer.
    InputEncoding input_encoding = InputEncoding::modulated;

    /// Applies one `key=value` setting; keys match the field names.
    void set(std::string_view key, std::string_view value);
    void validate() const;
    std::vector<std::pair<std::string, std::string>> echo() const;
};

/// Reads `key=value` lines ('#' starts a comment) on top of `base`.
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = {});

struct PsnrEntry {
    std::string method;  ///< gi | cs | rnn | rnn-untrained
    double rate = 0.0;
    std::string target_id;
    double psnr_db = 0.0;
    std::uint64_t input_digest = 0;  ///< hash of the bucket values the method consumed
};

struct MeanRow {
    std::string method;
    double rate = 0.0;
    double mean_db = 0.0;
    std::size_t count = 0;
};

struct BenchReport {
    std::string name;  ///< compare | sweep; names the CSV
    std::vector<PsnrEntry> entries;
    std::vector<std::pair<std::string, std::string>> metadata;

    /// Arithmetic mean per (method, rate), in order of first appearance.
    std::vector<MeanRow> means() const;
    double mean(std::string_view method, double rate) const;
    /// Columns method,rate,target_id,psnr_db; per-target rows then "mean" rows.
    std::string to_csv() const;
    /// Human-readable means, leave-one-target-out means and method gaps.
    std::string summary() const;
};

/// Inverse of BenchReport::to_csv; "mean" rows are dropped and recomputed.
BenchReport parse_report_csv(std::string_view text, std::string name = "report");

struct Reconstruction {
    std::string method;
    double rate = 0.0;
    std::string target_id;
    ImageTensor image;
};

struct BenchRun {
    BenchReport report;
    std::vector<Reconstruction> reconstructions;
    std::vector<std::pair<double, GiRnnModel>> models;
    double wall_seconds = 0.0;
};

using Logger = std::function<void(const std::string&)>;

/// MNIST partitions, selected subsets and the fixed speckle sequence of a run.
struct ExperimentData {
    MnistSet training;
    MnistSet targets;
    SpeckleSequence speckles;  ///< pixel_count patterns; every rate uses a prefix
};

ExperimentData prepare_experiment(const ExperimentConfig& config);
std::vector<MeasurementSequence> measure_targets(const ExperimentData& data, double rate);

std::string target_name(std::size_t index);
std::string format_rate(double rate);
std::uint64_t bucket_digest(const MeasurementSequence& m);

TrainResult train_model(const ExperimentConfig& config, const ExperimentData& data, double rate,
                        const Logger& log = {});
GiRnnModel untrained_model(const ExperimentConfig& config, const ExperimentData& data,
                           double rate);

ImageTensor reconstruct_gi(const MeasurementSequence& m);
ImageTensor reconstruct_cs(const ExperimentConfig& config, const MeasurementSequence& m);

/// GI-RNN trained per rate on prefix datasets, scored on the test targets.
BenchRun run_rate_sweep(const ExperimentConfig& config, const Logger& log = {});

/// Basic correlation, FISTA and GI-RNN on identical measurements at config.rate.
BenchRun run_method_comparison(const ExperimentConfig& config, const Logger& log = {});

struct ManifestEntry {
    std::filesystem::path path;
    std::uintmax_t bytes = 0;
};

/// P5 image, maxval 255, byte = round(255 v).
void write_pgm(const std::filesystem::path& path, const ImageTensor& image);
ImageTensor read_pgm(const std::filesystem::path& path);

/// Writes one PGM per reconstruction, `<report.name>.csv`, `summary.txt`
/// and `manifest.txt` (every other file with its size).
std::vector<ManifestEntry> emit_artifacts(const BenchReport& report,
                                          std::span<const Reconstruction> reconstructions,
                                          const std::filesystem::path& dir);

}  // namespace ghostrnn

#include "ghostrnn/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "ghostrnn/correlation.hpp"
#include "ghostrnn/errors.hpp"
#include "ghostrnn/fista.hpp"

namespace ghostrnn {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    const std::string value = trim(text);
    T out{};
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || end != value.data() + value.size()) {
        throw InvalidArgument("config: '" + std::string(key) + "' expects a number, got '" + value + "'");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view text) {
    const std::string value = trim(text);
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw InvalidArgument("config: '" + std::string(key) + "' expects a boolean, got '" + value + "'");
}

std::string format_double(double v, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

std::string join_rates(const std::vector<double>& rates) {
    std::string out;
    for (std::size_t k = 0; k < rates.size(); ++k) {
        if (k) out += ",";
        out += format_rate(rates[k]);
    }
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void say(const Logger& log, const std::string& line) {
    if (log) log(line);
}

}  // namespace

double psnr(std::span<const double> a, std::span<const double> b, double peak) {
    if (a.size() != b.size() || a.empty()) throw InvalidArgument("psnr: image sizes differ");
    if (!(peak > 0.0)) throw InvalidArgument("psnr: peak must be positive");
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrCap;
    return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const ImageTensor& a, const ImageTensor& b, double peak) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw InvalidArgument("psnr: image shapes differ");
    }
    return psnr(a.flat(), b.flat(), peak);
}

void ExperimentConfig::set(std::string_view raw_key, std::string_view value) {
    const std::string key = trim(raw_key);
    if (key == "sampling_rates") {
        sampling_rates.clear();
        std::string list(value);
        std::stringstream in(list);
        for (std::string item; std::getline(in, item, ',');) {
            if (!trim(item).empty()) sampling_rates.push_back(parse_number<double>(key, item));
        }
    } else if (key == "rate") {
        rate = parse_number<double>(key, value);
    } else if (key == "hidden") {
        hidden = parse_number<std::size_t>(key, value);
    } else if (key == "layers") {
        layers = parse_number<std::size_t>(key, value);
    } else if (key == "train_size") {
        train_size = parse_number<std::size_t>(key, value);
    } else if (key == "epochs") {
        epochs = parse_number<std::size_t>(key, value);
    } else if (key == "batch") {
        batch = parse_number<std::size_t>(key, value);
    } else if (key == "learning_rate") {
        learning_rate = parse_number<double>(key, value);
    } else if (key == "weight_decay") {
        weight_decay = parse_number<double>(key, value);
    } else if (key == "seed_speckle") {
        seed_speckle = parse_number<std::uint64_t>(key, value);
    } else if (key == "seed_init") {
        seed_init = parse_number<std::uint64_t>(key, value);
    } else if (key == "seed_shuffle") {
        seed_shuffle = parse_number<std::uint64_t>(key, value);
    } else if (key == "seed_subset") {
        seed_subset = parse_number<std::uint64_t>(key, value);
    } else if (key == "seed_test") {
        seed_test = parse_number<std::uint64_t>(key, value);
    } else if (key == "distribution") {
        distribution = parse_distribution(trim(value));
    } else if (key == "test_count") {
        test_count = parse_number<std::size_t>(key, value);
    } else if (key == "cs_lambda_scale") {
        cs_lambda_scale = parse_number<double>(key, value);
    } else if (key == "cs_max_iterations") {
        cs_max_iterations = parse_number<int>(key, value);
    } else if (key == "cs_tolerance") {
        cs_tolerance = parse_number<double>(key, value);
    } else if (key == "mnist_dir") {
        mnist_dir = trim(value);
    } else if (key == "output_dir") {
        output_dir = trim(value);
    } else if (key == "deterministic") {
        deterministic = parse_bool(key, value);
    } else if (key == "untrained_baseline") {
        untrained_baseline = parse_bool(key, value);
    } else if (key == "input_encoding") {
        input_encoding = parse_input_encoding(trim(value));
    } else {
        throw InvalidArgument("config: unknown key '" + key + "'");
    }
}

void ExperimentConfig::validate() const {
    auto check_rate = [](double r) {
        if (!(r > 0.0 && r <= 1.0)) {
            throw InvalidArgument("config: sampling rate " + format_rate(r) + " not in (0,1]");
        }
    };
    if (sampling_rates.empty()) throw InvalidArgument("config: sampling_rates is empty");
    for (double r : sampling_rates) check_rate(r);
    check_rate(rate);
    if (hidden == 0 || layers == 0) throw InvalidArgument("config: hidden and layers must be positive");
    if (train_size == 0) throw InvalidArgument("config: train_size must be positive");
    if (batch == 0) throw InvalidArgument("config: batch must be positive");
    if (test_count == 0) throw InvalidArgument("config: test_count must be positive");
    if (!(learning_rate > 0.0)) throw InvalidArgument("config: learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("config: weight_decay must be >= 0");
    if (!(cs_lambda_scale >= 0.0)) throw InvalidArgument("config: cs_lambda_scale must be >= 0");
    if (cs_max_iterations <= 0) throw InvalidArgument("config: cs_max_iterations must be positive");
    if (!(cs_tolerance > 0.0)) throw InvalidArgument("config: cs_tolerance must be positive");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
    return {
        {"sampling_rates", join_rates(sampling_rates)},
        {"rate", format_rate(rate)},
        {"hidden", std::to_string(hidden)},
        {"layers", std::to_string(layers)},
        {"train_size", std::to_string(train_size)},
        {"epochs", std::to_string(epochs)},
        {"batch", std::to_string(batch)},
        {"learning_rate", format_double(learning_rate, "%.17g")},
        {"weight_decay", format_double(weight_decay, "%.17g")},
        {"seed_speckle", std::to_string(seed_speckle)},
        {"seed_init", std::to_string(seed_init)},
        {"seed_shuffle", std::to_string(seed_shuffle)},
        {"seed_subset", std::to_string(seed_subset)},
        {"seed_test", std::to_string(seed_test)},
        {"distribution", to_string(distribution)},
        {"test_count", std::to_string(test_count)},
        {"cs_lambda_scale", format_double(cs_lambda_scale, "%.17g")},
        {"cs_max_iterations", std::to_string(cs_max_iterations)},
        {"cs_tolerance", format_double(cs_tolerance, "%.17g")},
        {"mnist_dir", mnist_dir.string()},
        {"output_dir", output_dir.string()},
        {"deterministic", deterministic ? "true" : "false"},
        {"untrained_baseline", untrained_baseline ? "true" : "false"},
        {"input_encoding", to_string(input_encoding)},
    };
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected key=value");
        }
        base.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

std::vector<MeanRow> BenchReport::means() const {
    std::vector<MeanRow> rows;
    for (const auto& e : entries) {
        auto it = std::find_if(rows.begin(), rows.end(), [&](const MeanRow& r) {
            return r.method == e.method && r.rate == e.rate;
        });
        if (it == rows.end()) {
            rows.push_back({e.method, e.rate, 0.0, 0});
            it = std::prev(rows.end());
        }
        it->mean_db += e.psnr_db;
        ++it->count;
    }
    for (auto& r : rows) r.mean_db /= static_cast<double>(r.count);
    return rows;
}

double BenchReport::mean(std::string_view method, double rate) const {
    for (const auto& r : means()) {
        if (r.method == method && r.rate == rate) return r.mean_db;
    }
    throw InvalidArgument("report has no rows for method '" + std::string(method) + "' at rate " +
                          format_rate(rate));
}

std::string BenchReport::to_csv() const {
    std::string out = "method,rate,target_id,psnr_db\n";
    for (const auto& e : entries) {
        out += e.method + "," + format_rate(e.rate) + "," + e.target_id + "," +
               format_double(e.psnr_db, "%.12f") + "\n";
    }
    for (const auto& r : means()) {
        out += r.method + "," + format_rate(r.rate) + ",mean," + format_double(r.mean_db, "%.12f") + "\n";
    }
    return out;
}

std::string BenchReport::summary() const {
    std::ostringstream out;
    out << "# " << name << "\n";
    for (const auto& [key, value] : metadata) out << key << ": " << value << "\n";
    out << "\nmean PSNR (dB) over all targets:\n";
    const auto rows = means();
    for (const auto& r : rows) {
        out << "  " << r.method << " @ " << format_rate(r.rate) << ": "
            << format_double(r.mean_db, "%.4f") << " (" << r.count << " targets)\n";
    }

    // Leave-one-target-out means, for comparison with statistics reported over a subset.
    std::vector<std::string> targets;
    for (const auto& e : entries) {
        if (std::find(targets.begin(), targets.end(), e.target_id) == targets.end()) {
            targets.push_back(e.target_id);
        }
    }
    if (targets.size() > 1) {
        out << "\nmeans excluding one target:\n";
        for (const auto& r : rows) {
            out << "  " << r.method << " @ " << format_rate(r.rate) << ":";
            for (const auto& skip : targets) {
                double sum = 0.0;
                std::size_t n = 0;
                for (const auto& e : entries) {
                    if (e.method == r.method && e.rate == r.rate && e.target_id != skip) {
                        sum += e.psnr_db;
                        ++n;
                    }
                }
                if (n) out << " -" << skip << "=" << format_double(sum / static_cast<double>(n), "%.4f");
            }
            out << "\n";
        }
    }

    bool gaps_header = false;
    for (const auto& a : rows) {
        for (const auto& b : rows) {
            if (a.rate != b.rate || a.method != "rnn" || b.method == "rnn") continue;
            if (!gaps_header) {
                out << "\ngaps:\n";
                gaps_header = true;
            }
            out << "  rnn - " << b.method << " @ " << format_rate(a.rate) << ": "
                << format_double(a.mean_db - b.mean_db, "%+.4f") << " dB\n";
        }
    }
    return out.str();
}

BenchReport parse_report_csv(std::string_view text, std::string name) {
    BenchReport report;
    report.name = std::move(name);
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || trim(line) != "method,rate,target_id,psnr_db") {
        throw FormatError("report CSV: missing header 'method,rate,target_id,psnr_db'", 0);
    }
    std::uint64_t offset = line.size() + 1;
    while (std::getline(in, line)) {
        const std::uint64_t at = offset;
        offset += line.size() + 1;
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::stringstream row(line);
        for (std::string f; std::getline(row, f, ',');) fields.push_back(trim(f));
        if (fields.size() != 4) throw FormatError("report CSV: expected 4 columns", at);
        if (fields[2] == "mean") continue;
        try {
            report.entries.push_back({fields[0], parse_number<double>("rate", fields[1]), fields[2],
                                      parse_number<double>("psnr_db", fields[3]), 0});
        } catch (const InvalidArgument& e) {
            throw FormatError(std::string("report CSV: ") + e.what(), at);
        }
    }
    return report;
}

std::string target_name(std::size_t index) { return "Target_" + std::to_string(index); }

std::string format_rate(double rate) { return format_double(rate, "%.6g"); }

std::uint64_t bucket_digest(const MeasurementSequence& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : m.buckets) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xFF;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

ExperimentData prepare_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto& dir = config.mnist_dir;
    const MnistSet train = load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    const MnistSet test = load_mnist_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
    if (train.size() == 0 || test.size() == 0) throw FormatError("MNIST files contain no images", 4);
    const auto height = train.images.front().height();
    const auto width = train.images.front().width();

    ExperimentData data;
    data.training = select_training_subset(train, config.train_size, config.seed_subset);
    data.targets = select_test_targets(test, config.test_count, config.seed_test);
    data.speckles = generate_speckles(config.seed_speckle, height * width, height, width,
                                      config.distribution);
    return data;
}

std::vector<MeasurementSequence> measure_targets(const ExperimentData& data, double rate) {
    const auto samples = build_sequences(data.targets, data.speckles, rate);
    std::vector<MeasurementSequence> out;
    out.reserve(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        out.push_back(samples[k].measurements);
        out.back().target_id = target_name(k);
    }
    return out;
}

TrainResult train_model(const ExperimentConfig& config, const ExperimentData& data, double rate,
                        const Logger& log) {
    const auto dataset = build_sequences(data.training, data.speckles, rate);
    const std::size_t pixels = data.speckles.pixel_count();
    TrainConfig train_config;
    train_config.epochs = config.epochs;
    train_config.batch_size = config.batch;
    train_config.adam.learning_rate = config.learning_rate;
    train_config.adam.weight_decay = config.weight_decay;
    train_config.shuffle_seed = config.seed_shuffle;
    train_config.deterministic = config.deterministic;
    train_config.encoding = config.input_encoding;
    const auto start = std::chrono::steady_clock::now();
    train_config.on_epoch = [&](const EpochRecord& r) {
        say(log, "[rate " + format_rate(rate) + "] epoch " + std::to_string(r.epoch) + "/" +
                     std::to_string(config.epochs) + " loss " + format_double(r.mean_loss, "%.6f") +
                     " (" + format_double(seconds_since(start), "%.1f") + " s)");
    };
    LstmNetwork initial =
        init_network({pixels + 1, config.hidden, config.layers, pixels}, config.seed_init);
    return train(dataset, std::move(initial), train_config);
}

GiRnnModel untrained_model(const ExperimentConfig& config, const ExperimentData& data,
                           double rate) {
    const std::size_t pixels = data.speckles.pixel_count();
    GiRnnModel model;
    model.network = init_network({pixels + 1, config.hidden, config.layers, pixels}, config.seed_init);
    model.speckles = {data.speckles.seed(), data.speckles.distribution(), data.speckles.height(),
                      data.speckles.width()};
    model.sequence_length = sampling_count(rate, pixels);
    model.preprocessing =
        fit_preprocessing(build_sequences(data.training, data.speckles, rate), config.input_encoding);
    return model;
}

ImageTensor reconstruct_gi(const MeasurementSequence& m) { return normalize_minmax(correlate(m)); }

ImageTensor reconstruct_cs(const ExperimentConfig& config, const MeasurementSequence& m) {
    return fista_reconstruct(
               make_cs_problem(m, config.cs_lambda_scale, config.cs_max_iterations, config.cs_tolerance))
        .image;
}

BenchRun run_rate_sweep(const ExperimentConfig& config, const Logger& log) {
    const auto start = std::chrono::steady_clock::now();
    const ExperimentData data = prepare_experiment(config);
    BenchRun run;
    run.report.name = "sweep";

    for (double rate : config.sampling_rates) {
        const auto measurements = measure_targets(data, rate);
        say(log, "[rate " + format_rate(rate) + "] training on " +
                     std::to_string(data.training.size()) + " images, " +
                     std::to_string(measurements.front().size()) + " illuminations each");
        TrainResult trained = train_model(config, data, rate, log);
        const auto images = predict_images(trained.model, measurements);
        for (std::size_t k = 0; k < images.size(); ++k) {
            const auto& id = *measurements[k].target_id;
            run.report.entries.push_back({"rnn", rate, id, psnr(images[k], data.targets.images[k]),
                                          bucket_digest(measurements[k])});
            run.reconstructions.push_back({"rnn", rate, id, images[k]});
        }
        if (config.untrained_baseline) {
            const auto baseline = predict_images(untrained_model(config, data, rate), measurements);
            for (std::size_t k = 0; k < baseline.size(); ++k) {
                run.report.entries.push_back({"rnn-untrained", rate, *measurements[k].target_id,
                                              psnr(baseline[k], data.targets.images[k]),
                                              bucket_digest(measurements[k])});
            }
        }
        say(log, "[rate " + format_rate(rate) + "] mean rnn PSNR " +
                     format_double(run.report.mean("rnn", rate), "%.4f") + " dB");
        run.models.emplace_back(rate, std::move(trained.model));
    }

    run.wall_seconds = seconds_since(start);
    run.report.metadata = config.echo();
    run.report.metadata.emplace_back("version", GHOSTRNN_VERSION);
    run.report.metadata.emplace_back("prng", std::string(kPrngName));
    run.report.metadata.emplace_back("wall_seconds", format_double(run.wall_seconds, "%.1f"));
    return run;
}

BenchRun run_method_comparison(const ExperimentConfig& config, const Logger& log) {
    const auto start = std::chrono::steady_clock::now();
    const ExperimentData data = prepare_experiment(config);
    const double rate = config.rate;
    const auto measurements = measure_targets(data, rate);
    BenchRun run;
    run.report.name = "compare";

    auto record = [&](const std::string& method, std::size_t k, const ImageTensor& image) {
        const auto& id = *measurements[k].target_id;
        run.report.entries.push_back({method, rate, id, psnr(image, data.targets.images[k]),
                                      bucket_digest(measurements[k])});
        run.reconstructions.push_back({method, rate, id, image});
    };

    say(log, "basic correlation on " + std::to_string(measurements.size()) + " targets");
    for (std::size_t k = 0; k < measurements.size(); ++k) record("gi", k, reconstruct_gi(measurements[k]));
    say(log, "FISTA on " + std::to_string(measurements.size()) + " targets");
    for (std::size_t k = 0; k < measurements.size(); ++k) {
        record("cs", k, reconstruct_cs(config, measurements[k]));
    }
    say(log, "training GI-RNN at rate " + format_rate(rate));
    TrainResult trained = train_model(config, data, rate, log);
    const auto images = predict_images(trained.model, measurements);
    for (std::size_t k = 0; k < images.size(); ++k) record("rnn", k, images[k]);
    run.models.emplace_back(rate, std::move(trained.model));

    run.wall_seconds = seconds_since(start);
    run.report.metadata = config.echo();
    run.report.metadata.emplace_back("version", GHOSTRNN_VERSION);
    run.report.metadata.emplace_back("prng", std::string(kPrngName));
    run.report.metadata.emplace_back("wall_seconds", format_double(run.wall_seconds, "%.1f"));
    return run;
}

void write_pgm(const std::filesystem::path& path, const ImageTensor& image) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << image.width() << " " << image.height() << "\n255\n";
    std::string pixels(image.size(), '\0');
    for (std::size_t k = 0; k < image.size(); ++k) {
        pixels[k] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * image.flat()[k])));
    }
    out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

ImageTensor read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string magic;
    std::size_t width = 0, height = 0, maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (!in || magic != "P5") throw FormatError(path.string() + ": not a binary PGM", 0);
    if (maxval != 255) throw FormatError(path.string() + ": only maxval 255 is supported", 0);
    in.get();
    const auto header = static_cast<std::uint64_t>(in.tellg());
    std::string pixels(width * height, '\0');
    in.read(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
        throw FormatError(path.string() + ": truncated pixel data", header + static_cast<std::uint64_t>(in.gcount()));
    }
    std::vector<double> values(pixels.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        values[k] = static_cast<double>(static_cast<unsigned char>(pixels[k])) / 255.0;
    }
    return {height, width, std::move(values)};
}

std::vector<ManifestEntry> emit_artifacts(const BenchReport& report,
                                          std::span<const Reconstruction> reconstructions,
                                          const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    std::vector<std::filesystem::path> written;
    for (const auto& r : reconstructions) {
        const auto path = dir / (r.method + "_r" + format_rate(r.rate) + "_" + r.target_id + ".pgm");
        write_pgm(path, r.image);
        written.push_back(path);
    }
    auto write_text = [&](const std::filesystem::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        out << text;
        if (!out) throw IoError("failed writing " + path.string());
        written.push_back(path);
    };
    write_text(dir / (report.name + ".csv"), report.to_csv());
    write_text(dir / "summary.txt", report.summary());

    std::vector<ManifestEntry> manifest;
    std::string listing;
    for (const auto& path : written) {
        const auto bytes = std::filesystem::file_size(path);
        manifest.push_back({path, bytes});
        listing += path.filename().string() + " " + std::to_string(bytes) + "\n";
    }
    std::ofstream out(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + (dir / "manifest.txt").string() + " for writing");
    out << listing;
    return manifest;
}

}  // namespace ghostrnn

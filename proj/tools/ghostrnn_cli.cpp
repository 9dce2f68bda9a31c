// Command-line runner for the ghost-imaging experiments.
//
//   ghostrnn speckles     generate the fixed speckle sequence and save it
//   ghostrnn train        train GI-RNN at one sampling rate, save a checkpoint
//   ghostrnn reconstruct  reconstruct one test target with one method
//   ghostrnn sweep        GI-RNN PSNR across sampling rates
//   ghostrnn compare      basic correlation vs FISTA vs GI-RNN at one rate
//   ghostrnn report       summarize a CSV written by sweep or compare
//
// Exit codes: 0 ok, 1 bad arguments, 2 data/format/IO errors, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ghostrnn/bench.hpp"
#include "ghostrnn/checkpoint.hpp"
#include "ghostrnn/errors.hpp"

namespace {

using namespace ghostrnn;

struct Overrides {
    std::optional<std::string> config_path;
    std::optional<double> rate;
    std::optional<std::string> rates;
    std::optional<std::uint64_t> seed_speckle, seed_init, seed_shuffle, seed_subset, seed_test;
    std::optional<std::size_t> hidden, layers, train_size, epochs, batch, test_count;
    std::optional<double> learning_rate;
    std::optional<std::string> out, mnist, encoding;
    bool deterministic = false;
};

ExperimentConfig resolve(const Overrides& o) {
    ExperimentConfig config;
    if (o.config_path) config = load_config_file(*o.config_path);
    if (o.rates) config.set("sampling_rates", *o.rates);
    if (o.rate) config.rate = *o.rate;
    if (o.seed_speckle) config.seed_speckle = *o.seed_speckle;
    if (o.seed_init) config.seed_init = *o.seed_init;
    if (o.seed_shuffle) config.seed_shuffle = *o.seed_shuffle;
    if (o.seed_subset) config.seed_subset = *o.seed_subset;
    if (o.seed_test) config.seed_test = *o.seed_test;
    if (o.hidden) config.hidden = *o.hidden;
    if (o.layers) config.layers = *o.layers;
    if (o.train_size) config.train_size = *o.train_size;
    if (o.epochs) config.epochs = *o.epochs;
    if (o.batch) config.batch = *o.batch;
    if (o.test_count) config.test_count = *o.test_count;
    if (o.learning_rate) config.learning_rate = *o.learning_rate;
    if (o.encoding) config.set("input_encoding", *o.encoding);
    if (o.out) config.output_dir = *o.out;
    if (o.mnist) config.mnist_dir = *o.mnist;
    if (o.deterministic) config.deterministic = true;
    config.validate();
    std::cerr << "seeds: speckle=" << config.seed_speckle << " init=" << config.seed_init
              << " shuffle=" << config.seed_shuffle << " subset=" << config.seed_subset
              << " test=" << config.seed_test << " (prng " << kPrngName << ")\n";
    return config;
}

void add_common(CLI::App& cmd, Overrides& o) {
    cmd.add_option("--config", o.config_path, "key=value config file")->check(CLI::ExistingFile);
    cmd.add_option("--rate", o.rate, "sampling rate in (0,1]");
    cmd.add_option("--rates", o.rates, "comma-separated sampling rates for sweep");
    cmd.add_option("--seed-speckle", o.seed_speckle);
    cmd.add_option("--seed-init", o.seed_init);
    cmd.add_option("--seed-shuffle", o.seed_shuffle);
    cmd.add_option("--seed-subset", o.seed_subset);
    cmd.add_option("--seed-test", o.seed_test);
    cmd.add_option("--hidden", o.hidden, "LSTM hidden size");
    cmd.add_option("--layers", o.layers, "stacked LSTM layers");
    cmd.add_option("--train-size", o.train_size, "training images");
    cmd.add_option("--epochs", o.epochs);
    cmd.add_option("--batch", o.batch);
    cmd.add_option("--test-count", o.test_count, "number of test targets");
    cmd.add_option("--lr", o.learning_rate, "Adam learning rate");
    cmd.add_option("--encoding", o.encoding, "input pre-processing: raw | normalized | modulated");
    cmd.add_flag("--deterministic", o.deterministic, "fixed reduction order (recorded in reports)");
    cmd.add_option("--out", o.out, "output directory");
    cmd.add_option("--mnist", o.mnist, "directory with the four MNIST IDX files");
}

void log_line(const std::string& line) { std::cerr << line << "\n"; }

void print_manifest(const std::vector<ManifestEntry>& manifest) {
    for (const auto& m : manifest) std::cout << m.path.string() << " " << m.bytes << "\n";
}

std::filesystem::path ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

int cmd_speckles(const ExperimentConfig& config) {
    const auto dir = ensure_dir(config.output_dir);
    const std::size_t pixels = 28 * 28;
    const auto count = sampling_count(config.rate, pixels);
    const auto speckles =
        generate_speckles(config.seed_speckle, count, 28, 28, config.distribution);
    const auto path = dir / "speckles.bin";
    save_speckles(path, speckles);
    for (std::size_t i = 0; i < std::min<std::size_t>(count, 4); ++i) {
        const auto p = speckles.pattern(i);
        write_pgm(dir / ("speckle_" + std::to_string(i) + ".pgm"),
                  ImageTensor(p.height(), p.width(), std::vector<double>(p.flat().begin(), p.flat().end())));
    }
    std::cout << path.string() << " " << count << " patterns (" << to_string(config.distribution)
              << ", seed " << config.seed_speckle << ")\n";
    return 0;
}

int cmd_train(const ExperimentConfig& config) {
    const auto dir = ensure_dir(config.output_dir);
    const auto data = prepare_experiment(config);
    const auto result = train_model(config, data, config.rate, log_line);
    std::map<std::string, std::string> extra;
    for (const auto& [k, v] : config.echo()) extra["config." + k] = v;
    const auto ckpt = dir / ("rnn_r" + format_rate(config.rate) + ".girnn");
    save_checkpoint(ckpt, result.model, extra);
    std::ofstream history(dir / "loss_history.csv", std::ios::trunc);
    history << "epoch,mean_loss\n";
    for (const auto& r : result.history) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.9g", r.mean_loss);
        history << r.epoch << "," << buf << "\n";
    }
    std::cout << ckpt.string() << "\n";
    return 0;
}

int cmd_reconstruct(const ExperimentConfig& config, const std::string& method, std::size_t target,
                    const std::optional<std::string>& checkpoint) {
    const auto dir = ensure_dir(config.output_dir);
    const auto data = prepare_experiment(config);
    if (target >= data.targets.size()) {
        throw InvalidArgument("--target " + std::to_string(target) + " out of range (" +
                              std::to_string(data.targets.size()) + " targets)");
    }
    const auto measurements = measure_targets(data, config.rate);
    const auto& m = measurements[target];
    ImageTensor image;
    if (method == "gi") {
        image = reconstruct_gi(m);
    } else if (method == "cs") {
        image = reconstruct_cs(config, m);
    } else {
        GiRnnModel model;
        if (checkpoint) {
            model = load_checkpoint(*checkpoint).model;
        } else {
            log_line("no --checkpoint given; training a model first");
            model = train_model(config, data, config.rate, log_line).model;
        }
        image = predict_image(model, m);
    }
    const auto path = dir / (method + "_r" + format_rate(config.rate) + "_" + *m.target_id + ".pgm");
    write_pgm(path, image);
    std::printf("%s %s psnr_db=%.4f -> %s\n", method.c_str(), m.target_id->c_str(),
                psnr(image, data.targets.images[target]), path.string().c_str());
    return 0;
}

int cmd_bench(const ExperimentConfig& config, bool sweep) {
    const auto run = sweep ? run_rate_sweep(config, log_line) : run_method_comparison(config, log_line);
    const auto manifest = emit_artifacts(run.report, run.reconstructions, config.output_dir);
    for (const auto& [rate, model] : run.models) {
        std::map<std::string, std::string> extra;
        for (const auto& [k, v] : config.echo()) extra["config." + k] = v;
        save_checkpoint(config.output_dir / ("rnn_r" + format_rate(rate) + ".girnn"), model, extra);
    }
    std::cout << run.report.summary();
    print_manifest(manifest);
    return 0;
}

int cmd_report(const std::string& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + csv_path);
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    std::cout << parse_report_csv(text, std::filesystem::path(csv_path).stem().string()).summary();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Computational ghost imaging: basic correlation, FISTA and GI-RNN"};
    app.require_subcommand(1);

    Overrides o;
    std::string method = "rnn";
    std::size_t target = 0;
    std::optional<std::string> checkpoint;
    std::string csv_path;

    auto* speckles = app.add_subcommand("speckles", "generate and save the speckle sequence");
    auto* train = app.add_subcommand("train", "train GI-RNN at --rate and save a checkpoint");
    auto* reconstruct = app.add_subcommand("reconstruct", "reconstruct one test target");
    auto* sweep = app.add_subcommand("sweep", "GI-RNN across sampling rates");
    auto* compare = app.add_subcommand("compare", "GI vs FISTA vs GI-RNN at --rate");
    auto* report = app.add_subcommand("report", "summarize a sweep/compare CSV");
    for (auto* cmd : {speckles, train, reconstruct, sweep, compare}) add_common(*cmd, o);
    reconstruct->add_option("--method", method, "gi | cs | rnn")
        ->check(CLI::IsMember({"gi", "cs", "rnn"}));
    reconstruct->add_option("--target", target, "test target index");
    reconstruct->add_option("--checkpoint", checkpoint, "GI-RNN checkpoint (rnn method)");
    report->add_option("csv", csv_path, "CSV file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (report->parsed()) return cmd_report(csv_path);
        const ExperimentConfig config = resolve(o);
        if (speckles->parsed()) return cmd_speckles(config);
        if (train->parsed()) return cmd_train(config);
        if (reconstruct->parsed()) return cmd_reconstruct(config, method, target, checkpoint);
        if (sweep->parsed()) return cmd_bench(config, true);
        return cmd_bench(config, false);
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}

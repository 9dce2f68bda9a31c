#include "ghostrnn/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "ghostrnn/errors.hpp"

namespace ghostrnn {

namespace {

template <class T>
void put_le(std::string& out, T value) {
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        out.push_back(static_cast<char>((value >> (8 * b)) & 0xFF));
    }
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::size_t offset() const { return offset_; }

    template <class T>
    T le(const char* what) {
        need(sizeof(T), what);
        T value = 0;
        for (std::size_t b = 0; b < sizeof(T); ++b) {
            value |= static_cast<T>(static_cast<unsigned char>(bytes_[offset_ + b])) << (8 * b);
        }
        offset_ += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n, const char* what) {
        need(n, what);
        auto out = bytes_.substr(offset_, n);
        offset_ += n;
        return out;
    }

    bool at_end() const { return offset_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - offset_ < n) {
            throw FormatError(std::string("checkpoint truncated while reading ") + what, offset_);
        }
    }

    std::string_view bytes_;
    std::size_t offset_ = 0;
};

std::size_t parse_size(const std::map<std::string, std::string>& meta, const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("checkpoint metadata lacks '" + key + "'", 8);
    try {
        std::size_t used = 0;
        const auto v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw FormatError("checkpoint metadata '" + key + "' is not an integer", 8);
    }
}

void put_metadata(std::string& out, const std::map<std::string, std::string>& meta) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    for (const auto& [key, value] : meta) {
        const std::string line = key + "=" + value;
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(line.size()));
        out += line;
    }
}

std::map<std::string, std::string> read_metadata(Reader& in) {
    std::map<std::string, std::string> meta;
    const auto lines = in.le<std::uint32_t>("metadata line count");
    for (std::uint32_t n = 0; n < lines; ++n) {
        const auto length = in.le<std::uint32_t>("metadata line length");
        const std::size_t at = in.offset();
        const auto line = in.take(length, "metadata line");
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw FormatError("metadata line without '='", at);
        }
        meta.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    }
    return meta;
}

SpeckleDistribution parse_distribution_field(const std::map<std::string, std::string>& meta) {
    const auto it = meta.find("speckle_distribution");
    try {
        if (it != meta.end()) return parse_distribution(it->second);
    } catch (const InvalidArgument&) {
    }
    throw FormatError("metadata has no valid speckle_distribution", 8);
}

std::string exact_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::map<std::string, std::string>& meta, const std::string& key,
                    double fallback) {
    const auto it = meta.find(key);
    if (it == meta.end()) return fallback;
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used == it->second.size()) return v;
    } catch (const std::exception&) {
    }
    throw FormatError("metadata field " + key + " is not a number: '" + it->second + "'", 8);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string encode_checkpoint(const GiRnnModel& model,
                              const std::map<std::string, std::string>& extra) {
    model.network.validate();
    const auto& net = model.network;
    std::map<std::string, std::string> meta = extra;
    meta["hidden_size"] = std::to_string(net.hidden_size());
    meta["layers"] = std::to_string(net.layers.size());
    meta["input_size"] = std::to_string(net.input_size());
    meta["output_size"] = std::to_string(net.output_size());
    meta["pixel_count"] = std::to_string(model.speckles.height * model.speckles.width);
    meta["height"] = std::to_string(model.speckles.height);
    meta["width"] = std::to_string(model.speckles.width);
    meta["speckle_seed"] = std::to_string(model.speckles.seed);
    meta["speckle_distribution"] = to_string(model.speckles.distribution);
    meta["sequence_length"] = std::to_string(model.sequence_length);
    meta["prng"] = std::string(kPrngName);
    meta["gate_order"] = "i,f,g,o";
    meta["layout"] = "row-major";
    meta["bucket_scale"] = "1/pixel_count";
    meta["input_encoding"] = to_string(model.preprocessing.encoding);
    meta["bucket_mean"] = exact_double(model.preprocessing.mean);
    meta["bucket_std"] = exact_double(model.preprocessing.stddev);
    meta["init"] = "uniform(+-1/sqrt(hidden)),forget_bias=1";

    std::string out(kCheckpointMagic);
    put_metadata(out, meta);
    zip_parameters(
        [&out](const auto& block) {
            put_le<std::uint64_t>(out, static_cast<std::uint64_t>(block.size()));
            for (Eigen::Index r = 0; r < block.rows(); ++r) {
                for (Eigen::Index c = 0; c < block.cols(); ++c) {
                    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(block(r, c))));
                }
            }
        },
        net);
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    Reader in(bytes);
    if (bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
        throw FormatError("not a GI-RNN checkpoint (bad magic)", 0);
    }
    in.take(kCheckpointMagic.size(), "magic");

    Checkpoint ckpt;
    ckpt.metadata = read_metadata(in);

    NetworkShape shape;
    shape.hidden_size = parse_size(ckpt.metadata, "hidden_size");
    shape.layers = parse_size(ckpt.metadata, "layers");
    shape.input_size = parse_size(ckpt.metadata, "input_size");
    shape.output_size = parse_size(ckpt.metadata, "output_size");
    auto& model = ckpt.model;
    model.speckles.height = parse_size(ckpt.metadata, "height");
    model.speckles.width = parse_size(ckpt.metadata, "width");
    model.speckles.seed = parse_size(ckpt.metadata, "speckle_seed");
    model.sequence_length = parse_size(ckpt.metadata, "sequence_length");
    model.speckles.distribution = parse_distribution_field(ckpt.metadata);
    auto& prep = model.preprocessing;
    if (const auto it = ckpt.metadata.find("input_encoding"); it != ckpt.metadata.end()) {
        try {
            prep.encoding = parse_input_encoding(it->second);
        } catch (const InvalidArgument& e) {
            throw FormatError(e.what(), 8);
        }
    }
    prep.mean = parse_double(ckpt.metadata, "bucket_mean", 0.0);
    prep.stddev = parse_double(ckpt.metadata, "bucket_std", 1.0);
    if (!std::isfinite(prep.mean) || !std::isfinite(prep.stddev) || !(prep.stddev > 0.0)) {
        throw FormatError("input preprocessing in metadata is invalid", 8);
    }
    if (ckpt.metadata.count("gate_order") && ckpt.metadata.at("gate_order") != "i,f,g,o") {
        throw FormatError("unsupported gate order '" + ckpt.metadata.at("gate_order") + "'", 8);
    }
    try {
        model.network = zero_network(shape);
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("checkpoint shape invalid: ") + e.what(), 8);
    }

    zip_parameters(
        [&in](auto& block) {
            const std::size_t at = in.offset();
            const auto count = in.le<std::uint64_t>("array length");
            if (count != static_cast<std::uint64_t>(block.size())) {
                throw FormatError("array holds " + std::to_string(count) + " values, expected " +
                                      std::to_string(block.size()),
                                  at);
            }
            for (Eigen::Index r = 0; r < block.rows(); ++r) {
                for (Eigen::Index c = 0; c < block.cols(); ++c) {
                    block(r, c) = std::bit_cast<float>(in.le<std::uint32_t>("parameter"));
                }
            }
        },
        model.network);
    if (!in.at_end()) throw FormatError("trailing bytes after parameters", in.offset());
    return ckpt;
}

std::string encode_speckles(const SpeckleSequence& speckles) {
    const std::map<std::string, std::string> meta{
        {"speckle_seed", std::to_string(speckles.seed())},
        {"speckle_distribution", to_string(speckles.distribution())},
        {"prng", std::string(kPrngName)},
        {"height", std::to_string(speckles.height())},
        {"width", std::to_string(speckles.width())},
        {"count", std::to_string(speckles.count())},
    };
    std::string out(kSpeckleMagic);
    put_metadata(out, meta);
    const auto values = speckles.matrix();
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(values.size()));
    for (Eigen::Index i = 0; i < values.cols(); ++i) {
        for (Eigen::Index k = 0; k < values.rows(); ++k) {
            put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(values(k, i))));
        }
    }
    return out;
}

SpeckleSequence decode_speckles(std::string_view bytes) {
    Reader in(bytes);
    if (bytes.substr(0, kSpeckleMagic.size()) != kSpeckleMagic) {
        throw FormatError("not a speckle file (bad magic)", 0);
    }
    in.take(kSpeckleMagic.size(), "magic");
    const auto meta = read_metadata(in);
    const auto height = parse_size(meta, "height");
    const auto width = parse_size(meta, "width");
    const auto count = parse_size(meta, "count");
    const std::size_t at = in.offset();
    const auto elements = in.le<std::uint64_t>("array length");
    if (height == 0 || width == 0 || elements != height * width * count) {
        throw FormatError("speckle array length does not match height x width x count", at);
    }
    Eigen::MatrixXd values(static_cast<Eigen::Index>(height * width), static_cast<Eigen::Index>(count));
    for (Eigen::Index i = 0; i < values.cols(); ++i) {
        for (Eigen::Index k = 0; k < values.rows(); ++k) {
            values(k, i) = std::bit_cast<float>(in.le<std::uint32_t>("speckle value"));
        }
    }
    if (!in.at_end()) throw FormatError("trailing bytes after speckle values", in.offset());
    return {height, width, std::move(values), parse_size(meta, "speckle_seed"),
            parse_distribution_field(meta)};
}

void save_speckles(const std::filesystem::path& path, const SpeckleSequence& speckles) {
    write_file(path, encode_speckles(speckles));
}

SpeckleSequence load_speckles(const std::filesystem::path& path) {
    return decode_speckles(read_file(path));
}

void save_checkpoint(const std::filesystem::path& path, const GiRnnModel& model,
                     const std::map<std::string, std::string>& extra) {
    write_file(path, encode_checkpoint(model, extra));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path));
}

}  // namespace ghostrnn

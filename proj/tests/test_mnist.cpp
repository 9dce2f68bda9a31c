#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "ghostrnn/errors.hpp"
#include "ghostrnn/mnist.hpp"

using namespace ghostrnn;

namespace {

const std::filesystem::path kData = GHOSTRNN_DATA_DIR;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

struct TempDir {
    std::filesystem::path path = std::filesystem::temp_directory_path() / "ghostrnn_mnist_test";
    TempDir() { std::filesystem::create_directories(path); }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("the bundled IDX files load") {
    const auto train = load_mnist_idx(kData / "train-images-idx3-ubyte", kData / "train-labels-idx1-ubyte");
    const auto test = load_mnist_idx(kData / "t10k-images-idx3-ubyte", kData / "t10k-labels-idx1-ubyte");
    CHECK(train.size() == 4000);
    CHECK(test.size() == 1000);
    for (const auto& img : test.images) {
        REQUIRE(img.height() == 28);
        REQUIRE(img.width() == 28);
    }
    std::set<int> labels(test.labels.begin(), test.labels.end());
    CHECK(labels.size() == 10);
    CHECK(*labels.begin() == 0);
    CHECK(*labels.rbegin() == 9);
}

TEST_CASE("corrupted IDX input is reported with its byte offset") {
    TempDir tmp;
    const auto images = slurp(kData / "t10k-images-idx3-ubyte");
    const auto labels = slurp(kData / "t10k-labels-idx1-ubyte");

    auto bad_magic = images;
    bad_magic[0] = '\xDE';
    bad_magic[1] = '\xAD';
    bad_magic[2] = '\xBE';
    bad_magic[3] = '\xEF';
    spit(tmp.path / "img", bad_magic);
    spit(tmp.path / "lbl", labels);
    try {
        load_mnist_idx(tmp.path / "img", tmp.path / "lbl");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 0);
    }

    spit(tmp.path / "img", images.substr(0, images.size() - 100));
    CHECK_THROWS_AS(load_mnist_idx(tmp.path / "img", tmp.path / "lbl"), FormatError);

    spit(tmp.path / "img", images);
    spit(tmp.path / "lbl", labels.substr(0, labels.size() - 1));
    CHECK_THROWS_AS(load_mnist_idx(tmp.path / "img", tmp.path / "lbl"), FormatError);

    CHECK_THROWS_AS(load_mnist_idx(tmp.path / "nope", tmp.path / "lbl"), IoError);
}

TEST_CASE("subset selection is seeded and distinct") {
    const auto test = load_mnist_idx(kData / "t10k-images-idx3-ubyte", kData / "t10k-labels-idx1-ubyte");
    const auto a = select_training_subset(test, 50, 7);
    const auto b = select_training_subset(test, 50, 7);
    const auto c = select_training_subset(test, 50, 8);
    CHECK(a.labels == b.labels);
    bool same = true;
    for (std::size_t k = 0; k < 50; ++k) same = same && a.images[k].flat()[300] == c.images[k].flat()[300] && a.labels[k] == c.labels[k];
    CHECK_FALSE(same);
    CHECK_THROWS_AS(select_training_subset(test, 1001, 1), InvalidArgument);

    const auto targets = select_test_targets(test, 10, 5);
    REQUIRE(targets.size() == 10);
    for (int d = 0; d < 10; ++d) CHECK(targets.labels[static_cast<std::size_t>(d)] == d);
    const auto more = select_test_targets(test, 14, 5);
    for (int d = 0; d < 10; ++d) CHECK(more.labels[static_cast<std::size_t>(d)] == d);
}

TEST_CASE("flatten and build_sequences") {
    const ImageTensor img(2, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    const auto v = flatten(img);
    CHECK(v(4) == 0.5);
    CHECK(unflatten(v, 2, 3).flat()[5] == 0.6);

    const auto test = load_mnist_idx(kData / "t10k-images-idx3-ubyte", kData / "t10k-labels-idx1-ubyte");
    const auto few = select_test_targets(test, 3, 1);
    const auto speckles = generate_speckles(1, 784, 28, 28);
    const auto seqs = build_sequences(few, speckles, 0.0625);
    REQUIRE(seqs.size() == 3);
    CHECK(seqs[0].measurements.size() == 49);
    CHECK(*seqs[1].measurements.target_id == "1:1");
    CHECK(seqs[2].measurements.buckets[3] == bucket_signal(speckles.pattern(3), few.images[2]));
    CHECK_THROWS_AS(build_sequences(few, speckles.prefix(10), 0.25), InvalidArgument);
}

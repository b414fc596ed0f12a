#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <vector>

#include <unistd.h>

#include "kcl/checkpoint.hpp"
#include "kcl/errors.hpp"
#include "kcl/rng.hpp"

namespace fs = std::filesystem;

namespace {

kcl::Checkpoint sample_checkpoint() {
    kcl::NetworkParams params = kcl::init_params({4, 6, 4}, 5);
    std::size_t n = params.parameter_count();

    kcl::KalmanState state = kcl::make_kalman_state(n, 0.07, 1e-7);
    kcl::SplitMix64 rng(88);
    state.theta = kcl::flatten(params);
    for (std::size_t i = 0; i < n; ++i) {
        state.uncertainty[i] = rng.next_double();
        state.stored_importance[i] = rng.next_double();
    }
    state.f_star = kcl::threshold_importance(state.stored_importance, 0.6);
    state.consolidated = true;

    kcl::TrainConfig config;
    config.learning_rate = 0.07;
    config.batch_size = 16;
    config.epochs_per_task = 3;
    config.alpha = 0.6;
    config.xi = 1e-7;
    config.seed = 99;
    config.optimizer = kcl::OptimizerKind::kSgd;
    config.uncertainty_measure = kcl::UncertaintyMeasure::kSquared;
    config.fisher_batch_size = 2;
    config.hidden_dims = {6};

    kcl::DatasetConfig dataset;
    dataset.kind = kcl::DatasetConfig::Kind::kIdx;
    dataset.num_classes = 4;
    dataset.classes_per_task = 2;
    dataset.train_images = "data/train-images.idx";
    dataset.train_labels = "data/train-labels.idx";
    dataset.test_images = "data/test-images.idx";
    dataset.test_labels = "data/test-labels.idx";

    kcl::AccuracyMatrix matrix;
    matrix.add_stage({0.91});
    matrix.add_stage({0.88, 0.95});

    return kcl::make_checkpoint(params, state, 2, config, dataset, matrix);
}

void expect_equal(const kcl::Checkpoint& a, const kcl::Checkpoint& b) {
    CHECK(a.layer_dims == b.layer_dims);
    CHECK(a.params_flat == b.params_flat);
    CHECK(a.state.theta == b.state.theta);
    CHECK(a.state.uncertainty == b.state.uncertainty);
    CHECK(a.state.stored_importance == b.state.stored_importance);
    CHECK(a.state.f_star == b.state.f_star);
    CHECK(a.state.xi == b.state.xi);
    CHECK(a.state.learning_rate == b.state.learning_rate);
    CHECK(a.state.consolidated == b.state.consolidated);
    CHECK(a.tasks_completed == b.tasks_completed);
    CHECK(a.config.learning_rate == b.config.learning_rate);
    CHECK(a.config.batch_size == b.config.batch_size);
    CHECK(a.config.epochs_per_task == b.config.epochs_per_task);
    CHECK(a.config.alpha == b.config.alpha);
    CHECK(a.config.xi == b.config.xi);
    CHECK(a.config.seed == b.config.seed);
    CHECK(a.config.optimizer == b.config.optimizer);
    CHECK(a.config.uncertainty_measure == b.config.uncertainty_measure);
    CHECK(a.config.fisher_batch_size == b.config.fisher_batch_size);
    CHECK(a.config.hidden_dims == b.config.hidden_dims);
    CHECK(a.dataset.kind == b.dataset.kind);
    CHECK(a.dataset.num_classes == b.dataset.num_classes);
    CHECK(a.dataset.train_per_class == b.dataset.train_per_class);
    CHECK(a.dataset.test_per_class == b.dataset.test_per_class);
    CHECK(a.dataset.dim == b.dataset.dim);
    CHECK(a.dataset.classes_per_task == b.dataset.classes_per_task);
    CHECK(a.dataset.train_images == b.dataset.train_images);
    CHECK(a.dataset.train_labels == b.dataset.train_labels);
    CHECK(a.dataset.test_images == b.dataset.test_images);
    CHECK(a.dataset.test_labels == b.dataset.test_labels);
    CHECK(a.matrix_rows == b.matrix_rows);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("kcl_ckpt_" + std::to_string(static_cast<unsigned>(::getpid())));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

}  // namespace

TEST_CASE("encode and decode round-trip every field bit for bit") {
    kcl::Checkpoint ckpt = sample_checkpoint();
    std::vector<std::uint8_t> bytes = kcl::encode_checkpoint(ckpt);
    kcl::Checkpoint back = kcl::decode_checkpoint(bytes);
    expect_equal(ckpt, back);
    CHECK(kcl::encode_checkpoint(back) == bytes);
}

TEST_CASE("decoded theta always mirrors the stored parameters") {
    kcl::Checkpoint ckpt = sample_checkpoint();
    kcl::Checkpoint back = kcl::decode_checkpoint(kcl::encode_checkpoint(ckpt));
    CHECK(back.state.theta == back.params_flat);
}

TEST_CASE("save and load round-trip through a file") {
    TempDir tmp;
    std::string path = (tmp.path / "run.ckpt").string();
    kcl::Checkpoint ckpt = sample_checkpoint();
    kcl::save_checkpoint(ckpt, path);
    CHECK(fs::exists(path));
    CHECK_FALSE(fs::exists(path + ".tmp"));
    expect_equal(ckpt, kcl::load_checkpoint(path));

    // Saving over an existing checkpoint replaces it atomically.
    kcl::Checkpoint ckpt2 = sample_checkpoint();
    ckpt2.tasks_completed = 1;
    ckpt2.matrix_rows.pop_back();
    kcl::save_checkpoint(ckpt2, path);
    CHECK(kcl::load_checkpoint(path).tasks_completed == 1);
}

TEST_CASE("structured weights rebuild from the stored architecture") {
    kcl::Checkpoint ckpt = sample_checkpoint();
    kcl::NetworkParams params = kcl::checkpoint_params(ckpt);
    CHECK(params.layer_dims == ckpt.layer_dims);
    CHECK(kcl::flatten(params) == ckpt.params_flat);

    kcl::AccuracyMatrix matrix = kcl::checkpoint_matrix(ckpt);
    CHECK(matrix.num_stages() == 2);
    CHECK(matrix.at(2, 2) == 0.95);
}

TEST_CASE("a corrupted payload byte is caught by the checksum") {
    std::vector<std::uint8_t> bytes = kcl::encode_checkpoint(sample_checkpoint());
    std::vector<std::uint8_t> bad = bytes;
    bad[bytes.size() / 2] ^= 0x01;
    CHECK_THROWS_AS(kcl::decode_checkpoint(bad), kcl::FormatError);
}

TEST_CASE("a corrupted checksum byte is caught") {
    std::vector<std::uint8_t> bytes = kcl::encode_checkpoint(sample_checkpoint());
    bytes.back() ^= 0xFF;
    CHECK_THROWS_AS(kcl::decode_checkpoint(bytes), kcl::FormatError);
}

TEST_CASE("truncation is caught") {
    std::vector<std::uint8_t> bytes = kcl::encode_checkpoint(sample_checkpoint());
    bytes.resize(bytes.size() - 9);
    CHECK_THROWS_AS(kcl::decode_checkpoint(bytes), kcl::FormatError);
    CHECK_THROWS_AS(kcl::decode_checkpoint({}), kcl::FormatError);
    CHECK_THROWS_AS(kcl::decode_checkpoint({0x4B, 0x43}), kcl::FormatError);
}

TEST_CASE("a wrong magic is caught") {
    std::vector<std::uint8_t> bytes = kcl::encode_checkpoint(sample_checkpoint());
    bytes[0] = 'X';
    CHECK_THROWS_AS(kcl::decode_checkpoint(bytes), kcl::FormatError);
}

TEST_CASE("a flipped version byte reports a version mismatch specifically") {
    std::vector<std::uint8_t> bytes = kcl::encode_checkpoint(sample_checkpoint());
    bytes[4] ^= 0xFF;  // low byte of the little-endian version
    CHECK_THROWS_AS(kcl::decode_checkpoint(bytes), kcl::VersionError);
}

TEST_CASE("loading a missing file is a format error") {
    CHECK_THROWS_AS(kcl::load_checkpoint("/nonexistent/dir/x.ckpt"), kcl::FormatError);
}

TEST_CASE("a synthetic-dataset checkpoint round-trips too") {
    kcl::Checkpoint ckpt = sample_checkpoint();
    ckpt.dataset = kcl::DatasetConfig{};  // synthetic defaults, empty paths
    kcl::Checkpoint back = kcl::decode_checkpoint(kcl::encode_checkpoint(ckpt));
    expect_equal(ckpt, back);
}

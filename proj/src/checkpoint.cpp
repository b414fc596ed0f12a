#include "kcl/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kcl/errors.hpp"

namespace kcl {

namespace {

constexpr std::uint8_t kMagic[4] = {'K', 'C', 'L', 'C'};
constexpr std::uint16_t kVersion = 1;

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (std::size_t i = 0; i < len; ++i) {
        hash ^= data[i];
        hash *= 1099511628211ULL;
    }
    return hash;
}

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void vec(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) {
            f64(x);
        }
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::vector<double> vec() {
        std::uint64_t n = u64();
        if (n > remaining() / 8) {
            throw FormatError("checkpoint: vector length exceeds file size");
        }
        std::vector<double> out(static_cast<std::size_t>(n));
        for (double& x : out) {
            x = f64();
        }
        return out;
    }
    std::string str() {
        std::uint32_t n = u32();
        const std::uint8_t* p = take(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    std::size_t offset() const { return offset_; }
    std::size_t remaining() const { return bytes_.size() - offset_; }

private:
    std::uint64_t le(int width) {
        const std::uint8_t* p = take(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        }
        return v;
    }
    const std::uint8_t* take(std::size_t n) {
        if (offset_ + n > bytes_.size()) {
            throw FormatError("checkpoint: truncated");
        }
        const std::uint8_t* p = bytes_.data() + offset_;
        offset_ += n;
        return p;
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t offset_ = 0;
};

// Section payloads are built separately and emitted as u32 length + bytes.
void emit_section(Writer& out, Writer& section) {
    out.u32(static_cast<std::uint32_t>(section.bytes().size()));
    out.bytes().insert(out.bytes().end(), section.bytes().begin(), section.bytes().end());
}

Reader open_section(Reader& in, std::vector<std::uint8_t>& storage) {
    std::uint32_t len = in.u32();
    storage.resize(len);
    for (std::uint32_t i = 0; i < len; ++i) {
        storage[i] = in.u8();
    }
    return Reader(storage);
}

}  // namespace

Checkpoint make_checkpoint(const NetworkParams& params, const KalmanState& state,
                           int tasks_completed, const TrainConfig& config,
                           const DatasetConfig& dataset, const AccuracyMatrix& matrix) {
    Checkpoint ckpt;
    ckpt.layer_dims = params.layer_dims;
    ckpt.params_flat = flatten(params);
    ckpt.state = state;
    ckpt.state.theta = ckpt.params_flat;
    ckpt.tasks_completed = static_cast<std::uint32_t>(tasks_completed);
    ckpt.config = config;
    ckpt.dataset = dataset;
    ckpt.matrix_rows = matrix.rows;
    return ckpt;
}

NetworkParams checkpoint_params(const Checkpoint& ckpt) {
    NetworkParams params = init_params(ckpt.layer_dims, 0);
    unflatten(ckpt.params_flat, params);
    return params;
}

AccuracyMatrix checkpoint_matrix(const Checkpoint& ckpt) {
    AccuracyMatrix matrix;
    for (const auto& row : ckpt.matrix_rows) {
        matrix.add_stage(row);
    }
    return matrix;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer out;
    for (std::uint8_t b : kMagic) {
        out.u8(b);
    }
    out.u16(kVersion);

    Writer arch;
    arch.u32(static_cast<std::uint32_t>(ckpt.layer_dims.size()));
    for (int d : ckpt.layer_dims) {
        arch.u32(static_cast<std::uint32_t>(d));
    }
    emit_section(out, arch);

    Writer params;
    params.vec(ckpt.params_flat);
    emit_section(out, params);

    Writer kalman;
    kalman.u8(ckpt.state.consolidated ? 1 : 0);
    kalman.f64(ckpt.state.xi);
    kalman.f64(ckpt.state.learning_rate);
    kalman.vec(ckpt.state.uncertainty);
    kalman.vec(ckpt.state.stored_importance);
    kalman.vec(ckpt.state.f_star);
    emit_section(out, kalman);

    Writer progress;
    progress.u32(ckpt.tasks_completed);
    progress.u64(ckpt.config.seed);
    emit_section(out, progress);

    Writer config;
    config.f64(ckpt.config.learning_rate);
    config.u32(static_cast<std::uint32_t>(ckpt.config.batch_size));
    config.u32(static_cast<std::uint32_t>(ckpt.config.epochs_per_task));
    config.f64(ckpt.config.alpha);
    config.f64(ckpt.config.xi);
    config.u64(ckpt.config.seed);
    config.u8(static_cast<std::uint8_t>(ckpt.config.optimizer));
    config.u8(static_cast<std::uint8_t>(ckpt.config.uncertainty_measure));
    config.u32(static_cast<std::uint32_t>(ckpt.config.fisher_batch_size));
    config.u32(static_cast<std::uint32_t>(ckpt.config.hidden_dims.size()));
    for (int d : ckpt.config.hidden_dims) {
        config.u32(static_cast<std::uint32_t>(d));
    }
    emit_section(out, config);

    Writer dataset;
    dataset.u8(static_cast<std::uint8_t>(ckpt.dataset.kind));
    dataset.u32(static_cast<std::uint32_t>(ckpt.dataset.num_classes));
    dataset.u32(static_cast<std::uint32_t>(ckpt.dataset.train_per_class));
    dataset.u32(static_cast<std::uint32_t>(ckpt.dataset.test_per_class));
    dataset.u32(static_cast<std::uint32_t>(ckpt.dataset.dim));
    dataset.u32(static_cast<std::uint32_t>(ckpt.dataset.classes_per_task));
    dataset.str(ckpt.dataset.train_images);
    dataset.str(ckpt.dataset.train_labels);
    dataset.str(ckpt.dataset.test_images);
    dataset.str(ckpt.dataset.test_labels);
    emit_section(out, dataset);

    Writer matrix;
    matrix.u32(static_cast<std::uint32_t>(ckpt.matrix_rows.size()));
    for (const auto& row : ckpt.matrix_rows) {
        matrix.vec(row);
    }
    emit_section(out, matrix);

    out.u64(fnv1a64(out.bytes().data(), out.bytes().size()));
    return std::move(out.bytes());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 + 2 + 8) {
        throw FormatError("checkpoint: file too short");
    }
    for (std::size_t i = 0; i < 4; ++i) {
        if (bytes[i] != kMagic[i]) {
            throw FormatError("checkpoint: bad magic");
        }
    }
    std::uint16_t version =
        static_cast<std::uint16_t>(bytes[4] | (static_cast<std::uint16_t>(bytes[5]) << 8));
    if (version != kVersion) {
        throw VersionError("checkpoint: version " + std::to_string(version) +
                           " not supported (expected " + std::to_string(kVersion) + ")");
    }
    std::size_t body_len = bytes.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) {
        stored |= static_cast<std::uint64_t>(bytes[body_len + static_cast<std::size_t>(i)])
                  << (8 * i);
    }
    if (fnv1a64(bytes.data(), body_len) != stored) {
        throw FormatError("checkpoint: checksum mismatch");
    }

    std::vector<std::uint8_t> body(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(body_len));
    Reader in(body);
    for (int i = 0; i < 4; ++i) {
        in.u8();
    }
    in.u16();

    Checkpoint ckpt;
    std::vector<std::uint8_t> storage;
    {
        Reader arch = open_section(in, storage);
        std::uint32_t n = arch.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
            ckpt.layer_dims.push_back(static_cast<int>(arch.u32()));
        }
    }
    {
        Reader params = open_section(in, storage);
        ckpt.params_flat = params.vec();
    }
    {
        Reader kalman = open_section(in, storage);
        ckpt.state.consolidated = kalman.u8() != 0;
        ckpt.state.xi = kalman.f64();
        ckpt.state.learning_rate = kalman.f64();
        ckpt.state.uncertainty = kalman.vec();
        ckpt.state.stored_importance = kalman.vec();
        ckpt.state.f_star = kalman.vec();
        ckpt.state.theta = ckpt.params_flat;
    }
    {
        Reader progress = open_section(in, storage);
        ckpt.tasks_completed = progress.u32();
        progress.u64();  // base seed, mirrored in the config section
    }
    {
        Reader config = open_section(in, storage);
        ckpt.config.learning_rate = config.f64();
        ckpt.config.batch_size = static_cast<int>(config.u32());
        ckpt.config.epochs_per_task = static_cast<int>(config.u32());
        ckpt.config.alpha = config.f64();
        ckpt.config.xi = config.f64();
        ckpt.config.seed = config.u64();
        ckpt.config.optimizer = static_cast<OptimizerKind>(config.u8());
        ckpt.config.uncertainty_measure = static_cast<UncertaintyMeasure>(config.u8());
        ckpt.config.fisher_batch_size = static_cast<int>(config.u32());
        std::uint32_t n = config.u32();
        ckpt.config.hidden_dims.clear();
        for (std::uint32_t i = 0; i < n; ++i) {
            ckpt.config.hidden_dims.push_back(static_cast<int>(config.u32()));
        }
    }
    {
        Reader dataset = open_section(in, storage);
        ckpt.dataset.kind = static_cast<DatasetConfig::Kind>(dataset.u8());
        ckpt.dataset.num_classes = static_cast<int>(dataset.u32());
        ckpt.dataset.train_per_class = static_cast<int>(dataset.u32());
        ckpt.dataset.test_per_class = static_cast<int>(dataset.u32());
        ckpt.dataset.dim = static_cast<int>(dataset.u32());
        ckpt.dataset.classes_per_task = static_cast<int>(dataset.u32());
        ckpt.dataset.train_images = dataset.str();
        ckpt.dataset.train_labels = dataset.str();
        ckpt.dataset.test_images = dataset.str();
        ckpt.dataset.test_labels = dataset.str();
    }
    {
        Reader matrix = open_section(in, storage);
        std::uint32_t stages = matrix.u32();
        for (std::uint32_t s = 0; s < stages; ++s) {
            ckpt.matrix_rows.push_back(matrix.vec());
        }
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::vector<std::uint8_t> bytes = encode_checkpoint(ckpt);
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw FormatError("checkpoint: cannot open " + tmp + " for writing");
        }
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw FormatError("checkpoint: write failed for " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw FormatError("checkpoint: rename to " + path + " failed: " + ec.message());
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("checkpoint: cannot open " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace kcl

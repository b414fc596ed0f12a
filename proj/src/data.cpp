#include "kcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "kcl/errors.hpp"
#include "kcl/rng.hpp"

namespace kcl {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                          const char* what) {
    if (offset + 4 > bytes.size()) {
        throw FormatError(std::string("idx: truncated while reading ") + what);
    }
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("idx: cannot open " + path);
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

LabeledDataset parse_idx(const std::vector<std::uint8_t>& image_bytes,
                         const std::vector<std::uint8_t>& label_bytes) {
    if (read_u32_be(image_bytes, 0, "image magic") != kImagesMagic) {
        throw FormatError("idx: bad image magic");
    }
    if (read_u32_be(label_bytes, 0, "label magic") != kLabelsMagic) {
        throw FormatError("idx: bad label magic");
    }
    std::uint64_t image_count = read_u32_be(image_bytes, 4, "image count");
    std::uint64_t rows = read_u32_be(image_bytes, 8, "rows");
    std::uint64_t cols = read_u32_be(image_bytes, 12, "cols");
    std::uint64_t label_count = read_u32_be(label_bytes, 4, "label count");
    if (image_count != label_count) {
        throw FormatError("idx: image count does not match label count");
    }
    if (image_count == 0) {
        throw FormatError("idx: empty dataset");
    }
    std::uint64_t dim = rows * cols;
    if (dim == 0) {
        throw FormatError("idx: zero image dimensions");
    }
    // Sizes are bounded by the actual file length before any multiply can
    // overflow or any allocation can balloon.
    if (rows > 1u << 16 || cols > 1u << 16 || dim > image_bytes.size() ||
        image_count > image_bytes.size()) {
        throw FormatError("idx: declared sizes exceed file contents");
    }
    std::uint64_t pixel_bytes = image_count * dim;
    if (image_bytes.size() < 16 + pixel_bytes) {
        throw FormatError("idx: image file truncated");
    }
    if (label_bytes.size() < 8 + label_count) {
        throw FormatError("idx: label file truncated");
    }

    LabeledDataset ds;
    ds.inputs = Matrix(static_cast<std::size_t>(image_count), static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < pixel_bytes; ++i) {
        ds.inputs.data()[i] = static_cast<double>(image_bytes[16 + i]) / 255.0;
    }
    ds.labels.resize(static_cast<std::size_t>(label_count));
    int max_label = 0;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        ds.labels[i] = static_cast<int>(label_bytes[8 + i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    return parse_idx(read_file(images_path), read_file(labels_path));
}

LabeledDataset synthetic_digits(int num_classes, int per_class, int dim, std::uint64_t seed) {
    if (num_classes <= 0 || per_class <= 0 || dim <= 0) {
        throw ContractError("synthetic_digits: all arguments must be positive");
    }
    // Classes form pairs straddling a shared anchor at 0.5: pair p's two
    // centers sit at 0.5 +- 0.3 * v_p, where the unit directions v_p fan
    // out inside one seeded random 2-plane, evenly spaced in angle with a
    // small seeded jitter. Within a pair the center distance is 0.6 = 7.5
    // sigma, so each pair is linearly separable along its direction with a
    // 0.12 margin left between 3-sigma cluster radii. All pairs share both
    // the anchor region and the feature plane on purpose: sequential
    // training on one pair reshapes exactly the hidden features every
    // other pair relies on, which is the interference the forgetting
    // benchmark exists to measure. Any draw that puts two class centers
    // closer than 2 sigma is redrawn; when the geometry cannot fit the
    // classes at all (dim 1 collapses the plane to a line, and many pairs
    // squeeze the fan angles until neighbors collide), placement fails
    // loudly instead of silently producing confusable classes.
    const double sigma = 0.08;
    const double offset = 0.30;
    const double anchor = 0.5;
    const double min_gap = 2.0 * sigma;
    const double pi = 3.14159265358979323846;
    const int pairs = (num_classes + 1) / 2;

    SplitMix64 dir_rng(derive_seed(seed, {1}));
    auto draw_unit = [&](const std::vector<double>* orthogonal_to) {
        std::vector<double> v(static_cast<std::size_t>(dim));
        for (int attempt = 0; attempt < 8; ++attempt) {
            double norm2 = 0.0;
            for (double& x : v) {
                x = dir_rng.next_gaussian();
                norm2 += x * x;
            }
            if (orthogonal_to != nullptr) {
                double proj = 0.0;
                for (int d = 0; d < dim; ++d) {
                    proj += v[static_cast<std::size_t>(d)] *
                            (*orthogonal_to)[static_cast<std::size_t>(d)];
                }
                norm2 = 0.0;
                for (int d = 0; d < dim; ++d) {
                    v[static_cast<std::size_t>(d)] -=
                        proj * (*orthogonal_to)[static_cast<std::size_t>(d)];
                    norm2 += v[static_cast<std::size_t>(d)] * v[static_cast<std::size_t>(d)];
                }
            }
            if (norm2 > 1e-12) {
                double inv = 1.0 / std::sqrt(norm2);
                for (double& x : v) {
                    x *= inv;
                }
                return v;
            }
        }
        // No orthogonal complement exists (dim 1); the zero vector makes
        // every fan direction collinear and the separation check reject.
        std::fill(v.begin(), v.end(), 0.0);
        return v;
    };

    std::vector<std::vector<double>> centers;
    for (int attempt = 0; attempt < 32 && centers.empty(); ++attempt) {
        std::vector<double> plane_u = draw_unit(nullptr);
        std::vector<double> plane_w = draw_unit(&plane_u);
        std::vector<std::vector<double>> candidate;
        candidate.reserve(static_cast<std::size_t>(num_classes));
        for (int p = 0; p < pairs; ++p) {
            double jitter = dir_rng.next_uniform(-2.0, 2.0) * pi / 180.0;
            double angle = pi * static_cast<double>(p) / static_cast<double>(pairs) + jitter;
            std::vector<double> low(static_cast<std::size_t>(dim));
            std::vector<double> high(static_cast<std::size_t>(dim));
            for (int d = 0; d < dim; ++d) {
                double v = std::cos(angle) * plane_u[static_cast<std::size_t>(d)] +
                           std::sin(angle) * plane_w[static_cast<std::size_t>(d)];
                low[static_cast<std::size_t>(d)] = anchor - offset * v;
                high[static_cast<std::size_t>(d)] = anchor + offset * v;
            }
            candidate.push_back(std::move(low));
            if (2 * p + 1 < num_classes) {
                candidate.push_back(std::move(high));
            }
        }
        bool separated = true;
        for (std::size_t i = 0; i < candidate.size() && separated; ++i) {
            for (std::size_t j = i + 1; j < candidate.size() && separated; ++j) {
                double dist2 = 0.0;
                for (int d = 0; d < dim; ++d) {
                    double diff = candidate[i][static_cast<std::size_t>(d)] -
                                  candidate[j][static_cast<std::size_t>(d)];
                    dist2 += diff * diff;
                }
                separated = dist2 >= min_gap * min_gap;
            }
        }
        if (separated) {
            centers = std::move(candidate);
        }
    }
    if (centers.empty()) {
        throw ContractError("synthetic_digits: could not place class centers at least "
                            "two sigma apart; reduce num_classes or increase dim");
    }

    SplitMix64 noise_rng(derive_seed(seed, {2}));
    LabeledDataset ds;
    ds.num_classes = num_classes;
    auto n = static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(per_class);
    ds.inputs = Matrix(n, static_cast<std::size_t>(dim));
    ds.labels.resize(n);
    std::size_t row = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < per_class; ++i, ++row) {
            double* out = ds.inputs.row(row);
            for (int d = 0; d < dim; ++d) {
                double v = centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] +
                           sigma * noise_rng.next_gaussian();
                out[d] = std::clamp(v, 0.0, 1.0);
            }
            ds.labels[row] = c;
        }
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> holdout_split(const LabeledDataset& dataset,
                                                        int test_per_class) {
    if (test_per_class <= 0) {
        throw ContractError("holdout_split: test_per_class must be positive");
    }
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.num_classes));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
    }
    std::vector<char> is_test(dataset.size(), 0);
    for (const auto& indices : by_class) {
        if (static_cast<int>(indices.size()) <= test_per_class) {
            throw ContractError("holdout_split: a class has too few samples for the holdout");
        }
        for (std::size_t k = indices.size() - static_cast<std::size_t>(test_per_class);
             k < indices.size(); ++k) {
            is_test[indices[k]] = 1;
        }
    }
    auto gather = [&](bool want_test) {
        LabeledDataset out;
        out.num_classes = dataset.num_classes;
        std::size_t count = 0;
        for (char t : is_test) {
            count += (t == 1) == want_test ? 1 : 0;
        }
        out.inputs = Matrix(count, dataset.dim());
        out.labels.resize(count);
        std::size_t row = 0;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if ((is_test[i] == 1) == want_test) {
                std::copy_n(dataset.inputs.row(i), dataset.dim(), out.inputs.row(row));
                out.labels[row] = dataset.labels[i];
                ++row;
            }
        }
        return out;
    };
    return {gather(false), gather(true)};
}

LabeledDataset filter_classes(const LabeledDataset& dataset, int first_class, int count) {
    LabeledDataset out;
    out.num_classes = dataset.num_classes;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.labels[i] >= first_class && dataset.labels[i] < first_class + count) {
            keep.push_back(i);
        }
    }
    out.inputs = Matrix(keep.size(), dataset.dim());
    out.labels.resize(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        std::copy_n(dataset.inputs.row(keep[r]), dataset.dim(), out.inputs.row(r));
        out.labels[r] = dataset.labels[keep[r]];
    }
    return out;
}

std::vector<TaskSpec> split_tasks(const LabeledDataset& train, const LabeledDataset& test,
                                  int classes_per_task) {
    if (train.num_classes != test.num_classes) {
        throw ContractError("split_tasks: train and test disagree on num_classes");
    }
    if (classes_per_task <= 0 || train.num_classes % classes_per_task != 0) {
        throw ContractError("split_tasks: num_classes must be divisible by classes_per_task");
    }
    int num_tasks = train.num_classes / classes_per_task;
    std::vector<TaskSpec> tasks;
    tasks.reserve(static_cast<std::size_t>(num_tasks));
    for (int t = 0; t < num_tasks; ++t) {
        TaskSpec task;
        task.task_id = t;
        int first = t * classes_per_task;
        for (int c = first; c < first + classes_per_task; ++c) {
            task.active_classes.push_back(c);
        }
        task.train = filter_classes(train, first, classes_per_task);
        task.test = filter_classes(test, first, classes_per_task);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

}  // namespace kcl

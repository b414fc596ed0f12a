#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "kcl/checkpoint.hpp"
#include "kcl/errors.hpp"
#include "kcl/harness.hpp"
#include "kcl/report.hpp"

namespace fs = std::filesystem;

namespace {

struct CliOptions {
    kcl::TrainConfig config;
    kcl::DatasetConfig dataset;
    std::string dataset_name = "synthetic";
    std::string optimizer_name = "kalman";
    std::string uncertainty_name = "abs";
    std::string hidden = "64,64";
    std::string out_dir;
    bool force = false;
    std::string config_path;

    std::string checkpoint_path;  // resume, eval
    std::string report_a;         // compare
    std::string report_b;
    std::string alphas = "0.1,0.3,0.5,0.7,0.9";  // sweep
    int jobs = 1;
};

std::string default_out_dir() {
    const char* env = std::getenv("KCL_OUT_DIR");
    return env != nullptr && *env != '\0' ? env : "out";
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(std::stoi(item));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(std::stod(item));
    }
    return out;
}

/// Shared flags for commands that launch training runs.
void add_train_options(CLI::App* cmd, CliOptions& opts) {
    cmd->option_defaults()->always_capture_default();
    cmd->add_option("--config", opts.config_path,
                    "key=value config file, one per line, '#' comments; "
                    "explicit flags override file values")
        ->check(CLI::ExistingFile);
    cmd->add_option("--dataset", opts.dataset_name, "data source")
        ->check(CLI::IsMember({"synthetic", "idx"}));
    cmd->add_option("--num-classes", opts.dataset.num_classes, "synthetic: class count")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--train-per-class", opts.dataset.train_per_class,
                    "synthetic: training samples per class")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--test-per-class", opts.dataset.test_per_class,
                    "synthetic: held-out samples per class")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--dim", opts.dataset.dim, "synthetic: input dimension")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--classes-per-task", opts.dataset.classes_per_task,
                    "consecutive classes per task")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--train-images", opts.dataset.train_images, "idx: training images file");
    cmd->add_option("--train-labels", opts.dataset.train_labels, "idx: training labels file");
    cmd->add_option("--test-images", opts.dataset.test_images, "idx: test images file");
    cmd->add_option("--test-labels", opts.dataset.test_labels, "idx: test labels file");

    cmd->add_option("--learning-rate", opts.config.learning_rate, "SGD step size")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", opts.config.batch_size, "mini-batch size")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", opts.config.epochs_per_task, "epochs per task")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--alpha", opts.config.alpha,
                    "importance threshold for long-term memory, in (0,1]")
        ->check(CLI::Range(std::nextafter(0.0, 1.0), 1.0));
    cmd->add_option("--xi", opts.config.xi, "gain denominator guard, > 0")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", opts.config.seed, "base seed for data, init and shuffles");
    cmd->add_option("--optimizer", opts.optimizer_name, "update rule")
        ->check(CLI::IsMember({"kalman", "sgd"}));
    cmd->add_option("--uncertainty", opts.uncertainty_name,
                    "observation uncertainty measure from gradients")
        ->check(CLI::IsMember({"abs", "sq"}));
    cmd->add_option("--fisher-batch", opts.config.fisher_batch_size,
                    "batch size for the Fisher estimate")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--hidden", opts.hidden, "hidden layer widths, comma separated");
    cmd->add_option("--out", opts.out_dir, "output directory (env KCL_OUT_DIR overrides "
                                           "the built-in default)");
    cmd->add_flag("--force", opts.force, "overwrite existing reports in the output directory");
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw kcl::ContractError("config: key '" + key + "' needs an integer, got '" + value +
                                 "'");
    }
}

double parse_num(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw kcl::ContractError("config: key '" + key + "' needs a number, got '" + value +
                                 "'");
    }
}

/// Applies one config-file entry. Keys match the long flag names; the file
/// covers the experiment definition only, not run orchestration (--out,
/// --force, --alphas, --jobs stay command-line only).
void apply_config_entry(CliOptions& opts, const std::string& key, const std::string& value) {
    if (key == "dataset") {
        opts.dataset_name = value;
    } else if (key == "num-classes") {
        opts.dataset.num_classes = parse_int(key, value);
    } else if (key == "train-per-class") {
        opts.dataset.train_per_class = parse_int(key, value);
    } else if (key == "test-per-class") {
        opts.dataset.test_per_class = parse_int(key, value);
    } else if (key == "dim") {
        opts.dataset.dim = parse_int(key, value);
    } else if (key == "classes-per-task") {
        opts.dataset.classes_per_task = parse_int(key, value);
    } else if (key == "train-images") {
        opts.dataset.train_images = value;
    } else if (key == "train-labels") {
        opts.dataset.train_labels = value;
    } else if (key == "test-images") {
        opts.dataset.test_images = value;
    } else if (key == "test-labels") {
        opts.dataset.test_labels = value;
    } else if (key == "learning-rate") {
        opts.config.learning_rate = parse_num(key, value);
    } else if (key == "batch-size") {
        opts.config.batch_size = parse_int(key, value);
    } else if (key == "epochs") {
        opts.config.epochs_per_task = parse_int(key, value);
    } else if (key == "alpha") {
        opts.config.alpha = parse_num(key, value);
    } else if (key == "xi") {
        opts.config.xi = parse_num(key, value);
    } else if (key == "seed") {
        try {
            opts.config.seed = std::stoull(value);
        } catch (const std::exception&) {
            throw kcl::ContractError("config: key 'seed' needs an unsigned integer, got '" +
                                     value + "'");
        }
    } else if (key == "optimizer") {
        opts.optimizer_name = value;
    } else if (key == "uncertainty") {
        opts.uncertainty_name = value;
    } else if (key == "fisher-batch") {
        opts.config.fisher_batch_size = parse_int(key, value);
    } else if (key == "hidden") {
        opts.hidden = value;
    } else {
        throw kcl::ContractError("config: unknown key '" + key + "'");
    }
}

std::string trimmed(const std::string& text) {
    std::size_t first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    std::size_t last = text.find_last_not_of(" \t\r");
    return text.substr(first, last - first + 1);
}

/// Loads a flat key=value config file into opts. Values for flags the user
/// passed explicitly are skipped: the command line always wins.
void apply_config_file(const CLI::App* cmd, CliOptions& opts) {
    std::ifstream in(opts.config_path);
    if (!in) {
        throw kcl::ContractError("config: cannot open " + opts.config_path);
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string entry = trimmed(line);
        if (entry.empty() || entry.front() == '#') {
            continue;
        }
        std::size_t eq = entry.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw kcl::ContractError("config: line " + std::to_string(line_no) +
                                     " is not key=value");
        }
        std::string key = trimmed(entry.substr(0, eq));
        std::string value = trimmed(entry.substr(eq + 1));
        bool overridden = false;
        try {
            overridden = cmd->count("--" + key) > 0;
        } catch (const CLI::Error&) {
            overridden = false;  // unknown keys fail in apply_config_entry
        }
        if (!overridden) {
            apply_config_entry(opts, key, value);
        }
    }
}

/// Applies the string-typed flags onto the structured config. Throws
/// ContractError on bad values.
void finalize_options(CliOptions& opts) {
    if (opts.dataset_name == "synthetic") {
        opts.dataset.kind = kcl::DatasetConfig::Kind::kSynthetic;
    } else if (opts.dataset_name == "idx") {
        opts.dataset.kind = kcl::DatasetConfig::Kind::kIdx;
    } else {
        throw kcl::ContractError("unknown dataset '" + opts.dataset_name +
                                 "' (expected synthetic or idx)");
    }
    if (opts.dataset.num_classes < 1 || opts.dataset.train_per_class < 1 ||
        opts.dataset.test_per_class < 1 || opts.dataset.dim < 1 ||
        opts.dataset.classes_per_task < 1) {
        throw kcl::ContractError("dataset sizes must all be positive");
    }
    opts.config.optimizer = kcl::optimizer_from_name(opts.optimizer_name);
    opts.config.uncertainty_measure = kcl::uncertainty_from_name(opts.uncertainty_name);
    try {
        opts.config.hidden_dims = parse_int_list(opts.hidden);
    } catch (const std::exception&) {
        throw kcl::ContractError("--hidden must be comma-separated integers, got '" +
                                 opts.hidden + "'");
    }
    if (opts.out_dir.empty()) {
        opts.out_dir = default_out_dir();
    }
    opts.config.validate();
}

/// idx mode needs all four paths; that is a usage problem, not a runtime one.
bool idx_paths_ok(const CliOptions& opts) {
    if (opts.dataset.kind != kcl::DatasetConfig::Kind::kIdx) {
        return true;
    }
    return !opts.dataset.train_images.empty() && !opts.dataset.train_labels.empty() &&
           !opts.dataset.test_images.empty() && !opts.dataset.test_labels.empty();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw kcl::FormatError("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw kcl::FormatError("write failed for " + path.string());
    }
}

void refuse_existing_reports(const fs::path& dir, bool force,
                             std::initializer_list<const char*> names) {
    if (force) {
        return;
    }
    for (const char* name : names) {
        if (fs::exists(dir / name)) {
            throw kcl::ContractError((dir / name).string() +
                                     " already exists; pass --force to overwrite");
        }
    }
}

/// Fills in the idx dataset echo (dims, class count) after loading.
void stamp_dataset_shape(kcl::DatasetConfig& dataset, const std::vector<kcl::TaskSpec>& tasks) {
    if (dataset.kind == kcl::DatasetConfig::Kind::kIdx && !tasks.empty()) {
        dataset.dim = static_cast<int>(tasks.front().train.dim());
        dataset.num_classes = tasks.front().train.num_classes;
        dataset.train_per_class = 0;
        dataset.test_per_class = 0;
    }
}

int run_training(const CliOptions& opts, const std::vector<kcl::TaskSpec>& tasks,
                 kcl::DatasetConfig dataset, int completed, kcl::NetworkParams params,
                 kcl::KalmanState state, kcl::AccuracyMatrix matrix) {
    fs::path dir(opts.out_dir);
    fs::create_directories(dir);
    refuse_existing_reports(dir, opts.force, {"report.json", "matrix.csv"});

    auto checkpoint_writer = [&](int stage, const kcl::NetworkParams& p,
                                 const kcl::KalmanState& s, const kcl::AccuracyMatrix& m) {
        kcl::Checkpoint ckpt = kcl::make_checkpoint(p, s, stage, opts.config, dataset, m);
        kcl::save_checkpoint(ckpt, (dir / "checkpoint.bin").string());
    };

    kcl::SequenceResult result =
        completed == 0
            ? kcl::run_sequence(tasks, opts.config, checkpoint_writer)
            : kcl::resume_sequence(tasks, opts.config, std::move(params), std::move(state),
                                   std::move(matrix), completed, checkpoint_writer);
    result.report.dataset = dataset;

    write_text(dir / "report.json", kcl::report_json(result.report));
    write_text(dir / "matrix.csv", kcl::matrix_csv(result.report.matrix));
    std::cout << "final average accuracy " << kcl::format_double(result.report.final_average)
              << " over " << result.report.matrix.num_stages() << " tasks in "
              << result.report.wall_seconds << "s\n"
              << "wrote " << (dir / "report.json").string() << ", matrix.csv, checkpoint.bin\n";
    return 0;
}

int cmd_train(const CliOptions& opts) {
    std::vector<kcl::TaskSpec> tasks = kcl::build_tasks(opts.dataset, opts.config);
    kcl::DatasetConfig dataset = opts.dataset;
    stamp_dataset_shape(dataset, tasks);
    return run_training(opts, tasks, dataset, 0, {}, {}, {});
}

int cmd_resume(const CliOptions& opts) {
    kcl::Checkpoint ckpt = kcl::load_checkpoint(opts.checkpoint_path);
    CliOptions run = opts;
    run.config = ckpt.config;
    run.dataset = ckpt.dataset;
    std::vector<kcl::TaskSpec> tasks = kcl::build_tasks(ckpt.dataset, ckpt.config);
    return run_training(run, tasks, ckpt.dataset, static_cast<int>(ckpt.tasks_completed),
                        kcl::checkpoint_params(ckpt), ckpt.state, kcl::checkpoint_matrix(ckpt));
}

int cmd_eval(const CliOptions& opts) {
    kcl::Checkpoint ckpt = kcl::load_checkpoint(opts.checkpoint_path);
    std::vector<kcl::TaskSpec> tasks = kcl::build_tasks(ckpt.dataset, ckpt.config);
    kcl::NetworkParams params = kcl::checkpoint_params(ckpt);
    int seen = static_cast<int>(ckpt.tasks_completed);
    if (seen == 0) {
        throw kcl::ContractError("eval: checkpoint has no completed tasks");
    }
    std::vector<double> accuracies = kcl::evaluate_tasks(params, tasks, seen);
    double mean = 0.0;
    for (double a : accuracies) {
        mean += a;
    }
    mean /= static_cast<double>(accuracies.size());
    std::cout << "{\n  \"task_accuracies\": [";
    for (std::size_t i = 0; i < accuracies.size(); ++i) {
        std::cout << (i > 0 ? ", " : "") << kcl::format_double(accuracies[i]);
    }
    std::cout << "],\n  \"average_accuracy\": " << kcl::format_double(mean) << "\n}\n";
    return 0;
}

int cmd_compare(const CliOptions& opts) {
    std::ifstream fa(opts.report_a), fb(opts.report_b);
    if (!fa) {
        throw kcl::FormatError("compare: cannot open " + opts.report_a);
    }
    if (!fb) {
        throw kcl::FormatError("compare: cannot open " + opts.report_b);
    }
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    kcl::RunReport a = kcl::report_from_json(sa.str());
    kcl::RunReport b = kcl::report_from_json(sb.str());
    std::string summary = kcl::comparison_json(kcl::compare_runs(a, b));
    if (!opts.out_dir.empty()) {
        fs::path dir(opts.out_dir);
        fs::create_directories(dir);
        refuse_existing_reports(dir, opts.force, {"compare.json"});
        write_text(dir / "compare.json", summary);
    }
    std::cout << summary;
    return 0;
}

int cmd_sweep(const CliOptions& opts, const std::vector<double>& alphas) {
    fs::path dir(opts.out_dir);
    fs::create_directories(dir);
    refuse_existing_reports(dir, opts.force, {"summary.csv"});

    std::vector<kcl::TaskSpec> tasks = kcl::build_tasks(opts.dataset, opts.config);
    kcl::DatasetConfig dataset = opts.dataset;
    stamp_dataset_shape(dataset, tasks);

    std::vector<double> finals(alphas.size(), 0.0);
    std::vector<std::string> failures(alphas.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        for (std::size_t i = cursor.fetch_add(1); i < alphas.size(); i = cursor.fetch_add(1)) {
            try {
                CliOptions run = opts;
                run.config.alpha = alphas[i];
                run.out_dir = (dir / ("alpha_" + kcl::format_double(alphas[i]))).string();
                run_training(run, tasks, dataset, 0, {}, {}, {});
                std::string text;
                {
                    std::ifstream in(fs::path(run.out_dir) / "report.json");
                    std::stringstream ss;
                    ss << in.rdbuf();
                    text = ss.str();
                }
                finals[i] = kcl::report_from_json(text).final_average;
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    int jobs = std::max(1, std::min<int>(opts.jobs, static_cast<int>(alphas.size())));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) {
        pool.emplace_back(worker);
    }
    worker();
    for (std::thread& t : pool) {
        t.join();
    }
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!failures[i].empty()) {
            throw kcl::ContractError("sweep: run for alpha " + kcl::format_double(alphas[i]) +
                                     " failed: " + failures[i]);
        }
    }
    std::vector<std::pair<double, double>> rows;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        rows.emplace_back(alphas[i], finals[i]);
    }
    write_text(dir / "summary.csv", kcl::sweep_summary_csv(rows));
    std::cout << "wrote " << (dir / "summary.csv").string() << " (" << alphas.size()
              << " runs)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequential-task training with a Kalman-filtered optimizer"};
    app.require_subcommand(1);
    CliOptions opts;

    CLI::App* train = app.add_subcommand("train", "train a task sequence from scratch");
    add_train_options(train, opts);

    CLI::App* resume = app.add_subcommand("resume", "continue a run from a checkpoint");
    resume->option_defaults()->always_capture_default();
    resume->add_option("--checkpoint", opts.checkpoint_path, "checkpoint file")->required();
    resume->add_option("--out", opts.out_dir, "output directory");
    resume->add_flag("--force", opts.force, "overwrite existing reports");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on its seen tasks");
    eval->add_option("--checkpoint", opts.checkpoint_path, "checkpoint file")->required();

    CLI::App* compare = app.add_subcommand("compare", "delta between two run reports");
    compare->add_option("--a", opts.report_a, "first report.json")->required();
    compare->add_option("--b", opts.report_b, "second report.json (the baseline)")->required();
    compare->add_option("--out", opts.out_dir, "directory for compare.json (default: stdout only)");
    compare->add_flag("--force", opts.force, "overwrite an existing compare.json");

    CLI::App* sweep = app.add_subcommand("sweep", "one training run per alpha value");
    add_train_options(sweep, opts);
    sweep->add_option("--alphas", opts.alphas, "comma-separated alpha values, each in (0,1]")
        ->capture_default_str();
    sweep->add_option("--jobs", opts.jobs, "parallel runs")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed() || sweep->parsed()) {
            try {
                if (!opts.config_path.empty()) {
                    apply_config_file(train->parsed() ? train : sweep, opts);
                }
                finalize_options(opts);
            } catch (const kcl::ContractError& e) {
                std::cerr << "usage error: " << e.what() << "\n";
                return 2;
            }
            if (!idx_paths_ok(opts)) {
                std::cerr << "usage error: --dataset idx requires --train-images, "
                             "--train-labels, --test-images and --test-labels\n";
                return 2;
            }
        }
        if (train->parsed()) {
            return cmd_train(opts);
        }
        if (resume->parsed()) {
            if (opts.out_dir.empty()) {
                opts.out_dir = default_out_dir();
            }
            return cmd_resume(opts);
        }
        if (eval->parsed()) {
            return cmd_eval(opts);
        }
        if (compare->parsed()) {
            return cmd_compare(opts);
        }
        if (sweep->parsed()) {
            std::vector<double> alphas;
            try {
                alphas = parse_double_list(opts.alphas);
            } catch (const std::exception&) {
                std::cerr << "usage error: --alphas must be comma-separated numbers\n";
                return 2;
            }
            if (alphas.empty()) {
                std::cerr << "usage error: --alphas must not be empty\n";
                return 2;
            }
            for (double a : alphas) {
                if (!(a > 0.0 && a <= 1.0)) {
                    std::cerr << "usage error: every alpha must lie in (0,1]\n";
                    return 2;
                }
            }
            return cmd_sweep(opts, alphas);
        }
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

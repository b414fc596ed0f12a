#include "kcl/report.hpp"

#include <charconv>
#include <sstream>

#include <json.hpp>

#include "kcl/errors.hpp"

namespace kcl {

using nlohmann::json;

const char* optimizer_name(OptimizerKind kind) {
    return kind == OptimizerKind::kKalman ? "kalman" : "sgd";
}

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "kalman") {
        return OptimizerKind::kKalman;
    }
    if (name == "sgd") {
        return OptimizerKind::kSgd;
    }
    throw ContractError("unknown optimizer '" + name + "' (expected kalman or sgd)");
}

const char* uncertainty_name(UncertaintyMeasure measure) {
    return measure == UncertaintyMeasure::kAbs ? "abs" : "sq";
}

UncertaintyMeasure uncertainty_from_name(const std::string& name) {
    if (name == "abs") {
        return UncertaintyMeasure::kAbs;
    }
    if (name == "sq") {
        return UncertaintyMeasure::kSquared;
    }
    throw ContractError("unknown uncertainty measure '" + name + "' (expected abs or sq)");
}

std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

namespace {

json config_to_json(const TrainConfig& config) {
    return json{{"learning_rate", config.learning_rate},
                {"batch_size", config.batch_size},
                {"epochs_per_task", config.epochs_per_task},
                {"alpha", config.alpha},
                {"xi", config.xi},
                {"seed", config.seed},
                {"optimizer", optimizer_name(config.optimizer)},
                {"uncertainty_measure", uncertainty_name(config.uncertainty_measure)},
                {"fisher_batch_size", config.fisher_batch_size},
                {"hidden_dims", config.hidden_dims}};
}

json dataset_to_json(const DatasetConfig& dataset) {
    json out{{"kind", dataset.kind == DatasetConfig::Kind::kSynthetic ? "synthetic" : "idx"},
             {"num_classes", dataset.num_classes},
             {"classes_per_task", dataset.classes_per_task}};
    if (dataset.kind == DatasetConfig::Kind::kSynthetic) {
        out["train_per_class"] = dataset.train_per_class;
        out["test_per_class"] = dataset.test_per_class;
        out["dim"] = dataset.dim;
    } else {
        out["train_images"] = dataset.train_images;
        out["train_labels"] = dataset.train_labels;
        out["test_images"] = dataset.test_images;
        out["test_labels"] = dataset.test_labels;
    }
    return out;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig config;
    config.learning_rate = j.at("learning_rate").get<double>();
    config.batch_size = j.at("batch_size").get<int>();
    config.epochs_per_task = j.at("epochs_per_task").get<int>();
    config.alpha = j.at("alpha").get<double>();
    config.xi = j.at("xi").get<double>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.optimizer = optimizer_from_name(j.at("optimizer").get<std::string>());
    config.uncertainty_measure =
        uncertainty_from_name(j.at("uncertainty_measure").get<std::string>());
    config.fisher_batch_size = j.at("fisher_batch_size").get<int>();
    config.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
    return config;
}

DatasetConfig dataset_from_json(const json& j) {
    DatasetConfig dataset;
    std::string kind = j.at("kind").get<std::string>();
    dataset.kind =
        kind == "synthetic" ? DatasetConfig::Kind::kSynthetic : DatasetConfig::Kind::kIdx;
    dataset.num_classes = j.at("num_classes").get<int>();
    dataset.classes_per_task = j.at("classes_per_task").get<int>();
    if (dataset.kind == DatasetConfig::Kind::kSynthetic) {
        dataset.train_per_class = j.at("train_per_class").get<int>();
        dataset.test_per_class = j.at("test_per_class").get<int>();
        dataset.dim = j.at("dim").get<int>();
    } else {
        dataset.train_images = j.at("train_images").get<std::string>();
        dataset.train_labels = j.at("train_labels").get<std::string>();
        dataset.test_images = j.at("test_images").get<std::string>();
        dataset.test_labels = j.at("test_labels").get<std::string>();
    }
    return dataset;
}

}  // namespace

std::string report_json(const RunReport& report) {
    json stages = json::array();
    for (int s = 1; s <= report.matrix.num_stages(); ++s) {
        stages.push_back(
            json{{"stage", s},
                 {"task_accuracies", report.matrix.rows[static_cast<std::size_t>(s - 1)]},
                 {"average_accuracy", report.average_curve[static_cast<std::size_t>(s - 1)]}});
    }
    json out{{"schema_version", 1},
             {"config", config_to_json(report.config)},
             {"dataset", dataset_to_json(report.dataset)},
             {"layer_dims", report.layer_dims},
             {"stages", stages},
             {"final_task_accuracies", report.final_accuracies},
             {"final_average_accuracy", report.final_average}};
    return out.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw FormatError("report: not valid JSON");
    }
    try {
        if (j.at("schema_version").get<int>() != 1) {
            throw VersionError("report: unsupported schema_version");
        }
        RunReport report;
        report.config = config_from_json(j.at("config"));
        report.dataset = dataset_from_json(j.at("dataset"));
        report.layer_dims = j.at("layer_dims").get<std::vector<int>>();
        for (const json& stage : j.at("stages")) {
            report.matrix.add_stage(stage.at("task_accuracies").get<std::vector<double>>());
            report.average_curve.push_back(stage.at("average_accuracy").get<double>());
        }
        report.final_accuracies = j.at("final_task_accuracies").get<std::vector<double>>();
        report.final_average = j.at("final_average_accuracy").get<double>();
        return report;
    } catch (const json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
}

std::string matrix_csv(const AccuracyMatrix& matrix) {
    std::ostringstream out;
    out << "stage,task,accuracy\n";
    for (int s = 1; s <= matrix.num_stages(); ++s) {
        for (int t = 1; t <= s; ++t) {
            out << s << ',' << t << ',' << format_double(matrix.at(s, t)) << '\n';
        }
    }
    return out.str();
}

std::string comparison_json(const ComparisonSummary& summary) {
    json out{{"per_stage_average_delta", summary.per_stage_average_delta},
             {"final_per_task_delta", summary.final_per_task_delta},
             {"final_average_delta", summary.final_average_delta}};
    return out.dump(2) + "\n";
}

std::string sweep_summary_csv(const std::vector<std::pair<double, double>>& rows) {
    std::ostringstream out;
    out << "alpha,final_avg_acc\n";
    for (const auto& [alpha, acc] : rows) {
        out << format_double(alpha) << ',' << format_double(acc) << '\n';
    }
    return out.str();
}

}  // namespace kcl

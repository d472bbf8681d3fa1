#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapfill/errors.hpp"
#include "gapfill/imputer.hpp"

namespace gapfill {

/// Raised when a model document parses as JSON but has the wrong shape.
class SchemaError : public DataError {
public:
    using DataError::DataError;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw SchemaError(path + "/" + key + ": required field missing");
    return obj.at(key);
}

inline double require_number(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path + ": expected a number");
    return v.get<double>();
}

inline long long require_integer(const nlohmann::json& v, const std::string& path, long long lo) {
    if (!v.is_number_integer()) throw SchemaError(path + ": expected an integer");
    const auto x = v.get<long long>();
    if (x < lo) throw SchemaError(path + ": must be >= " + std::to_string(lo));
    return x;
}

inline std::vector<double> number_array(const nlohmann::json& v, const std::string& path) {
    if (!v.is_array()) throw SchemaError(path + ": expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(require_number(v[i], path + "/" + std::to_string(i)));
    return out;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& v, const std::string& path, Eigen::Index rows,
                                        Eigen::Index cols) {
    if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != rows)
        throw SchemaError(path + ": expected " + std::to_string(rows) + " rows");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto row = number_array(v[static_cast<std::size_t>(r)], path + "/" + std::to_string(r));
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw SchemaError(path + "/" + std::to_string(r) + ": expected " + std::to_string(cols) + " columns");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

}  // namespace detail

inline nlohmann::json architecture_to_json(const MlpArchitecture& a) {
    return {{"batch_size", a.batch_size}, {"epochs", a.epochs},         {"layers", a.layers},
            {"nodes_per_layer", a.nodes_per_layer}, {"dropout_rate", a.dropout_rate}, {"lag", a.lag}};
}

inline MlpArchitecture architecture_from_json(const nlohmann::json& j, const std::string& path = "/architecture") {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    MlpArchitecture a;
    a.batch_size = static_cast<int>(detail::require_integer(detail::require(j, "batch_size", path), path + "/batch_size", 1));
    a.epochs = static_cast<int>(detail::require_integer(detail::require(j, "epochs", path), path + "/epochs", 1));
    a.layers = static_cast<int>(detail::require_integer(detail::require(j, "layers", path), path + "/layers", 1));
    a.nodes_per_layer = static_cast<int>(
        detail::require_integer(detail::require(j, "nodes_per_layer", path), path + "/nodes_per_layer", 1));
    a.dropout_rate = detail::require_number(detail::require(j, "dropout_rate", path), path + "/dropout_rate");
    if (a.dropout_rate < 0.0 || a.dropout_rate >= 1.0) throw SchemaError(path + "/dropout_rate: must be in [0, 1)");
    a.lag = static_cast<int>(detail::require_integer(detail::require(j, "lag", path), path + "/lag", 1));
    return a;
}

/// Weight matrices are stored row-major as nested arrays (one inner array per output unit).
inline nlohmann::json model_to_json(const ImputationModel& model) {
    nlohmann::json doc;
    doc["format"] = "gapfill-model";
    doc["version"] = 1;
    doc["architecture"] = architecture_to_json(model.architecture);
    doc["input_width"] = model.input_width();
    doc["target_index"] = model.scaler.target_index;
    doc["scaler"] = {{"min", model.scaler.min}, {"max", model.scaler.max}};
    auto members = nlohmann::json::array();
    for (const auto& m : model.members) {
        auto layers = nlohmann::json::array();
        for (const auto& layer : m.layers) {
            layers.push_back({{"weights", detail::matrix_to_json(layer.weights)},
                              {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
        }
        members.push_back({{"seed", m.seed}, {"layers", std::move(layers)}});
    }
    doc["members"] = std::move(members);
    return doc;
}

inline ImputationModel model_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw SchemaError(": model document must be an object");
    const auto& fmt = detail::require(doc, "format", "");
    if (fmt != "gapfill-model") throw SchemaError("/format: expected \"gapfill-model\"");
    ImputationModel model;
    model.architecture = architecture_from_json(detail::require(doc, "architecture", ""));
    const auto width = static_cast<std::size_t>(detail::require_integer(detail::require(doc, "input_width", ""), "/input_width", 1));
    const auto& scaler = detail::require(doc, "scaler", "");
    model.scaler.min = detail::number_array(detail::require(scaler, "min", "/scaler"), "/scaler/min");
    model.scaler.max = detail::number_array(detail::require(scaler, "max", "/scaler"), "/scaler/max");
    if (model.scaler.min.size() != model.scaler.max.size() || model.scaler.min.empty())
        throw SchemaError("/scaler: min and max must be non-empty and of equal length");
    model.scaler.target_index = static_cast<std::size_t>(
        detail::require_integer(detail::require(doc, "target_index", ""), "/target_index", 0));
    if (model.scaler.target_index >= model.scaler.min.size()) throw SchemaError("/target_index: out of range");
    const std::size_t lag = static_cast<std::size_t>(model.architecture.lag);
    if (width != (lag + 1) * model.scaler.min.size())
        throw SchemaError("/input_width: must equal (lag + 1) * number of scaled columns");

    const auto& members = detail::require(doc, "members", "");
    if (!members.is_array() || members.empty()) throw SchemaError("/members: expected a non-empty array");
    const auto hidden = static_cast<std::size_t>(model.architecture.layers);
    const Eigen::Index nodes = model.architecture.nodes_per_layer;
    for (std::size_t i = 0; i < members.size(); ++i) {
        const std::string mp = "/members/" + std::to_string(i);
        MlpModel m;
        m.architecture = model.architecture;
        m.input_width = width;
        const auto& seed = detail::require(members[i], "seed", mp);
        if (!seed.is_number_unsigned() && !seed.is_number_integer()) throw SchemaError(mp + "/seed: expected an integer");
        m.seed = seed.get<std::uint64_t>();
        const auto& layers = detail::require(members[i], "layers", mp);
        if (!layers.is_array() || layers.size() != hidden + 1)
            throw SchemaError(mp + "/layers: expected " + std::to_string(hidden + 1) + " layers");
        Eigen::Index in = static_cast<Eigen::Index>(width);
        for (std::size_t l = 0; l <= hidden; ++l) {
            const std::string lp = mp + "/layers/" + std::to_string(l);
            const Eigen::Index out = l < hidden ? nodes : 1;
            DenseLayer layer;
            layer.weights = detail::matrix_from_json(detail::require(layers[l], "weights", lp), lp + "/weights", out, in);
            const auto bias = detail::number_array(detail::require(layers[l], "bias", lp), lp + "/bias");
            if (static_cast<Eigen::Index>(bias.size()) != out)
                throw SchemaError(lp + "/bias: expected " + std::to_string(out) + " entries");
            layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), out);
            m.layers.push_back(std::move(layer));
            in = out;
        }
        model.members.push_back(std::move(m));
    }
    return model;
}

inline void save_model(const ImputationModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write model to '" + path + "'");
    out << model_to_json(model).dump(1) << '\n';
}

inline ImputationModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("model '" + path + "' is not valid JSON: " + e.what());
    }
    return model_from_json(doc);
}

}  // namespace gapfill

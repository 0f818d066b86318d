#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "madcn/errors.hpp"

namespace madcn {

struct DenseField {
    std::string name;
    std::string unit;
};

struct SparseField {
    std::string name;
    std::size_t cardinality = 1;
};

// Declares the panel layout: continuous fields, discrete fields with their
// cardinalities, regression targets, and the (id, year) key columns.
struct FeatureSchema {
    std::vector<DenseField> dense_fields;
    std::vector<SparseField> sparse_fields;
    std::vector<std::string> target_fields;
    std::string id_field;
    std::string time_field;

    std::size_t dense_count() const { return dense_fields.size(); }
    std::size_t sparse_count() const { return sparse_fields.size(); }
    std::size_t target_count() const { return target_fields.size(); }

    void validate() const {
        if (target_fields.empty()) {
            throw schema_error("schema needs at least one target field");
        }
        if (id_field.empty() || time_field.empty()) {
            throw schema_error("schema needs id_field and time_field");
        }
        std::unordered_set<std::string> seen;
        auto add = [&](const std::string& n) {
            if (!seen.insert(n).second) {
                throw schema_error("duplicate field name in schema: " + n);
            }
        };
        for (const auto& f : dense_fields) add(f.name);
        for (const auto& f : sparse_fields) {
            add(f.name);
            if (f.cardinality < 1) {
                throw schema_error("sparse field " + f.name + " has cardinality 0");
            }
        }
        for (const auto& t : target_fields) add(t);
    }

    bool operator==(const FeatureSchema&) const = default;
};

inline bool operator==(const DenseField& a, const DenseField& b) {
    return a.name == b.name && a.unit == b.unit;
}
inline bool operator==(const SparseField& a, const SparseField& b) {
    return a.name == b.name && a.cardinality == b.cardinality;
}

inline nlohmann::json schema_to_json(const FeatureSchema& s) {
    nlohmann::json j;
    j["dense_fields"] = nlohmann::json::array();
    for (const auto& f : s.dense_fields) {
        j["dense_fields"].push_back({{"name", f.name}, {"unit", f.unit}});
    }
    j["sparse_fields"] = nlohmann::json::array();
    for (const auto& f : s.sparse_fields) {
        j["sparse_fields"].push_back({{"name", f.name}, {"cardinality", f.cardinality}});
    }
    j["target_fields"] = s.target_fields;
    j["id_field"] = s.id_field;
    j["time_field"] = s.time_field;
    return j;
}

inline FeatureSchema schema_from_json(const nlohmann::json& j) {
    FeatureSchema s;
    try {
        for (const auto& f : j.at("dense_fields")) {
            s.dense_fields.push_back({f.at("name").get<std::string>(),
                                      f.value("unit", std::string{})});
        }
        for (const auto& f : j.at("sparse_fields")) {
            s.sparse_fields.push_back({f.at("name").get<std::string>(),
                                       f.at("cardinality").get<std::size_t>()});
        }
        s.target_fields = j.at("target_fields").get<std::vector<std::string>>();
        s.id_field = j.at("id_field").get<std::string>();
        s.time_field = j.at("time_field").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(std::string("malformed schema json: ") + e.what());
    }
    s.validate();
    return s;
}

inline FeatureSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error("schema file " + path + " is not valid json: " + e.what());
    }
    return schema_from_json(j);
}

} // namespace madcn

// Minimal JSON Schema checker covering the subset the shipped schemas use:
// type, properties, required, additionalProperties:false, items, enum,
// minimum, maximum.
#pragma once

#include <string>
#include <vector>

#include "refevo/core.hpp"

namespace refevo {

namespace detail {

inline bool schema_type_matches(const json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
    if (type == "number") return value.is_number();
    if (type == "null") return value.is_null();
    return false;
}

inline void schema_check(const json& value, const json& schema, const std::string& path,
                         std::vector<std::string>& errors) {
    if (schema.contains("type")) {
        const auto type = schema.at("type").get<std::string>();
        if (!schema_type_matches(value, type)) {
            errors.push_back(path + ": expected " + type);
            return;
        }
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const auto& candidate : schema.at("enum"))
            if (candidate == value) hit = true;
        if (!hit) errors.push_back(path + ": value not in enum");
    }
    if (value.is_number()) {
        if (schema.contains("minimum") && value.get<double>() < schema.at("minimum").get<double>())
            errors.push_back(path + ": below minimum");
        if (schema.contains("maximum") && value.get<double>() > schema.at("maximum").get<double>())
            errors.push_back(path + ": above maximum");
    }
    if (value.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema.at("required"))
                if (!value.contains(key.get<std::string>()))
                    errors.push_back(path + ": missing required '" + key.get<std::string>() + "'");
        const json props = schema.value("properties", json::object());
        const bool closed = schema.contains("additionalProperties") &&
                            schema.at("additionalProperties").is_boolean() &&
                            !schema.at("additionalProperties").get<bool>();
        for (const auto& [key, sub] : value.items()) {
            if (props.contains(key))
                schema_check(sub, props.at(key), path + "/" + key, errors);
            else if (closed)
                errors.push_back(path + ": unexpected property '" + key + "'");
        }
    }
    if (value.is_array() && schema.contains("items")) {
        int i = 0;
        for (const auto& item : value) {
            schema_check(item, schema.at("items"), path + "/" + std::to_string(i), errors);
            ++i;
        }
    }
}

}  // namespace detail

inline std::vector<std::string> validate_against_schema(const json& value, const json& schema) {
    std::vector<std::string> errors;
    detail::schema_check(value, schema, "#", errors);
    return errors;
}

}  // namespace refevo

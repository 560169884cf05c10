#pragma once

#include "mwpipe/error.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mwpipe {

enum class FieldType { Float, Int, Bool, String, FloatVec };

constexpr std::string_view to_string(FieldType t) noexcept {
    switch (t) {
    case FieldType::Float: return "float";
    case FieldType::Int: return "int";
    case FieldType::Bool: return "bool";
    case FieldType::String: return "string";
    case FieldType::FloatVec: return "float[]";
    }
    return "?";
}

inline FieldType parse_field_type(std::string_view s) {
    if (s == "float") return FieldType::Float;
    if (s == "int") return FieldType::Int;
    if (s == "bool") return FieldType::Bool;
    if (s == "string") return FieldType::String;
    if (s == "float[]") return FieldType::FloatVec;
    throw Error(ErrorCode::SchemaMismatch, "unknown field type '" + std::string(s) + "'");
}

struct FieldSpec {
    std::string name;
    FieldType type = FieldType::Float;
    bool nullable = false;

    bool operator==(const FieldSpec&) const = default;
};

/// Ordered field list; payload values are positional against it.
struct Schema {
    std::string id;
    std::vector<FieldSpec> fields;

    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view name) const noexcept {
        for (std::size_t i = 0; i < fields.size(); ++i)
            if (fields[i].name == name) return i;
        return std::nullopt;
    }

    bool operator==(const Schema&) const = default;
};

using SchemaPtr = std::shared_ptr<const Schema>;

/// monostate encodes an absent (null) value and is only legal in nullable fields.
/// Floats must be finite; absence is never encoded as NaN.
using Value = std::variant<std::monostate, double, std::int64_t, bool, std::string, std::vector<double>>;

[[nodiscard]] inline bool value_matches(const Value& v, const FieldSpec& f) noexcept {
    switch (v.index()) {
    case 0: return f.nullable;
    case 1: return f.type == FieldType::Float && std::isfinite(std::get<double>(v));
    case 2: return f.type == FieldType::Int;
    case 3: return f.type == FieldType::Bool;
    case 4: return f.type == FieldType::String;
    case 5:
        if (f.type != FieldType::FloatVec) return false;
        for (const double d : std::get<std::vector<double>>(v))
            if (!std::isfinite(d)) return false;
        return true;
    default: return false;
    }
}

/// Immutable once published; samples share it through shared_ptr<const Payload>.
class Payload {
public:
    Payload() = default;
    Payload(SchemaPtr schema, std::vector<Value> values) : schema_(std::move(schema)), values_(std::move(values)) {}

    [[nodiscard]] const SchemaPtr& schema() const noexcept { return schema_; }
    [[nodiscard]] const std::vector<Value>& values() const noexcept { return values_; }

    /// Throws SchemaMismatch if the values do not conform to the schema.
    void validate() const {
        if (!schema_) throw Error(ErrorCode::SchemaMismatch, "payload has no schema");
        if (values_.size() != schema_->fields.size())
            throw Error(ErrorCode::SchemaMismatch, "schema '" + schema_->id + "' expects " +
                                                       std::to_string(schema_->fields.size()) + " fields, got " +
                                                       std::to_string(values_.size()));
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (!value_matches(values_[i], schema_->fields[i]))
                throw Error(ErrorCode::SchemaMismatch,
                            "field '" + schema_->fields[i].name + "' of schema '" + schema_->id + "' has wrong type");
    }

    [[nodiscard]] const Value& at(std::string_view name) const {
        if (!schema_) throw Error(ErrorCode::SchemaMismatch, "payload has no schema");
        const auto idx = schema_->index_of(name);
        if (!idx) throw Error(ErrorCode::SchemaMismatch, "no field '" + std::string(name) + "'");
        return values_[*idx];
    }

    [[nodiscard]] double number(std::string_view name) const {
        const auto& v = at(name);
        if (const auto* d = std::get_if<double>(&v)) return *d;
        if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
        if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
        throw Error(ErrorCode::SchemaMismatch, "field '" + std::string(name) + "' is not numeric");
    }

    [[nodiscard]] std::optional<double> optional_number(std::string_view name) const {
        if (std::holds_alternative<std::monostate>(at(name))) return std::nullopt;
        return number(name);
    }

    [[nodiscard]] const std::string& text(std::string_view name) const {
        const auto* s = std::get_if<std::string>(&at(name));
        if (!s) throw Error(ErrorCode::SchemaMismatch, "field '" + std::string(name) + "' is not a string");
        return *s;
    }

    bool operator==(const Payload& o) const {
        return values_ == o.values_ && ((schema_ == o.schema_) || (schema_ && o.schema_ && *schema_ == *o.schema_));
    }

private:
    SchemaPtr schema_;
    std::vector<Value> values_;
};

[[nodiscard]] inline SchemaPtr make_schema(std::string id, std::vector<FieldSpec> fields) {
    return std::make_shared<const Schema>(Schema{std::move(id), std::move(fields)});
}

} // namespace mwpipe

// Strict JSON field access: every read is tied to a dotted path so that a
// bad or unknown field surfaces as a ConfigError naming exactly where.
#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "accelshape/model.hpp"

namespace accelshape::json_util {

using nlohmann::json;

inline std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
}

inline void reject_unknown(const json& j, const std::string& path,
                           std::initializer_list<std::string_view> known) {
    require_object(j, path);
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (auto k : known) ok = ok || k == key;
        if (!ok) throw ConfigError(join(path, key), "unknown key");
    }
}

inline const json& need(const json& j, const std::string& path, std::string_view key) {
    auto it = j.find(std::string(key));
    if (it == j.end()) throw ConfigError(join(path, key), "missing required field");
    return *it;
}

template <typename T>
T as(const json& v, const std::string& path) {
    try {
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path, std::string("wrong type: ") + e.what());
    }
}

template <typename T>
T get(const json& j, const std::string& path, std::string_view key) {
    return as<T>(need(j, path, key), join(path, key));
}

template <typename T>
T get_or(const json& j, const std::string& path, std::string_view key, T fallback) {
    auto it = j.find(std::string(key));
    if (it == j.end() || it->is_null()) return fallback;
    return as<T>(*it, join(path, key));
}

}  // namespace accelshape::json_util

#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <json.hpp>

#include "flatstab/errors.hpp"

namespace flatstab::jsonutil {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& origin, const std::string& path,
                              const std::string& message) {
    throw ConfigError(origin + ":" + (path.empty() ? "/" : path) + ": " + message);
}

// Parses a document, translating syntax errors to origin:line:col.
inline json parse_document(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t col = 1;
        const std::size_t stop = e.byte == 0 ? 0 : e.byte - 1;
        for (std::size_t i = 0; i < stop && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        // e.what() repeats the exception id and position; keep only the reason.
        std::string message = e.what();
        if (const std::size_t colon = message.rfind(": "); colon != std::string::npos) {
            message = message.substr(colon + 2);
        }
        throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": " + message);
    }
}

// Read-only cursor over a parsed document that tracks its JSON path so every
// schema error names the exact location.
struct Node {
    const json* j = nullptr;
    const std::string* origin = nullptr;
    std::string path;

    [[noreturn]] void fail_here(const std::string& message) const {
        fail(*origin, path, message);
    }

    bool has(const char* key) const { return j->is_object() && j->contains(key); }

    Node at(const char* key) const {
        if (!j->is_object()) fail_here("expected an object");
        const auto it = j->find(key);
        if (it == j->end()) fail_here(std::string("missing key \"") + key + "\"");
        return Node{&*it, origin, path + "/" + key};
    }

    std::optional<Node> maybe(const char* key) const {
        if (!j->is_object()) fail_here("expected an object");
        const auto it = j->find(key);
        if (it == j->end()) return std::nullopt;
        return Node{&*it, origin, path + "/" + key};
    }

    std::size_t size() const {
        if (!j->is_array()) fail_here("expected an array");
        return j->size();
    }

    Node item(std::size_t i) const {
        if (!j->is_array()) fail_here("expected an array");
        if (i >= j->size()) fail_here("index " + std::to_string(i) + " out of range");
        return Node{&(*j)[i], origin, path + "/" + std::to_string(i)};
    }

    // Strict schema: any key outside the allowed set is an error, which
    // catches typos that would otherwise silently change a run.
    void only_keys(std::initializer_list<const char*> allowed) const {
        if (!j->is_object()) fail_here("expected an object");
        for (const auto& [key, value] : j->items()) {
            bool ok = false;
            for (const char* a : allowed) {
                if (key == a) {
                    ok = true;
                    break;
                }
            }
            if (!ok) fail_here("unknown key \"" + key + "\"");
        }
    }

    double as_double() const {
        if (!j->is_number()) fail_here("expected a number");
        return j->get<double>();
    }

    long long as_int() const {
        if (!j->is_number_integer()) fail_here("expected an integer");
        return j->get<long long>();
    }

    bool as_bool() const {
        if (!j->is_boolean()) fail_here("expected a boolean");
        return j->get<bool>();
    }

    std::string as_string() const {
        if (!j->is_string()) fail_here("expected a string");
        return j->get<std::string>();
    }
};

inline Node root(const json& j, const std::string& origin_storage) {
    return Node{&j, &origin_storage, ""};
}

// Requires the document's "format" field to equal "flatstab-<kind>/<version>".
inline void check_format(const Node& root_node, const std::string& kind, int version) {
    const std::string want = "flatstab-" + kind + "/" + std::to_string(version);
    const std::string got = root_node.at("format").as_string();
    if (got != want) {
        root_node.at("format").fail_here("expected \"" + want + "\", got \"" + got + "\"");
    }
}

}  // namespace flatstab::jsonutil

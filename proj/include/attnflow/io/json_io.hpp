#pragma once
// Deterministic text output: doubles at a fixed number of significant
// digits, a JSON writer built on that formatting, and atomic file writes.

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <unistd.h>

namespace attnflow::io {

using Json = nlohmann::json;

/// Unreadable or unwritable files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input; `path` names the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& what)
        : std::runtime_error(path.empty() ? what : path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A check needs per-step data the trajectory was not recorded with.
class MissingDataError : public std::runtime_error {
public:
    MissingDataError(const std::string& flag, const std::string& what)
        : std::runtime_error(what + " (rerun simulate with --retain " + flag + ")"), flag_(flag) {}
    const std::string& flag() const noexcept { return flag_; }

private:
    std::string flag_;
};

/// Shortest %g-style text with `digits` significant digits; -0 prints as 0.
inline std::string format_double(double v, int digits) {
    if (!std::isfinite(v)) throw std::invalid_argument("cannot format a non-finite number");
    if (v == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
    if (res.ec != std::errc{}) throw std::runtime_error("number formatting failed");
    return std::string(buf, res.ptr);
}

namespace detail {

inline void write_json(std::ostream& os, const Json& j, int indent, int depth, int digits) {
    const auto pad = [&](int d) {
        if (indent >= 0) os << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
    };
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) os << ',';
            first = false;
            pad(depth + 1);
            os << Json(it.key()).dump() << (indent >= 0 ? ": " : ":");
            write_json(os, it.value(), indent, depth + 1, digits);
        }
        pad(depth);
        os << '}';
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            return;
        }
        // Arrays of scalars stay on one line.
        const bool flat = std::none_of(j.begin(), j.end(), [](const Json& e) { return e.is_structured(); });
        os << '[';
        for (std::size_t k = 0; k < j.size(); ++k) {
            if (k) os << (flat && indent >= 0 ? ", " : ",");
            if (!flat) pad(depth + 1);
            write_json(os, j[k], indent, depth + 1, digits);
        }
        if (!flat) pad(depth);
        os << ']';
        return;
    }
    case Json::value_t::number_float: os << format_double(j.get<double>(), digits); return;
    default: os << j.dump(); return;
    }
}

} // namespace detail

/// JSON text with floats at `digits` significant digits (17 round-trips
/// every double).
inline std::string to_json_text(const Json& j, int indent = 1, int digits = 17) {
    std::ostringstream os;
    detail::write_json(os, j, indent, 0, digits);
    os << '\n';
    return os.str();
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw IoError("write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at " + path.string());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read of " + path.string() + " failed");
    return ss.str();
}

inline Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError("", what + " is not valid JSON: " + e.what());
    }
}

} // namespace attnflow::io

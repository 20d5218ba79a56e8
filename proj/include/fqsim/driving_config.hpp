// Copyright 2026 The fqsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * JSON loader for driving specs.
 *
 *   {
 *     "dim": 2,
 *     "entries": [[0, 1, 0.5, 0.0]],   // (row, col, re, im); (col, row) gets the conjugate
 *     "norm_bound": 0.5,
 *     "total_time": 1.0,
 *     "time_grid": 64,
 *     "gate_cost": 8
 *   }
 *
 * or a built-in: {"builtin": "random", "dim": 4, "norm": 1.0, "seed": 7, ...}
 * with builtin one of zero, random, diagonal (needs "diagonal": [..]), walk
 * (optional "hop"), rotating (optional "omega").
 */

#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fqsim/errors.hpp"
#include "fqsim/oracle.hpp"

namespace fqsim {

namespace detail {

inline std::string line_of_offset(const std::string &text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
        }
    }
    return "line " + std::to_string(line);
}

/// Parses JSON text, reporting syntax errors with their line.
inline nlohmann::json parse_json_text(const std::string &text, const std::string &origin) {
    try {
        return nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(origin + ":" + line_of_offset(text, e.byte), e.what());
    }
}

inline std::string read_text_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(path, "cannot open file");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void reject_unknown_keys(const nlohmann::json &obj, const std::set<std::string> &known,
                                const std::string &where) {
    if (!obj.is_object()) {
        throw ConfigError(where, "expected an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key())) {
            throw ConfigError(where + "." + it.key(), "unknown key");
        }
    }
}

template <class T>
T get_field(const nlohmann::json &obj, const std::string &key, const std::string &where) {
    if (!obj.contains(key)) {
        throw ConfigError(where + "." + key, "missing required field");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(where + "." + key, e.what());
    }
}

template <class T>
T get_field_or(const nlohmann::json &obj, const std::string &key, T fallback,
               const std::string &where) {
    if (!obj.contains(key)) {
        return fallback;
    }
    return get_field<T>(obj, key, where);
}

} // namespace detail

/// Builds a DrivingSpec from a parsed JSON object. `where` prefixes errors.
inline DrivingSpec driving_from_json(const nlohmann::json &j, const std::string &where = "driving") {
    using detail::get_field;
    using detail::get_field_or;
    detail::reject_unknown_keys(j,
                                {"dim", "entries", "norm_bound", "total_time", "time_grid",
                                 "gate_cost", "builtin", "norm", "seed", "diagonal", "hop",
                                 "omega"},
                                where);
    const auto total_time = get_field_or<double>(j, "total_time", 1.0, where);
    const auto time_grid = get_field_or<long>(j, "time_grid", 64, where);
    const auto gate_cost = get_field_or<long>(j, "gate_cost", 1, where);
    if (total_time <= 0.0) {
        throw ConfigError(where + ".total_time", "must be positive");
    }
    if (time_grid < 1) {
        throw ConfigError(where + ".time_grid", "must be >= 1");
    }
    DrivingSpec spec;
    if (j.contains("builtin")) {
        const auto kind = get_field<std::string>(j, "builtin", where);
        const auto dim = get_field<std::size_t>(j, "dim", where);
        if (dim < 1) {
            throw ConfigError(where + ".dim", "must be >= 1");
        }
        if (kind == "zero") {
            spec = builtin_drives::zero(dim, total_time);
        } else if (kind == "random") {
            spec = builtin_drives::random_constant(dim, get_field_or<double>(j, "norm", 1.0, where),
                                                   get_field_or<std::uint64_t>(j, "seed", 0, where),
                                                   total_time);
        } else if (kind == "diagonal") {
            const auto vals = get_field<std::vector<double>>(j, "diagonal", where);
            if (vals.size() != dim) {
                throw ConfigError(where + ".diagonal", "length differs from dim");
            }
            RealVector v(static_cast<Eigen::Index>(dim));
            for (std::size_t i = 0; i < dim; ++i) {
                v(static_cast<Eigen::Index>(i)) = vals[i];
            }
            spec = builtin_drives::diagonal(v, total_time);
        } else if (kind == "walk") {
            spec = builtin_drives::walk(dim, get_field_or<double>(j, "hop", 0.5, where), total_time);
        } else if (kind == "rotating") {
            spec = builtin_drives::rotating(dim, get_field_or<double>(j, "norm", 1.0, where),
                                            get_field_or<double>(j, "omega", 1.0, where),
                                            get_field_or<std::uint64_t>(j, "seed", 0, where),
                                            total_time);
        } else {
            throw ConfigError(where + ".builtin", "unknown built-in '" + kind + "'");
        }
        if (j.contains("norm_bound")) {
            spec.norm_bound = get_field<double>(j, "norm_bound", where);
        }
    } else {
        const auto dim = get_field<std::size_t>(j, "dim", where);
        if (dim < 1) {
            throw ConfigError(where + ".dim", "must be >= 1");
        }
        const auto d = static_cast<Eigen::Index>(dim);
        Matrix h = Matrix::Zero(d, d);
        if (!j.contains("entries") || !j.at("entries").is_array()) {
            throw ConfigError(where + ".entries", "expected a list of [row, col, re, im]");
        }
        std::size_t idx = 0;
        for (const auto &e : j.at("entries")) {
            const std::string at = where + ".entries[" + std::to_string(idx++) + "]";
            if (!e.is_array() || e.size() != 4 || !e[0].is_number_integer() ||
                !e[1].is_number_integer() || !e[2].is_number() || !e[3].is_number()) {
                throw ConfigError(at, "expected [row, col, re, im]");
            }
            const auto r = e[0].get<long>();
            const auto c = e[1].get<long>();
            if (r < 0 || c < 0 || r >= d || c >= d) {
                throw ConfigError(at, "index out of range");
            }
            const cplx v(e[2].get<double>(), e[3].get<double>());
            if (r == c && std::abs(v.imag()) > 1e-12) {
                throw ConfigError(at, "diagonal entry must be real");
            }
            h(r, c) = v;
            h(c, r) = std::conj(v);
        }
        spec = builtin_drives::constant(h, total_time, "config");
        spec.norm_bound = get_field<double>(j, "norm_bound", where);
    }
    spec.total_time = total_time;
    spec.time_grid = time_grid;
    spec.gate_cost = gate_cost;
    try {
        spec.validate();
    } catch (const Error &e) {
        throw ConfigError(where, e.what());
    }
    return spec;
}

inline DrivingSpec load_driving_spec(const std::string &path) {
    const std::string text = detail::read_text_file(path);
    return driving_from_json(detail::parse_json_text(text, path), path);
}

} // namespace fqsim

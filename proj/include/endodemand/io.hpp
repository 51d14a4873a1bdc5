// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "endodemand/buhlmann.hpp"
#include "endodemand/error.hpp"
#include "endodemand/risk_profile.hpp"
#include "endodemand/scenario.hpp"

// JSON configuration formats. See README for the schemas.

namespace endodemand {

using Json = nlohmann::json;

/// Named random variables on one scenario space.
class ScenarioTable {
public:
    ScenarioTable(SpacePtr space, std::map<std::string, RandomVariable> vars)
        : space_(std::move(space)), vars_(std::move(vars)) {}

    const SpacePtr& space() const noexcept { return space_; }

    const RandomVariable& at(const std::string& name) const {
        auto it = vars_.find(name);
        if (it == vars_.end()) throw DomainError("scenario file has no variable '" + name + "'");
        return it->second;
    }

    bool contains(const std::string& name) const { return vars_.count(name) != 0; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : vars_) out.push_back(k);
        return out;
    }

private:
    SpacePtr space_;
    std::map<std::string, RandomVariable> vars_;
};

namespace detail {

inline const Json& require_key(const Json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key))
        throw DomainError(std::string(where) + ": missing key '" + key + "'");
    return j.at(key);
}

inline double number(const Json& j, const char* key, const char* where) {
    const Json& v = require_key(j, key, where);
    if (!v.is_number()) throw DomainError(std::string(where) + ": '" + key + "' must be a number");
    return v.get<double>();
}

inline double number_or(const Json& j, const char* key, double fallback, const char* where) {
    if (!j.contains(key)) return fallback;
    return number(j, key, where);
}

inline std::vector<double> numbers(const Json& v, const std::string& what) {
    if (!v.is_array()) throw DomainError(what + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number()) throw DomainError(what + " must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

}  // namespace detail

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw DomainError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

/// {"weights": [...], "variables": {"name": [...]}, "floors": {"name": x}}.
/// Scenarios of zero weight are dropped from every variable.
inline ScenarioTable scenarios_from_json(const Json& j) {
    const char* where = "scenarios";
    auto weights = detail::numbers(detail::require_key(j, "weights", where), "weights");
    const Json& vars = detail::require_key(j, "variables", where);
    if (!vars.is_object() || vars.empty()) throw DomainError("scenarios: 'variables' must be a non-empty object");

    std::vector<std::size_t> keep;
    std::vector<double> kept_weights;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] == 0.0) continue;
        keep.push_back(i);
        kept_weights.push_back(weights[i]);
    }
    auto space = ScenarioSpace::make(std::move(kept_weights));

    const Json empty = Json::object();
    const Json& floors = j.contains("floors") ? j.at("floors") : empty;
    if (!floors.is_object()) throw DomainError("scenarios: 'floors' must be an object");
    for (const auto& [name, value] : floors.items())
        if (!vars.contains(name)) throw DomainError("floor given for unknown variable '" + name + "'");

    std::map<std::string, RandomVariable> out;
    for (const auto& [name, value] : vars.items()) {
        auto raw = detail::numbers(value, "variable '" + name + "'");
        if (raw.size() != weights.size()) {
            std::ostringstream msg;
            msg << "variable '" << name << "' has " << raw.size() << " values for " << weights.size()
                << " weights";
            throw DomainError(msg.str());
        }
        std::vector<double> vals;
        vals.reserve(keep.size());
        for (std::size_t i : keep) vals.push_back(raw[i]);
        std::optional<double> floor;
        if (floors.contains(name)) {
            if (!floors.at(name).is_number()) throw DomainError("floor of '" + name + "' must be a number");
            floor = floors.at(name).get<double>();
        }
        out.emplace(name, RandomVariable(space, std::move(vals), floor));
    }
    return ScenarioTable(space, std::move(out));
}

/// R(x) = 1 - exp(-(x - shift)) on the whole line.
inline RiskProfile saturating_profile(double shift) {
    if (!std::isfinite(shift)) throw DomainError("saturating profile needs a finite shift");
    return custom_profile([shift](double x) { return 1.0 - std::exp(-(x - shift)); },
                          [shift](double x) { return std::exp(-(x - shift)); }, Domain::full_line, false,
                          WorkingInterval{shift - 10.0, shift + 10.0});
}

/// {"kind": "linear", "alpha", "x_ref"?} | {"kind": "log", "eta", "x_ref"?} |
/// {"kind": "saturating", "shift"}.
inline RiskProfile profile_from_json(const Json& j) {
    const char* where = "profile";
    const Json& kind = detail::require_key(j, "kind", where);
    if (!kind.is_string()) throw DomainError("profile: 'kind' must be a string");
    auto k = kind.get<std::string>();
    if (k == "linear") return linear_profile(detail::number(j, "alpha", where), detail::number_or(j, "x_ref", 0.0, where));
    if (k == "log") return log_profile(detail::number(j, "eta", where), detail::number_or(j, "x_ref", 1.0, where));
    if (k == "saturating") return saturating_profile(detail::number(j, "shift", where));
    if (k == "custom") throw DomainError("profile: custom profiles are available only through the library API");
    throw DomainError("profile: unknown kind '" + k + "'");
}

/// Profile of a run config: either {"profile": {...}} or the flat form
/// {"profile": "linear", "alpha": .., "x_ref": ..}.
inline RiskProfile config_profile(const Json& cfg) {
    const Json& p = detail::require_key(cfg, "profile", "config");
    if (p.is_object()) return profile_from_json(p);
    if (!p.is_string()) throw DomainError("config: 'profile' must be a string or an object");
    Json flat = cfg;
    flat["kind"] = p;
    return profile_from_json(flat);
}

/// [{"utility": "exponential" | "exp", "alpha": a, "endowment": "X1"},
///  {"utility": "power", "eta": e, "endowment": "X2"}, ...]
inline AgentPopulation agents_from_json(const Json& j, const ScenarioTable& table) {
    if (!j.is_array() || j.empty()) throw DomainError("agents must be a non-empty array");
    std::vector<Agent> agents;
    for (const auto& a : j) {
        const char* where = "agent";
        const Json& u = detail::require_key(a, "utility", where);
        const Json& e = detail::require_key(a, "endowment", where);
        if (!u.is_string() || !e.is_string())
            throw DomainError("agent: 'utility' and 'endowment' must be strings");
        auto name = u.get<std::string>();
        std::optional<AgentUtility> util;
        if (name == "exponential" || name == "exp")
            util = AgentUtility::exponential(detail::number(a, "alpha", where));
        else if (name == "power")
            util = AgentUtility::power(detail::number(a, "eta", where));
        else
            throw DomainError("agent: unknown utility '" + name + "'");
        agents.push_back(Agent{*util, table.at(e.get<std::string>())});
    }
    return AgentPopulation(std::move(agents));
}

}  // namespace endodemand

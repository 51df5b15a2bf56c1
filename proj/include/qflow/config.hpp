#pragma once

// Flat `key = value` configuration with `#` comments and dotted keys.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qflow/errors.hpp"

namespace qflow {

class Config {
  public:
    /// Every key a config file may set, with its default value.
    static const std::map<std::string, std::string>& defaults() {
        static const std::map<std::string, std::string> d{
            {"run.seed", "20240601"},
            {"physics.hbar", "1"},
            {"physics.mass", "1"},
            {"physics.potential", "free"},
            {"physics.omega", "1"},
            {"state.kind", "gaussian"},
            {"state.sigma0", "1"},
            {"state.k", "0"},
            {"state.beta", "0.2"},
            {"state.kappa", "2"},
            {"grid.n_labels", "401"},
            {"grid.a_min", "-8"},
            {"grid.a_max", "8"},
            {"solver.dt", "0"},
            {"solver.cfl", "0.1"},
            {"solver.integrator", "rk4"},
            {"solver.stencil_order", "4"},
            {"solver.t_final", "2"},
            {"solver.snapshot_stride", "100"},
            {"solver.acceleration", "direct"},
            {"solver.energy_abort", "0.1"},
            {"output.n_x", "601"},
            {"output.x_min", "-12"},
            {"output.x_max", "12"},
            {"output.window", "6"},
            {"reference.n", "1024"},
            {"reference.x_min", "-16"},
            {"reference.x_max", "16"},
            {"reference.dt", "0.001"},
            {"reference.snapshot_stride", "100"},
            {"qtm.n_particles", "161"},
            {"qtm.dt", "0"},
            {"qtm.cfl", "0.1"},
            {"qtm.snapshot_stride", "100"},
            {"qtm.degree", "4"},
            {"qtm.stencil_size", "9"},
            {"qtm.width_factor", "3"},
            {"tensor.draws", "100"},
        };
        return d;
    }

    Config() = default;

    static Config parse(std::istream& in, const std::string& origin = "config") {
        Config c;
        std::string line;
        std::size_t lineno = 0;
        std::vector<std::string> unknown;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string body = trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw ValidationError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            }
            const std::string key = trim(body.substr(0, eq));
            const std::string value = trim(body.substr(eq + 1));
            if (key.empty() || value.empty()) {
                throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key or value");
            }
            if (!defaults().count(key)) {
                unknown.push_back(key);
                continue;
            }
            if (c.explicit_.count(key)) {
                throw ValidationError(origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
            }
            c.values_[key] = value;
            c.explicit_.insert(key);
        }
        if (!unknown.empty()) {
            std::string msg = "unknown config keys:";
            for (const auto& k : unknown) msg += " " + k;
            throw ValidationError(msg);
        }
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ValidationError("cannot read config file " + path);
        return parse(f, path);
    }

    static Config from_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    void set(const std::string& key, const std::string& value) {
        if (!defaults().count(key)) throw ValidationError("unknown config key: " + key);
        values_[key] = value;
        explicit_.insert(key);
    }

    bool is_set(const std::string& key) const { return explicit_.count(key) != 0; }

    std::string str(const std::string& key) const {
        if (auto it = values_.find(key); it != values_.end()) return it->second;
        if (auto it = defaults().find(key); it != defaults().end()) return it->second;
        throw ValidationError("unknown config key: " + key);
    }

    double real(const std::string& key) const {
        const std::string s = str(key);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ValidationError(key + " = " + s + " is not a number");
        }
        return v;
    }

    std::size_t count(const std::string& key) const {
        const std::string s = str(key);
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw ValidationError(key + " = " + s + " is not a non-negative integer");
        }
        return static_cast<std::size_t>(v);
    }

    /// All keys with their effective values, defaults included.
    std::map<std::string, std::string> effective() const {
        std::map<std::string, std::string> out = defaults();
        for (const auto& [k, v] : values_) out[k] = v;
        return out;
    }

  private:
    static std::string trim(std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return std::string(s.substr(b, e - b + 1));
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> explicit_;
};

}  // namespace qflow

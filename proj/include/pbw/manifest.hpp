#pragma once

// Line-oriented key=value run manifests. Keys are written sorted and doubles
// round-trip exactly, so identical runs produce byte-identical files.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pbw {

struct Manifest {
    std::map<std::string, std::string> entries;

    void set(const std::string& key, const std::string& value) { entries[key] = value; }
    void set(const std::string& key, std::uint64_t value) { entries[key] = std::to_string(value); }
    void set(const std::string& key, double value) {
        std::ostringstream ss;
        ss.precision(17);
        ss << value;
        entries[key] = ss.str();
    }

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    const std::string& get(const std::string& key) const {
        auto it = entries.find(key);
        if (it == entries.end()) throw std::runtime_error("manifest: missing key: " + key);
        return it->second;
    }

    double get_double(const std::string& key) const { return std::stod(get(key)); }
    std::uint64_t get_u64(const std::string& key) const { return std::stoull(get(key)); }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open for write: " + path);
        for (const auto& [k, v] : entries) os << k << '=' << v << '\n';
        if (!os) throw std::runtime_error("write failed: " + path);
    }

    static Manifest load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open: " + path);
        Manifest m;
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw std::runtime_error("manifest: bad line: " + line);
            m.entries[line.substr(0, eq)] = line.substr(eq + 1);
        }
        return m;
    }
};

}  // namespace pbw

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "field.hpp"
#include "grid.hpp"

namespace ensim {

using Json = nlohmann::ordered_json;

// deterministic shortest-roundtrip double formatting
inline std::string fmt_double(Real x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// Field bundle format: <base>.json header describing the grid and component
// list, plus a payload holding every component back to back (component index
// first, row-major grid order within each component). Payload is either flat
// little-endian float64 (<base>.f64) or CSV (<base>.csv, one column per
// component, one row per grid point in row-major order).

struct BundleData {
    Grid grid;
    std::vector<std::string> names;
    std::vector<std::vector<Real>> comps;
    Json meta = Json::object();

    void add(const std::string& name, const Real* data, std::size_t n) {
        names.push_back(name);
        comps.emplace_back(data, data + n);
    }
    void add(const std::string& name, const std::vector<Real>& data) {
        names.push_back(name);
        comps.push_back(data);
    }
    void add_complex(const std::string& name, const std::vector<Complex>& data) {
        std::vector<Real> re(data.size()), im(data.size());
        for (std::size_t p = 0; p < data.size(); ++p) {
            re[p] = data[p].real();
            im[p] = data[p].imag();
        }
        add(name + "_re", re);
        add(name + "_im", im);
    }
};

inline Json grid_to_json(const Grid& g) {
    Json j;
    j["dim"] = g.dim;
    j["shape"] = {g.shape[0], g.shape[1], g.shape[2]};
    j["spacing"] = {g.spacing[0], g.spacing[1], g.spacing[2]};
    j["time_step"] = g.time_step;
    j["boundary"] = g.boundary == Boundary::periodic ? "periodic" : "absorbing";
    return j;
}

inline Grid grid_from_json(const Json& j) {
    Grid g;
    g.dim = j.at("dim").get<int>();
    for (int a = 0; a < 3; ++a) {
        g.shape[a] = j.at("shape")[a].get<std::size_t>();
        g.spacing[a] = j.at("spacing")[a].get<Real>();
    }
    g.time_step = j.at("time_step").get<Real>();
    g.boundary = j.at("boundary").get<std::string>() == "periodic" ? Boundary::periodic
                                                                   : Boundary::absorbing;
    return g;
}

inline void write_bundle(const std::string& base, const BundleData& b, bool csv = false) {
    const std::size_t N = b.grid.size();
    for (const auto& c : b.comps)
        ENSIM_REQUIRE(c.size() == N, "bundle component size mismatch");

    std::string payload = base + (csv ? ".csv" : ".f64");
    Json hdr;
    hdr["format"] = "ensim-bundle";
    hdr["version"] = 1;
    hdr["grid"] = grid_to_json(b.grid);
    hdr["components"] = b.names;
    // strip directories from the payload reference
    std::string pname = payload;
    if (auto pos = pname.find_last_of('/'); pos != std::string::npos) pname = pname.substr(pos + 1);
    hdr["payload"] = pname;
    hdr["payload_format"] = csv ? "csv" : "f64le";
    if (!b.meta.empty()) hdr["meta"] = b.meta;

    std::ofstream jf(base + ".json");
    ENSIM_REQUIRE(jf.good(), "cannot open " + base + ".json for writing");
    jf << hdr.dump(2) << "\n";

    if (csv) {
        std::ofstream f(payload);
        ENSIM_REQUIRE(f.good(), "cannot open " + payload + " for writing");
        for (std::size_t c = 0; c < b.names.size(); ++c)
            f << (c ? "," : "") << b.names[c];
        f << "\n";
        for (std::size_t p = 0; p < N; ++p) {
            for (std::size_t c = 0; c < b.comps.size(); ++c)
                f << (c ? "," : "") << fmt_double(b.comps[c][p]);
            f << "\n";
        }
    } else {
        std::ofstream f(payload, std::ios::binary);
        ENSIM_REQUIRE(f.good(), "cannot open " + payload + " for writing");
        for (const auto& c : b.comps)
            f.write(reinterpret_cast<const char*>(c.data()),
                    std::streamsize(c.size() * sizeof(Real)));
    }
}

inline BundleData read_bundle(const std::string& json_path) {
    std::ifstream jf(json_path);
    ENSIM_REQUIRE(jf.good(), "cannot open " + json_path);
    Json hdr = Json::parse(jf);
    ENSIM_REQUIRE(hdr.at("format") == "ensim-bundle", "not an ensim bundle: " + json_path);

    BundleData b;
    b.grid = grid_from_json(hdr.at("grid"));
    b.names = hdr.at("components").get<std::vector<std::string>>();
    if (hdr.contains("meta")) b.meta = hdr.at("meta");

    std::string dir;
    if (auto pos = json_path.find_last_of('/'); pos != std::string::npos)
        dir = json_path.substr(0, pos + 1);
    std::string payload = dir + hdr.at("payload").get<std::string>();
    const std::size_t N = b.grid.size();
    b.comps.assign(b.names.size(), std::vector<Real>(N));

    if (hdr.at("payload_format") == "csv") {
        std::ifstream f(payload);
        ENSIM_REQUIRE(f.good(), "cannot open " + payload);
        std::string line;
        std::getline(f, line);  // header
        for (std::size_t p = 0; p < N; ++p) {
            ENSIM_REQUIRE(bool(std::getline(f, line)), "csv payload truncated");
            std::stringstream ss(line);
            std::string cell;
            for (std::size_t c = 0; c < b.comps.size(); ++c) {
                ENSIM_REQUIRE(bool(std::getline(ss, cell, ',')), "csv row truncated");
                b.comps[c][p] = std::stod(cell);
            }
        }
    } else {
        std::ifstream f(payload, std::ios::binary);
        ENSIM_REQUIRE(f.good(), "cannot open " + payload);
        for (auto& c : b.comps) {
            f.read(reinterpret_cast<char*>(c.data()), std::streamsize(N * sizeof(Real)));
            ENSIM_REQUIRE(f.gcount() == std::streamsize(N * sizeof(Real)),
                          "binary payload truncated");
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// plain CSV tables (sweep aggregates, line lists, trajectories)

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<Real>> rows;

    void write(const std::string& path) const {
        std::ofstream f(path);
        ENSIM_REQUIRE(f.good(), "cannot open " + path + " for writing");
        for (std::size_t c = 0; c < header.size(); ++c) f << (c ? "," : "") << header[c];
        f << "\n";
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < r.size(); ++c) f << (c ? "," : "") << fmt_double(r[c]);
            f << "\n";
        }
    }
};

}  // namespace ensim

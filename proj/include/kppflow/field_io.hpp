#pragma once

// Flat binary container for periodic fields:
//   int64  dim
//   int64  resolution[dim]
//   float64 period[dim]
//   float64 payload[ncomp * prod(resolution)]   (row-major, component-major)
// All values little-endian. The component count is implied by the file size.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "kppflow/torus.hpp"

namespace kppflow {

namespace detail {

template <class T>
T to_little_endian(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
            std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
}

template <class T>
void put(std::ostream& os, T v) {
    v = to_little_endian(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is)
        throw InputError("field container: truncated header");
    return to_little_endian(v);
}

}  // namespace detail

/// Write one or more same-grid components to a field container.
inline void write_fields(const std::string& path, const std::vector<const ScalarField*>& comps) {
    detail::require(!comps.empty(), "write_fields: no components");
    const TorusGrid& g = comps.front()->grid();
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw InputError("write_fields: cannot open " + path);
    detail::put<std::int64_t>(os, g.dim());
    for (int a = 0; a < g.dim(); ++a)
        detail::put<std::int64_t>(os, g.n(a));
    for (int a = 0; a < g.dim(); ++a)
        detail::put<double>(os, g.period(a));
    for (const auto* c : comps) {
        detail::require_same_grid(c->grid(), g, "write_fields");
        for (double v : c->values())
            detail::put<double>(os, v);
    }
    if (!os)
        throw NumericalError("write_fields: write failed for " + path);
}

inline void write_field(const std::string& path, const ScalarField& f) { write_fields(path, {&f}); }

inline void write_field(const std::string& path, const VectorField& v) {
    std::vector<const ScalarField*> comps;
    for (int a = 0; a < v.dim(); ++a)
        comps.push_back(&v[a]);
    write_fields(path, comps);
}

/// Read every component stored in a field container.
inline std::vector<ScalarField> read_fields(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw InputError("read_fields: cannot open " + path);
    const auto dim = detail::get<std::int64_t>(is);
    if (dim != 2 && dim != 3)
        throw InputError("read_fields: invalid dimension in " + path);
    std::vector<int> n(dim);
    std::vector<double> L(dim);
    for (auto& v : n)
        v = static_cast<int>(detail::get<std::int64_t>(is));
    for (auto& v : L)
        v = detail::get<double>(is);
    TorusGrid g(n, L);
    const auto header = is.tellg();
    is.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(is.tellg() - header);
    is.seekg(header);
    const std::size_t per = g.size() * sizeof(double);
    if (bytes == 0 || bytes % per != 0)
        throw InputError("read_fields: payload size does not match the grid in " + path);
    std::vector<ScalarField> out;
    for (std::size_t c = 0; c < bytes / per; ++c) {
        ScalarField f(g);
        for (auto& v : f.values())
            v = detail::get<double>(is);
        out.push_back(std::move(f));
    }
    return out;
}

inline ScalarField read_scalar_field(const std::string& path) {
    auto comps = read_fields(path);
    detail::require(comps.size() == 1, "read_scalar_field: container holds more than one component");
    return std::move(comps.front());
}

inline VectorField read_vector_field(const std::string& path) {
    auto comps = read_fields(path);
    const TorusGrid g = comps.front().grid();
    detail::require(static_cast<int>(comps.size()) == g.dim(),
                    "read_vector_field: component count does not match the dimension");
    return {g, std::move(comps)};
}

/// CSV with one row per node: coordinates then component values.
inline void write_fields_csv(const std::string& path, const std::vector<const ScalarField*>& comps) {
    detail::require(!comps.empty(), "write_fields_csv: no components");
    const TorusGrid& g = comps.front()->grid();
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp)
        throw InputError("write_fields_csv: cannot open " + path);
    static const char* axes[] = {"x1", "x2", "x3"};
    for (int a = 0; a < g.dim(); ++a)
        std::fprintf(fp, "%s,", axes[a]);
    for (std::size_t c = 0; c < comps.size(); ++c)
        std::fprintf(fp, "v%zu%s", c, c + 1 < comps.size() ? "," : "\n");
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.node(i);
        for (int a = 0; a < g.dim(); ++a)
            std::fprintf(fp, "%.17g,", x[a]);
        for (std::size_t c = 0; c < comps.size(); ++c)
            std::fprintf(fp, "%.17g%s", (*comps[c])[i], c + 1 < comps.size() ? "," : "\n");
    }
    std::fclose(fp);
}

}  // namespace kppflow

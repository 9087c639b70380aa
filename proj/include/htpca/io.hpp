#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "htpca/errors.hpp"
#include "htpca/log_lut.hpp"
#include "htpca/matrix.hpp"
#include "htpca/pca.hpp"
#include "htpca/version.hpp"

namespace htpca {

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
    if (!f) throw parse_error("cannot open '" + path + "' for reading");
    return f;
}

inline std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw parse_error("cannot open '" + path + "' for writing");
    return f;
}

} // namespace detail

// ---- CSV matrices: rows are dimensions, columns are samples, no header ----

inline void write_matrix_csv(const Mat& m, const std::string& path) {
    auto f = detail::open_out(path);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) f << ',';
            f << detail::fmt17(m(i, j));
        }
        f << '\n';
    }
    if (!f) throw parse_error("write failed for '" + path + "'");
}

inline Mat read_matrix_csv(const std::string& path) {
    auto f = detail::open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t offset = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        const char* p = line.c_str();
        std::size_t col = 0;
        while (*p) {
            char* end = nullptr;
            const double v = std::strtod(p, &end);
            if (end == p)
                throw parse_error(path + ": bad number at line " + std::to_string(lineno) +
                                  ", byte offset " +
                                  std::to_string(line_start + (p - line.c_str())));
            if (!std::isfinite(v))
                throw parse_error(path + ": non-finite value at line " + std::to_string(lineno) +
                                  ", byte offset " +
                                  std::to_string(line_start + (p - line.c_str())));
            row.push_back(v);
            ++col;
            p = end;
            while (*p == ' ' || *p == '\t') ++p;
            if (*p == ',') ++p;
            else if (*p == '\r' || *p == '\0') break;
            else
                throw parse_error(path + ": unexpected character at line " +
                                  std::to_string(lineno) + ", byte offset " +
                                  std::to_string(line_start + (p - line.c_str())));
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw parse_error(path + ": ragged row at line " + std::to_string(lineno) +
                              " (expected " + std::to_string(rows.front().size()) + " columns, got " +
                              std::to_string(row.size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw parse_error(path + ": no data rows");
    Mat m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

// ---- raw binary: 8-byte magic, uint64 d, uint64 n, row-major float64 LE ----

inline constexpr char kMatrixMagic[8] = {'H', 'T', 'P', 'C', 'A', 'M', 'X', '1'};

inline void write_matrix_binary(const Mat& m, const std::string& path) {
    auto f = detail::open_out(path, true);
    f.write(kMatrixMagic, 8);
    const std::uint64_t d = m.rows(), n = m.cols();
    f.write(reinterpret_cast<const char*>(&d), 8);
    f.write(reinterpret_cast<const char*>(&n), 8);
    f.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!f) throw parse_error("write failed for '" + path + "'");
}

inline Mat read_matrix_binary(const std::string& path) {
    auto f = detail::open_in(path, true);
    char magic[8];
    if (!f.read(magic, 8) || std::memcmp(magic, kMatrixMagic, 8) != 0)
        throw parse_error(path + ": bad magic at byte offset 0");
    std::uint64_t d = 0, n = 0;
    if (!f.read(reinterpret_cast<char*>(&d), 8) || !f.read(reinterpret_cast<char*>(&n), 8))
        throw parse_error(path + ": truncated header at byte offset 8");
    if (d == 0 || n == 0 || d * n > (1ull << 32))
        throw parse_error(path + ": implausible dimensions " + std::to_string(d) + "x" +
                          std::to_string(n) + " in header");
    Mat m(d, n);
    if (!f.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(m.size() * sizeof(double))))
        throw parse_error(path + ": truncated payload at byte offset " +
                          std::to_string(24 + static_cast<std::size_t>(f.gcount())));
    return m;
}

// ---- PGM (P5, 8-bit): pixels map linearly to [0,1]; writes clip ----

struct PgmImage {
    std::size_t width = 0, height = 0;
    std::vector<double> pixels; // row-major, [0,1]
};

inline void write_pgm(const PgmImage& img, const std::string& path) {
    auto f = detail::open_out(path, true);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> buf(img.pixels.size());
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
        double v = img.pixels[k];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); // documented clipping
        buf[k] = static_cast<unsigned char>(v * 255.0 + 0.5);
    }
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw parse_error("write failed for '" + path + "'");
}

inline PgmImage read_pgm(const std::string& path) {
    auto f = detail::open_in(path, true);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw parse_error(path + ": not a P5 PGM (byte offset 0)");
    auto next_token = [&](const char* what) -> long {
        long v = -1;
        while (f) {
            f >> std::ws;
            if (f.peek() == '#') {
                std::string comment;
                std::getline(f, comment);
                continue;
            }
            if (!(f >> v))
                throw parse_error(path + ": bad " + what + " at byte offset " +
                                  std::to_string(static_cast<long>(f.tellg())));
            break;
        }
        return v;
    };
    const long w = next_token("width");
    const long h = next_token("height");
    const long maxval = next_token("maxval");
    if (w <= 0 || h <= 0) throw parse_error(path + ": bad dimensions");
    if (maxval != 255) throw parse_error(path + ": only maxval 255 is supported");
    f.get(); // single whitespace after maxval
    PgmImage img;
    img.width = static_cast<std::size_t>(w);
    img.height = static_cast<std::size_t>(h);
    std::vector<unsigned char> buf(img.width * img.height);
    if (!f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
        throw parse_error(path + ": truncated pixel data at byte offset " +
                          std::to_string(static_cast<long>(f.tellg())));
    img.pixels.resize(buf.size());
    for (std::size_t k = 0; k < buf.size(); ++k) img.pixels[k] = buf[k] / 255.0;
    return img;
}

// ---- lookup table: "rho,ell" rows, header line carries the quadrature order ----

inline void write_log_lut(const LogLut& lut, const std::string& path) {
    auto f = detail::open_out(path);
    f << "# htpca log-lut quadrature_order=" << lut.order << " step=" << detail::fmt17(lut.step)
      << "\n";
    for (std::size_t k = 0; k < lut.rho_grid.size(); ++k)
        f << detail::fmt17(lut.rho_grid[k]) << ',' << detail::fmt17(lut.ell_values[k]) << '\n';
    if (!f) throw parse_error("write failed for '" + path + "'");
}

inline LogLut read_log_lut(const std::string& path) {
    auto f = detail::open_in(path);
    std::string header;
    if (!std::getline(f, header) || header.rfind("# htpca log-lut", 0) != 0)
        throw parse_error(path + ": missing log-lut header line");
    LogLut lut;
    if (const auto pos = header.find("quadrature_order="); pos != std::string::npos)
        lut.order = std::atoi(header.c_str() + pos + 17);
    if (const auto pos = header.find("step="); pos != std::string::npos)
        lut.step = std::atof(header.c_str() + pos + 5);
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const char* p = line.c_str();
        char* end = nullptr;
        const double rho = std::strtod(p, &end);
        if (end == p || *end != ',') throw parse_error(path + ": bad lut row '" + line + "'");
        const double ell = std::strtod(end + 1, nullptr);
        lut.rho_grid.push_back(rho);
        lut.ell_values.push_back(ell);
    }
    if (lut.rho_grid.size() < 2) throw parse_error(path + ": lut too short");
    if (!(lut.step > 0.0)) lut.step = lut.rho_grid[1] - lut.rho_grid[0];
    for (std::size_t k = 0; k + 1 < lut.ell_values.size(); ++k)
        if (!(lut.ell_values[k + 1] > lut.ell_values[k]))
            throw parse_error(path + ": lut not strictly increasing at row " + std::to_string(k));
    return lut;
}

// ---- subordinator log-moments ----

inline void write_log_moments(const SubordinatorLogMoments& lm, const std::string& path) {
    auto f = detail::open_out(path);
    f << "e_log_a," << detail::fmt17(lm.e_log_a) << '\n';
    f << "e_log_a_sq," << detail::fmt17(lm.e_log_a_sq) << '\n';
    f << "se_log_a," << detail::fmt17(lm.se_log_a) << '\n';
    f << "se_log_a_sq," << detail::fmt17(lm.se_log_a_sq) << '\n';
    f << "e_log_abs_g," << detail::fmt17(lm.e_log_abs_g) << '\n';
    if (!f) throw parse_error("write failed for '" + path + "'");
}

inline SubordinatorLogMoments read_log_moments(const std::string& path) {
    auto f = detail::open_in(path);
    SubordinatorLogMoments lm;
    std::string line;
    bool got_a = false, got_a2 = false;
    while (std::getline(f, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        const std::string key = line.substr(0, comma);
        const double v = std::atof(line.c_str() + comma + 1);
        if (key == "e_log_a") {
            lm.e_log_a = v;
            got_a = true;
        } else if (key == "e_log_a_sq") {
            lm.e_log_a_sq = v;
            got_a2 = true;
        } else if (key == "se_log_a")
            lm.se_log_a = v;
        else if (key == "se_log_a_sq")
            lm.se_log_a_sq = v;
        else if (key == "e_log_abs_g")
            lm.e_log_abs_g = v;
    }
    if (!got_a || !got_a2) throw parse_error(path + ": missing e_log_a / e_log_a_sq entries");
    return lm;
}

// ---- PcaModel bundle: components.csv, eigenvalues.csv, location.csv ----

inline void write_pca_model(const PcaModel& model, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_matrix_csv(model.components, dir + "/components.csv");
    Mat ev(1, model.eigenvalues.size());
    for (std::size_t k = 0; k < model.eigenvalues.size(); ++k) ev(0, k) = model.eigenvalues[k];
    write_matrix_csv(ev, dir + "/eigenvalues.csv");
    Mat loc(1, model.location.size());
    for (std::size_t k = 0; k < model.location.size(); ++k) loc(0, k) = model.location[k];
    write_matrix_csv(loc, dir + "/location.csv");
}

inline PcaModel read_pca_model(const std::string& dir) {
    PcaModel model;
    model.components = read_matrix_csv(dir + "/components.csv");
    const Mat ev = read_matrix_csv(dir + "/eigenvalues.csv");
    model.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    const Mat loc = read_matrix_csv(dir + "/location.csv");
    model.location.assign(loc.data(), loc.data() + loc.size());
    if (model.components.cols() != model.eigenvalues.size())
        throw parse_error(dir + ": component/eigenvalue count mismatch");
    if (model.components.rows() != model.location.size())
        throw parse_error(dir + ": component/location dimension mismatch");
    return model;
}

// ---- run manifest ----

inline void write_manifest(const std::string& dir, const std::string& config_text,
                           std::uint64_t seed, double wall_seconds) {
    std::filesystem::create_directories(dir);
    auto f = detail::open_out(dir + "/manifest.txt");
    f << "htpca_version: " << HTPCA_VERSION << '\n';
    f << "seed: " << seed << '\n';
    f << "wall_clock_seconds: " << wall_seconds << '\n';
    f << "config:\n" << config_text;
    if (!f) throw parse_error("write failed for manifest in '" + dir + "'");
}

} // namespace htpca

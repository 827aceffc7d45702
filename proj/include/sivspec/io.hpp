#pragma once

// File formats shared between the library and the CLI:
//   spectra        CSV  header `wavelength_nm,counts`, metadata lines `# key=value`
//   thermal series CSV  header `temperature_K,value[,sigma]`
//   g2 curves      CSV  header `tau_ns,g2`, power tag in the metadata
//   saturation     CSV  header `power_uW,rate_Mcps`
//   photon streams      9-byte binary records (u64 LE picoseconds, u8
//                       channel) or CSV `t_ps,channel`; both round-trip
//                       bit-exactly.
// Doubles are written with shortest round-trip formatting so identical
// data produces identical bytes.

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sivspec/dynamics.hpp"
#include "sivspec/errors.hpp"
#include "sivspec/photonmc.hpp"
#include "sivspec/specfit.hpp"
#include "sivspec/thermal.hpp"

namespace sivspec::io {

inline std::string format_double(double v) {
    std::array<char, 40> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

namespace detail {

inline double parse_double(const std::string& field, const std::string& file, std::size_t line,
                           std::size_t column) {
    double v{};
    const char* first = field.data();
    const char* last = field.data() + field.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ParseError(file + ": bad number '" + field + "'", line, column);
    return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

struct CsvTable {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> row_lines;
};

inline CsvTable read_csv(const std::filesystem::path& path,
                         const std::vector<std::string>& expected_header) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                std::string key = line.substr(1, eq - 1);
                std::string value = line.substr(eq + 1);
                while (!key.empty() && key.front() == ' ') key.erase(key.begin());
                while (!key.empty() && key.back() == ' ') key.pop_back();
                if (!value.empty() && value.back() == '\r') value.pop_back();
                table.metadata.emplace_back(key, value);
            }
            continue;
        }
        const auto fields = split_csv(line);
        if (!header_seen) {
            if (fields.size() < expected_header.size())
                throw ParseError(path.string() + ": expected header with at least " +
                                     std::to_string(expected_header.size()) + " columns",
                                 lineno, 1);
            for (std::size_t i = 0; i < expected_header.size(); ++i)
                if (fields[i] != expected_header[i])
                    throw ParseError(path.string() + ": expected column '" + expected_header[i] +
                                         "', found '" + fields[i] + "'",
                                     lineno, i + 1);
            table.header = fields;
            header_seen = true;
            continue;
        }
        std::vector<double> row;
        for (std::size_t i = 0; i < fields.size(); ++i)
            row.push_back(parse_double(fields[i], path.string(), lineno, i + 1));
        table.rows.push_back(std::move(row));
        table.row_lines.push_back(lineno);
    }
    if (!header_seen) throw ParseError(path.string() + ": missing header line");
    return table;
}

inline std::optional<std::string> meta_value(const CsvTable& t, const std::string& key) {
    for (const auto& [k, v] : t.metadata)
        if (k == key) return v;
    return std::nullopt;
}

}  // namespace detail

inline void write_spectrum_csv(const std::filesystem::path& path, const specfit::Spectrum& s) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    if (s.temperature_K) out << "# temperature_K=" << format_double(*s.temperature_K) << "\n";
    if (s.excitation_power_uW)
        out << "# power_uW=" << format_double(*s.excitation_power_uW) << "\n";
    if (!s.label.empty()) out << "# label=" << s.label << "\n";
    out << "wavelength_nm,counts\n";
    for (std::size_t i = 0; i < s.wavelengths_nm.size(); ++i)
        out << format_double(s.wavelengths_nm[i]) << "," << format_double(s.counts[i]) << "\n";
}

inline specfit::Spectrum read_spectrum_csv(const std::filesystem::path& path) {
    const auto table = detail::read_csv(path, {"wavelength_nm", "counts"});
    specfit::Spectrum s;
    if (const auto t = detail::meta_value(table, "temperature_K"))
        s.temperature_K = detail::parse_double(*t, path.string(), 0, 0);
    if (const auto p = detail::meta_value(table, "power_uW"))
        s.excitation_power_uW = detail::parse_double(*p, path.string(), 0, 0);
    if (const auto l = detail::meta_value(table, "label")) s.label = *l;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() < 2)
            throw ParseError(path.string() + ": row needs 2 columns", table.row_lines[r], 1);
        s.wavelengths_nm.push_back(table.rows[r][0]);
        s.counts.push_back(table.rows[r][1]);
    }
    s.validate();
    return s;
}

inline void write_thermal_csv(const std::filesystem::path& path,
                              const thermal::ThermalSeries& s) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "# unit=" << units::unit_name(s.unit) << "\n";
    out << "# kind=" << (s.kind == thermal::SeriesKind::linewidth ? "linewidth" : "shift") << "\n";
    out << (s.sigmas.empty() ? "temperature_K,value\n" : "temperature_K,value,sigma\n");
    for (std::size_t i = 0; i < s.temperatures_K.size(); ++i) {
        out << format_double(s.temperatures_K[i]) << "," << format_double(s.values[i]);
        if (!s.sigmas.empty()) out << "," << format_double(s.sigmas[i]);
        out << "\n";
    }
}

inline thermal::ThermalSeries read_thermal_csv(const std::filesystem::path& path) {
    const auto table = detail::read_csv(path, {"temperature_K", "value"});
    thermal::ThermalSeries s;
    if (const auto u = detail::meta_value(table, "unit")) s.unit = units::parse_unit(*u);
    if (const auto k = detail::meta_value(table, "kind"))
        s.kind = *k == "shift" ? thermal::SeriesKind::shift : thermal::SeriesKind::linewidth;
    const bool has_sigma = table.header.size() >= 3 && table.header[2] == "sigma";
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() < 2)
            throw ParseError(path.string() + ": row needs 2 columns", table.row_lines[r], 1);
        s.temperatures_K.push_back(row[0]);
        s.values.push_back(row[1]);
        if (has_sigma) {
            if (row.size() < 3)
                throw ParseError(path.string() + ": missing sigma column", table.row_lines[r], 3);
            s.sigmas.push_back(row[2]);
        }
    }
    s.validate();
    return s;
}

inline void write_g2_csv(const std::filesystem::path& path, const dynamics::G2Curve& curve,
                         std::optional<double> power_uW = std::nullopt) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    if (power_uW) out << "# power_uW=" << format_double(*power_uW) << "\n";
    if (curve.bin_width_ns > 0.0)
        out << "# bin_width_ns=" << format_double(curve.bin_width_ns) << "\n";
    out << "tau_ns,g2\n";
    for (std::size_t i = 0; i < curve.delays_ns.size(); ++i)
        out << format_double(curve.delays_ns[i]) << "," << format_double(curve.values[i]) << "\n";
}

struct TaggedG2Curve {
    dynamics::G2Curve curve;
    std::optional<double> power_uW;
};

inline TaggedG2Curve read_g2_csv(const std::filesystem::path& path) {
    const auto table = detail::read_csv(path, {"tau_ns", "g2"});
    TaggedG2Curve out;
    if (const auto p = detail::meta_value(table, "power_uW"))
        out.power_uW = detail::parse_double(*p, path.string(), 0, 0);
    if (const auto b = detail::meta_value(table, "bin_width_ns"))
        out.curve.bin_width_ns = detail::parse_double(*b, path.string(), 0, 0);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() < 2)
            throw ParseError(path.string() + ": row needs 2 columns", table.row_lines[r], 1);
        out.curve.delays_ns.push_back(table.rows[r][0]);
        out.curve.values.push_back(table.rows[r][1]);
    }
    out.curve.validate();
    return out;
}

inline void write_saturation_csv(const std::filesystem::path& path,
                                 const std::vector<std::pair<double, double>>& points) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "power_uW,rate_Mcps\n";
    for (const auto& [p, i] : points)
        out << format_double(p) << "," << format_double(i) << "\n";
}

inline std::vector<std::pair<double, double>> read_saturation_csv(
    const std::filesystem::path& path) {
    const auto table = detail::read_csv(path, {"power_uW", "rate_Mcps"});
    std::vector<std::pair<double, double>> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() < 2)
            throw ParseError(path.string() + ": row needs 2 columns", table.row_lines[r], 1);
        out.emplace_back(table.rows[r][0], table.rows[r][1]);
    }
    return out;
}

// --- photon streams -------------------------------------------------------

inline void write_stream_binary(const std::filesystem::path& path,
                                const photonmc::PhotonStream& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    for (const auto& ev : s.events) {
        const auto t = static_cast<std::uint64_t>(ev.t_ps);
        std::array<char, 9> rec{};
        for (int b = 0; b < 8; ++b) rec[b] = static_cast<char>((t >> (8 * b)) & 0xff);
        rec[8] = static_cast<char>(ev.channel);
        out.write(rec.data(), rec.size());
    }
}

inline photonmc::PhotonStream read_stream_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (size % 9 != 0)
        throw ParseError(path.string() + ": size " + std::to_string(size) +
                         " is not a multiple of the 9-byte record");
    photonmc::PhotonStream s;
    s.events.reserve(size / 9);
    std::array<char, 9> rec{};
    while (in.read(rec.data(), rec.size())) {
        std::uint64_t t = 0;
        for (int b = 0; b < 8; ++b)
            t |= static_cast<std::uint64_t>(static_cast<unsigned char>(rec[b])) << (8 * b);
        const auto ch = static_cast<std::uint8_t>(rec[8]);
        if (ch > 1) throw ParseError(path.string() + ": channel byte out of range");
        s.events.push_back({static_cast<std::int64_t>(t), ch});
    }
    s.validate();
    return s;
}

inline void write_stream_csv(const std::filesystem::path& path, const photonmc::PhotonStream& s) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "t_ps,channel\n";
    for (const auto& ev : s.events)
        out << ev.t_ps << "," << static_cast<int>(ev.channel) << "\n";
}

inline photonmc::PhotonStream read_stream_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    photonmc::PhotonStream s;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("t_ps,channel", 0) != 0)
                throw ParseError(path.string() + ": expected header 't_ps,channel'", lineno, 1);
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv(line);
        if (fields.size() != 2)
            throw ParseError(path.string() + ": expected 2 columns", lineno, 1);
        std::int64_t t{};
        auto res = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), t);
        if (res.ec != std::errc{} || res.ptr != fields[0].data() + fields[0].size())
            throw ParseError(path.string() + ": bad timestamp '" + fields[0] + "'", lineno, 1);
        int ch{};
        res = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), ch);
        if (res.ec != std::errc{} || res.ptr != fields[1].data() + fields[1].size() || ch < 0 ||
            ch > 1)
            throw ParseError(path.string() + ": bad channel '" + fields[1] + "'", lineno, 2);
        s.events.push_back({t, static_cast<std::uint8_t>(ch)});
    }
    if (!header_seen) throw ParseError(path.string() + ": missing header line");
    s.validate();
    return s;
}

inline void write_histogram_csv(const std::filesystem::path& path,
                                const photonmc::CoincidenceHistogram& h) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path.string());
    out << "tau_ns,counts";
    if (!h.normalized.empty()) out << ",g2";
    out << "\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        out << format_double(h.bin_center_ns(i)) << "," << h.counts[i];
        if (!h.normalized.empty()) out << "," << format_double(h.normalized[i]);
        out << "\n";
    }
}

}  // namespace sivspec::io

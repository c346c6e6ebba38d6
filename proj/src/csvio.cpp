#include "sbreak/csvio.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>
#include <system_error>

#include "sbreak/errors.hpp"

namespace sbreak {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double(std::string_view tok, const std::string& path, int lineno) {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw IoError(path + " line " + std::to_string(lineno) + ": cannot parse value '" +
                      std::string(tok) + "'");
    if (!std::isfinite(v))
        throw IoError(path + " line " + std::to_string(lineno) + ": non-finite value '" +
                      std::string(tok) + "'");
    return v;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace

std::string format_double(double v) {
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

void write_dataset_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out = open_out(path);
    out << "t,y";
    for (int j = 0; j < ds.d; ++j) out << ",x" << j + 1;
    out << "\n";
    for (int t = 0; t < ds.n; ++t) {
        out << t + 1 << "," << format_double(ds.y(t));
        for (int j = 0; j < ds.d; ++j) out << "," << format_double(ds.X(t, j));
        out << "\n";
    }
    finish(out, path);
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    strip_cr(line);
    const std::vector<std::string_view> header = split_fields(line);
    if (header.size() < 3 || header[0] != "t" || header[1] != "y")
        throw IoError(path + " line 1: expected header t,y,x1,...");
    const int d = static_cast<int>(header.size()) - 2;
    for (int j = 0; j < d; ++j) {
        const std::string want = "x" + std::to_string(j + 1);
        if (header[static_cast<std::size_t>(j) + 2] != want)
            throw IoError(path + " line 1: expected column '" + want + "'");
    }

    std::vector<double> ys;
    std::vector<double> xs;  // row-major n x d
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        const std::vector<std::string_view> f = split_fields(line);
        if (static_cast<int>(f.size()) != d + 2)
            throw IoError(path + " line " + std::to_string(lineno) + ": expected " +
                          std::to_string(d + 2) + " fields, got " + std::to_string(f.size()));
        long t = 0;
        const auto res = std::from_chars(f[0].data(), f[0].data() + f[0].size(), t);
        if (res.ec != std::errc() || res.ptr != f[0].data() + f[0].size() || t != lineno - 1)
            throw IoError(path + " line " + std::to_string(lineno) +
                          ": expected t=" + std::to_string(lineno - 1));
        ys.push_back(parse_double(f[1], path, lineno));
        for (int j = 0; j < d; ++j)
            xs.push_back(parse_double(f[static_cast<std::size_t>(j) + 2], path, lineno));
    }
    if (ys.empty()) throw IoError(path + ": no data rows");

    Dataset ds;
    ds.n = static_cast<int>(ys.size());
    ds.d = d;
    ds.y = Eigen::Map<Eigen::VectorXd>(ys.data(), ds.n);
    ds.X.resize(ds.n, d);
    for (int t = 0; t < ds.n; ++t)
        for (int j = 0; j < d; ++j) ds.X(t, j) = xs[static_cast<std::size_t>(t) * d + j];
    return ds;
}

void write_profile_csv(const std::string& path, int k_min, const std::vector<double>& profile) {
    std::ofstream out = open_out(path);
    out << "k,s_n\n";
    for (std::size_t i = 0; i < profile.size(); ++i)
        out << k_min + static_cast<int>(i) << "," << format_double(profile[i]) << "\n";
    finish(out, path);
}

void write_rate_csv(const std::string& path, const RateReport& report) {
    std::ofstream out = open_out(path);
    out << "n,metric,median,mean,stderr\n";
    for (const RateCell& c : report.cells)
        out << c.n << "," << c.metric << "," << format_double(c.median) << ","
            << format_double(c.mean) << "," << format_double(c.stderr_mean) << "\n";
    finish(out, path);
}

}  // namespace sbreak

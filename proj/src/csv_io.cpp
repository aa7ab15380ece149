#include "qsanov/csv_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace qsanov {

std::string format_matrix_csv(const Mat& m) {
    std::string out;
    char buf[96];
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", m(i, j).real(), m(i, j).imag());
            out += buf;
            if (j + 1 < m.cols()) out += ';';
        }
        out += '\n';
    }
    return out;
}

static double parse_double(const std::string& s, const std::string& origin, int line) {
    size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error(origin + ":" + std::to_string(line) + ": bad number '" + s + "'");
    }
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size())
        throw std::runtime_error(origin + ":" + std::to_string(line) + ": trailing junk in '" + s +
                                 "'");
    return v;
}

Mat parse_matrix_csv(const std::string& text, const std::string& origin) {
    std::vector<std::vector<Cplx>> rows;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<Cplx> row;
        std::istringstream ls(line);
        std::string entry;
        while (std::getline(ls, entry, ';')) {
            size_t comma = entry.find(',');
            if (comma == std::string::npos)
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": entry '" + entry + "' is not a re,im pair");
            double re = parse_double(entry.substr(0, comma), origin, lineno);
            double im = parse_double(entry.substr(comma + 1), origin, lineno);
            row.emplace_back(re, im);
        }
        if (!rows.empty() && row.size() != rows[0].size())
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": ragged row (expected " + std::to_string(rows[0].size()) +
                                     " entries, got " + std::to_string(row.size()) + ")");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(origin + ": empty matrix");
    Mat m(rows.size(), rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

Mat read_matrix_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open matrix file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_matrix_csv(ss.str(), path);
}

void write_matrix_csv(const std::string& path, const Mat& m) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write matrix file: " + path);
    f << format_matrix_csv(m);
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace qsanov

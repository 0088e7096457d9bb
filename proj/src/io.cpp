#include "rwg/io.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace rwg {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, std::initializer_list<std::string> header)
    : CsvWriter(path, std::vector<std::string>(header)) {}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : os_(path), path_(path), width_(header.size()) {
    if (!os_) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
}

void CsvWriter::row(std::initializer_list<CsvCell> cells) { row(std::vector<CsvCell>(cells)); }

void CsvWriter::row(const std::vector<CsvCell>& cells) {
    if (cells.size() != width_)
        throw std::logic_error(path_ + ": row has " + std::to_string(cells.size()) +
                               " cells, header has " + std::to_string(width_));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) os_ << ',';
        const CsvCell& c = cells[i];
        if (auto p = std::get_if<long long>(&c))
            os_ << *p;
        else if (auto d = std::get_if<double>(&c))
            os_ << format_double(*d);
        else
            os_ << std::get<std::string>(c);
    }
    os_ << '\n';
    ++rows_;
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw std::out_of_range("CSV has no column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error(path + ": empty CSV");
    t.header = split(line);
    while (std::getline(is, line))
        if (!line.empty()) t.rows.push_back(split(line));
    return t;
}

}  // namespace rwg

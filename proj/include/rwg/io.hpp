// io.hpp - CSV output at full round-trip precision
#pragma once

#include <fstream>
#include <initializer_list>
#include <string>
#include <variant>
#include <vector>

namespace rwg {

using CsvCell = std::variant<long long, double, std::string>;

class CsvWriter {
public:
    CsvWriter(const std::string& path, std::initializer_list<std::string> header);
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(std::initializer_list<CsvCell> cells);
    void row(const std::vector<CsvCell>& cells);
    int rows() const { return rows_; }

private:
    std::ofstream os_;
    std::string path_;
    std::size_t width_;
    int rows_ = 0;
};

// 17 significant digits, shortest exponent form
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const;  // throws if absent
};

CsvTable read_csv(const std::string& path);

}  // namespace rwg

#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace reprocs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<int>;  // ascending, 0-based

// Formats a double with 17 significant digits so that text round trips are
// bit exact for binary64.
std::string format_double(double x);

// Text matrix exchange format: header line "rows cols", then row-major
// whitespace-separated decimals.
void write_matrix(const std::string& path, const Matrix& m);
Matrix read_matrix(const std::string& path);

// Flat key -> value text ("key = value" lines, '#' comments, blank lines
// ignored). Section headers are not part of this low-level format; the
// harness layers "[section]" on top (see harness.hpp).
void write_keyvalues(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& kv);
std::map<std::string, std::string> read_keyvalues(const std::string& path);

// Support sequence file: one line per frame, "t,i1,i2,...". Indices are
// 0-based; an empty support writes just "t".
void write_supports(const std::string& path, const std::vector<IndexSet>& supports,
                    int t_begin);
std::vector<IndexSet> read_supports(const std::string& path, int* t_begin = nullptr);

// Minimal CSV writer wrapper that keeps all formatting deterministic.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& cells);

    static std::string num(double x);
    static std::string num(int x);
    static std::string num(long long x);

private:
    struct Impl;
    Impl* impl_;
};

std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace reprocs

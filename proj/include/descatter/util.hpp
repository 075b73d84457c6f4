#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace descatter {

// Deterministic CSV output: LF endings, snprintf-stable number formatting,
// config hash recorded as a leading comment.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, uint64_t config_hash, const std::string& header);
    void raw(const std::string& line);
    void comment(const std::string& text);

    class Row {
    public:
        explicit Row(CsvWriter& w) : w_(w) {}
        Row& col(const std::string& s);
        Row& col(long long v);
        Row& col(int v) { return col(static_cast<long long>(v)); }
        Row& col(double v);
        ~Row();

    private:
        CsvWriter& w_;
        std::string line_;
        bool first_ = true;
    };
    Row row() { return Row(*this); }

private:
    std::ofstream f_;
};

std::string format_double(double v);

// index-parallel map with a bounded worker pool; results must be written into
// preallocated per-index slots so scheduling never shows in the output
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// five-number summary {min, q1, median, q3, max} using lower medians
std::vector<double> five_number_summary(std::vector<double> v);
double lower_median(std::vector<double> v);

}  // namespace descatter

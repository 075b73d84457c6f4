#include "descatter/util.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "descatter/errors.hpp"

namespace descatter {

CsvWriter::CsvWriter(const std::filesystem::path& path, uint64_t config_hash,
                     const std::string& header) {
    const auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    f_.open(path, std::ios::binary);  // binary keeps \n on every platform
    if (!f_) throw ConfigError("cannot write " + path.string());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash));
    f_ << "# config=" << buf << "\n";
    f_ << header << "\n";
}

void CsvWriter::raw(const std::string& line) { f_ << line << "\n"; }

void CsvWriter::comment(const std::string& text) { f_ << "# " << text << "\n"; }

CsvWriter::Row& CsvWriter::Row::col(const std::string& s) {
    if (!first_) line_ += ',';
    first_ = false;
    line_ += s;
    return *this;
}

CsvWriter::Row& CsvWriter::Row::col(long long v) { return col(std::to_string(v)); }

CsvWriter::Row& CsvWriter::Row::col(double v) { return col(format_double(v)); }

CsvWriter::Row::~Row() { w_.raw(line_); }

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    const int workers = std::max(1, std::min(threads, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double lower_median(std::vector<double> v) {
    if (v.empty()) throw ConfigError("median of an empty sample");
    const size_t k = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[k];
}

std::vector<double> five_number_summary(std::vector<double> v) {
    if (v.empty()) throw ConfigError("summary of an empty sample");
    std::sort(v.begin(), v.end());
    auto lower_med = [&](size_t lo, size_t hi) {  // inclusive bounds
        return v[lo + (hi - lo) / 2];
    };
    const size_t n = v.size();
    const size_t mid = (n - 1) / 2;
    // quartiles as lower medians of the halves (median excluded when n is odd)
    const size_t lo_hi = (n == 1) ? 0 : (n % 2 ? mid - 1 : mid);
    const size_t hi_lo = (n == 1) ? 0 : (n % 2 ? mid + 1 : mid + 1);
    return {v.front(), lower_med(0, lo_hi), v[mid], lower_med(hi_lo, n - 1), v.back()};
}

}  // namespace descatter

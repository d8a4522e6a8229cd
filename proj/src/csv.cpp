#include "gapfolio/csv.hpp"

#include <cmath>
#include <cstdio>

#include "gapfolio/errors.hpp"

namespace gapfolio {

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& header,
                     const std::string& config_hash)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw Error::io("FileUnwritable", "cannot open " + path.string());
    out_ << "# config_hash=" << config_hash << "\n" << header << "\n";
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
        // destructor swallows; call close() explicitly to observe failures
    }
}

std::string CsvWriter::fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void CsvWriter::row(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out_ << ',';
        out_ << fmt(values[i]);
    }
    out_ << '\n';
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << '\n'; }

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    out_.flush();
    if (!out_) throw Error::io("FileUnwritable", "write failure on " + path_.string());
    out_.close();
}

}  // namespace gapfolio

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <fstream>

namespace gapfolio {

// CSV emitter contract: first line "# config_hash=<key>", second line the
// header, then rows formatted with "%.12g" — byte-identical across reruns of
// the same configuration.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& header,
              const std::string& config_hash);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(std::span<const double> values);
    void raw_row(const std::string& line);  // preformatted (mixed-type rows)
    void close();                           // throws io "FileUnwritable" on failure

    static std::string fmt(double v);

private:
    std::ofstream out_;
    std::filesystem::path path_;
    bool closed_ = false;
};

}  // namespace gapfolio

#ifndef NMC_CSV_HPP
#define NMC_CSV_HPP

#include <string>
#include <vector>

#include "nmc/types.hpp"

namespace nmc {

// Formats with 17 significant digits, enough to round-trip a double exactly.
std::string format_double(double v);

// Row-oriented CSV writer.  Writes a header once, then rows of mixed
// string/numeric cells.  If the path ends in ".gz" the stream is
// zlib-compressed.  Values are '\n'-terminated, comma-separated, never quoted
// (callers must not put commas in string cells).
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();

  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void header(const std::vector<std::string>& names);

  void begin_row();
  void cell(const std::string& v);
  void cell(double v);
  void cell(Index v);
  void end_row();

  // Convenience: one full numeric row.
  void row(const std::vector<double>& values);

  void close();

 private:
  void put(const std::string& s);

  void* file_ = nullptr;  // FILE* or gzFile depending on compressed_
  bool compressed_ = false;
  bool first_cell_ = true;
  Index n_cols_ = -1;
  Index cells_in_row_ = 0;
  std::string path_;
};

}  // namespace nmc

#endif  // NMC_CSV_HPP

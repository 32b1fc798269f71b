#include "nmc/csv.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>

namespace nmc {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

CsvWriter::CsvWriter(const std::string& path) : path_(path) {
  compressed_ = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  if (compressed_) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw InvalidInput("cannot open for writing: " + path);
    file_ = f;
  } else {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw InvalidInput("cannot open for writing: " + path);
    file_ = f;
  }
}

CsvWriter::~CsvWriter() {
  try {
    close();
  } catch (...) {
    // destructor must not throw; an explicit close() reports errors
  }
}

void CsvWriter::close() {
  if (!file_) return;
  int rc;
  if (compressed_) {
    rc = gzclose(static_cast<gzFile>(file_));
    file_ = nullptr;
    if (rc != Z_OK) throw std::runtime_error("gzclose failed: " + path_);
  } else {
    rc = std::fclose(static_cast<std::FILE*>(file_));
    file_ = nullptr;
    if (rc != 0) throw std::runtime_error("fclose failed: " + path_);
  }
}

void CsvWriter::put(const std::string& s) {
  if (!file_) throw std::runtime_error("write after close: " + path_);
  if (compressed_) {
    if (gzwrite(static_cast<gzFile>(file_), s.data(),
                static_cast<unsigned>(s.size())) != static_cast<int>(s.size()))
      throw std::runtime_error("gzwrite failed: " + path_);
  } else {
    if (std::fwrite(s.data(), 1, s.size(), static_cast<std::FILE*>(file_)) !=
        s.size())
      throw std::runtime_error("fwrite failed: " + path_);
  }
}

void CsvWriter::header(const std::vector<std::string>& names) {
  if (names.empty()) throw InvalidInput("empty CSV header");
  n_cols_ = static_cast<Index>(names.size());
  std::string line;
  for (size_t i = 0; i < names.size(); ++i) {
    if (i) line += ',';
    line += names[i];
  }
  line += '\n';
  put(line);
}

void CsvWriter::begin_row() {
  first_cell_ = true;
  cells_in_row_ = 0;
}

void CsvWriter::cell(const std::string& v) {
  std::string s;
  if (!first_cell_) s += ',';
  s += v;
  put(s);
  first_cell_ = false;
  ++cells_in_row_;
}

void CsvWriter::cell(double v) { cell(format_double(v)); }

void CsvWriter::cell(Index v) { cell(std::to_string(static_cast<long long>(v))); }

void CsvWriter::end_row() {
  if (n_cols_ >= 0 && cells_in_row_ != n_cols_)
    throw std::runtime_error("CSV row has " + std::to_string(cells_in_row_) +
                             " cells, header has " + std::to_string(n_cols_));
  put("\n");
}

void CsvWriter::row(const std::vector<double>& values) {
  begin_row();
  for (double v : values) cell(v);
  end_row();
}

}  // namespace nmc

#ifndef OBO_IO_HPP
#define OBO_IO_HPP

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "obo/common.hpp"
#include "obo/metrics.hpp"

namespace obo {

// Shortest representation that round-trips the exact double, so repeated
// runs serialize bit-identically.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string format_long(long x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// Write via a temporary in the same directory, then rename into place.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline const char* kRunCsvHeader =
    "t,algo,seed,regret_inc,cum_regret,win_regret_inc,cum_win_regret,"
    "inner_iters,grad_queries,hvp_queries,v_inc,h2_inc,e2_inc,p_inc";

inline std::string run_csv(const MetricsLedger& ledger,
                           const std::string& algo, std::uint64_t seed) {
  std::string out(kRunCsvHeader);
  out += '\n';
  const std::string seed_str = format_long(static_cast<long>(seed));
  for (const LedgerRow& r : ledger.rows()) {
    out += format_long(r.t);
    out += ',';
    out += algo;
    out += ',';
    out += seed_str;
    out += ',';
    out += format_double(r.regret_inc);
    out += ',';
    out += format_double(r.cum_regret);
    out += ',';
    out += format_double(r.win_regret_inc);
    out += ',';
    out += format_double(r.cum_win_regret);
    out += ',';
    out += format_long(r.inner_iters);
    out += ',';
    out += format_long(r.grad_queries);
    out += ',';
    out += format_long(r.hvp_queries);
    out += ',';
    out += format_double(r.v_inc);
    out += ',';
    out += format_double(r.h2_inc);
    out += ',';
    out += format_double(r.e2_inc);
    out += ',';
    out += format_double(r.p_inc);
    out += '\n';
  }
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace obo

#endif  // OBO_IO_HPP

#include "qpkr/io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "qpkr/errors.hpp"
#include "serial.hpp"

namespace qpkr::io {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ConfigError("not a number: '" + s + "'");
  return v;
}

namespace {

std::string hex(const unsigned char* md, unsigned int len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(digits[md[i] >> 4]);
    out.push_back(digits[md[i] & 0xf]);
  }
  return out;
}

}  // namespace

std::string sha256_bytes(const void* data, std::size_t n) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, n, md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  return hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open for hashing: " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("sha256 context allocation failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  return hex(md, len);
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write: " + tmp.string());
    out << content;
    if (!out) throw Error("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_observable_csv(const std::filesystem::path& path,
                          const engine::EnsembleResult& series) {
  const std::size_t n = series.times.size();
  if (series.p2.size() != n || series.p2_err.size() != n ||
      series.pi0.size() != n || series.pi0_err.size() != n)
    throw ConfigError("observable series: ragged columns");
  std::string text = "t,p2,p2_err,pi0,pi0_err\n";
  for (std::size_t i = 0; i < n; ++i) {
    text += std::to_string(series.times[i]);
    text += ',';
    text += g17(series.p2[i]);
    text += ',';
    text += g17(series.p2_err[i]);
    text += ',';
    text += g17(series.pi0[i]);
    text += ',';
    text += g17(series.pi0_err[i]);
    text += '\n';
  }
  write_text_file(path, text);
}

engine::EnsembleResult read_observable_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "t,p2,p2_err,pi0,pi0_err")
    throw ConfigError("unexpected header in " + path.string());
  engine::EnsembleResult out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t pos = 0; pos <= line.size(); ++pos) {
      if (pos == line.size() || line[pos] == ',') {
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
      }
    }
    if (cells.size() != 5)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 5 columns");
    out.times.push_back(static_cast<long>(parse_double(cells[0])));
    out.p2.push_back(parse_double(cells[1]));
    out.p2_err.push_back(parse_double(cells[2]));
    out.pi0.push_back(parse_double(cells[3]));
    out.pi0_err.push_back(parse_double(cells[4]));
  }
  if (out.times.empty())
    throw ConfigError("no data rows in " + path.string());
  return out;
}

void write_table_csv(const std::filesystem::path& path,
                     const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::string text;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text += ',';
    text += header[i];
  }
  text += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw ConfigError("table row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) text += ',';
      text += row[i];
    }
    text += '\n';
  }
  write_text_file(path, text);
}

std::string parameter_set_to_json(const model::ParameterSet& ps) {
  return detail::parameter_set_to_json(ps).dump(2) + "\n";
}

model::ParameterSet parameter_set_from_json(const std::string& text) {
  try {
    return detail::parameter_set_from_json(detail::json::parse(text));
  } catch (const detail::json::exception& e) {
    throw ConfigError(std::string("parameter set JSON: ") + e.what());
  }
}

}  // namespace qpkr::io

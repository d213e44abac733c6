#include "pfmix/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string_view>
#include <vector>

namespace pfmix {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, std::size_t col, const std::string& what) {
  std::string msg = source + ":" + std::to_string(line);
  if (col > 0) msg += ": column " + std::to_string(col);
  throw DataError(msg + ": " + what);
}

double parse_real(std::string_view tok, const std::string& source, std::size_t line, std::size_t col) {
  tok = trim(tok);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
    fail(source, line, col, "expected a number, got '" + std::string(tok) + "'");
  if (!std::isfinite(v)) fail(source, line, col, "non-finite value");
  return v;
}

long long parse_int(std::string_view tok, const std::string& source, std::size_t line, std::size_t col) {
  tok = trim(tok);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
    fail(source, line, col, "expected an integer, got '" + std::string(tok) + "'");
  return v;
}

struct Header {
  std::size_t lead = 0;  // 2 for sequence files
  std::size_t dims = 0;
  bool labeled = false;
};

Header parse_header(std::string_view line, bool sequence, const std::string& source) {
  const auto f = split_fields(line);
  Header h;
  h.lead = sequence ? 2 : 0;
  if (sequence && (f.size() < 2 || trim(f[0]) != "seq_id" || trim(f[1]) != "t"))
    fail(source, 1, 0, "sequence data must start with columns seq_id,t");
  std::size_t n = f.size() - h.lead;
  if (n > 0 && trim(f.back()) == "y") {
    h.labeled = true;
    --n;
  }
  for (std::size_t d = 0; d < n; ++d)
    if (trim(f[h.lead + d]) != "x" + std::to_string(d))
      fail(source, 1, h.lead + d + 1, "expected header 'x" + std::to_string(d) + "', got '" +
                                          std::string(trim(f[h.lead + d])) + "'");
  if (n == 0) fail(source, 1, 0, "no feature columns");
  h.dims = n;
  return h;
}

struct Rows {
  std::vector<double> x;
  std::vector<int> y;
  std::vector<long long> seq;
  std::vector<long long> t;
  std::size_t count = 0;
};

Rows read_rows(std::istream& is, const Header& h, const std::string& source) {
  Rows r;
  std::string line;
  std::size_t lineno = 1;
  const std::size_t width = h.lead + h.dims + (h.labeled ? 1 : 0);
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != width)
      fail(source, lineno, 0, "expected " + std::to_string(width) + " fields, found " + std::to_string(f.size()));
    if (h.lead) {
      r.seq.push_back(parse_int(f[0], source, lineno, 1));
      r.t.push_back(parse_int(f[1], source, lineno, 2));
    }
    for (std::size_t d = 0; d < h.dims; ++d) r.x.push_back(parse_real(f[h.lead + d], source, lineno, h.lead + d + 1));
    if (h.labeled) {
      const long long y = parse_int(f[width - 1], source, lineno, width);
      if (y < 0 || y > 1000000) fail(source, lineno, width, "label must be a nonnegative class index");
      r.y.push_back(static_cast<int>(y));
    }
    ++r.count;
  }
  if (r.count == 0) fail(source, lineno, 0, "no data rows");
  return r;
}

Matrix to_matrix(const Rows& r, std::size_t dims) {
  Matrix X(static_cast<Eigen::Index>(r.count), static_cast<Eigen::Index>(dims));
  std::copy(r.x.begin(), r.x.end(), X.data());
  return X;
}

void write_header(std::ostream& os, std::size_t dims, bool labeled, bool sequence) {
  if (sequence) os << "seq_id,t,";
  for (std::size_t d = 0; d < dims; ++d) os << (d ? "," : "") << 'x' << d;
  if (labeled) os << ",y";
  os << '\n';
}

void write_row(std::ostream& os, const Matrix& X, Eigen::Index r, const std::vector<int>& y) {
  for (Eigen::Index d = 0; d < X.cols(); ++d) os << (d ? "," : "") << format_double(X(r, d));
  if (!y.empty()) os << ',' << y[static_cast<std::size_t>(r)];
  os << '\n';
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& os, const Dataset& data) {
  write_header(os, data.dims(), data.labeled(), false);
  for (Eigen::Index r = 0; r < data.X.rows(); ++r) write_row(os, data.X, r, data.y);
}

void write_csv(std::ostream& os, const SequenceDataset& data) {
  write_header(os, data.dims(), data.labeled(), true);
  for (std::size_t n = 0; n < data.num_sequences(); ++n)
    for (std::size_t t = 0; t < data.length(n); ++t) {
      os << n << ',' << t << ',';
      write_row(os, data.X, static_cast<Eigen::Index>(data.offsets[n] + t), data.y);
    }
}

Dataset read_dataset_csv(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) fail(source, 1, 0, "empty file");
  if (line.rfind("seq_id", 0) == 0) fail(source, 1, 0, "sequence-formatted data where flat data was expected");
  const auto h = parse_header(line, false, source);
  const auto rows = read_rows(is, h, source);
  Dataset d;
  d.X = to_matrix(rows, h.dims);
  d.y = rows.y;
  d.n_classes = d.y.empty() ? 0 : infer_num_classes(d.y);
  return d;
}

SequenceDataset read_sequence_csv(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) fail(source, 1, 0, "empty file");
  const auto h = parse_header(line, true, source);
  const auto rows = read_rows(is, h, source);
  SequenceDataset d;
  d.X = to_matrix(rows, h.dims);
  d.y = rows.y;
  d.n_classes = d.y.empty() ? 0 : infer_num_classes(d.y);
  d.offsets.assign(1, 0);
  std::set<long long> seen;
  for (std::size_t i = 0; i < rows.count; ++i) {
    const bool starts = i == 0 || rows.seq[i] != rows.seq[i - 1];
    if (starts) {
      if (!seen.insert(rows.seq[i]).second)
        fail(source, i + 2, 1, "rows of sequence " + std::to_string(rows.seq[i]) + " are not contiguous");
      if (i > 0) d.offsets.push_back(i);
    }
    const std::size_t expected_t = i - d.offsets.back();
    if (rows.t[i] != static_cast<long long>(expected_t))
      fail(source, i + 2, 2, "expected t = " + std::to_string(expected_t));
  }
  d.offsets.push_back(rows.count);
  return d;
}

void save_csv(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_out(path);
  write_csv(out, data);
  if (!out) throw IoError("write failed: " + path.string());
}

void save_csv(const std::filesystem::path& path, const SequenceDataset& data) {
  auto out = open_out(path);
  write_csv(out, data);
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset_csv(in, path.string());
}

SequenceDataset load_sequence_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_sequence_csv(in, path.string());
}

bool is_sequence_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  return line.rfind("seq_id,", 0) == 0;
}

}  // namespace pfmix

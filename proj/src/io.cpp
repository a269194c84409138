#include "uos/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <system_error>

namespace uos {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kMatrixMagic = "UOSM0001";
constexpr std::string_view kDictMagic = "UOSD0001";

[[noreturn]] void format_error(const std::string& source, const std::string& what) {
  throw Error(ErrorCode::Format, source + ": " + what);
}

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
  }
  return v;
}

class ByteWriter {
 public:
  void raw(std::string_view s) { out_.append(s); }
  void u32(std::uint32_t v) { put(byteswap_if_big(v)); }
  void f64(double v) { put(byteswap_if_big(v)); }
  std::string take() { return std::move(out_); }

 private:
  template <typename T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::uint32_t u32() { return byteswap_if_big(get<std::uint32_t>()); }
  double f64() { return byteswap_if_big(get<double>()); }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) format_error(source_, "truncated binary data");
  }
  void need_doubles(std::size_t rows, std::size_t cols) const {
    const std::size_t left = (bytes_.size() - pos_) / sizeof(double);
    if (rows != 0 && cols > left / rows) format_error(source_, "truncated binary data");
  }
  void expect_end() const {
    if (pos_ != bytes_.size()) format_error(source_, "trailing bytes after binary data");
  }

 private:
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.size() >= prefix.size() && std::string_view(s).substr(0, prefix.size()) == prefix;
}

std::uint32_t checked_u32(Eigen::Index v, const char* what) {
  if (v < 0 || v > std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

// Whitespace tokenizer over text formats; reports line numbers.
class Tokens {
 public:
  Tokens(const std::string& text, std::string source) : source_(std::move(source)) {
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      std::istringstream words(line);
      std::string w;
      while (words >> w) items_.push_back({w, number});
    }
  }

  bool done() const { return next_ == items_.size(); }

  double real() {
    const auto& [w, line] = take();
    double v = 0.0;
    const auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || end != w.data() + w.size())
      format_error(source_, "line " + std::to_string(line) + ": '" + w + "' is not a number");
    return v;
  }

  long long integer() {
    const auto& [w, line] = take();
    long long v = 0;
    const auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || end != w.data() + w.size())
      format_error(source_, "line " + std::to_string(line) + ": '" + w + "' is not an integer");
    return v;
  }

  Eigen::Index count(const char* what) {
    const long long v = integer();
    if (v < 0 || v > std::numeric_limits<std::uint32_t>::max())
      format_error(source_, std::string(what) + " out of range");
    return static_cast<Eigen::Index>(v);
  }

  void expect_end() const {
    if (!done())
      format_error(source_, "unexpected extra value on line " + std::to_string(items_[next_].second));
  }

 private:
  const std::pair<std::string, int>& take() {
    if (done()) format_error(source_, "unexpected end of input");
    return items_[next_++];
  }
  std::vector<std::pair<std::string, int>> items_;
  std::size_t next_ = 0;
  std::string source_;
};

void append_row(std::string& out, const double* values, Eigen::Index n, Eigen::Index stride) {
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j) out += ' ';
    out += format_double(values[j * stride]);
  }
  out += '\n';
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error(ErrorCode::Format, "cannot format number");
  return std::string(buf, end);
}

FileFormat parse_file_format(const std::string& name) {
  if (name == "binary") return FileFormat::Binary;
  if (name == "text") return FileFormat::Text;
  throw Error(ErrorCode::InvalidArgument, "unknown format '" + name + "' (expected binary or text)");
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::random_device rd;
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignore;
      fs::remove(tmp, ignore);
      throw Error(ErrorCode::Io, "write to " + tmp.string() + " failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    throw Error(ErrorCode::Io, "cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "read from " + path.string() + " failed");
  return ss.str();
}

std::string encode_matrix(const RealMatrix& m, FileFormat format) {
  if (format == FileFormat::Binary) {
    ByteWriter w;
    w.raw(kMatrixMagic);
    w.u32(checked_u32(m.rows(), "row count"));
    w.u32(checked_u32(m.cols(), "column count"));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
    return w.take();
  }
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) append_row(out, m.row(i).data(), m.cols(), 1);
  return out;
}

RealMatrix decode_matrix(const std::string& bytes, const std::string& source) {
  if (starts_with(bytes, kMatrixMagic)) {
    ByteReader r(bytes, source);
    r.skip(kMatrixMagic.size());
    const Eigen::Index rows = r.u32();
    const Eigen::Index cols = r.u32();
    r.need_doubles(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    RealMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.f64();
    r.expect_end();
    return m;
  }
  Tokens t(bytes, source);
  const Eigen::Index rows = t.count("row count");
  const Eigen::Index cols = t.count("column count");
  RealMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t.real();
  t.expect_end();
  return m;
}

void write_matrix(const fs::path& path, const RealMatrix& m, FileFormat format) {
  write_file_atomic(path, encode_matrix(m, format));
}

RealMatrix read_matrix(const fs::path& path) { return decode_matrix(read_file(path), path.string()); }

std::string encode_dictionary(const GroupedDictionary& d, FileFormat format) {
  const AtomMatrix& a = d.atoms();
  const auto sizes = d.layout().sizes();
  if (format == FileFormat::Binary) {
    ByteWriter w;
    w.raw(kDictMagic);
    w.u32(checked_u32(a.rows(), "dimension"));
    w.u32(checked_u32(a.cols(), "atom count"));
    w.u32(checked_u32(static_cast<Eigen::Index>(sizes.size()), "group count"));
    for (Eigen::Index s : sizes) w.u32(checked_u32(s, "group size"));
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i) w.f64(a(i, j));
    return w.take();
  }
  std::string out = std::to_string(a.rows()) + " " + std::to_string(a.cols()) + " " +
                    std::to_string(sizes.size()) + "\n";
  for (std::size_t g = 0; g < sizes.size(); ++g) out += (g ? " " : "") + std::to_string(sizes[g]);
  out += '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i) append_row(out, a.data() + i, a.cols(), a.rows());
  return out;
}

GroupedDictionary decode_dictionary(const std::string& bytes, const std::string& source) {
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  std::vector<Eigen::Index> sizes;
  AtomMatrix atoms;
  if (starts_with(bytes, kDictMagic)) {
    ByteReader r(bytes, source);
    r.skip(kDictMagic.size());
    m = r.u32();
    n = r.u32();
    const std::uint32_t groups = r.u32();
    r.need(static_cast<std::size_t>(groups) * 4);
    for (std::uint32_t g = 0; g < groups; ++g) sizes.push_back(r.u32());
    r.need_doubles(static_cast<std::size_t>(m), static_cast<std::size_t>(n));
    atoms.resize(m, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < m; ++i) atoms(i, j) = r.f64();
    r.expect_end();
  } else {
    Tokens t(bytes, source);
    m = t.count("dimension");
    n = t.count("atom count");
    const Eigen::Index groups = t.count("group count");
    for (Eigen::Index g = 0; g < groups; ++g) sizes.push_back(t.count("group size"));
    atoms.resize(m, n);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < n; ++j) atoms(i, j) = t.real();
    t.expect_end();
  }
  Eigen::Index total = 0;
  for (Eigen::Index s : sizes) total += s;
  if (total != n) format_error(source, "group sizes add up to " + std::to_string(total) + ", not " + std::to_string(n));
  return GroupedDictionary(std::move(atoms), GroupLayout::from_sizes(sizes));
}

void write_dictionary(const fs::path& path, const GroupedDictionary& d, FileFormat format) {
  write_file_atomic(path, encode_dictionary(d, format));
}

GroupedDictionary read_dictionary(const fs::path& path) {
  return decode_dictionary(read_file(path), path.string());
}

ClassAlignment parse_alignment(const std::string& text, int num_classes, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<int> labels;
  int number = 0;
  int top = -1;
  while (std::getline(in, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string_view w(line.data() + first, last - first + 1);
    int v = 0;
    const auto [end, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || end != w.data() + w.size())
      format_error(source, "line " + std::to_string(number) + ": '" + std::string(w) + "' is not a class index");
    if (v < 0) throw Error(ErrorCode::ClassOutOfRange, source + ": line " + std::to_string(number) + " has a negative class");
    labels.push_back(v);
    top = std::max(top, v);
  }
  return ClassAlignment(std::move(labels), num_classes > 0 ? num_classes : top + 1);
}

std::string format_alignment(const ClassAlignment& align) {
  std::string out;
  for (int l : align.labels()) out += std::to_string(l) + "\n";
  return out;
}

void write_alignment(const fs::path& path, const ClassAlignment& align) {
  write_file_atomic(path, format_alignment(align));
}

ClassAlignment read_alignment(const fs::path& path, int num_classes) {
  return parse_alignment(read_file(path), num_classes, path.string());
}

TransitionModel parse_transitions(const std::string& text, const std::string& source) {
  Tokens t(text, source);
  const Eigen::Index n = t.count("state count");
  if (n < 1) format_error(source, "state count must be positive");
  Eigen::MatrixXd trans(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) trans(i, j) = t.real();
  RealVector initial(n);
  for (Eigen::Index i = 0; i < n; ++i) initial[i] = t.real();
  t.expect_end();
  return TransitionModel(std::move(trans), std::move(initial));
}

std::string format_transitions(const TransitionModel& tm) {
  const Eigen::Index n = tm.states();
  std::string out = std::to_string(n) + "\n";
  const Eigen::MatrixXd& a = tm.transitions();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out += format_double(a(i, j)) + (j + 1 < n ? " " : "\n");
  append_row(out, tm.initial().data(), n, 1);
  return out;
}

void write_transitions(const fs::path& path, const TransitionModel& tm) {
  write_file_atomic(path, format_transitions(tm));
}

TransitionModel read_transitions(const fs::path& path) {
  return parse_transitions(read_file(path), path.string());
}

}  // namespace uos

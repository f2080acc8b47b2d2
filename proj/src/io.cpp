#include "layercard/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "layercard/errors.hpp"
#include "layercard/rng.hpp"

namespace layercard {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void escape_string(const std::string& s, std::string& out) {
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
}

void dump_value(const Json& j, int indent, int depth, std::string& out) {
  const auto newline = [&](int d) {
    if (indent >= 0) {
      out.push_back('\n');
      out.append(static_cast<std::size_t>(indent * d), ' ');
    }
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out.push_back('{');
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        escape_string(it.key(), out);
        out.push_back(':');
        if (indent >= 0) out.push_back(' ');
        dump_value(it.value(), indent, depth + 1, out);
      }
      newline(depth);
      out.push_back('}');
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out.push_back('[');
      bool first = true;
      for (const Json& item : j) {
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        dump_value(item, indent, depth + 1, out);
      }
      newline(depth);
      out.push_back(']');
      return;
    }
    case Json::value_t::string:
      escape_string(j.get_ref<const std::string&>(), out);
      return;
    case Json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      return;
    case Json::value_t::number_integer:
      out += std::to_string(j.get<std::int64_t>());
      return;
    case Json::value_t::number_unsigned:
      out += std::to_string(j.get<std::uint64_t>());
      return;
    case Json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    case Json::value_t::null:
    default:
      out += "null";
      return;
  }
}

}  // namespace

std::string canonical_dump(const Json& j, int indent) {
  std::string out;
  dump_value(j, indent, 0, out);
  if (indent >= 0) out.push_back('\n');
  return out;
}

std::string canonical_id(const Json& j) {
  const std::uint64_t h = fnv1a64(canonical_dump(j, -1));
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= len; i += 3) {
    const std::uint32_t v = (static_cast<std::uint32_t>(data[i]) << 16) |
                            (static_cast<std::uint32_t>(data[i + 1]) << 8) |
                            static_cast<std::uint32_t>(data[i + 2]);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
  }
  if (i + 1 == len) {
    const std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == len) {
    const std::uint32_t v = (static_cast<std::uint32_t>(data[i]) << 16) |
                            (static_cast<std::uint32_t>(data[i + 1]) << 8);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::string base64_encode(const std::vector<std::uint8_t>& data) {
  return base64_encode(data.data(), data.size());
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw IoError("base64: length must be a multiple of 4");
  std::size_t padding = 0;
  while (padding < 2 && padding < text.size() && text[text.size() - 1 - padding] == '=') {
    ++padding;
  }
  const std::string_view body = text.substr(0, text.size() - padding);
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : body) {
    const int v = b64_value(c);
    if (v < 0) throw IoError("base64: invalid character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  if (bits >= 6 || (acc & ((1u << bits) - 1)) != 0) {
    throw IoError("base64: dangling bits");
  }
  return out;
}

std::string encode_doubles(const double* data, std::size_t count) {
  std::vector<std::uint8_t> bytes(count * 8);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], 8);
    for (int b = 0; b < 8; ++b) {
      bytes[i * 8 + static_cast<std::size_t>(b)] =
          static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff);
    }
  }
  return base64_encode(bytes.data(), bytes.size());
}

std::string encode_doubles(const std::vector<double>& data) {
  return encode_doubles(data.data(), data.size());
}

std::vector<double> decode_doubles(std::string_view base64_text) {
  const std::vector<std::uint8_t> bytes = base64_decode(base64_text);
  if (bytes.size() % 8 != 0) throw IoError("weight blob length is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) {
      bits = (bits << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
    }
    std::memcpy(&out[i], &bits, 8);
  }
  return out;
}

Json matrix_to_json(const SymMatrix& m) {
  Json j;
  j["dim"] = m.dim();
  Json data = Json::array();
  for (Index i = 0; i < m.dim(); ++i) {
    for (Index k = 0; k < m.dim(); ++k) data.push_back(m(i, k));
  }
  j["data"] = std::move(data);
  return j;
}

SymMatrix matrix_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("data")) {
    throw IoError("matrix JSON requires fields dim and data");
  }
  const Index n = j.at("dim").get<Index>();
  const auto& data = j.at("data");
  if (!data.is_array() || static_cast<Index>(data.size()) != n * n) {
    throw IoError("matrix JSON: data length != dim^2");
  }
  Matrix m(n, n);
  Index pos = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < n; ++k) m(i, k) = data.at(static_cast<std::size_t>(pos++)).get<double>();
  }
  return SymMatrix(m);
}

Json dense_to_json(const Matrix& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  Json data = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  }
  j["data"] = std::move(data);
  return j;
}

Matrix dense_from_json(const Json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != rows * cols) {
    throw IoError("dense matrix JSON: data length != rows*cols");
  }
  Matrix m(rows, cols);
  Index pos = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index k = 0; k < cols; ++k) m(i, k) = data.at(static_cast<std::size_t>(pos++)).get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  Json j;
  j["vec"] = std::move(arr);
  return j;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("vec") || !j.at("vec").is_array()) {
    throw IoError("vector JSON requires field vec");
  }
  const auto& arr = j.at("vec");
  Vector v(static_cast<Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Index>(i)) = arr.at(i).get<double>();
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path);
}

Json read_json(const std::string& path) {
  const std::string text = read_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw IoError("invalid JSON in " + path);
  return j;
}

std::string csv_dump(const Csv& csv) {
  std::string out;
  for (std::size_t i = 0; i < csv.header.size(); ++i) {
    if (i) out.push_back(',');
    out += csv.header[i];
  }
  out.push_back('\n');
  for (const auto& row : csv.rows) {
    if (row.size() != csv.header.size()) throw IoError("csv row width != header width");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(',');
      out += row[i];
    }
    out.push_back('\n');
  }
  return out;
}

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

}  // namespace

Csv csv_parse(std::string_view text) {
  Csv csv;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      if (first) {
        csv.header = split_line(line);
        first = false;
      } else {
        auto cells = split_line(line);
        if (cells.size() != csv.header.size()) {
          throw IoError("csv row width != header width");
        }
        csv.rows.push_back(std::move(cells));
      }
    }
    pos = end + 1;
  }
  if (first) throw IoError("csv: missing header row");
  return csv;
}

double csv_cell_double(const Csv& csv, std::size_t row, std::string_view column) {
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (csv.header[c] == column) {
      if (row >= csv.rows.size()) throw IoError("csv row index out of range");
      const std::string& cell = csv.rows[row][c];
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || errno == ERANGE) throw IoError("csv: non-numeric cell " + cell);
      return v;
    }
  }
  throw IoError("csv: unknown column " + std::string(column));
}

}  // namespace layercard

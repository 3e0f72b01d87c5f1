#include "ragcap/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "ragcap/common.hpp"

namespace ragcap {

namespace {

constexpr char kEmbeddingMagic[9] = "RAGCAPVE";

template <typename T>
void write_raw(std::ostream& out, T v) {
  // Raw IEEE-754 / two's-complement bytes; host is little-endian.
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) {
    throw DataError("unexpected end of binary stream");
  }
  return v;
}

}  // namespace

void write_u8(std::ostream& out, std::uint8_t v) { write_raw(out, v); }
void write_u32(std::ostream& out, std::uint32_t v) { write_raw(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_raw(out, v); }
void write_i64(std::ostream& out, std::int64_t v) { write_raw(out, v); }
void write_f32(std::ostream& out, float v) { write_raw(out, v); }
void write_f64(std::ostream& out, double v) { write_raw(out, v); }

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_bytes(std::ostream& out, const void* data, std::size_t len) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

std::uint8_t read_u8(std::istream& in) { return read_raw<std::uint8_t>(in); }
std::uint32_t read_u32(std::istream& in) { return read_raw<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_raw<std::uint64_t>(in); }
std::int64_t read_i64(std::istream& in) { return read_raw<std::int64_t>(in); }
float read_f32(std::istream& in) { return read_raw<float>(in); }
double read_f64(std::istream& in) { return read_raw<double>(in); }

std::string read_string(std::istream& in) {
  const std::uint64_t len = read_u64(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) {
    throw DataError("unexpected end of binary stream");
  }
  return s;
}

void read_bytes(std::istream& in, void* data, std::size_t len) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
  if (!in) {
    throw DataError("unexpected end of binary stream");
  }
}

void expect_magic(std::istream& in, const char* magic, const std::string& what) {
  const std::size_t len = std::strlen(magic);
  std::string got(len, '\0');
  in.read(got.data(), static_cast<std::streamsize>(len));
  if (!in || got != magic) {
    throw DataError("bad magic in " + what);
  }
}

void write_embedding_file(const std::string& path,
                          const std::vector<std::vector<double>>& vectors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path);
  }
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().size();
  out.write(kEmbeddingMagic, 8);
  write_u32(out, 1);
  write_u32(out, static_cast<std::uint32_t>(dim));
  write_u64(out, vectors.size());
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw DataError("inconsistent embedding dimensions");
    }
    for (double x : v) {
      write_f32(out, static_cast<float>(x));
    }
  }
  if (!out) {
    throw DataError("write failed: " + path);
  }
}

std::vector<std::vector<double>> read_embedding_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open embedding file: " + path);
  }
  expect_magic(in, kEmbeddingMagic, path);
  const std::uint32_t version = read_u32(in);
  if (version != 1) {
    throw DataError("unsupported embedding file version in " + path);
  }
  const std::uint32_t dim = read_u32(in);
  const std::uint64_t count = read_u64(in);
  std::vector<std::vector<double>> vectors(count, std::vector<double>(dim));
  for (auto& v : vectors) {
    for (double& x : v) {
      x = static_cast<double>(read_f32(in));
    }
  }
  return vectors;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open file: " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path);
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw DataError("write failed: " + path);
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open file: " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(line);
  }
  return lines;
}

}  // namespace ragcap

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ragcap {

// Little-endian binary primitives shared by the index, checkpoint and
// embedding file formats. Readers throw DataError on truncated input.
void write_u8(std::ostream& out, std::uint8_t v);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_i64(std::ostream& out, std::int64_t v);
void write_f32(std::ostream& out, float v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);
void write_bytes(std::ostream& out, const void* data, std::size_t len);

std::uint8_t read_u8(std::istream& in);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
std::int64_t read_i64(std::istream& in);
float read_f32(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);
void read_bytes(std::istream& in, void* data, std::size_t len);

void expect_magic(std::istream& in, const char* magic, const std::string& what);

// Image-embedding file: magic, version, dim, count, then count*dim
// little-endian float32 values.
void write_embedding_file(const std::string& path,
                          const std::vector<std::vector<double>>& vectors);
std::vector<std::vector<double>> read_embedding_file(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::vector<std::string> read_lines(const std::string& path);

}  // namespace ragcap

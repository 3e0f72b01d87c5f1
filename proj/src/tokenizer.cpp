#include "ragcap/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <set>

#include "ragcap/common.hpp"
#include "ragcap/io.hpp"

namespace ragcap {

namespace {

bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

bool is_space_char(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

std::vector<std::string> Tokenizer::split(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    char c = raw;
    if (c >= 'A' && c <= 'Z') {
      c = static_cast<char>(c - 'A' + 'a');
    }
    if (is_word_char(c)) {
      current.push_back(c);
      continue;
    }
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
    if (!is_space_char(c)) {
      tokens.push_back(std::string(1, c));
    }
  }
  if (!current.empty()) {
    tokens.push_back(current);
  }
  return tokens;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus) {
  std::set<std::string> seen;
  for (const auto& text : corpus) {
    for (auto& tok : split(text)) {
      seen.insert(std::move(tok));
    }
  }
  Tokenizer t;
  t.vocab_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  t.vocab_.insert(t.vocab_.end(), seen.begin(), seen.end());
  t.rebuild_lookup();
  return t;
}

void Tokenizer::rebuild_lookup() {
  lookup_.clear();
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    lookup_[vocab_[i]] = static_cast<int>(i);
  }
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& tok : split(text)) {
    ids.push_back(token_id(tok));
  }
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < kNumReserved) continue;
    if (id < 0 || id >= vocab_size()) {
      throw DataError("token id out of range: " + std::to_string(id));
    }
    if (!out.empty()) {
      out.push_back(' ');
    }
    out += vocab_[static_cast<std::size_t>(id)];
  }
  return out;
}

int Tokenizer::token_id(const std::string& token) const {
  auto it = lookup_.find(token);
  return it == lookup_.end() ? kUnk : it->second;
}

const std::string& Tokenizer::token_text(int id) const {
  if (id < 0 || id >= vocab_size()) {
    throw DataError("token id out of range: " + std::to_string(id));
  }
  return vocab_[static_cast<std::size_t>(id)];
}

void Tokenizer::write(std::ostream& out) const {
  write_u64(out, vocab_.size());
  for (const auto& tok : vocab_) {
    write_string(out, tok);
  }
}

Tokenizer Tokenizer::read(std::istream& in) {
  Tokenizer t;
  const std::uint64_t n = read_u64(in);
  t.vocab_.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    t.vocab_.push_back(read_string(in));
  }
  if (t.vocab_.size() < kNumReserved) {
    throw DataError("corrupt tokenizer vocabulary");
  }
  t.rebuild_lookup();
  return t;
}

}  // namespace ragcap

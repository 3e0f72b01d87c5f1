#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace ragcap {

// Deterministic whitespace-plus-punctuation tokenizer.
//
// Text is lowercased (ASCII); a token is either a maximal run of [a-z0-9]
// or a single non-alphanumeric, non-whitespace character. The vocabulary is
// the sorted set of tokens seen in the build corpus, after the four reserved
// ids. decode() joins tokens with single spaces and skips reserved ids, so
// any text that is already a space-separated sequence of known lowercase
// tokens round-trips exactly.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumReserved = 4;

  Tokenizer() = default;

  static Tokenizer build(const std::vector<std::string>& corpus);

  // Lowercased token pieces; defines the token count used by the
  // datastore length filter.
  static std::vector<std::string> split(const std::string& text);

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  int token_id(const std::string& token) const;  // kUnk when absent
  const std::string& token_text(int id) const;
  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  const std::vector<std::string>& vocab() const { return vocab_; }

  void write(std::ostream& out) const;
  static Tokenizer read(std::istream& in);

 private:
  std::vector<std::string> vocab_;  // includes the reserved entries
  std::unordered_map<std::string, int> lookup_;

  void rebuild_lookup();
};

}  // namespace ragcap

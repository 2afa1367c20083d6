#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dskd/error.hpp"

namespace dskd {

using TokenId = std::int64_t;

// Vocabulary as id -> surface byte string. Byte strings are compared
// exactly; tokenizer-internal markers must already be resolved by the
// caller.
struct VocabDescriptor {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }

  const std::string& bytes_of(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens.size())
      throw InputError("token id " + std::to_string(id) + " out of range for vocab of size " +
                       std::to_string(tokens.size()));
    return tokens[static_cast<std::size_t>(id)];
  }

  // bytes -> first id carrying those bytes
  std::unordered_map<std::string, TokenId> byte_index() const {
    std::unordered_map<std::string, TokenId> m;
    m.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i)
      m.emplace(tokens[i], static_cast<TokenId>(i));  // keeps first occurrence
    return m;
  }
};

// Pairs (student id, teacher id) whose byte strings are identical,
// ascending in student id; duplicate surface forms resolve to the first
// occurrence on each side.
inline std::vector<std::pair<TokenId, TokenId>> vocab_intersection(
    const VocabDescriptor& stu, const VocabDescriptor& tea) {
  const auto tea_index = tea.byte_index();
  std::vector<std::pair<TokenId, TokenId>> pairs;
  std::unordered_map<std::string, bool> seen;
  for (std::size_t i = 0; i < stu.tokens.size(); ++i) {
    const std::string& b = stu.tokens[i];
    if (seen.count(b)) continue;
    seen.emplace(b, true);
    auto it = tea_index.find(b);
    if (it != tea_index.end())
      pairs.emplace_back(static_cast<TokenId>(i), it->second);
  }
  return pairs;
}

}  // namespace dskd

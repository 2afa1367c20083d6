#pragma once

#include <cstddef>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dskd/error.hpp"
#include "dskd/vocab.hpp"

namespace dskd {

// One tokenization of a text: ids, surface bytes per token, and (teacher
// side) the model's top-1 predicted token id per position.
struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::string> token_bytes;
  std::vector<TokenId> top1_pred;  // empty = absent

  std::size_t size() const { return ids.size(); }

  // Cumulative byte length before each position, plus the total at the end.
  std::vector<std::size_t> char_prefix() const {
    std::vector<std::size_t> pre(token_bytes.size() + 1, 0);
    for (std::size_t i = 0; i < token_bytes.size(); ++i)
      pre[i + 1] = pre[i] + token_bytes[i].size();
    return pre;
  }

  void validate() const {
    if (ids.size() != token_bytes.size())
      throw InputError("TokenSeq: ids and token_bytes lengths differ");
    if (!top1_pred.empty() && top1_pred.size() != ids.size())
      throw InputError("TokenSeq: top1_pred length differs from ids");
  }
};

struct AlignmentSet {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (student i, teacher j), 0-based
  bool byte_total_mismatch = false;  // the two sequences detokenize to different texts

  std::size_t k() const { return pairs.size(); }
};

// Exact Token Alignment: two cursors stream over both sequences; a pair is
// emitted when the consumed byte prefixes coincide, the current tokens'
// bytes coincide, and the teacher's top-1 prediction at that position
// exists (by byte string) in the student vocabulary. On unequal tokens the
// cursor with the shorter consumed prefix advances; on a tie both advance.
// verify_prefixes additionally checks true byte-prefix equality at every
// emitted pair (debug mode).
inline AlignmentSet eta_align(const TokenSeq& stu, const TokenSeq& tea,
                              const VocabDescriptor& stu_vocab,
                              const VocabDescriptor& tea_vocab,
                              bool verify_prefixes = false) {
  stu.validate();
  tea.validate();
  if (tea.top1_pred.empty())
    throw InputError("eta_align: teacher sequence lacks top-1 predictions");

  std::unordered_set<std::string> stu_tokens(stu_vocab.tokens.begin(),
                                             stu_vocab.tokens.end());

  AlignmentSet out;
  const std::size_t n = stu.size(), m = tea.size();
  std::size_t i = 0, j = 0;
  std::size_t ps = 0, pt = 0;  // consumed byte prefix lengths
  std::string ss, st;          // consumed prefixes (debug mode only)
  while (i < n && j < m) {
    if (ps == pt && stu.token_bytes[i] == tea.token_bytes[j]) {
      if (verify_prefixes && ss != st)
        throw NumericError("eta_align: prefix-length tie without byte equality at (" +
                           std::to_string(i) + "," + std::to_string(j) + ")");
      if (stu_tokens.count(tea_vocab.bytes_of(tea.top1_pred[j])))
        out.pairs.emplace_back(i, j);
      ps += stu.token_bytes[i].size();
      pt += tea.token_bytes[j].size();
      if (verify_prefixes) {
        ss += stu.token_bytes[i];
        st += tea.token_bytes[j];
      }
      ++i;
      ++j;
    } else if (ps > pt) {
      pt += tea.token_bytes[j].size();
      if (verify_prefixes) st += tea.token_bytes[j];
      ++j;
    } else if (ps < pt) {
      ps += stu.token_bytes[i].size();
      if (verify_prefixes) ss += stu.token_bytes[i];
      ++i;
    } else {
      // equal prefixes, unequal tokens: skip both
      ps += stu.token_bytes[i].size();
      pt += tea.token_bytes[j].size();
      if (verify_prefixes) {
        ss += stu.token_bytes[i];
        st += tea.token_bytes[j];
      }
      ++i;
      ++j;
    }
  }

  std::size_t stot = ps, ttot = pt;
  for (; i < n; ++i) stot += stu.token_bytes[i].size();
  for (; j < m; ++j) ttot += tea.token_bytes[j].size();
  out.byte_total_mismatch = (stot != ttot);
  return out;
}

}  // namespace dskd

// Independent oracles shared by the unit and acceptance suites. These
// deliberately avoid the library's optimized code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <vector>

#include "dskd/eta.hpp"
#include "dskd/matrix.hpp"
#include "dskd/rng.hpp"
#include "dskd/vocab.hpp"

namespace oracle {

// Naive triple-loop matrix product.
inline dskd::Matrix matmul(const dskd::Matrix& a, const dskd::Matrix& b) {
  dskd::Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

// Extended-precision softmax of one row.
inline std::vector<double> softmax_row(const std::vector<double>& row, double tau) {
  long double mx = row[0];
  for (double v : row) mx = std::max<long double>(mx, v);
  std::vector<long double> e(row.size());
  long double s = 0.0L;
  for (std::size_t i = 0; i < row.size(); ++i) {
    e[i] = expl((static_cast<long double>(row[i]) - mx) / tau);
    s += e[i];
  }
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i)
    out[i] = static_cast<double>(e[i] / s);
  return out;
}

// Frobenius-norm check of the four Moore-Penrose conditions.
inline double moore_penrose_violation(const dskd::Matrix& a, const dskd::Matrix& ap) {
  using dskd::as_eigen;
  auto A = as_eigen(a);
  auto P = as_eigen(ap);
  double worst = (A * P * A - A).norm();
  worst = std::max(worst, (P * A * P - P).norm());
  worst = std::max(worst, ((A * P).transpose() - A * P).norm());
  worst = std::max(worst, ((P * A).transpose() - P * A).norm());
  return worst;
}

// Algorithm-1 trace with explicit string prefixes instead of cursor
// byte counts.
inline dskd::AlignmentSet eta_trace(const dskd::TokenSeq& stu, const dskd::TokenSeq& tea,
                                    const dskd::VocabDescriptor& stu_vocab,
                                    const dskd::VocabDescriptor& tea_vocab) {
  std::unordered_set<std::string> vocab(stu_vocab.tokens.begin(), stu_vocab.tokens.end());
  dskd::AlignmentSet out;
  std::size_t i = 0, j = 0;
  std::string sp, tp;
  while (i < stu.size() && j < tea.size()) {
    if (sp == tp && stu.token_bytes[i] == tea.token_bytes[j]) {
      if (vocab.count(tea_vocab.bytes_of(tea.top1_pred[j]))) out.pairs.emplace_back(i, j);
      sp += stu.token_bytes[i++];
      tp += tea.token_bytes[j++];
    } else if (sp.size() > tp.size()) {
      tp += tea.token_bytes[j++];
    } else if (sp.size() < tp.size()) {
      sp += stu.token_bytes[i++];
    } else {
      sp += stu.token_bytes[i++];
      tp += tea.token_bytes[j++];
    }
  }
  return out;
}

// Checks the alignment-set predicate directly: equal byte prefixes, equal
// tokens, top-1 membership.
inline bool eta_pair_sound(const dskd::TokenSeq& stu, const dskd::TokenSeq& tea,
                           const dskd::VocabDescriptor& stu_vocab,
                           const dskd::VocabDescriptor& tea_vocab, std::size_t i,
                           std::size_t j) {
  std::string sp, tp;
  for (std::size_t k = 0; k < i; ++k) sp += stu.token_bytes[k];
  for (std::size_t k = 0; k < j; ++k) tp += tea.token_bytes[k];
  if (sp != tp || stu.token_bytes[i] != tea.token_bytes[j]) return false;
  const std::string& top1 = tea_vocab.bytes_of(tea.top1_pred[j]);
  return std::find(stu_vocab.tokens.begin(), stu_vocab.tokens.end(), top1) !=
         stu_vocab.tokens.end();
}

// Randomly re-segments a byte string into tokens (every byte covered,
// token lengths 1..4).
inline std::vector<std::string> random_segmentation(const std::string& text,
                                                    dskd::Rng& rng) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 1 + rng.next_u64() % 4;
    len = std::min(len, text.size() - pos);
    tokens.push_back(text.substr(pos, len));
    pos += len;
  }
  return tokens;
}

// Builds a dual tokenization of the same random text, with vocabularies
// and teacher top-1 predictions (some of which fall outside the student
// vocabulary).
struct DualTokenization {
  dskd::TokenSeq stu, tea;
  dskd::VocabDescriptor stu_vocab, tea_vocab;
};

inline DualTokenization random_dual_tokenization(dskd::Rng& rng,
                                                 std::size_t text_len = 40) {
  std::string text;
  for (std::size_t i = 0; i < text_len; ++i)
    text += static_cast<char>('a' + rng.next_u64() % 6);

  DualTokenization d;
  d.stu.token_bytes = random_segmentation(text, rng);
  d.tea.token_bytes = random_segmentation(text, rng);

  auto build_vocab = [&](const std::vector<std::string>& toks) {
    dskd::VocabDescriptor v;
    std::unordered_set<std::string> seen;
    for (const auto& t : toks)
      if (seen.insert(t).second) v.tokens.push_back(t);
    // extra tokens not present in the other vocabulary
    v.tokens.push_back("ZZ" + std::to_string(rng.next_u64() % 1000));
    return v;
  };
  d.stu_vocab = build_vocab(d.stu.token_bytes);
  d.tea_vocab = build_vocab(d.tea.token_bytes);

  auto fill_ids = [](dskd::TokenSeq& seq, const dskd::VocabDescriptor& v) {
    auto idx = v.byte_index();
    for (const auto& b : seq.token_bytes) seq.ids.push_back(idx.at(b));
  };
  fill_ids(d.stu, d.stu_vocab);
  fill_ids(d.tea, d.tea_vocab);

  for (std::size_t j = 0; j < d.tea.size(); ++j)
    d.tea.top1_pred.push_back(
        static_cast<dskd::TokenId>(rng.next_u64() % d.tea_vocab.size()));
  return d;
}

}  // namespace oracle

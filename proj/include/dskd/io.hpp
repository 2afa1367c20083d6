#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dskd/error.hpp"
#include "dskd/eta.hpp"
#include "dskd/matrix.hpp"
#include "dskd/vocab.hpp"

namespace dskd {

// --- base64 (token bytes may be arbitrary, non-UTF8 fragments) ---

inline std::string base64_encode(const std::string& in) {
  static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= in.size()) {
    std::uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                      (static_cast<unsigned char>(in[i + 1]) << 8) |
                      static_cast<unsigned char>(in[i + 2]);
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += tbl[(v >> 6) & 63];
    out += tbl[v & 63];
    i += 3;
  }
  const std::size_t rem = in.size() - i;
  if (rem == 1) {
    std::uint32_t v = static_cast<unsigned char>(in[i]) << 16;
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += "==";
  } else if (rem == 2) {
    std::uint32_t v = (static_cast<unsigned char>(in[i]) << 16) |
                      (static_cast<unsigned char>(in[i + 1]) << 8);
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += tbl[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::string base64_decode(const std::string& in) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    if (c == '=') return -1;
    throw InputError("base64: invalid character");
  };
  if (in.size() % 4 != 0) throw InputError("base64: length not a multiple of 4");
  std::string out;
  out.reserve(in.size() / 4 * 3);
  for (std::size_t i = 0; i < in.size(); i += 4) {
    int a = val(in[i]), b = val(in[i + 1]), c = val(in[i + 2]), d = val(in[i + 3]);
    if (a < 0 || b < 0) throw InputError("base64: malformed padding");
    std::uint32_t v = (static_cast<std::uint32_t>(a) << 18) |
                      (static_cast<std::uint32_t>(b) << 12);
    out += static_cast<char>((v >> 16) & 0xff);
    if (c >= 0) {
      v |= static_cast<std::uint32_t>(c) << 6;
      out += static_cast<char>((v >> 8) & 0xff);
      if (d >= 0) {
        v |= static_cast<std::uint32_t>(d);
        out += static_cast<char>(v & 0xff);
      }
    } else if (d >= 0) {
      throw InputError("base64: malformed padding");
    }
  }
  return out;
}

// --- tensor files ---
// magic "DSKD" | u32 version | u32 dtype (0 = f64) | u32 ndim |
// ndim x u64 dims | row-major little-endian payload

namespace detail {

constexpr std::uint32_t kTensorVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
  // Serialized layout is little-endian; this library targets LE hosts.
  static_assert(std::endian::native == std::endian::little);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  static_assert(std::endian::native == std::endian::little);
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InputError("tensor file: truncated");
  return v;
}

}  // namespace detail

inline void write_tensor(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open for writing: " + path.string());
  os.write("DSKD", 4);
  detail::write_le<std::uint32_t>(os, detail::kTensorVersion);
  detail::write_le<std::uint32_t>(os, 0);  // dtype f64
  detail::write_le<std::uint32_t>(os, 2);
  detail::write_le<std::uint64_t>(os, m.rows());
  detail::write_le<std::uint64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!os) throw InputError("write failed: " + path.string());
}

inline Matrix read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DSKD", 4) != 0)
    throw InputError("tensor file: bad magic in " + path.string());
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != detail::kTensorVersion)
    throw InputError("tensor file: unsupported version " + std::to_string(version));
  const auto dtype = detail::read_le<std::uint32_t>(is);
  if (dtype != 0) throw InputError("tensor file: unsupported dtype");
  const auto ndim = detail::read_le<std::uint32_t>(is);
  if (ndim != 2) throw InputError("tensor file: expected 2 dims, got " + std::to_string(ndim));
  const auto rows = detail::read_le<std::uint64_t>(is);
  const auto cols = detail::read_le<std::uint64_t>(is);
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!is) throw InputError("tensor file: truncated payload in " + path.string());
  return m;
}

// --- token sequence / vocabulary JSON ---
// TokenSeq: {"ids": [...], "bytes": [base64...], "top1": [...] (optional)}
// Vocab:    {"bytes": [base64...]}

inline TokenSeq token_seq_from_json(const nlohmann::json& j) {
  TokenSeq seq;
  if (!j.is_object() || !j.contains("ids") || !j.contains("bytes"))
    throw InputError("token sequence JSON must contain \"ids\" and \"bytes\"");
  for (const auto& v : j.at("ids")) seq.ids.push_back(v.get<TokenId>());
  for (const auto& v : j.at("bytes"))
    seq.token_bytes.push_back(base64_decode(v.get<std::string>()));
  if (j.contains("top1"))
    for (const auto& v : j.at("top1")) seq.top1_pred.push_back(v.get<TokenId>());
  seq.validate();
  return seq;
}

inline nlohmann::json token_seq_to_json(const TokenSeq& seq) {
  nlohmann::json j;
  j["ids"] = seq.ids;
  auto& bytes = j["bytes"] = nlohmann::json::array();
  for (const auto& b : seq.token_bytes) bytes.push_back(base64_encode(b));
  if (!seq.top1_pred.empty()) j["top1"] = seq.top1_pred;
  return j;
}

inline VocabDescriptor vocab_from_json(const nlohmann::json& j) {
  VocabDescriptor v;
  if (!j.is_object() || !j.contains("bytes"))
    throw InputError("vocabulary JSON must contain \"bytes\"");
  for (const auto& t : j.at("bytes")) v.tokens.push_back(base64_decode(t.get<std::string>()));
  return v;
}

inline nlohmann::json vocab_to_json(const VocabDescriptor& v) {
  nlohmann::json j;
  auto& bytes = j["bytes"] = nlohmann::json::array();
  for (const auto& b : v.tokens) bytes.push_back(base64_encode(b));
  return j;
}

inline nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("bad JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

}  // namespace dskd

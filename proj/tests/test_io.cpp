#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "dskd/io.hpp"
#include "dskd/rng.hpp"

using namespace dskd;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("dskd-test-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("base64 round-trips arbitrary bytes") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foo") == "Zm9v");
  CHECK(base64_decode("Zm9vYmFy") == "foobar");

  std::string all;
  for (int i = 0; i < 256; ++i) all += static_cast<char>(i);
  CHECK(base64_decode(base64_encode(all)) == all);

  CHECK_THROWS_AS(base64_decode("abc"), InputError);    // bad length
  CHECK_THROWS_AS(base64_decode("ab!c"), InputError);   // bad character
  CHECK_THROWS_AS(base64_decode("=abc"), InputError);   // malformed padding
}

TEST_CASE("tensor files round-trip bit-exactly") {
  TempDir tmp;
  Rng rng(81);
  Matrix m = gaussian_matrix(rng, 17, 9, -2.0, 10.0);
  const auto file = tmp.path / "m.dskd";
  write_tensor(file, m);
  CHECK(read_tensor(file) == m);

  Matrix empty(0, 4);
  const auto efile = tmp.path / "e.dskd";
  write_tensor(efile, empty);
  Matrix back = read_tensor(efile);
  CHECK(back.rows() == 0);
  CHECK(back.cols() == 4);
}

TEST_CASE("tensor reader rejects malformed files") {
  TempDir tmp;
  const auto bad_magic = tmp.path / "bad.dskd";
  {
    std::ofstream os(bad_magic, std::ios::binary);
    os << "NOPE-this-is-not-a-tensor";
  }
  CHECK_THROWS_WITH_AS(read_tensor(bad_magic), doctest::Contains("bad magic"),
                       InputError);

  Matrix m(2, 2, 1.0);
  const auto truncated = tmp.path / "trunc.dskd";
  write_tensor(truncated, m);
  std::filesystem::resize_file(truncated,
                               std::filesystem::file_size(truncated) - 8);
  CHECK_THROWS_WITH_AS(read_tensor(truncated), doctest::Contains("truncated"),
                       InputError);

  CHECK_THROWS_AS(read_tensor(tmp.path / "missing.dskd"), InputError);
}

TEST_CASE("token sequences round-trip through JSON") {
  TokenSeq seq;
  seq.ids = {0, 2, 1};
  seq.token_bytes = {"The", " ca", "t"};
  seq.top1_pred = {2, 1, 0};
  auto j = token_seq_to_json(seq);
  TokenSeq back = token_seq_from_json(j);
  CHECK(back.ids == seq.ids);
  CHECK(back.token_bytes == seq.token_bytes);
  CHECK(back.top1_pred == seq.top1_pred);

  seq.top1_pred.clear();
  auto j2 = token_seq_to_json(seq);
  CHECK_FALSE(j2.contains("top1"));
  CHECK(token_seq_from_json(j2).top1_pred.empty());
}

TEST_CASE("token sequence JSON validation") {
  CHECK_THROWS_AS(token_seq_from_json(nlohmann::json::array()), InputError);
  CHECK_THROWS_AS(token_seq_from_json(nlohmann::json{{"ids", {0}}}), InputError);
  // mismatched lengths caught by TokenSeq::validate
  nlohmann::json j;
  j["ids"] = {0, 1};
  j["bytes"] = {base64_encode("a")};
  CHECK_THROWS_AS(token_seq_from_json(j), InputError);
}

TEST_CASE("vocabularies round-trip through JSON including non-UTF8 bytes") {
  VocabDescriptor v;
  v.tokens = {"The", " ca", std::string("\xff\x00\x7f", 3)};
  auto back = vocab_from_json(vocab_to_json(v));
  CHECK(back.tokens == v.tokens);
  CHECK_THROWS_AS(vocab_from_json(nlohmann::json{{"ids", {0}}}), InputError);
}

TEST_CASE("load_json reports bad files") {
  TempDir tmp;
  const auto bad = tmp.path / "bad.json";
  {
    std::ofstream os(bad);
    os << "{not json";
  }
  CHECK_THROWS_AS(load_json(bad), InputError);
  CHECK_THROWS_AS(load_json(tmp.path / "missing.json"), InputError);

  const auto good = tmp.path / "good.json";
  {
    std::ofstream os(good);
    os << R"({"x": 3})";
  }
  CHECK(load_json(good).at("x").get<int>() == 3);
}

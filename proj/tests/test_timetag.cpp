#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "epps/errors.hpp"
#include "epps/timetag.hpp"
#include "test_util.hpp"

using namespace epps;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("epps_timetag_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void overwrite(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("empty stream is a bare 32-byte header") {
  TempDir tmp;
  const fs::path path = tmp.path / "empty.qtt";
  write_stream(path, StreamHeader{}, {});
  CHECK(fs::file_size(path) == 32);
  const auto [header, records] = read_stream(path);
  CHECK(records.empty());
  CHECK(header.record_count == 0);
  CHECK(header.version == 1);
  CHECK(header.resolution_ps == 1);
}

TEST_CASE("single record has the documented byte layout") {
  TempDir tmp;
  const fs::path path = tmp.path / "one.qtt";
  StreamHeader header;
  header.channel_count = 2;
  TimeTagRecord rec;
  rec.timestamp = 100;
  rec.channel = 1;
  write_stream(path, header, {&rec, 1});

  const auto bytes = file_bytes(path);
  REQUIRE(bytes.size() == 48);
  const std::uint8_t expected[48] = {
      'Q', 'T', 'T', '1',         // magic
      0x01, 0x00,                 // version 1
      0x01, 0x00,                 // 1 ps per tick
      0x02, 0x00,                 // 2 channels
      '-',  '-',                  // basis label unset
      0x01, 0, 0, 0, 0, 0, 0, 0,  // record count
      0, 0, 0, 0, 0, 0, 0, 0,     // header padding
      0, 0, 0, 0,                 //
      0x64, 0, 0, 0, 0, 0, 0, 0,  // timestamp 100
      0x01, 0x00,                 // channel 1
      0x00, 0x00,                 // flags
      0, 0, 0, 0,                 // reserved
  };
  for (std::size_t i = 0; i < 48; ++i) CHECK(bytes[i] == expected[i]);
}

TEST_CASE("write-read round trip preserves a large random stream") {
  TempDir tmp;
  const fs::path path = tmp.path / "big.qtt";
  const auto records = test::random_sorted_records(1'000'000, 5'000'000'000ULL);
  StreamHeader header;
  header.basis_label = {'H', 'V'};
  write_stream(path, header, records);

  StreamReader reader(path);
  CHECK(reader.header().record_count == records.size());
  CHECK(reader.header().label_string() == "HV");
  TimeTagRecord r;
  std::size_t i = 0;
  bool all_equal = true;
  while (reader.next(r)) {
    REQUIRE(i < records.size());
    all_equal = all_equal && (r == records[i]);
    ++i;
  }
  CHECK(all_equal);
  CHECK(i == records.size());
}

TEST_CASE("round trip is byte identical across rewrites") {
  TempDir tmp;
  for (int trial = 0; trial < 25; ++trial) {
    const auto records =
        test::random_sorted_records(static_cast<std::size_t>(test::urand() * 400), 1'000'000);
    const fs::path p1 = tmp.path / "a.qtt";
    const fs::path p2 = tmp.path / "b.qtt";
    StreamHeader header;
    header.basis_label = {'D', 'A'};
    write_stream(p1, header, records);
    const auto [h, read_back] = read_stream(p1);
    write_stream(p2, h, read_back);
    CHECK(file_bytes(p1) == file_bytes(p2));
  }
}

TEST_CASE("writer rejects unsorted input") {
  TempDir tmp;
  std::vector<TimeTagRecord> records(2);
  records[0].timestamp = 50;
  records[1].timestamp = 20;
  CHECK_THROWS_AS(write_stream(tmp.path / "bad.qtt", StreamHeader{}, records), DataError);
}

TEST_CASE("reader validates magic, truncation and monotonicity") {
  TempDir tmp;
  const fs::path path = tmp.path / "stream.qtt";
  const auto records = test::random_sorted_records(100, 1'000'000);
  write_stream(path, StreamHeader{}, records);
  const auto pristine = file_bytes(path);

  SUBCASE("corrupted magic is reported with the observed bytes") {
    auto bytes = pristine;
    bytes[0] = 'X';
    overwrite(path, bytes);
    try {
      StreamReader reader(path);
      FAIL("expected a format error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("58") != std::string::npos);  // 'X' in hex
    }
  }

  SUBCASE("truncated file is rejected") {
    auto bytes = pristine;
    bytes.resize(bytes.size() - 7);
    overwrite(path, bytes);
    StreamReader reader(path);
    TimeTagRecord r;
    CHECK_THROWS_AS(while (reader.next(r)) {}, DataError);
  }

  SUBCASE("record count mismatch is rejected") {
    auto bytes = pristine;
    bytes[12] = 0xde;
    overwrite(path, bytes);
    StreamReader reader(path);
    TimeTagRecord r;
    CHECK_THROWS_AS(while (reader.next(r)) {}, DataError);
  }

  SUBCASE("timestamp regression is reported with its position") {
    auto bytes = pristine;
    for (int i = 0; i < 8; ++i) bytes[bytes.size() - 16 + i] = 0;
    overwrite(path, bytes);
    StreamReader reader(path);
    TimeTagRecord r;
    try {
      while (reader.next(r)) {
      }
      FAIL("expected a regression error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
  }

  SUBCASE("unsupported version is rejected") {
    auto bytes = pristine;
    bytes[4] = 2;
    overwrite(path, bytes);
    CHECK_THROWS_AS(StreamReader{path}, DataError);
  }
}

TEST_CASE("merge keeps global order with stable ties") {
  TempDir tmp;
  StreamHeader header;
  header.basis_label = {'H', 'H'};

  SUBCASE("merging one stream reproduces it") {
    const auto records = test::random_sorted_records(500, 100'000);
    write_stream(tmp.path / "in.qtt", header, records);
    merge_streams({tmp.path / "in.qtt"}, tmp.path / "out.qtt");
    CHECK(file_bytes(tmp.path / "in.qtt") == file_bytes(tmp.path / "out.qtt"));
  }

  SUBCASE("two interleaved streams give the sorted union") {
    auto a = test::random_sorted_records(400, 100'000);
    auto b = test::random_sorted_records(300, 100'000);
    write_stream(tmp.path / "a.qtt", header, a);
    write_stream(tmp.path / "b.qtt", header, b);
    merge_streams({tmp.path / "a.qtt", tmp.path / "b.qtt"}, tmp.path / "m.qtt");
    const auto [h, merged] = read_stream(tmp.path / "m.qtt");
    CHECK(merged.size() == a.size() + b.size());
    for (std::size_t i = 1; i < merged.size(); ++i)
      CHECK(merged[i - 1].timestamp <= merged[i].timestamp);
    CHECK(h.record_count == merged.size());
  }

  SUBCASE("merge is associative byte for byte") {
    auto a = test::random_sorted_records(200, 50'000);
    auto b = test::random_sorted_records(200, 50'000);
    auto c = test::random_sorted_records(200, 50'000);
    write_stream(tmp.path / "a.qtt", header, a);
    write_stream(tmp.path / "b.qtt", header, b);
    write_stream(tmp.path / "c.qtt", header, c);
    merge_streams({tmp.path / "a.qtt", tmp.path / "b.qtt"}, tmp.path / "ab.qtt");
    merge_streams({tmp.path / "ab.qtt", tmp.path / "c.qtt"}, tmp.path / "ab_c.qtt");
    merge_streams({tmp.path / "a.qtt", tmp.path / "b.qtt", tmp.path / "c.qtt"},
                  tmp.path / "abc.qtt");
    CHECK(file_bytes(tmp.path / "ab_c.qtt") == file_bytes(tmp.path / "abc.qtt"));
  }

  SUBCASE("label mismatch needs the override") {
    StreamHeader other = header;
    other.basis_label = {'V', 'V'};
    write_stream(tmp.path / "a.qtt", header, {});
    write_stream(tmp.path / "b.qtt", other, {});
    CHECK_THROWS_AS(
        merge_streams({tmp.path / "a.qtt", tmp.path / "b.qtt"}, tmp.path / "m.qtt"),
        DataError);
    merge_streams({tmp.path / "a.qtt", tmp.path / "b.qtt"}, tmp.path / "m.qtt", true);
    CHECK(read_stream(tmp.path / "m.qtt").first.label_string() == "--");
  }

  SUBCASE("incompatible resolution is rejected") {
    StreamHeader other = header;
    other.resolution_ps = 4;
    write_stream(tmp.path / "a.qtt", header, {});
    write_stream(tmp.path / "b.qtt", other, {});
    CHECK_THROWS_AS(
        merge_streams({tmp.path / "a.qtt", tmp.path / "b.qtt"}, tmp.path / "m.qtt"),
        DataError);
  }
}

TEST_CASE("reader streams with a small fixed buffer") {
  TempDir tmp;
  const fs::path path = tmp.path / "buffered.qtt";
  const auto records = test::random_sorted_records(200'000, 1'000'000'000ULL);
  write_stream(path, StreamHeader{}, records);
  StreamReader reader(path, 1024);
  TimeTagRecord r;
  std::size_t n = 0;
  while (reader.next(r)) ++n;
  CHECK(n == records.size());
}

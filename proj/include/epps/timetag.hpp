#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace epps {

// One detection event. Timestamps are picoseconds since the stream epoch.
// Flag bit 0 marks simulated dark counts. `reserved` must be zero.
struct TimeTagRecord {
  std::uint64_t timestamp = 0;
  std::uint16_t channel = 0;
  std::uint16_t flags = 0;
  std::uint32_t reserved = 0;

  friend bool operator==(const TimeTagRecord&, const TimeTagRecord&) = default;
};
static_assert(sizeof(TimeTagRecord) == 16);

// In-stream ordering: timestamp, then channel, then flags.
inline bool record_order(const TimeTagRecord& a, const TimeTagRecord& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  if (a.channel != b.channel) return a.channel < b.channel;
  return a.flags < b.flags;
}

// "QTT1" stream header. On disk: 4-byte magic, then little-endian u16
// version, u16 resolution (ps per tick), u16 channel count, 2 ASCII basis
// label bytes (XX arm first, "--" if unset), u64 record count, zero padding
// to 32 bytes.
struct StreamHeader {
  std::uint16_t version = 1;
  std::uint16_t resolution_ps = 1;
  std::uint16_t channel_count = 2;
  std::array<char, 2> basis_label = {'-', '-'};
  std::uint64_t record_count = 0;

  std::string label_string() const { return std::string(basis_label.data(), 2); }
};

inline constexpr std::size_t kStreamHeaderSize = 32;
inline constexpr std::size_t kRecordSize = 16;
inline constexpr char kStreamMagic[4] = {'Q', 'T', 'T', '1'};

// Incremental writer; validates timestamp monotonicity and patches the
// record count into the header on close().
class StreamWriter {
 public:
  StreamWriter(const std::filesystem::path& path, const StreamHeader& header);
  ~StreamWriter();
  StreamWriter(const StreamWriter&) = delete;
  StreamWriter& operator=(const StreamWriter&) = delete;

  void write(const TimeTagRecord& record);
  void write(std::span<const TimeTagRecord> records);
  std::uint64_t records_written() const { return count_; }
  void close();

 private:
  void flush_buffer();

  std::filesystem::path path_;
  std::ofstream out_;
  std::vector<std::uint8_t> buffer_;
  std::uint64_t count_ = 0;
  std::uint64_t last_timestamp_ = 0;
  bool any_ = false;
  bool open_ = true;
};

// Buffered reader with constant memory use; validates magic, version and
// timestamp monotonicity, and cross-checks the header record count at EOF.
class StreamReader {
 public:
  explicit StreamReader(const std::filesystem::path& path,
                        std::size_t buffer_records = 1 << 16);

  const StreamHeader& header() const { return header_; }
  // Returns false at a clean end of stream.
  bool next(TimeTagRecord& record);
  std::uint64_t records_read() const { return read_count_; }

 private:
  void refill();

  std::filesystem::path path_;
  std::ifstream in_;
  StreamHeader header_;
  std::vector<std::uint8_t> buffer_;
  std::size_t buffer_pos_ = 0;
  std::size_t buffer_len_ = 0;
  std::uint64_t read_count_ = 0;
  std::uint64_t last_timestamp_ = 0;
  bool any_ = false;
  bool eof_ = false;
};

// One-shot helpers.
void write_stream(const std::filesystem::path& path, const StreamHeader& header,
                  std::span<const TimeTagRecord> records);
std::pair<StreamHeader, std::vector<TimeTagRecord>> read_stream(
    const std::filesystem::path& path);

// k-way merge by timestamp; equal timestamps keep input-index order. Inputs
// must agree on resolution and channel count; differing basis labels are an
// error unless allow_label_mismatch is set (the output label is then "--").
void merge_streams(const std::vector<std::filesystem::path>& inputs,
                   const std::filesystem::path& output,
                   bool allow_label_mismatch = false);

}  // namespace epps

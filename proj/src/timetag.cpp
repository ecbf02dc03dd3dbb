#include "epps/timetag.hpp"

#include <algorithm>
#include <cstring>
#include <queue>

#include "epps/errors.hpp"

namespace epps {

namespace {

constexpr std::size_t kWriterBufferRecords = 1 << 16;

void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::array<std::uint8_t, kStreamHeaderSize> encode_header(const StreamHeader& h) {
  std::array<std::uint8_t, kStreamHeaderSize> bytes{};
  std::memcpy(bytes.data(), kStreamMagic, 4);
  put_u16(bytes.data() + 4, h.version);
  put_u16(bytes.data() + 6, h.resolution_ps);
  put_u16(bytes.data() + 8, h.channel_count);
  bytes[10] = static_cast<std::uint8_t>(h.basis_label[0]);
  bytes[11] = static_cast<std::uint8_t>(h.basis_label[1]);
  put_u64(bytes.data() + 12, h.record_count);
  return bytes;
}

void encode_record(std::uint8_t* p, const TimeTagRecord& r) {
  put_u64(p, r.timestamp);
  put_u16(p + 8, r.channel);
  put_u16(p + 10, r.flags);
  put_u32(p + 12, r.reserved);
}

TimeTagRecord decode_record(const std::uint8_t* p) {
  TimeTagRecord r;
  r.timestamp = get_u64(p);
  r.channel = get_u16(p + 8);
  r.flags = get_u16(p + 10);
  r.reserved = get_u32(p + 12);
  return r;
}

}  // namespace

StreamWriter::StreamWriter(const std::filesystem::path& path, const StreamHeader& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw DataError("cannot open '" + path.string() + "' for writing");
  StreamHeader h = header;
  h.record_count = 0;
  const auto bytes = encode_header(h);
  out_.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  buffer_.reserve(kWriterBufferRecords * kRecordSize);
}

StreamWriter::~StreamWriter() {
  try {
    if (open_) close();
  } catch (...) {
  }
}

void StreamWriter::write(const TimeTagRecord& record) { write({&record, 1}); }

void StreamWriter::write(std::span<const TimeTagRecord> records) {
  if (!open_) throw DataError("write on closed stream writer");
  for (const auto& r : records) {
    if (any_ && r.timestamp < last_timestamp_)
      throw DataError("unsorted input at record " + std::to_string(count_) + " of '" +
                      path_.string() + "'");
    last_timestamp_ = r.timestamp;
    any_ = true;
    const std::size_t off = buffer_.size();
    buffer_.resize(off + kRecordSize);
    encode_record(buffer_.data() + off, r);
    ++count_;
    if (buffer_.size() >= kWriterBufferRecords * kRecordSize) flush_buffer();
  }
}

void StreamWriter::flush_buffer() {
  if (buffer_.empty()) return;
  out_.write(reinterpret_cast<const char*>(buffer_.data()),
             static_cast<std::streamsize>(buffer_.size()));
  if (!out_) throw DataError("I/O failure writing '" + path_.string() + "'");
  buffer_.clear();
}

void StreamWriter::close() {
  if (!open_) return;
  flush_buffer();
  std::uint8_t count_bytes[8];
  put_u64(count_bytes, count_);
  out_.seekp(12);
  out_.write(reinterpret_cast<const char*>(count_bytes), 8);
  out_.flush();
  if (!out_) throw DataError("I/O failure finalizing '" + path_.string() + "'");
  out_.close();
  open_ = false;
}

StreamReader::StreamReader(const std::filesystem::path& path, std::size_t buffer_records)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw DataError("cannot open '" + path.string() + "'");
  std::uint8_t bytes[kStreamHeaderSize];
  in_.read(reinterpret_cast<char*>(bytes), kStreamHeaderSize);
  if (in_.gcount() != static_cast<std::streamsize>(kStreamHeaderSize))
    throw DataError("truncated header in '" + path.string() + "'");
  if (std::memcmp(bytes, kStreamMagic, 4) != 0) {
    char observed[4 * 3 + 1];
    std::snprintf(observed, sizeof observed, "%02x %02x %02x %02x", bytes[0], bytes[1],
                  bytes[2], bytes[3]);
    throw DataError("bad magic in '" + path.string() + "': observed bytes " + observed);
  }
  header_.version = get_u16(bytes + 4);
  if (header_.version != 1)
    throw DataError("unsupported stream version " + std::to_string(header_.version) +
                    " in '" + path.string() + "'");
  header_.resolution_ps = get_u16(bytes + 6);
  header_.channel_count = get_u16(bytes + 8);
  header_.basis_label = {static_cast<char>(bytes[10]), static_cast<char>(bytes[11])};
  header_.record_count = get_u64(bytes + 12);
  buffer_.resize(std::max<std::size_t>(1, buffer_records) * kRecordSize);
}

void StreamReader::refill() {
  in_.read(reinterpret_cast<char*>(buffer_.data()),
           static_cast<std::streamsize>(buffer_.size()));
  buffer_len_ = static_cast<std::size_t>(in_.gcount());
  buffer_pos_ = 0;
  if (buffer_len_ % kRecordSize != 0)
    throw DataError("truncated record at end of '" + path_.string() + "'");
  if (buffer_len_ == 0) {
    eof_ = true;
    if (read_count_ != header_.record_count)
      throw DataError("record count mismatch in '" + path_.string() + "': header says " +
                      std::to_string(header_.record_count) + ", found " +
                      std::to_string(read_count_));
  }
}

bool StreamReader::next(TimeTagRecord& record) {
  if (buffer_pos_ >= buffer_len_) {
    if (eof_) return false;
    refill();
    if (eof_) return false;
  }
  record = decode_record(buffer_.data() + buffer_pos_);
  buffer_pos_ += kRecordSize;
  if (any_ && record.timestamp < last_timestamp_)
    throw DataError("timestamp regression at record " + std::to_string(read_count_) +
                    " of '" + path_.string() + "'");
  last_timestamp_ = record.timestamp;
  any_ = true;
  ++read_count_;
  return true;
}

void write_stream(const std::filesystem::path& path, const StreamHeader& header,
                  std::span<const TimeTagRecord> records) {
  StreamWriter writer(path, header);
  writer.write(records);
  writer.close();
}

std::pair<StreamHeader, std::vector<TimeTagRecord>> read_stream(
    const std::filesystem::path& path) {
  StreamReader reader(path);
  std::vector<TimeTagRecord> records;
  records.reserve(reader.header().record_count);
  TimeTagRecord r;
  while (reader.next(r)) records.push_back(r);
  return {reader.header(), std::move(records)};
}

void merge_streams(const std::vector<std::filesystem::path>& inputs,
                   const std::filesystem::path& output, bool allow_label_mismatch) {
  if (inputs.empty()) throw DataError("merge requires at least one input stream");

  std::vector<std::unique_ptr<StreamReader>> readers;
  readers.reserve(inputs.size());
  for (const auto& p : inputs) readers.push_back(std::make_unique<StreamReader>(p));

  StreamHeader out_header = readers.front()->header();
  for (std::size_t i = 1; i < readers.size(); ++i) {
    const StreamHeader& h = readers[i]->header();
    if (h.resolution_ps != out_header.resolution_ps ||
        h.channel_count != out_header.channel_count)
      throw DataError("incompatible headers: '" + inputs[i].string() +
                      "' differs in resolution or channel count");
    if (h.basis_label != out_header.basis_label) {
      if (!allow_label_mismatch)
        throw DataError("basis label mismatch: '" + inputs[i].string() + "' has \"" +
                        h.label_string() + "\", expected \"" + out_header.label_string() +
                        "\"");
      out_header.basis_label = {'-', '-'};
    }
  }

  struct HeapItem {
    TimeTagRecord record;
    std::size_t input;
  };
  auto later = [](const HeapItem& a, const HeapItem& b) {
    if (a.record.timestamp != b.record.timestamp)
      return a.record.timestamp > b.record.timestamp;
    return a.input > b.input;
  };
  std::priority_queue<HeapItem, std::vector<HeapItem>, decltype(later)> heap(later);
  for (std::size_t i = 0; i < readers.size(); ++i) {
    TimeTagRecord r;
    if (readers[i]->next(r)) heap.push({r, i});
  }

  StreamWriter writer(output, out_header);
  while (!heap.empty()) {
    HeapItem item = heap.top();
    heap.pop();
    writer.write(item.record);
    TimeTagRecord r;
    if (readers[item.input]->next(r)) heap.push({r, item.input});
  }
  writer.close();
}

}  // namespace epps

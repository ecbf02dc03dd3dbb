#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epps/timetag.hpp"

namespace epps {

// Binned coincidence counts C(delta-tau) for one polarization basis pair.
// Bin b covers [tau_min + b*w, tau_min + (b+1)*w).
struct CoincidenceHistogram {
  std::int64_t bin_width_ps = 8;
  std::int64_t tau_min_ps = 0;
  std::int64_t tau_max_ps = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t total_singles_a = 0;
  std::uint64_t total_singles_b = 0;
  double duration_s = 0.0;
  std::array<char, 2> basis_label = {'-', '-'};

  std::size_t bin_count() const { return counts.size(); }
  double bin_center_ps(std::size_t bin) const {
    return static_cast<double>(tau_min_ps) + (static_cast<double>(bin) + 0.5) *
                                                 static_cast<double>(bin_width_ps);
  }
  // Bin index containing delta, or nullopt when out of range.
  std::optional<std::size_t> bin_index(std::int64_t delta_ps) const;
  std::uint64_t total_counts() const;
  // Element-wise accumulation; grids must match exactly.
  void add(const CoincidenceHistogram& other);
  std::string label_string() const { return std::string(basis_label.data(), 2); }
};

struct CorrelationOptions {
  std::uint16_t channel_a = 1;  // X arm by default, so delta = t_X - t_XX >= 0
  std::uint16_t channel_b = 0;
  std::int64_t bin_width_ps = 8;
  std::int64_t window_ps = 25'000;
  std::size_t buffer_cap = 1 << 22;  // max in-window events per channel
};

// Single-pass all-pairs coincidence counter with a sliding window. Every
// ordered pair (a, b) with |t_a - t_b| <= window increments the bin holding
// delta = t_a - t_b. Auto-correlation (channel_a == channel_b) counts every
// unordered pair at both +delta and -delta and excludes self-pairs.
//
// Chunked processing: records already counted by a previous chunk are fed
// through feed_context() so they can act as partners without being counted
// as new events; a pair is owned by the chunk containing its later record.
class CoincidenceAccumulator {
 public:
  explicit CoincidenceAccumulator(const CorrelationOptions& options);

  void feed(const TimeTagRecord& record);
  void feed(std::span<const TimeTagRecord> records);
  void feed_context(const TimeTagRecord& record);

  CoincidenceHistogram finalize(std::array<char, 2> basis_label = {'-', '-'}) const;

 private:
  struct Ring {
    std::vector<std::uint64_t> times;
    std::size_t head = 0;
    std::size_t size() const { return times.size() - head; }
    void evict_before(std::uint64_t cutoff);
    void push(std::uint64_t t) { times.push_back(t); }
  };

  void feed_impl(const TimeTagRecord& record, bool count_singles);

  CorrelationOptions opt_;
  bool auto_mode_;
  Ring ring_a_, ring_b_;
  std::vector<std::uint64_t> counts_;
  std::int64_t grid_min_;
  std::size_t n_bins_;
  std::uint64_t singles_a_ = 0, singles_b_ = 0;
  std::uint64_t first_ts_ = 0, last_ts_ = 0;
  bool any_ = false;
  std::uint64_t last_fed_ = 0;
  bool any_fed_ = false;
};

CoincidenceHistogram cross_correlate(std::span<const TimeTagRecord> records,
                                     const CorrelationOptions& options,
                                     std::array<char, 2> basis_label = {'-', '-'});
CoincidenceHistogram auto_correlate(std::span<const TimeTagRecord> records,
                                    std::uint16_t channel, std::int64_t bin_width_ps,
                                    std::int64_t window_ps);

// Streaming variants with constant memory use.
CoincidenceHistogram cross_correlate_file(const std::filesystem::path& path,
                                          const CorrelationOptions& options);
CoincidenceHistogram auto_correlate_file(const std::filesystem::path& path,
                                         std::uint16_t channel, std::int64_t bin_width_ps,
                                         std::int64_t window_ps);

struct G2Result {
  double g2_zero = 0.0;
  double sigma = 0.0;
  double center_counts = 0.0;
  double mean_side_counts = 0.0;
};

// g2(0) = center-peak integral / mean side-peak integral, integrating
// +-peak_halfwidth around each peak center; sigma by Poisson propagation.
G2Result g2_from_histogram(const CoincidenceHistogram& hist, std::int64_t rep_period_ps,
                           std::int64_t peak_halfwidth_ps, int n_side_peaks);

struct RateSample {
  double t_center_s = 0.0;
  double rate_hz = 0.0;
  std::uint64_t count = 0;
};

inline constexpr std::uint16_t kAllChannels = 0xffff;

// Counts per non-overlapping window of `window_s`, from the stream epoch;
// a trailing partial window is dropped.
std::vector<RateSample> rate_series(std::span<const TimeTagRecord> records,
                                    std::uint16_t channel, double window_s);
std::vector<RateSample> rate_series_file(const std::filesystem::path& path,
                                         std::uint16_t channel, double window_s);

// CSV with `# key,value` header rows followed by `bin_center_ps,count` lines.
void write_histogram_csv(const CoincidenceHistogram& hist,
                         const std::filesystem::path& path);
CoincidenceHistogram read_histogram_csv(const std::filesystem::path& path);

}  // namespace epps

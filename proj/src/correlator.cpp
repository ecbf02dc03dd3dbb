#include "epps/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "epps/constants.hpp"
#include "epps/errors.hpp"

namespace epps {

std::optional<std::size_t> CoincidenceHistogram::bin_index(std::int64_t delta_ps) const {
  if (delta_ps < tau_min_ps || delta_ps >= tau_max_ps) return std::nullopt;
  return static_cast<std::size_t>((delta_ps - tau_min_ps) / bin_width_ps);
}

std::uint64_t CoincidenceHistogram::total_counts() const {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  return total;
}

void CoincidenceHistogram::add(const CoincidenceHistogram& other) {
  if (other.bin_width_ps != bin_width_ps || other.tau_min_ps != tau_min_ps ||
      other.tau_max_ps != tau_max_ps)
    throw DataError("histogram grids differ, cannot accumulate");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  total_singles_a += other.total_singles_a;
  total_singles_b += other.total_singles_b;
  duration_s += other.duration_s;
}

void CoincidenceAccumulator::Ring::evict_before(std::uint64_t cutoff) {
  while (head < times.size() && times[head] < cutoff) ++head;
  if (head > 1024 && head * 2 >= times.size()) {
    times.erase(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(head));
    head = 0;
  }
}

CoincidenceAccumulator::CoincidenceAccumulator(const CorrelationOptions& options)
    : opt_(options), auto_mode_(options.channel_a == options.channel_b) {
  if (opt_.window_ps <= 0) throw ConfigError("correlation window must be positive");
  if (opt_.bin_width_ps < 1) throw ConfigError("bin width must be at least 1 ps");
  const std::int64_t half_bins = opt_.window_ps / opt_.bin_width_ps + 1;
  grid_min_ = -half_bins * opt_.bin_width_ps;
  n_bins_ = static_cast<std::size_t>(2 * half_bins);
  counts_.assign(n_bins_, 0);
}

void CoincidenceAccumulator::feed(const TimeTagRecord& record) { feed_impl(record, true); }

void CoincidenceAccumulator::feed(std::span<const TimeTagRecord> records) {
  for (const auto& r : records) feed_impl(r, true);
}

void CoincidenceAccumulator::feed_context(const TimeTagRecord& record) {
  if (any_fed_ && record.timestamp < last_fed_)
    throw DataError("unsorted stream fed to correlator");
  last_fed_ = record.timestamp;
  any_fed_ = true;
  if (record.channel == opt_.channel_a) ring_a_.push(record.timestamp);
  if (!auto_mode_ && record.channel == opt_.channel_b) ring_b_.push(record.timestamp);
}

void CoincidenceAccumulator::feed_impl(const TimeTagRecord& record, bool count_singles) {
  const std::uint64_t ts = record.timestamp;
  if (any_fed_ && ts < last_fed_) throw DataError("unsorted stream fed to correlator");
  last_fed_ = ts;
  any_fed_ = true;

  const bool is_a = record.channel == opt_.channel_a;
  const bool is_b = record.channel == opt_.channel_b;
  if (count_singles) {
    if (!any_) first_ts_ = ts;
    last_ts_ = ts;
    any_ = true;
    if (is_a) singles_a_ += 1;
    if (is_b) singles_b_ += 1;
  }
  if (!is_a && !is_b) return;

  const std::uint64_t window = static_cast<std::uint64_t>(opt_.window_ps);
  const std::uint64_t cutoff = ts >= window ? ts - window : 0;

  if (auto_mode_) {
    ring_a_.evict_before(cutoff);
    // Count each unordered pair at both +delta and -delta.
    for (std::size_t i = ring_a_.head; i < ring_a_.times.size(); ++i) {
      const std::int64_t delta = static_cast<std::int64_t>(ts - ring_a_.times[i]);
      counts_[static_cast<std::size_t>((delta - grid_min_) / opt_.bin_width_ps)] += 1;
      counts_[static_cast<std::size_t>((-delta - grid_min_) / opt_.bin_width_ps)] += 1;
    }
    ring_a_.push(ts);
    if (ring_a_.size() > opt_.buffer_cap)
      throw DataError("correlator buffer cap exceeded (" +
                      std::to_string(opt_.buffer_cap) +
                      " events in window); reduce the window or raise the cap");
    return;
  }

  if (is_a) {
    ring_b_.evict_before(cutoff);
    for (std::size_t i = ring_b_.head; i < ring_b_.times.size(); ++i) {
      const std::int64_t delta = static_cast<std::int64_t>(ts - ring_b_.times[i]);
      counts_[static_cast<std::size_t>((delta - grid_min_) / opt_.bin_width_ps)] += 1;
    }
    ring_a_.push(ts);
  }
  if (is_b) {
    ring_a_.evict_before(cutoff);
    for (std::size_t i = ring_a_.head; i < ring_a_.times.size(); ++i) {
      const std::int64_t delta = -static_cast<std::int64_t>(ts - ring_a_.times[i]);
      counts_[static_cast<std::size_t>((delta - grid_min_) / opt_.bin_width_ps)] += 1;
    }
    ring_b_.push(ts);
  }
  if (ring_a_.size() > opt_.buffer_cap || ring_b_.size() > opt_.buffer_cap)
    throw DataError("correlator buffer cap exceeded (" + std::to_string(opt_.buffer_cap) +
                    " events in window); reduce the window or raise the cap");
}

CoincidenceHistogram CoincidenceAccumulator::finalize(std::array<char, 2> basis_label) const {
  CoincidenceHistogram hist;
  hist.bin_width_ps = opt_.bin_width_ps;
  hist.tau_min_ps = grid_min_;
  hist.tau_max_ps = grid_min_ + static_cast<std::int64_t>(n_bins_) * opt_.bin_width_ps;
  hist.counts = counts_;
  hist.total_singles_a = singles_a_;
  hist.total_singles_b = singles_b_;
  hist.duration_s = any_ ? static_cast<double>(last_ts_ - first_ts_) / kPicosecondsPerSecond
                         : 0.0;
  hist.basis_label = basis_label;
  return hist;
}

CoincidenceHistogram cross_correlate(std::span<const TimeTagRecord> records,
                                     const CorrelationOptions& options,
                                     std::array<char, 2> basis_label) {
  CoincidenceAccumulator acc(options);
  acc.feed(records);
  return acc.finalize(basis_label);
}

CoincidenceHistogram auto_correlate(std::span<const TimeTagRecord> records,
                                    std::uint16_t channel, std::int64_t bin_width_ps,
                                    std::int64_t window_ps) {
  CorrelationOptions opt;
  opt.channel_a = channel;
  opt.channel_b = channel;
  opt.bin_width_ps = bin_width_ps;
  opt.window_ps = window_ps;
  CoincidenceAccumulator acc(opt);
  acc.feed(records);
  return acc.finalize();
}

CoincidenceHistogram cross_correlate_file(const std::filesystem::path& path,
                                          const CorrelationOptions& options) {
  StreamReader reader(path);
  CoincidenceAccumulator acc(options);
  TimeTagRecord r;
  while (reader.next(r)) acc.feed(r);
  return acc.finalize(reader.header().basis_label);
}

CoincidenceHistogram auto_correlate_file(const std::filesystem::path& path,
                                         std::uint16_t channel, std::int64_t bin_width_ps,
                                         std::int64_t window_ps) {
  CorrelationOptions opt;
  opt.channel_a = channel;
  opt.channel_b = channel;
  opt.bin_width_ps = bin_width_ps;
  opt.window_ps = window_ps;
  StreamReader reader(path);
  CoincidenceAccumulator acc(opt);
  TimeTagRecord r;
  while (reader.next(r)) acc.feed(r);
  return acc.finalize(reader.header().basis_label);
}

G2Result g2_from_histogram(const CoincidenceHistogram& hist, std::int64_t rep_period_ps,
                           std::int64_t peak_halfwidth_ps, int n_side_peaks) {
  if (rep_period_ps <= 0 || peak_halfwidth_ps <= 0 || n_side_peaks < 1)
    throw ConfigError("g2 estimation needs positive period, halfwidth and peak count");
  const std::int64_t span = static_cast<std::int64_t>(n_side_peaks) * rep_period_ps;
  if (hist.tau_min_ps > -span || hist.tau_max_ps < span)
    throw DataError("histogram does not span " + std::to_string(n_side_peaks) +
                    " repetition periods on each side");

  auto peak_integral = [&](std::int64_t center) {
    double sum = 0.0;
    for (std::size_t b = 0; b < hist.bin_count(); ++b) {
      const double c = hist.bin_center_ps(b);
      if (std::abs(c - static_cast<double>(center)) <=
          static_cast<double>(peak_halfwidth_ps))
        sum += static_cast<double>(hist.counts[b]);
    }
    return sum;
  };

  const double center = peak_integral(0);
  double side_total = 0.0;
  int side_peaks = 0;
  for (int k = 1; k <= n_side_peaks; ++k) {
    side_total += peak_integral(k * rep_period_ps);
    side_total += peak_integral(-k * rep_period_ps);
    side_peaks += 2;
  }
  if (side_total <= 0.0) throw DataError("zero side-peak counts, cannot normalize g2");
  const double side_mean = side_total / side_peaks;

  G2Result result;
  result.center_counts = center;
  result.mean_side_counts = side_mean;
  result.g2_zero = center / side_mean;
  const double var_center = std::max(center, 1.0);
  const double var_side_mean = side_total / (static_cast<double>(side_peaks) * side_peaks);
  result.sigma = std::sqrt(var_center / (side_mean * side_mean) +
                           center * center * var_side_mean /
                               (side_mean * side_mean * side_mean * side_mean));
  return result;
}

namespace {

std::vector<RateSample> rate_series_impl(std::uint16_t channel, double window_s,
                                         const std::function<bool(TimeTagRecord&)>& next) {
  if (!(window_s > 0.0)) throw ConfigError("rate window must be positive");
  const double window_ps = window_s * kPicosecondsPerSecond;
  std::vector<std::uint64_t> counts;
  std::uint64_t last_ts = 0;
  bool any = false;
  TimeTagRecord r;
  while (next(r)) {
    if (channel != kAllChannels && r.channel != channel) continue;
    const auto idx = static_cast<std::size_t>(static_cast<double>(r.timestamp) / window_ps);
    if (idx >= counts.size()) counts.resize(idx + 1, 0);
    counts[idx] += 1;
    last_ts = std::max(last_ts, r.timestamp);
    any = true;
  }
  // Keep only windows that closed before the last tag.
  std::size_t complete = 0;
  if (any) complete = static_cast<std::size_t>(static_cast<double>(last_ts) / window_ps);
  if (complete < counts.size()) counts.resize(complete);
  std::vector<RateSample> series;
  series.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    RateSample s;
    s.t_center_s = (static_cast<double>(i) + 0.5) * window_s;
    s.count = counts[i];
    s.rate_hz = static_cast<double>(counts[i]) / window_s;
    series.push_back(s);
  }
  return series;
}

}  // namespace

std::vector<RateSample> rate_series(std::span<const TimeTagRecord> records,
                                    std::uint16_t channel, double window_s) {
  std::size_t i = 0;
  return rate_series_impl(channel, window_s, [&](TimeTagRecord& r) {
    if (i >= records.size()) return false;
    r = records[i++];
    return true;
  });
}

std::vector<RateSample> rate_series_file(const std::filesystem::path& path,
                                         std::uint16_t channel, double window_s) {
  StreamReader reader(path);
  return rate_series_impl(channel, window_s,
                          [&](TimeTagRecord& r) { return reader.next(r); });
}

void write_histogram_csv(const CoincidenceHistogram& hist,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << "# epps_histogram,1\n";
  out << "# basis_label," << hist.label_string() << "\n";
  out << "# bin_width_ps," << hist.bin_width_ps << "\n";
  out << "# tau_min_ps," << hist.tau_min_ps << "\n";
  out << "# tau_max_ps," << hist.tau_max_ps << "\n";
  out << "# total_singles_a," << hist.total_singles_a << "\n";
  out << "# total_singles_b," << hist.total_singles_b << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", hist.duration_s);
  out << "# duration_s," << buf << "\n";
  out << "bin_center_ps,count\n";
  for (std::size_t b = 0; b < hist.bin_count(); ++b) {
    std::snprintf(buf, sizeof buf, "%.1f", hist.bin_center_ps(b));
    out << buf << "," << hist.counts[b] << "\n";
  }
  if (!out) throw DataError("I/O failure writing '" + path.string() + "'");
}

CoincidenceHistogram read_histogram_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  CoincidenceHistogram hist;
  hist.counts.clear();
  std::string line;
  bool saw_marker = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      const std::string key = line.substr(2, comma - 2);
      const std::string value = line.substr(comma + 1);
      if (key == "epps_histogram") saw_marker = true;
      else if (key == "basis_label" && value.size() >= 2)
        hist.basis_label = {value[0], value[1]};
      else if (key == "bin_width_ps") hist.bin_width_ps = std::stoll(value);
      else if (key == "tau_min_ps") hist.tau_min_ps = std::stoll(value);
      else if (key == "tau_max_ps") hist.tau_max_ps = std::stoll(value);
      else if (key == "total_singles_a") hist.total_singles_a = std::stoull(value);
      else if (key == "total_singles_b") hist.total_singles_b = std::stoull(value);
      else if (key == "duration_s") hist.duration_s = std::stod(value);
      continue;
    }
    if (line.rfind("bin_center_ps", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError("malformed histogram line in '" + path.string() + "': " + line);
    hist.counts.push_back(std::stoull(line.substr(comma + 1)));
  }
  if (!saw_marker) throw DataError("'" + path.string() + "' is not an epps histogram CSV");
  const auto expected =
      static_cast<std::size_t>((hist.tau_max_ps - hist.tau_min_ps) / hist.bin_width_ps);
  if (hist.counts.size() != expected)
    throw DataError("histogram bin count mismatch in '" + path.string() + "'");
  return hist;
}

}  // namespace epps

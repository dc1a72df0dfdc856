#pragma once

// Output formats: CSV tables, weight checkpoints, run manifests and SVG
// line plots.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "spikegrad/matrix.hpp"

namespace spikegrad {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Throws std::invalid_argument unless `text` is a complete decimal number.
double parse_double(const std::string& text);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  /// Appends one row; the field count must match the header.
  void add_row(std::vector<std::string> fields);
  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  void write(std::ostream& out) const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Ordered key/value pairs; keys may repeat.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  KeyValues config;
  std::vector<Matrix> weights;
};

/// Text layout:
///   spikegrad-checkpoint <version>
///   config <key> <value>          (one per entry, value to end of line)
///   layers <count>
///   layer <rows> <cols>           (then one line of values per row)
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws std::runtime_error on malformed input or an unknown version.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// `key = value` lines, '#' comments, keys may repeat.
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);
KeyValues read_key_values(const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series);

}  // namespace spikegrad

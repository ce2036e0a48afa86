#ifndef CDM_CSV_HPP_
#define CDM_CSV_HPP_

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdm/datastreams.hpp"
#include "cdm/labeled.hpp"

namespace cdm {

using LabelMap = std::map<std::string, Label>;

/// Layout of a labeled CSV file: comma separated decimal numbers, one sample
/// per row, an optional header row (detected when the first row does not
/// parse as numbers) and one label column. An empty label field marks an
/// unlabeled sample.
struct CsvSchema {
  bool has_label = true;
  /// Zero-based label column; negative values count from the end. Default:
  /// last column.
  int label_column = -1;
  /// Label column by header name; overrides label_column when set.
  std::optional<std::string> label_column_name;
  /// Token -> label. When empty, label tokens must be positive integers.
  LabelMap label_map;
  /// Unknown label tokens become kUnknownLabel instead of an InputError.
  bool lenient_labels = false;
};

/// Streaming reader: holds one row at a time, so memory does not grow with
/// the stream length.
class CsvSampleReader final : public SampleSource {
 public:
  /// Throws IoError when the file cannot be opened, ParseError when it has
  /// no data row or a malformed first row.
  CsvSampleReader(const std::filesystem::path& path, CsvSchema schema);

  /// Throws ParseError naming the line number on malformed rows, InputError
  /// on unknown labels in strict mode.
  bool next(Sample& out) override;

  std::size_t dim() const noexcept { return dim_; }
  const std::optional<std::vector<std::string>>& header() const noexcept { return header_; }
  /// Raw label token of the last sample returned.
  const std::string& label_token() const noexcept { return token_; }
  /// 1-based line number of the last row read.
  std::size_t line_number() const noexcept { return line_no_; }

 private:
  bool read_row(std::vector<std::string>& fields);
  void parse_row(const std::vector<std::string>& fields, Sample& out);

  std::filesystem::path path_;
  CsvSchema schema_;
  std::ifstream in_;
  std::optional<std::vector<std::string>> header_;
  std::optional<std::vector<std::string>> pending_;
  std::size_t pending_line_ = 0;
  std::size_t columns_ = 0;
  std::size_t label_index_ = 0;
  std::size_t dim_ = 0;
  std::size_t line_no_ = 0;
  std::string token_;
  std::vector<std::string> fields_;
};

/// Whole file as a stream.
LabeledStream read_csv_stream(const std::filesystem::path& path, const CsvSchema& schema);

/// Whole file as a training set; every row must carry a known label.
LabeledSet read_labeled_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Label map built from the label tokens of a file: identity when every
/// token is a positive integer, otherwise the sorted distinct tokens mapped
/// to 1..M.
LabelMap infer_label_map(const std::filesystem::path& path, const CsvSchema& schema);

/// Writes features then the label (empty when unlabeled). Numbers use the
/// shortest representation that reads back to the same double.
void write_csv(const LabeledStream& stream, const std::filesystem::path& path, bool with_header = false);

}  // namespace cdm

#endif  // CDM_CSV_HPP_

#include "cdm/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "cdm/errors.hpp"

namespace cdm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

void split(const std::string& line, std::vector<std::string>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const auto piece = std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    fields.emplace_back(trim(piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out, std::chars_format::general);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_positive_int(const std::string& s, Label& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && out >= 1;
}

std::string line_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  return path.string() + ":" + std::to_string(line) + ": " + what;
}

}  // namespace

CsvSampleReader::CsvSampleReader(const std::filesystem::path& path, CsvSchema schema)
    : path_(path), schema_(std::move(schema)), in_(path) {
  if (!in_) throw IoError("cannot open CSV file '" + path.string() + "'");
  std::vector<std::string> first;
  if (!read_row(first)) throw ParseError("CSV file '" + path.string() + "' has no rows");
  columns_ = first.size();

  // Header when some would-be feature field is not a number.
  const auto provisional_label = [&]() -> std::optional<std::size_t> {
    if (!schema_.has_label) return std::nullopt;
    const int c = schema_.label_column < 0 ? static_cast<int>(columns_) + schema_.label_column : schema_.label_column;
    if (c < 0 || c >= static_cast<int>(columns_)) return std::nullopt;
    return static_cast<std::size_t>(c);
  }();
  bool numeric = true;
  double tmp = 0.0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (provisional_label && i == *provisional_label) continue;
    if (!parse_number(first[i], tmp)) numeric = false;
  }
  if (!numeric || (schema_.label_column_name && !provisional_label)) {
    header_ = first;
  } else {
    pending_ = first;
    pending_line_ = line_no_;
  }

  if (schema_.has_label) {
    if (schema_.label_column_name) {
      if (!header_) throw ParseError("CSV file '" + path.string() + "' has no header to look up the label column");
      const auto it = std::find(header_->begin(), header_->end(), *schema_.label_column_name);
      if (it == header_->end()) {
        throw ParseError("CSV file '" + path.string() + "' has no column named '" + *schema_.label_column_name + "'");
      }
      label_index_ = static_cast<std::size_t>(it - header_->begin());
    } else if (provisional_label) {
      label_index_ = *provisional_label;
    } else {
      throw ParseError("label column " + std::to_string(schema_.label_column) + " is out of range");
    }
    if (columns_ < 2) throw ParseError("CSV file '" + path.string() + "' needs a feature column besides the label");
    dim_ = columns_ - 1;
  } else {
    dim_ = columns_;
  }
}

bool CsvSampleReader::read_row(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (trim(line).empty()) continue;
    split(line, fields);
    return true;
  }
  if (in_.bad()) throw IoError("error reading '" + path_.string() + "'");
  return false;
}

void CsvSampleReader::parse_row(const std::vector<std::string>& fields, Sample& out) {
  if (fields.size() != columns_) {
    throw ParseError(line_error(path_, line_no_,
                                "expected " + std::to_string(columns_) + " fields, found " + std::to_string(fields.size())));
  }
  out.x.resize(dim_);
  std::size_t j = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (schema_.has_label && i == label_index_) continue;
    if (!parse_number(fields[i], out.x[j])) {
      throw ParseError(line_error(path_, line_no_, "field " + std::to_string(i + 1) + " ('" + fields[i] +
                                                       "') is not a finite number"));
    }
    ++j;
  }
  out.label.reset();
  token_.clear();
  if (!schema_.has_label) return;
  token_ = fields[label_index_];
  if (token_.empty()) return;
  Label y = kUnknownLabel;
  if (schema_.label_map.empty()) {
    if (!parse_positive_int(token_, y)) {
      if (!schema_.lenient_labels) {
        throw InputError(line_error(path_, line_no_, "label '" + token_ + "' is not a positive integer"));
      }
      y = kUnknownLabel;
    }
  } else if (const auto it = schema_.label_map.find(token_); it != schema_.label_map.end()) {
    y = it->second;
  } else if (!schema_.lenient_labels) {
    throw InputError(line_error(path_, line_no_, "unknown label '" + token_ + "'"));
  }
  out.label = y;
}

bool CsvSampleReader::next(Sample& out) {
  if (pending_) {
    const std::size_t current = line_no_;
    line_no_ = pending_line_;
    parse_row(*pending_, out);
    line_no_ = current;
    pending_.reset();
    return true;
  }
  if (!read_row(fields_)) return false;
  parse_row(fields_, out);
  return true;
}

LabeledStream read_csv_stream(const std::filesystem::path& path, const CsvSchema& schema) {
  CsvSampleReader reader(path, schema);
  LabeledStream stream(reader.dim());
  stream.source = path.string();
  Sample s;
  while (reader.next(s)) stream.add(s.x, s.label);
  return stream;
}

LabeledSet read_labeled_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  CsvSchema strict = schema;
  strict.lenient_labels = false;
  CsvSampleReader reader(path, strict);
  LabeledSet set(reader.dim());
  Sample s;
  while (reader.next(s)) {
    if (!s.label) {
      throw InputError(line_error(path, reader.line_number(), "training rows must be labeled"));
    }
    set.add(s.x, *s.label);
  }
  return set;
}

LabelMap infer_label_map(const std::filesystem::path& path, const CsvSchema& schema) {
  CsvSchema raw = schema;
  raw.label_map.clear();
  raw.lenient_labels = true;
  CsvSampleReader reader(path, raw);
  std::set<std::string> tokens;
  Sample s;
  bool all_integers = true;
  while (reader.next(s)) {
    if (reader.label_token().empty()) continue;
    tokens.insert(reader.label_token());
    if (s.label == kUnknownLabel) all_integers = false;
  }
  LabelMap map;
  if (all_integers) {
    for (const auto& t : tokens) {
      Label y = 0;
      parse_positive_int(t, y);
      map.emplace(t, y);
    }
  } else {
    Label next = 1;
    for (const auto& t : tokens) map.emplace(t, next++);
  }
  return map;
}

void write_csv(const LabeledStream& stream, const std::filesystem::path& path, bool with_header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  if (with_header) {
    for (std::size_t j = 0; j < stream.dim(); ++j) out << 'x' << j + 1 << ',';
    out << "label\n";
  }
  char buf[64];
  for (std::size_t t = 0; t < stream.size(); ++t) {
    for (double v : stream.features.row(t)) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, ptr - buf);
      out << ',';
    }
    if (stream.labels[t]) out << *stream.labels[t];
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace cdm

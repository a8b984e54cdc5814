#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "scitech/common.hpp"
#include "scitech/vecfile.hpp"

namespace scitech {

struct PublicationRecord {
  std::string doc_id;
  std::string title;
  std::string abstract;
  int year = 0;
  std::int64_t citation_count = 0;
  std::vector<std::string> countries;
  std::string journal;
  std::vector<std::string> author_keywords;

  bool operator==(const PublicationRecord&) const = default;
};

inline constexpr int kMinTechField = 1;
inline constexpr int kMaxTechField = 35;

struct PatentRecord {
  std::string patent_id;
  std::string abstract;
  int priority_year = 0;
  std::string family_id;
  std::vector<std::string> offices;
  std::vector<std::string> applicant_countries;
  std::vector<int> tech_fields;
  bool is_priority = false;

  bool operator==(const PatentRecord&) const = default;
};

enum class TableFormat { jsonl, csv };

inline TableFormat parse_table_format(std::string_view s) {
  if (s == "jsonl") return TableFormat::jsonl;
  if (s == "csv") return TableFormat::csv;
  throw Error("unknown table format '" + std::string(s) + "' (expected jsonl or csv)");
}

template <typename Record>
struct ParseResult {
  std::vector<Record> records;
  std::vector<Diagnostic> errors;
};

namespace detail {

using ojson = nlohmann::ordered_json;

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// One logical row of a tabular file: named fields as JSON values plus the
/// physical line the row started on.
struct RawRow {
  std::size_t line = 0;
  ojson fields;
};

// RFC 4180 style CSV: comma separated, double-quote escaping, quoted fields may
// span lines. List-valued columns use ';' between items.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> split_csv(std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_has_content = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      row_has_content = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      row_has_content = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (row_has_content || !field.empty()) {
        row.push_back(std::move(field));
        rows.emplace_back(row_line, std::move(row));
      }
      row.clear();
      field.clear();
      row_has_content = false;
      ++line;
      row_line = line;
    } else {
      field.push_back(c);
      row_has_content = true;
    }
  }
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.emplace_back(row_line, std::move(row));
  }
  return rows;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(';', start);
    auto item = trim(std::string_view(s).substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

/// Reads rows from either format. CSV cells are converted using the caller's
/// column kinds so that record construction is format-independent.
enum class ColumnKind { text, integer, boolean, text_list, int_list };

inline std::vector<RawRow> read_rows(const std::filesystem::path& path, TableFormat format,
                                     const std::map<std::string, ColumnKind>& columns,
                                     std::vector<Diagnostic>& errors) {
  const std::string text = read_file(path);
  std::vector<RawRow> rows;
  if (format == TableFormat::jsonl) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      ++line_no;
      std::string_view line(text.data() + start, end - start);
      start = end + 1;
      if (trim(line).empty()) continue;
      try {
        auto j = ojson::parse(line);
        if (!j.is_object()) {
          errors.push_back({line_no, "line is not a JSON object"});
          continue;
        }
        rows.push_back({line_no, std::move(j)});
      } catch (const nlohmann::json::parse_error& e) {
        errors.push_back({line_no, std::string("malformed JSON: ") + e.what()});
      }
    }
    return rows;
  }

  auto table = split_csv(text);
  if (table.empty()) return rows;
  const auto header = table.front().second;
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& [line_no, cells] = table[r];
    if (cells.size() != header.size()) {
      errors.push_back({line_no, "expected " + std::to_string(header.size()) + " columns, found " +
                                     std::to_string(cells.size())});
      continue;
    }
    ojson obj = ojson::object();
    bool ok = true;
    for (std::size_t c = 0; c < header.size() && ok; ++c) {
      const auto name = trim(header[c]);
      const auto kind_it = columns.find(name);
      const auto kind = kind_it == columns.end() ? ColumnKind::text : kind_it->second;
      const std::string& cell = cells[c];
      try {
        switch (kind) {
          case ColumnKind::text:
            obj[name] = cell;
            break;
          case ColumnKind::integer:
            if (trim(cell).empty()) break;
            obj[name] = std::stoll(trim(cell));
            break;
          case ColumnKind::boolean: {
            const auto v = trim(cell);
            if (v.empty()) break;
            if (v == "true" || v == "1") obj[name] = true;
            else if (v == "false" || v == "0") obj[name] = false;
            else throw std::invalid_argument("bad boolean");
            break;
          }
          case ColumnKind::text_list:
            obj[name] = split_list(cell);
            break;
          case ColumnKind::int_list: {
            auto items = split_list(cell);
            ojson arr = ojson::array();
            for (const auto& it : items) arr.push_back(std::stoll(it));
            obj[name] = std::move(arr);
            break;
          }
        }
      } catch (const std::exception&) {
        errors.push_back({line_no, "column '" + name + "' has invalid value '" + cell + "'"});
        ok = false;
      }
    }
    if (ok) rows.push_back({line_no, std::move(obj)});
  }
  return rows;
}

struct FieldError {
  std::string message;
};

inline const ojson* field(const ojson& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

inline std::string text_field(const ojson& obj, const char* name, bool required) {
  const auto* v = field(obj, name);
  if (v == nullptr) {
    if (required) throw FieldError{std::string("missing field '") + name + "'"};
    return {};
  }
  if (!v->is_string()) throw FieldError{std::string("field '") + name + "' must be a string"};
  return v->get<std::string>();
}

inline std::int64_t int_field(const ojson& obj, const char* name, bool required,
                              std::int64_t fallback = 0) {
  const auto* v = field(obj, name);
  if (v == nullptr) {
    if (required) throw FieldError{std::string("missing field '") + name + "'"};
    return fallback;
  }
  if (!v->is_number_integer()) throw FieldError{std::string("field '") + name + "' must be an integer"};
  return v->get<std::int64_t>();
}

inline bool bool_field(const ojson& obj, const char* name, bool fallback) {
  const auto* v = field(obj, name);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) throw FieldError{std::string("field '") + name + "' must be a boolean"};
  return v->get<bool>();
}

inline std::vector<std::string> text_list_field(const ojson& obj, const char* name) {
  const auto* v = field(obj, name);
  if (v == nullptr) return {};
  if (!v->is_array()) throw FieldError{std::string("field '") + name + "' must be an array"};
  std::vector<std::string> out;
  for (const auto& item : *v) {
    if (!item.is_string()) throw FieldError{std::string("field '") + name + "' must hold strings"};
    out.push_back(item.get<std::string>());
  }
  return out;
}

inline std::vector<int> int_list_field(const ojson& obj, const char* name) {
  const auto* v = field(obj, name);
  if (v == nullptr) return {};
  if (!v->is_array()) throw FieldError{std::string("field '") + name + "' must be an array"};
  std::vector<int> out;
  for (const auto& item : *v) {
    if (!item.is_number_integer()) throw FieldError{std::string("field '") + name + "' must hold integers"};
    out.push_back(item.get<int>());
  }
  return out;
}

inline std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ';';
    out += items[i];
  }
  return out;
}

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Publications

inline PublicationRecord publication_from_json(const nlohmann::ordered_json& obj) {
  using namespace detail;
  PublicationRecord p;
  p.doc_id = text_field(obj, "doc_id", true);
  if (trim(p.doc_id).empty()) throw FieldError{"empty doc_id"};
  p.title = text_field(obj, "title", false);
  p.abstract = text_field(obj, "abstract", true);
  if (trim(p.abstract).empty()) throw FieldError{"empty abstract"};
  const auto year = int_field(obj, "year", true);
  if (year < 1900 || year > 2100) throw FieldError{"year " + std::to_string(year) + " outside [1900, 2100]"};
  p.year = static_cast<int>(year);
  p.citation_count = int_field(obj, "citation_count", false);
  if (p.citation_count < 0) throw FieldError{"negative citation_count"};
  p.countries = text_list_field(obj, "countries");
  p.journal = text_field(obj, "journal", false);
  p.author_keywords = text_list_field(obj, "author_keywords");
  return p;
}

inline nlohmann::ordered_json to_json(const PublicationRecord& p) {
  return {{"doc_id", p.doc_id},     {"title", p.title},
          {"abstract", p.abstract}, {"year", p.year},
          {"citation_count", p.citation_count}, {"countries", p.countries},
          {"journal", p.journal},   {"author_keywords", p.author_keywords}};
}

/// Reads publications. Malformed rows are skipped and reported with their line
/// number; a duplicate doc_id or an unreadable file is fatal.
inline ParseResult<PublicationRecord> parse_publications(const std::filesystem::path& path,
                                                         TableFormat format = TableFormat::jsonl) {
  using detail::ColumnKind;
  static const std::map<std::string, ColumnKind> columns = {
      {"year", ColumnKind::integer},
      {"citation_count", ColumnKind::integer},
      {"countries", ColumnKind::text_list},
      {"author_keywords", ColumnKind::text_list}};
  ParseResult<PublicationRecord> out;
  auto rows = detail::read_rows(path, format, columns, out.errors);
  std::unordered_set<std::string> seen;
  for (auto& row : rows) {
    try {
      auto rec = publication_from_json(row.fields);
      if (!seen.insert(rec.doc_id).second) {
        throw Error(path.string() + ": duplicate doc_id '" + rec.doc_id + "' at line " +
                    std::to_string(row.line));
      }
      out.records.push_back(std::move(rec));
    } catch (const detail::FieldError& e) {
      out.errors.push_back({row.line, e.message});
    }
  }
  std::stable_sort(out.errors.begin(), out.errors.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
  return out;
}

inline std::string write_publications_jsonl(std::span<const PublicationRecord> pubs) {
  std::string out;
  for (const auto& p : pubs) {
    out += to_json(p).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    out += '\n';
  }
  return out;
}

inline std::string write_publications_csv(std::span<const PublicationRecord> pubs) {
  using detail::csv_cell;
  using detail::join_list;
  std::string out = "doc_id,title,abstract,year,citation_count,countries,journal,author_keywords\n";
  for (const auto& p : pubs) {
    out += csv_cell(p.doc_id) + ',' + csv_cell(p.title) + ',' + csv_cell(p.abstract) + ',' +
           std::to_string(p.year) + ',' + std::to_string(p.citation_count) + ',' +
           csv_cell(join_list(p.countries)) + ',' + csv_cell(p.journal) + ',' +
           csv_cell(join_list(p.author_keywords)) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Patents

inline PatentRecord patent_from_json(const nlohmann::ordered_json& obj) {
  using namespace detail;
  PatentRecord p;
  p.patent_id = text_field(obj, "patent_id", true);
  if (trim(p.patent_id).empty()) throw FieldError{"empty patent_id"};
  p.abstract = text_field(obj, "abstract", true);
  if (trim(p.abstract).empty()) throw FieldError{"empty abstract"};
  p.priority_year = static_cast<int>(int_field(obj, "priority_year", true));
  p.family_id = text_field(obj, "family_id", false);
  p.offices = text_list_field(obj, "offices");
  p.applicant_countries = text_list_field(obj, "applicant_countries");
  p.tech_fields = int_list_field(obj, "tech_fields");
  for (int f : p.tech_fields) {
    if (f < kMinTechField || f > kMaxTechField) {
      throw FieldError{"field code out of range: " + std::to_string(f)};
    }
  }
  p.is_priority = bool_field(obj, "is_priority", false);
  return p;
}

inline nlohmann::ordered_json to_json(const PatentRecord& p) {
  return {{"patent_id", p.patent_id},
          {"abstract", p.abstract},
          {"priority_year", p.priority_year},
          {"family_id", p.family_id},
          {"offices", p.offices},
          {"applicant_countries", p.applicant_countries},
          {"tech_fields", p.tech_fields},
          {"is_priority", p.is_priority}};
}

inline ParseResult<PatentRecord> parse_patents(const std::filesystem::path& path,
                                               TableFormat format = TableFormat::jsonl) {
  using detail::ColumnKind;
  static const std::map<std::string, ColumnKind> columns = {
      {"priority_year", ColumnKind::integer},
      {"offices", ColumnKind::text_list},
      {"applicant_countries", ColumnKind::text_list},
      {"tech_fields", ColumnKind::int_list},
      {"is_priority", ColumnKind::boolean}};
  ParseResult<PatentRecord> out;
  auto rows = detail::read_rows(path, format, columns, out.errors);
  std::unordered_set<std::string> seen;
  for (auto& row : rows) {
    try {
      auto rec = patent_from_json(row.fields);
      if (!seen.insert(rec.patent_id).second) {
        throw Error(path.string() + ": duplicate patent_id '" + rec.patent_id + "' at line " +
                    std::to_string(row.line));
      }
      out.records.push_back(std::move(rec));
    } catch (const detail::FieldError& e) {
      out.errors.push_back({row.line, e.message});
    }
  }
  std::stable_sort(out.errors.begin(), out.errors.end(),
                   [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
  return out;
}

inline std::string write_patents_jsonl(std::span<const PatentRecord> patents) {
  std::string out;
  for (const auto& p : patents) {
    out += to_json(p).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    out += '\n';
  }
  return out;
}

inline std::string write_patents_csv(std::span<const PatentRecord> patents) {
  using detail::csv_cell;
  using detail::join_list;
  std::string out =
      "patent_id,abstract,priority_year,family_id,offices,applicant_countries,tech_fields,is_priority\n";
  for (const auto& p : patents) {
    std::vector<std::string> fields;
    for (int f : p.tech_fields) fields.push_back(std::to_string(f));
    out += csv_cell(p.patent_id) + ',' + csv_cell(p.abstract) + ',' + std::to_string(p.priority_year) +
           ',' + csv_cell(p.family_id) + ',' + csv_cell(join_list(p.offices)) + ',' +
           csv_cell(join_list(p.applicant_countries)) + ',' + csv_cell(join_list(fields)) + ',' +
           (p.is_priority ? "true" : "false") + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus selection

inline const std::set<std::string>& ip5_offices() {
  static const std::set<std::string> offices = {"US", "EP", "JP", "KR", "CN"};
  return offices;
}

/// Keeps priority filings with at least one application at an IP5 office.
inline std::vector<PatentRecord> filter_priority_ip5(std::span<const PatentRecord> patents) {
  std::vector<PatentRecord> out;
  for (const auto& p : patents) {
    if (!p.is_priority) continue;
    const bool ip5 = std::any_of(p.offices.begin(), p.offices.end(),
                                 [](const std::string& o) { return ip5_offices().contains(o); });
    if (ip5) out.push_back(p);
  }
  return out;
}

/// Keeps the per_year most cited records of every year, ties broken by
/// ascending doc_id. Output keeps input order.
inline std::vector<PublicationRecord> select_top_cited(std::span<const PublicationRecord> pubs,
                                                       std::size_t per_year) {
  if (per_year == 0) throw Error("select_top_cited: per_year must be positive");
  std::map<int, std::vector<std::size_t>> by_year;
  for (std::size_t i = 0; i < pubs.size(); ++i) by_year[pubs[i].year].push_back(i);
  std::vector<bool> keep(pubs.size(), false);
  for (auto& [year, idx] : by_year) {
    const std::size_t take = std::min(per_year, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (pubs[a].citation_count != pubs[b].citation_count) {
                          return pubs[a].citation_count > pubs[b].citation_count;
                        }
                        return pubs[a].doc_id < pubs[b].doc_id;
                      });
    for (std::size_t i = 0; i < take; ++i) keep[idx[i]] = true;
  }
  std::vector<PublicationRecord> out;
  for (std::size_t i = 0; i < pubs.size(); ++i) {
    if (keep[i]) out.push_back(pubs[i]);
  }
  return out;
}

}  // namespace scitech

#include "lls/dataset.hpp"

#include <algorithm>
#include <istream>
#include <sstream>
#include <unordered_map>

namespace lls {

int SurveyDesign::total_cells() const {
  int total = 0;
  for (int l : levels) total += l;
  return total;
}

int SurveyDesign::cell_offset(int j) const {
  int off = 0;
  for (int q = 0; q < j; ++q) off += levels[q];
  return off;
}

void SurveyDesign::validate() const {
  if (levels.empty()) throw input_error("design: need at least one question");
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (levels[j] < 2)
      throw input_error("design: L_" + std::to_string(j + 1) + " = " +
                        std::to_string(levels[j]) + " but every question needs >= 2 outcomes");
  }
}

int ResponsePattern::order() const {
  int n = 0;
  for (int e : entries)
    if (e != 0) ++n;
  return n;
}

bool ResponsePattern::complete() const {
  return order() == size();
}

void ResponsePattern::validate(const SurveyDesign& design) const {
  if (size() != design.question_count())
    throw input_error("pattern length " + std::to_string(size()) + " does not match J=" +
                      std::to_string(design.question_count()));
  for (int j = 0; j < size(); ++j) {
    if (entries[j] < 0 || entries[j] > design.levels[j])
      throw input_error("pattern entry " + std::to_string(entries[j]) + " out of range 0.." +
                        std::to_string(design.levels[j]) + " at question " + std::to_string(j + 1));
  }
}

std::string ResponsePattern::to_string() const {
  std::string out;
  for (int j = 0; j < size(); ++j) {
    if (j) out += ';';
    out += std::to_string(entries[j]);
  }
  return out;
}

ResponsePattern ResponsePattern::parse(const std::string& text) {
  ResponsePattern p;
  std::string tok;
  std::istringstream in(text);
  while (std::getline(in, tok, ';')) {
    try {
      p.entries.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw input_error("bad pattern token '" + tok + "' in '" + text + "'");
    }
  }
  if (p.entries.empty()) throw input_error("empty pattern '" + text + "'");
  return p;
}

Dataset::Dataset(SurveyDesign design, std::vector<ResponseRecord> records)
    : design_(std::move(design)) {
  design_.validate();
  cols_ = static_cast<std::size_t>(design_.question_count());
  rows_ = records.size();
  values_.reserve(rows_ * cols_);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.size() != cols_)
      throw input_error("record " + std::to_string(i + 1) + " has " + std::to_string(rec.size()) +
                        " answers, expected " + std::to_string(cols_));
    for (std::size_t j = 0; j < cols_; ++j) {
      int code = rec[j];
      if (code < 0 || code > design_.levels[j])
        throw input_error("record " + std::to_string(i + 1) + ": code " + std::to_string(code) +
                          " exceeds L_" + std::to_string(j + 1) + "=" +
                          std::to_string(design_.levels[j]));
      if (code == 0) has_missing_ = true;
      values_.push_back(code);
    }
  }
}

namespace {

std::vector<std::string> split_row(const std::string& line, std::optional<char> delimiter) {
  std::vector<std::string> fields;
  char delim = delimiter ? *delimiter : (line.find(',') != std::string::npos ? ',' : ' ');
  std::string tok;
  if (delim == ' ') {
    std::istringstream in(line);
    while (in >> tok) fields.push_back(tok);
  } else {
    std::istringstream in(line);
    while (std::getline(in, tok, delim)) {
      // trim surrounding blanks
      auto b = tok.find_first_not_of(" \t\r");
      auto e = tok.find_last_not_of(" \t\r");
      fields.push_back(b == std::string::npos ? std::string() : tok.substr(b, e - b + 1));
    }
  }
  return fields;
}

}  // namespace

Dataset load_dataset(std::istream& source, std::optional<SurveyDesign> design,
                     const LoadOptions& options) {
  std::vector<ResponseRecord> records;
  std::string line;
  std::size_t row_no = 0;
  std::size_t width = design ? design->levels.size() : 0;
  bool first = true;
  while (std::getline(source, line)) {
    ++row_no;
    if (first && options.has_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_row(line, options.delimiter);
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw input_error("row " + std::to_string(row_no) + ": expected " + std::to_string(width) +
                        " fields, got " + std::to_string(fields.size()));
    ResponseRecord rec(width, 0);
    for (std::size_t j = 0; j < width; ++j) {
      if (fields[j] == options.missing_token) {
        rec[j] = 0;
        continue;
      }
      int code;
      try {
        std::size_t used = 0;
        code = std::stoi(fields[j], &used);
        if (used != fields[j].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw input_error("row " + std::to_string(row_no) + ", column " + std::to_string(j + 1) +
                          ": '" + fields[j] + "' is not an integer code");
      }
      if (code < 1)
        throw input_error("row " + std::to_string(row_no) + ", column " + std::to_string(j + 1) +
                          ": code " + std::to_string(code) + " must be >= 1 (missing token is '" +
                          options.missing_token + "')");
      rec[j] = code;
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw input_error("no records in input");

  SurveyDesign d;
  if (design) {
    d = *design;
  } else {
    d.levels.assign(width, 2);
    for (const auto& rec : records)
      for (std::size_t j = 0; j < width; ++j) d.levels[j] = std::max(d.levels[j], rec[j]);
  }

  if (options.missing_as_category) {
    for (auto& l : d.levels) ++l;
    for (auto& rec : records)
      for (std::size_t j = 0; j < width; ++j)
        if (rec[j] == 0) rec[j] = d.levels[j];
  }

  if (design) {
    for (std::size_t i = 0; i < records.size(); ++i)
      for (std::size_t j = 0; j < width; ++j)
        if (records[i][j] > d.levels[j])
          throw input_error("row " + std::to_string(i + 1) + ", column " + std::to_string(j + 1) +
                            ": code " + std::to_string(records[i][j]) + " exceeds L_" +
                            std::to_string(j + 1) + "=" + std::to_string(d.levels[j]));
  }
  return Dataset(std::move(d), std::move(records));
}

double FrequencyCount::frequency() const {
  if (eligible <= 0) throw numeric_error("no eligible respondents");
  return static_cast<double>(matching) / static_cast<double>(eligible);
}

FrequencyCount count_pattern(const Dataset& data, const ResponsePattern& pattern) {
  pattern.validate(data.design());
  const int J = pattern.size();
  if (pattern.order() == 0) return {data.record_count(), data.record_count()};

  std::vector<int> support;
  for (int j = 0; j < J; ++j)
    if (pattern.entries[j] != 0) support.push_back(j);

  FrequencyCount out;
  for (std::int64_t i = 0; i < data.record_count(); ++i) {
    const std::int32_t* rec = data.row(i);
    bool eligible = true, match = true;
    for (int j : support) {
      int a = rec[j];
      if (a == 0) {
        eligible = false;
        break;
      }
      if (a != pattern.entries[j]) match = false;
    }
    if (eligible) {
      ++out.eligible;
      if (match) ++out.matching;
    }
  }
  return out;
}

double pattern_frequency(const Dataset& data, const ResponsePattern& pattern) {
  auto c = count_pattern(data, pattern);
  if (!c.available())
    throw numeric_error("no eligible respondents for pattern " + pattern.to_string());
  return c.frequency();
}

PatternTable unique_patterns(const Dataset& data) {
  struct VecHash {
    std::size_t operator()(const std::vector<int>& v) const {
      std::size_t h = 1469598103934665603ull;
      for (int x : v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ull;
      return h;
    }
  };
  const int J = data.design().question_count();
  std::unordered_map<std::vector<int>, std::int32_t, VecHash> index;
  PatternTable table;
  table.record_index.resize(data.record_count());
  for (std::int64_t i = 0; i < data.record_count(); ++i) {
    std::vector<int> key(data.row(i), data.row(i) + J);
    auto [it, inserted] = index.try_emplace(key, static_cast<std::int32_t>(table.patterns.size()));
    if (inserted) {
      table.patterns.emplace_back(key);
      table.counts.push_back(0);
    }
    ++table.counts[it->second];
    table.record_index[i] = it->second;
  }
  return table;
}

ResponsePattern pattern_sum(const ResponsePattern& a, const ResponsePattern& b) {
  if (a.size() != b.size()) throw input_error("pattern_sum: length mismatch");
  ResponsePattern out;
  out.entries.resize(a.entries.size());
  for (int j = 0; j < a.size(); ++j) {
    if (a.entries[j] != 0 && b.entries[j] != 0)
      throw input_error("inestimable combination: patterns overlap at question " +
                        std::to_string(j + 1));
    out.entries[j] = std::max(a.entries[j], b.entries[j]);
  }
  return out;
}

}  // namespace lls

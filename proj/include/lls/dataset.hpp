#pragma once

#include "lls/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lls {

/// Design of a categorical survey: J questions, question j has outcomes 1..L_j.
/// Outcome code 0 is reserved throughout for "missing / marginalized".
struct SurveyDesign {
  std::vector<int> levels;

  int question_count() const { return static_cast<int>(levels.size()); }
  /// |L| = sum of L_j: the number of (question, outcome) cells.
  int total_cells() const;
  /// Offset of question j's first cell in the flat (j,l) indexing.
  int cell_offset(int j) const;
  /// Flat index of cell (question j, outcome l), l in 1..L_j.
  int cell_index(int j, int l) const { return cell_offset(j) + (l - 1); }

  void validate() const;
  bool operator==(const SurveyDesign&) const = default;
};

/// One respondent's answers; entry j in {0,...,L_j}, 0 meaning missing.
using ResponseRecord = std::vector<int>;

/// Response pattern ell: per-question outcome codes with 0 marking
/// marginalized/unanswered positions. Indexes frequencies and moments.
struct ResponsePattern {
  std::vector<int> entries;

  ResponsePattern() = default;
  explicit ResponsePattern(std::vector<int> e) : entries(std::move(e)) {}

  int size() const { return static_cast<int>(entries.size()); }
  /// Number of nonzero positions.
  int order() const;
  bool complete() const;

  void validate(const SurveyDesign& design) const;
  std::string to_string() const;
  static ResponsePattern parse(const std::string& text);

  bool operator==(const ResponsePattern&) const = default;
};

/// Immutable record store; rows are respondents, columns questions.
class Dataset {
 public:
  Dataset(SurveyDesign design, std::vector<ResponseRecord> records);

  const SurveyDesign& design() const { return design_; }
  std::int64_t record_count() const { return static_cast<std::int64_t>(rows_); }
  bool has_missing() const { return has_missing_; }
  int answer(std::int64_t record, int question) const {
    return values_[static_cast<std::size_t>(record) * cols_ + question];
  }

  /// Row pointer for tight counting loops.
  const std::int32_t* row(std::int64_t record) const {
    return values_.data() + static_cast<std::size_t>(record) * cols_;
  }

 private:
  SurveyDesign design_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int32_t> values_;
  bool has_missing_ = false;
};

struct LoadOptions {
  std::string missing_token = ".";
  bool has_header = false;
  /// Optional delimiter; by default a line is split on ',' when present,
  /// otherwise on whitespace.
  std::optional<char> delimiter;
  /// Recode missing answers as an extra outcome L_j+1 (and bump L_j).
  bool missing_as_category = false;
};

/// Parses delimiter-separated integer codes. When no design is supplied,
/// L_j is inferred as the largest code observed in column j.
Dataset load_dataset(std::istream& source, std::optional<SurveyDesign> design,
                     const LoadOptions& options = {});

/// I_ell (records matching every nonzero entry) and I_avail (records
/// non-missing at every nonzero position).
struct FrequencyCount {
  std::int64_t matching = 0;
  std::int64_t eligible = 0;

  double frequency() const;
  bool available() const { return eligible > 0; }
};

FrequencyCount count_pattern(const Dataset& data, const ResponsePattern& pattern);

/// Deduplicated record patterns in first-appearance order.
struct PatternTable {
  std::vector<ResponsePattern> patterns;
  std::vector<std::int64_t> counts;
  std::vector<std::int32_t> record_index;  // record -> pattern row
};

PatternTable unique_patterns(const Dataset& data);

/// f_ell = I_ell / I_avail; the all-zero pattern has frequency 1 by convention.
/// Throws numeric_error when no record is eligible.
double pattern_frequency(const Dataset& data, const ResponsePattern& pattern);

/// Componentwise union of two patterns with disjoint supports. An overlap is
/// the inestimable "question mark" case and throws input_error.
ResponsePattern pattern_sum(const ResponsePattern& a, const ResponsePattern& b);

}  // namespace lls

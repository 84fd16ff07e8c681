#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skillrate/core.hpp"

namespace skillrate {

/// How a raw row is reduced to the H/A/D alphabet.
enum class SportRule {
  Outcome,      ///< a column holding result tokens (H/A/D or mapped tokens)
  Scores,       ///< home/away score columns: H iff home > away, D iff equal
  WinnerLoser,  ///< the home column names the winner, away the loser
};

enum class DateFormat {
  Auto,    ///< ISO date if it looks like one, otherwise a day number
  Iso,     ///< YYYY-MM-DD, optionally followed by THH:MM[:SS]
  Dmy,     ///< DD/MM/YYYY or DD/MM/YY
  Number,  ///< fractional day number (days since 1970-01-01)
};

/// Column mapping read from a flat key=value file. The defaults describe the
/// canonical format `date,home,away,outcome`.
struct SchemaDescriptor {
  std::string date_column = "date";
  std::string home_column = "home";
  std::string away_column = "away";
  std::string outcome_column = "outcome";
  std::string home_score_column;
  std::string away_score_column;
  SportRule rule = SportRule::Outcome;
  DateFormat date_format = DateFormat::Auto;
  char delimiter = ',';
  /// Raw result token -> canonical token, e.g. "1-0" -> H.
  std::map<std::string, Outcome> outcome_map;
};

SchemaDescriptor parse_schema(std::istream& in);
SchemaDescriptor load_schema(const std::filesystem::path& path);

/// Parses a match file into a time-sorted stream (stable for equal times).
/// Times become days since the earliest record. Errors name the 1-based data
/// row (the header is row 0).
MatchStream read_csv(std::istream& in, const SchemaDescriptor& schema = {});
MatchStream load_csv(const std::filesystem::path& path, const SchemaDescriptor& schema = {});

/// Canonical `date,home,away,outcome` output. Dates are written as absolute
/// day numbers (origin + time) so reading the file back restores both the
/// times and the origin.
void write_csv(std::ostream& out, const MatchStream& stream);

/// Writes one CSV field, quoting it when it holds a comma, quote or newline.
void write_csv_field(std::ostream& out, std::string_view s);

/// Splits one delimited line; quoted fields may hold the delimiter and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line, char delimiter = ',');

struct FixtureRow {
  std::string date;
  std::string home;
  std::string away;
};

/// Reads a `date,home,away` fixture list (columns located by header).
std::vector<FixtureRow> read_fixtures(std::istream& in);

/// Day number (days since 1970-01-01) for a date string in the given format.
double parse_day(std::string_view text, DateFormat format);

/// Stream time of a date string (any format accepted by DateFormat::Auto).
double stream_time(const MatchStream& stream, std::string_view date);

/// Train = records strictly before `cutoff` (stream time); test = the rest.
/// Both halves keep the full player registry and the origin.
std::pair<MatchStream, MatchStream> split_by_time(const MatchStream& stream, double cutoff);
std::pair<MatchStream, MatchStream> split_by_date(const MatchStream& stream,
                                                  std::string_view cutoff_date);

/// Concatenation of two streams sharing one registry (test after train).
MatchStream concatenate(const MatchStream& first, const MatchStream& second);

}  // namespace skillrate

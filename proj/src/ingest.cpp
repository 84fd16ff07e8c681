#include "skillrate/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace skillrate {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\xEF\xBB\xBF";  // includes a UTF-8 BOM
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// RFC 4180 style split: quoted fields may contain the delimiter and "" escapes.
std::vector<std::string> split_fields(std::string_view line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.emplace_back(trim(cur));
  return fields;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) return std::nullopt;
  return v;
}

std::optional<double> civil_day(int y, int m, int d) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return static_cast<double>(sys_days{ymd}.time_since_epoch().count());
}

std::optional<double> parse_iso(std::string_view s) {
  s = trim(s);
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto y = parse_int(s.substr(0, 4));
  auto m = parse_int(s.substr(5, 2));
  auto d = parse_int(s.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  auto day = civil_day(*y, *m, *d);
  if (!day) return std::nullopt;
  if (s.size() == 10) return day;
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  auto clock = s.substr(11);
  int parts[3] = {0, 0, 0};
  std::size_t n = 0;
  while (!clock.empty() && n < 3) {
    const auto colon = clock.find(':');
    auto piece = clock.substr(0, colon);
    auto v = parse_int(piece);
    if (!v) return std::nullopt;
    parts[n++] = *v;
    if (colon == std::string_view::npos) break;
    clock = clock.substr(colon + 1);
  }
  if (n < 2 || parts[0] > 23 || parts[1] > 59 || parts[2] > 60) return std::nullopt;
  return *day + (parts[0] * 3600.0 + parts[1] * 60.0 + parts[2]) / 86400.0;
}

std::optional<double> parse_dmy(std::string_view s) {
  s = trim(s);
  const auto a = s.find('/');
  const auto b = s.find('/', a == std::string_view::npos ? 0 : a + 1);
  if (a == std::string_view::npos || b == std::string_view::npos) return std::nullopt;
  auto d = parse_int(s.substr(0, a));
  auto m = parse_int(s.substr(a + 1, b - a - 1));
  auto ystr = s.substr(b + 1);
  auto y = parse_int(ystr);
  if (!d || !m || !y) return std::nullopt;
  if (ystr.size() <= 2) *y += *y < 70 ? 2000 : 1900;
  return civil_day(*y, *m, *d);
}

}  // namespace

double parse_day(std::string_view text, DateFormat format) {
  std::optional<double> day;
  switch (format) {
    case DateFormat::Iso: day = parse_iso(text); break;
    case DateFormat::Dmy: day = parse_dmy(text); break;
    case DateFormat::Number: day = parse_number(text); break;
    case DateFormat::Auto:
      day = parse_iso(text);
      if (!day) day = parse_number(text);
      break;
  }
  if (!day) throw_input("unparseable date '" + std::string(text) + "'");
  return *day;
}

SchemaDescriptor parse_schema(std::istream& in) {
  SchemaDescriptor schema;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw_input("schema line " + std::to_string(lineno) + ": expected key=value");
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    if (key == "date") schema.date_column = value;
    else if (key == "home") schema.home_column = value;
    else if (key == "away") schema.away_column = value;
    else if (key == "outcome") schema.outcome_column = value;
    else if (key == "home_score") schema.home_score_column = value;
    else if (key == "away_score") schema.away_score_column = value;
    else if (key == "delimiter") {
      if (value.size() != 1 && value != "tab")
        throw_input("schema line " + std::to_string(lineno) + ": delimiter must be one character");
      schema.delimiter = value == "tab" ? '\t' : value[0];
    } else if (key == "rule") {
      if (value == "outcome") schema.rule = SportRule::Outcome;
      else if (value == "scores") schema.rule = SportRule::Scores;
      else if (value == "winner_loser") schema.rule = SportRule::WinnerLoser;
      else throw_input("schema line " + std::to_string(lineno) + ": unknown rule '" + value + "'");
    } else if (key == "date_format") {
      if (value == "auto") schema.date_format = DateFormat::Auto;
      else if (value == "iso") schema.date_format = DateFormat::Iso;
      else if (value == "dmy") schema.date_format = DateFormat::Dmy;
      else if (value == "number") schema.date_format = DateFormat::Number;
      else throw_input("schema line " + std::to_string(lineno) + ": unknown date_format '" + value + "'");
    } else if (key.rfind("map.", 0) == 0) {
      auto y = parse_outcome_token(value);
      if (!y) throw_input("schema line " + std::to_string(lineno) + ": map target must be H, A or D");
      schema.outcome_map[key.substr(4)] = *y;
    } else {
      throw_input("schema line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (schema.rule == SportRule::Scores &&
      (schema.home_score_column.empty() || schema.away_score_column.empty()))
    throw_input("schema: rule=scores needs home_score and away_score columns");
  return schema;
}

SchemaDescriptor load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_input("cannot open schema file " + path.string());
  return parse_schema(in);
}

MatchStream read_csv(std::istream& in, const SchemaDescriptor& schema) {
  std::string line;
  if (!std::getline(in, line)) throw_input("empty match file (no header row)");
  const auto header = split_fields(line, schema.delimiter);
  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw_input("missing column '" + name + "' in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t date_col = column(schema.date_column);
  const std::size_t home_col = column(schema.home_column);
  const std::size_t away_col = column(schema.away_column);
  std::size_t outcome_col = 0, hs_col = 0, as_col = 0;
  if (schema.rule == SportRule::Outcome) outcome_col = column(schema.outcome_column);
  if (schema.rule == SportRule::Scores) {
    hs_col = column(schema.home_score_column);
    as_col = column(schema.away_score_column);
  }

  struct Raw {
    double day;
    PlayerId home, away;
    Outcome outcome;
  };
  MatchStream stream;
  std::vector<Raw> raw;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line, schema.delimiter);
    const auto where = "row " + std::to_string(row) + ": ";
    auto field = [&](std::size_t c) -> const std::string& {
      if (c >= fields.size()) throw_input(where + "too few fields");
      return fields[c];
    };
    double day = 0.0;
    try {
      day = parse_day(field(date_col), schema.date_format);
    } catch (const Error& e) {
      throw_input(where + e.what());
    }
    const auto& home = field(home_col);
    const auto& away = field(away_col);
    if (home.empty() || away.empty()) throw_input(where + "empty player id");
    if (home == away) throw_input(where + "home and away player are the same ('" + home + "')");

    Outcome y = Outcome::HomeWin;
    switch (schema.rule) {
      case SportRule::Outcome: {
        const auto& tok = field(outcome_col);
        if (auto it = schema.outcome_map.find(tok); it != schema.outcome_map.end()) {
          y = it->second;
        } else if (auto parsed = parse_outcome_token(tok)) {
          y = *parsed;
        } else {
          throw_input(where + "unknown outcome token '" + tok + "'");
        }
        break;
      }
      case SportRule::Scores: {
        auto hs = parse_number(field(hs_col));
        auto as = parse_number(field(as_col));
        if (!hs || !as) throw_input(where + "unparseable score");
        y = *hs > *as ? Outcome::HomeWin : (*hs < *as ? Outcome::AwayWin : Outcome::Draw);
        break;
      }
      case SportRule::WinnerLoser:
        y = Outcome::HomeWin;
        break;
    }
    raw.push_back({day, stream.players.intern(home), stream.players.intern(away), y});
  }

  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a].day < raw[b].day; });
  if (!raw.empty()) stream.origin_day = raw[order.front()].day;
  stream.records.reserve(raw.size());
  for (auto i : order) {
    const auto& r = raw[i];
    stream.records.push_back({r.day - stream.origin_day, r.home, r.away, r.outcome});
  }
  stream.validate();
  return stream;
}

std::vector<std::string> split_csv_line(std::string_view line, char delimiter) {
  return split_fields(line, delimiter);
}

std::vector<FixtureRow> read_fixtures(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw_input("empty fixture file (no header row)");
  const auto header = split_fields(line, ',');
  auto column = [&](const char* name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw_input(std::string("fixture file: missing column '") + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cols[3] = {column("date"), column("home"), column("away")};
  std::vector<FixtureRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, ',');
    const auto where = "fixture row " + std::to_string(rows.size() + 1) + ": ";
    for (std::size_t c : cols)
      if (c >= fields.size()) throw_input(where + "too few fields");
    FixtureRow r{fields[cols[0]], fields[cols[1]], fields[cols[2]]};
    if (r.home.empty() || r.away.empty()) throw_input(where + "empty player id");
    if (r.home == r.away) throw_input(where + "home and away player are the same ('" + r.home + "')");
    rows.push_back(std::move(r));
  }
  return rows;
}

MatchStream load_csv(const std::filesystem::path& path, const SchemaDescriptor& schema) {
  std::ifstream in(path);
  if (!in) throw_input("cannot open match file " + path.string());
  return read_csv(in, schema);
}

void write_csv_field(std::ostream& out, std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

void write_csv(std::ostream& out, const MatchStream& stream) {
  out << "date,home,away,outcome\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : stream.records) {
    out << (stream.origin_day + r.time) << ',';
    write_csv_field(out, stream.players.name(r.home));
    out << ',';
    write_csv_field(out, stream.players.name(r.away));
    out << ',' << outcome_token(r.outcome) << '\n';
  }
}

double stream_time(const MatchStream& stream, std::string_view date) {
  return parse_day(date, DateFormat::Auto) - stream.origin_day;
}

std::pair<MatchStream, MatchStream> split_by_time(const MatchStream& stream, double cutoff) {
  MatchStream train, test;
  train.players = test.players = stream.players;
  train.origin_day = test.origin_day = stream.origin_day;
  for (const auto& r : stream.records) (r.time < cutoff ? train : test).records.push_back(r);
  return {std::move(train), std::move(test)};
}

std::pair<MatchStream, MatchStream> split_by_date(const MatchStream& stream,
                                                  std::string_view cutoff_date) {
  return split_by_time(stream, stream_time(stream, cutoff_date));
}

MatchStream concatenate(const MatchStream& first, const MatchStream& second) {
  if (!(first.players == second.players) || first.origin_day != second.origin_day)
    throw_usage("streams to concatenate must share registry and origin");
  MatchStream out = first;
  out.records.insert(out.records.end(), second.records.begin(), second.records.end());
  out.validate();
  return out;
}

}  // namespace skillrate

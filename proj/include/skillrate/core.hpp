#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace skillrate {

/// Failure categories. They map one-to-one onto C API status codes and CLI
/// exit codes.
enum class ErrorKind {
  Input,      ///< malformed data, unknown names, parameter/model mismatch
  Numerical,  ///< impossible observation, non-finite state, failed decomposition
  Usage,      ///< invalid call sequence or argument
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_input(const std::string& what);
[[noreturn]] void throw_numerical(const std::string& what);
[[noreturn]] void throw_usage(const std::string& what);

enum class Outcome : std::uint8_t { HomeWin = 0, AwayWin = 1, Draw = 2 };

inline constexpr std::array<Outcome, 3> kAllOutcomes{Outcome::HomeWin, Outcome::AwayWin,
                                                    Outcome::Draw};

/// Single-letter canonical token: H, A or D.
char outcome_token(Outcome y);
std::optional<Outcome> parse_outcome_token(std::string_view token);

/// Outcome seen from the other side of the table (H <-> A, D fixed).
inline Outcome reflect(Outcome y) {
  switch (y) {
    case Outcome::HomeWin: return Outcome::AwayWin;
    case Outcome::AwayWin: return Outcome::HomeWin;
    default: return Outcome::Draw;
  }
}

using PlayerId = std::uint32_t;

/// Opaque external names to dense indices [0, N).
class PlayerRegistry {
 public:
  PlayerId intern(std::string_view name);
  std::optional<PlayerId> find(std::string_view name) const;
  const std::string& name(PlayerId id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const PlayerRegistry& a, const PlayerRegistry& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, PlayerId> lookup_;
};

/// One pairwise comparison. The match index k is the record's position in
/// the stream (0-based internally, 1-based in every external file).
struct MatchRecord {
  double time = 0.0;  ///< days since the stream origin
  PlayerId home = 0;
  PlayerId away = 0;
  Outcome outcome = Outcome::HomeWin;

  friend bool operator==(const MatchRecord&, const MatchRecord&) = default;
};

struct MatchStream {
  PlayerRegistry players;
  std::vector<MatchRecord> records;
  /// Absolute day number (days since 1970-01-01) of time 0. Used to turn
  /// calendar cut-offs and fixture dates into stream times.
  double origin_day = 0.0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool has_draws() const;
  double draw_fraction() const;

  /// Throws Input on home == away, negative/non-finite times, unknown ids or
  /// decreasing times; the message names the first offending match (1-based).
  void validate() const;
};

/// Per-player ordered match lists L^i with predecessor lookup. Every player
/// additionally owns a time-zero anchor that precedes its first match.
class SparseIndex {
 public:
  static SparseIndex build(const MatchStream& stream);

  std::size_t num_players() const { return per_player_.size(); }
  std::size_t num_matches() const { return slots_.size(); }

  /// Matches of player i in increasing order (0-based match indices).
  std::span<const std::size_t> matches(PlayerId i) const { return per_player_.at(i); }

  /// Position of match k inside L^{h(k)} / L^{a(k)}.
  std::size_t home_slot(std::size_t k) const { return slots_.at(k)[0]; }
  std::size_t away_slot(std::size_t k) const { return slots_.at(k)[1]; }

  /// Match index preceding slot `slot` of player i, or nullopt for the
  /// time-zero anchor.
  std::optional<std::size_t> predecessor(PlayerId i, std::size_t slot) const;

  /// N anchors + sum of |L^i| (= N + 2K).
  std::size_t entries() const;

  friend bool operator==(const SparseIndex&, const SparseIndex&) = default;

 private:
  std::vector<std::vector<std::size_t>> per_player_;
  std::vector<std::array<std::size_t, 2>> slots_;
};

/// Partition of the matches into groups that can be assimilated
/// independently: same matchtime, pairwise disjoint players. Groups come out
/// in time order; inside one timestamp a match is placed in the first group
/// after every group holding one of its players, so per-player order is the
/// input order.
std::vector<std::vector<std::size_t>> simultaneous_blocks(const MatchStream& stream);

struct PredictiveProbs {
  double home = 0.0;
  double away = 0.0;
  double draw = 0.0;

  double operator[](Outcome y) const {
    return y == Outcome::HomeWin ? home : (y == Outcome::AwayWin ? away : draw);
  }
  double sum() const { return home + away + draw; }
};

/// Log-probability floor used wherever an outcome has vanishing mass.
inline constexpr double kLogFloor = -745.0;
/// Variance floor for Gaussian beliefs.
inline constexpr double kVarFloor = 1e-12;

double safe_log(double p);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must not
/// depend on the schedule; callers write to disjoint slots.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn);

}  // namespace skillrate

#include "skillrate/detail/parallel.hpp"

#include "skillrate/core.hpp"

#include <cmath>
#include <sstream>

namespace skillrate {

void throw_input(const std::string& what) { throw Error(ErrorKind::Input, what); }
void throw_numerical(const std::string& what) { throw Error(ErrorKind::Numerical, what); }
void throw_usage(const std::string& what) { throw Error(ErrorKind::Usage, what); }

char outcome_token(Outcome y) {
  switch (y) {
    case Outcome::HomeWin: return 'H';
    case Outcome::AwayWin: return 'A';
    case Outcome::Draw: return 'D';
  }
  return '?';
}

std::optional<Outcome> parse_outcome_token(std::string_view token) {
  if (token == "H") return Outcome::HomeWin;
  if (token == "A") return Outcome::AwayWin;
  if (token == "D") return Outcome::Draw;
  return std::nullopt;
}

PlayerId PlayerRegistry::intern(std::string_view name) {
  std::string key(name);
  if (auto it = lookup_.find(key); it != lookup_.end()) return it->second;
  const auto id = static_cast<PlayerId>(names_.size());
  names_.push_back(key);
  lookup_.emplace(std::move(key), id);
  return id;
}

std::optional<PlayerId> PlayerRegistry::find(std::string_view name) const {
  if (auto it = lookup_.find(std::string(name)); it != lookup_.end()) return it->second;
  return std::nullopt;
}

bool MatchStream::has_draws() const {
  for (const auto& r : records)
    if (r.outcome == Outcome::Draw) return true;
  return false;
}

double MatchStream::draw_fraction() const {
  if (records.empty()) return 0.0;
  std::size_t draws = 0;
  for (const auto& r : records) draws += r.outcome == Outcome::Draw;
  return static_cast<double>(draws) / static_cast<double>(records.size());
}

void MatchStream::validate() const {
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    std::ostringstream msg;
    msg << "match " << (k + 1) << ": ";
    if (!std::isfinite(r.time) || r.time < 0.0) {
      msg << "matchtime must be finite and nonnegative";
      throw_input(msg.str());
    }
    if (r.home >= players.size() || r.away >= players.size()) {
      msg << "player id not in registry";
      throw_input(msg.str());
    }
    if (r.home == r.away) {
      msg << "home and away player are the same ('" << players.name(r.home) << "')";
      throw_input(msg.str());
    }
    if (k > 0 && r.time < records[k - 1].time) {
      msg << "out of order (time " << r.time << " precedes " << records[k - 1].time << ")";
      throw_input(msg.str());
    }
  }
}

SparseIndex SparseIndex::build(const MatchStream& stream) {
  stream.validate();
  SparseIndex index;
  index.per_player_.resize(stream.players.size());
  index.slots_.reserve(stream.size());
  for (std::size_t k = 0; k < stream.size(); ++k) {
    const auto& r = stream.records[k];
    auto& lh = index.per_player_[r.home];
    auto& la = index.per_player_[r.away];
    index.slots_.push_back({lh.size(), la.size()});
    lh.push_back(k);
    la.push_back(k);
  }
  return index;
}

std::optional<std::size_t> SparseIndex::predecessor(PlayerId i, std::size_t slot) const {
  const auto& list = per_player_.at(i);
  if (slot >= list.size()) throw_usage("slot out of range");
  if (slot == 0) return std::nullopt;
  return list[slot - 1];
}

std::size_t SparseIndex::entries() const {
  std::size_t total = per_player_.size();
  for (const auto& l : per_player_) total += l.size();
  return total;
}

std::vector<std::vector<std::size_t>> simultaneous_blocks(const MatchStream& stream) {
  stream.validate();
  std::vector<std::vector<std::size_t>> blocks;
  // Level of the latest group each player joined inside the current timestamp.
  std::unordered_map<PlayerId, std::size_t> level;
  std::size_t begin = 0;
  while (begin < stream.size()) {
    std::size_t end = begin;
    const double t = stream.records[begin].time;
    while (end < stream.size() && stream.records[end].time == t) ++end;

    level.clear();
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& r = stream.records[k];
      std::size_t lvl = 0;
      if (auto it = level.find(r.home); it != level.end()) lvl = std::max(lvl, it->second + 1);
      if (auto it = level.find(r.away); it != level.end()) lvl = std::max(lvl, it->second + 1);
      if (groups.size() <= lvl) groups.resize(lvl + 1);
      groups[lvl].push_back(k);
      level[r.home] = lvl;
      level[r.away] = lvl;
    }
    for (auto& g : groups) blocks.push_back(std::move(g));
    begin = end;
  }
  return blocks;
}

double safe_log(double p) {
  if (!(p > 0.0)) return kLogFloor;
  return std::max(std::log(p), kLogFloor);
}

}  // namespace skillrate

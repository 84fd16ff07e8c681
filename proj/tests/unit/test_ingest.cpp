#include <sstream>

#include "doctest.h"
#include "skillrate/ingest.hpp"

using namespace skillrate;

TEST_CASE("three well-formed rows") {
  std::istringstream in("date,home,away,outcome\n2021-01-03,a,b,H\n2021-01-01,b,c,D\n2021-01-02,c,a,A\n");
  const MatchStream s = read_csv(in);
  REQUIRE(s.size() == 3);
  CHECK(s.records[0].time == 0.0);
  CHECK(s.records[1].time == 1.0);
  CHECK(s.records[2].time == 2.0);
  CHECK(s.records[2].outcome == Outcome::HomeWin);
  CHECK(s.players.size() == 3);
}

TEST_CASE("an unknown outcome token names its row") {
  std::string text = "date,home,away,outcome\n";
  for (int r = 1; r <= 8; ++r) text += "2020-01-0" + std::to_string(r) + ",x,y," + (r == 7 ? "X" : "H") + "\n";
  std::istringstream in(text);
  CHECK_THROWS_WITH_AS(read_csv(in), doctest::Contains("row 7"), Error);
}

TEST_CASE("missing column and bad date") {
  std::istringstream a("date,home,visitor,outcome\n2020-01-01,x,y,H\n");
  CHECK_THROWS_WITH_AS(read_csv(a), doctest::Contains("away"), Error);
  std::istringstream b("date,home,away,outcome\n2020-01-01,x,y,H\nnot-a-date,x,y,H\n");
  CHECK_THROWS_WITH_AS(read_csv(b), doctest::Contains("row 2"), Error);
}

TEST_CASE("score columns map by comparison") {
  std::istringstream schema_in("date=Date\nhome=HomeTeam\naway=AwayTeam\nrule=scores\nhome_score=FTHG\naway_score=FTAG\ndate_format=dmy\n");
  const SchemaDescriptor schema = parse_schema(schema_in);
  const int goals[5][2] = {{2, 1}, {0, 0}, {1, 3}, {4, 4}, {1, 0}};
  std::string text = "Date,HomeTeam,AwayTeam,FTHG,FTAG\n";
  for (int r = 0; r < 5; ++r)
    text += "1" + std::to_string(r) + "/08/2019,T" + std::to_string(r) + ",U" + std::to_string(r) + "," +
            std::to_string(goals[r][0]) + "," + std::to_string(goals[r][1]) + "\n";
  std::istringstream in(text);
  const MatchStream s = read_csv(in, schema);
  REQUIRE(s.size() == 5);
  for (int r = 0; r < 5; ++r) {
    const Outcome want = goals[r][0] > goals[r][1] ? Outcome::HomeWin
                         : goals[r][0] == goals[r][1] ? Outcome::Draw
                                                      : Outcome::AwayWin;
    CHECK(s.records[r].outcome == want);
  }
}

TEST_CASE("winner/loser rows and token maps") {
  std::istringstream schema_in("home=Winner\naway=Loser\nrule=winner_loser\n");
  std::istringstream in("date,Winner,Loser\n2022-01-01,p,q\n");
  const MatchStream s = read_csv(in, parse_schema(schema_in));
  CHECK(s.records[0].outcome == Outcome::HomeWin);

  std::istringstream schema2("outcome=Result\nmap.1-0=H\nmap.0-1=A\nmap.1/2-1/2=D\n");
  std::istringstream in2("date,home,away,Result\n2022-01-01,p,q,1/2-1/2\n2022-01-02,p,q,0-1\n");
  const MatchStream s2 = read_csv(in2, parse_schema(schema2));
  CHECK(s2.records[0].outcome == Outcome::Draw);
  CHECK(s2.records[1].outcome == Outcome::AwayWin);
}

TEST_CASE("split by date") {
  std::istringstream in("date,home,away,outcome\n2020-01-01,a,b,H\n2020-06-01,b,c,D\n2021-01-01,c,a,A\n2021-03-01,a,b,H\n");
  const MatchStream s = read_csv(in);
  SUBCASE("cutoff before everything") {
    auto [train, test] = split_by_date(s, "2019-01-01");
    CHECK(train.empty());
    CHECK(test.size() == 4);
  }
  SUBCASE("cutoff after everything") {
    auto [train, test] = split_by_date(s, "2030-01-01");
    CHECK(train.size() == 4);
    CHECK(test.empty());
  }
  SUBCASE("membership by date comparison") {
    auto [train, test] = split_by_date(s, "2021-01-01");
    const double cut = stream_time(s, "2021-01-01");
    std::size_t n_train = 0;
    for (const auto& r : s.records) n_train += r.time < cut;
    CHECK(train.size() == n_train);
    CHECK(train.size() + test.size() == s.size());
    CHECK(test.records.front() == s.records[n_train]);
    CHECK(train.players == s.players);
    CHECK(test.origin_day == s.origin_day);
  }
}

TEST_CASE("write then read is the identity on canonical streams") {
  std::istringstream in("date,home,away,outcome\n2020-01-01,\"a, jr\",b,H\n2020-01-01,b,c,D\n2020-01-05,c,a,A\n");
  const MatchStream s = read_csv(in);
  std::ostringstream out;
  write_csv(out, s);
  std::istringstream back(out.str());
  const MatchStream t = read_csv(back);
  CHECK(t.records == s.records);
  CHECK(t.players == s.players);
  CHECK(t.origin_day == s.origin_day);
}

TEST_CASE("fixtures") {
  std::istringstream in("date,home,away\n2023-01-01,a,b\n");
  const auto rows = read_fixtures(in);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].home == "a");
  std::istringstream bad("date,home,away\n2023-01-01,a,a\n");
  CHECK_THROWS_AS(read_fixtures(bad), Error);
}

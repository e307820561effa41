#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "hydrad/error.hpp"
#include "hydrad/file_util.hpp"
#include "hydrad/history_store.hpp"
#include "support.hpp"

using namespace hydrad;
using namespace hydrad::history;
using namespace std::chrono_literals;
using hydrad::testing::TempDir;

namespace {

HistoryOptions fast()
{
  return { 10u * 1024u * 1024u, 5, false };
}

HistoryRecord make(RecordKind kind, Timestamp ts, int n)
{
  return { kind, ts, nlohmann::json{ { "n", n } } };
}

std::vector<HistoryRecord> brute_force(const std::vector<HistoryRecord>& all, Timestamp from, Timestamp to, KindSet kinds)
{
  std::vector<HistoryRecord> out;
  std::copy_if(all.begin(), all.end(), std::back_inserter(out), [&](const HistoryRecord& r) {
    return r.ts >= from && r.ts <= to && kinds.contains(r.kind);
  });
  return out;
}

constexpr RecordKind kinds_table[] = { RecordKind::reading, RecordKind::watering, RecordKind::transition,
                                       RecordKind::error };

}  // namespace

TEST_CASE("append then read back in order")
{
  TempDir dir;
  HistoryStore h(dir / "h.jsonl", fast());
  CHECK(h.query(Timestamp::min(), Timestamp::max()).empty());
  auto const t0 = simulation_epoch();
  std::vector<HistoryRecord> const records{ make(RecordKind::reading, t0, 1), make(RecordKind::watering, t0 + 1s, 2),
                                            make(RecordKind::reading, t0 + 1s, 3) };
  for (auto const& r : records) {
    h.append(r);
  }
  CHECK(h.query(Timestamp::min(), Timestamp::max()) == records);
  CHECK(h.last_timestamp() == t0 + 1s);
}

TEST_CASE("the file is a header line followed by one record per line")
{
  TempDir dir;
  {
    HistoryStore h(dir / "h.jsonl", fast());
    h.append(make(RecordKind::error, simulation_epoch(), 7));
  }
  auto const text = read_file(dir / "h.jsonl");
  auto const first = text.substr(0, text.find('\n'));
  auto const header = nlohmann::json::parse(first);
  CHECK(header.at("schema") == "hydrad-history");
  CHECK(header.at("version") == 1);
  auto const line = nlohmann::json::parse(text.substr(first.size() + 1));
  CHECK(line.at("kind") == "error");
  CHECK(line.at("ts") == "2025-01-01T00:00:00.000000Z");
  CHECK(line.at("payload").at("n") == 7);
}

TEST_CASE("out-of-order appends are rejected")
{
  TempDir dir;
  HistoryStore h(dir / "h.jsonl", fast());
  h.append(make(RecordKind::reading, simulation_epoch() + 10s, 1));
  CHECK_THROWS_AS(h.append(make(RecordKind::reading, simulation_epoch() + 9s, 2)), OrderingError);
  CHECK(h.query(Timestamp::min(), Timestamp::max()).size() == 1);
}

TEST_CASE("reopen continues after prior records")
{
  TempDir dir;
  auto const t0 = simulation_epoch();
  {
    HistoryStore h(dir / "h.jsonl", fast());
    h.append(make(RecordKind::reading, t0, 1));
    h.append(make(RecordKind::reading, t0 + 1s, 2));
  }
  HistoryStore h(dir / "h.jsonl", fast());
  CHECK(h.last_timestamp() == t0 + 1s);
  CHECK_THROWS_AS(h.append(make(RecordKind::reading, t0, 3)), OrderingError);
  h.append(make(RecordKind::reading, t0 + 2s, 3));
  auto const all = h.query(Timestamp::min(), Timestamp::max());
  REQUIRE(all.size() == 3);
  CHECK(all[2].payload.at("n") == 3);
}

TEST_CASE("query window validation")
{
  TempDir dir;
  HistoryStore h(dir / "h.jsonl", fast());
  CHECK_THROWS_AS(h.query(simulation_epoch() + 1s, simulation_epoch()), DomainError);
  CHECK(h.query(simulation_epoch(), simulation_epoch()).empty());
}

TEST_CASE("kind sets")
{
  auto const s = KindSet::parse("reading,error");
  CHECK(s.contains(RecordKind::reading));
  CHECK(s.contains(RecordKind::error));
  CHECK_FALSE(s.contains(RecordKind::watering));
  auto const all = KindSet::parse("");
  for (auto k : kinds_table) {
    CHECK(all.contains(k));
  }
  CHECK_THROWS_AS(KindSet::parse("reading,bogus"), DomainError);
}

TEST_CASE("oracle: random log, random windows equal a brute-force filter")
{
  TempDir dir;
  std::mt19937 rng(61);
  std::uniform_int_distribution<int> step_ms(0, 5000);
  std::uniform_int_distribution<int> kind(0, 3);
  HistoryStore h(dir / "h.jsonl", fast());
  std::vector<HistoryRecord> all;
  auto t = simulation_epoch();
  for (int i = 0; i < 100; ++i) {
    t += std::chrono::milliseconds{ step_ms(rng) };
    all.push_back(make(kinds_table[kind(rng)], t, i));
    h.append(all.back());
  }
  auto const span = to_seconds(t - simulation_epoch());
  std::uniform_real_distribution<double> at(-10.0, span + 10.0);
  std::uniform_int_distribution<int> mask(1, 15);
  for (int q = 0; q < 50; ++q) {
    auto a = simulation_epoch() + from_seconds(at(rng));
    auto b = simulation_epoch() + from_seconds(at(rng));
    if (a > b) {
      std::swap(a, b);
    }
    KindSet kinds;
    int const m = mask(rng);
    for (int k = 0; k < 4; ++k) {
      if (m & (1 << k)) {
        kinds.insert(kinds_table[k]);
      }
    }
    CHECK(h.query(a, b, kinds) == brute_force(all, a, b, kinds));
  }
}

TEST_CASE("property: adjacent windows partition the combined window")
{
  TempDir dir;
  std::mt19937 rng(62);
  std::uniform_int_distribution<int> step_us(0, 3'000'000);
  HistoryStore h(dir / "h.jsonl", fast());
  auto t = simulation_epoch();
  for (int i = 0; i < 200; ++i) {
    t += std::chrono::microseconds{ step_us(rng) };
    h.append(make(RecordKind::reading, t, i));
  }
  std::uniform_int_distribution<long long> offset(0, (t - simulation_epoch()).count());
  for (int q = 0; q < 100; ++q) {
    std::vector<long long> cut{ offset(rng), offset(rng), offset(rng) };
    std::sort(cut.begin(), cut.end());
    auto const from = simulation_epoch() + std::chrono::microseconds{ cut[0] };
    auto const mid = simulation_epoch() + std::chrono::microseconds{ cut[1] };
    auto const to = simulation_epoch() + std::chrono::microseconds{ cut[2] };
    auto left = h.query(from, mid);
    auto const right = h.query(mid + std::chrono::microseconds{ 1 }, std::max(to, mid + std::chrono::microseconds{ 1 }));
    left.insert(left.end(), right.begin(), right.end());
    CHECK(left == h.query(from, std::max(to, mid + std::chrono::microseconds{ 1 })));
  }
}

TEST_CASE("torn final line is quarantined and complete records survive")
{
  TempDir dir;
  auto const path = dir / "h.jsonl";
  {
    HistoryStore h(path, fast());
    for (int i = 0; i < 5; ++i) {
      h.append(make(RecordKind::reading, simulation_epoch() + std::chrono::seconds{ i }, i));
    }
  }
  {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << R"({"kind":"reading","ts":"2025-01-01T00:00:09.000000Z","payl)";
  }
  HistoryStore h(path, fast());
  CHECK(h.quarantined_bytes() > 0);
  auto const all = h.query(Timestamp::min(), Timestamp::max());
  CHECK(all.size() == 5);
  CHECK(h.last_timestamp() == simulation_epoch() + 4s);
  auto q = path;
  q += ".quarantine";
  CHECK(read_file(q).find("payl") != std::string::npos);
  h.append(make(RecordKind::reading, simulation_epoch() + 5s, 5));
  CHECK(h.query(Timestamp::min(), Timestamp::max()).size() == 6);
}

TEST_CASE("rotation keeps a bounded number of generations, queries span them")
{
  TempDir dir;
  auto const path = dir / "h.jsonl";
  HistoryStore h(path, HistoryOptions{ 2048, 3, false });
  std::vector<HistoryRecord> all;
  for (int i = 0; i < 200; ++i) {
    all.push_back(make(RecordKind::reading, simulation_epoch() + std::chrono::seconds{ i }, i));
    h.append(all.back());
  }
  auto p1 = path;
  p1 += ".1";
  auto p2 = path;
  p2 += ".2";
  auto p3 = path;
  p3 += ".3";
  CHECK(std::filesystem::exists(p1));
  CHECK(std::filesystem::exists(p2));
  CHECK_FALSE(std::filesystem::exists(p3));
  auto const got = h.query(Timestamp::min(), Timestamp::max());
  REQUIRE(!got.empty());
  CHECK(got.size() < all.size());
  CHECK(got.back() == all.back());
  // What survives is a contiguous suffix of everything appended.
  std::vector<HistoryRecord> const suffix(all.end() - static_cast<long>(got.size()), all.end());
  CHECK(got == suffix);
}

TEST_CASE("concurrent readers only ever see whole records")
{
  TempDir dir;
  HistoryStore h(dir / "h.jsonl", fast());
  std::atomic<bool> writing = true;
  std::atomic<int> bad = 0;
  std::vector<std::jthread> readers;
  for (int r = 0; r < 3; ++r) {
    readers.emplace_back([&] {
      std::size_t seen = 0;
      while (writing) {
        auto const got = h.query(Timestamp::min(), Timestamp::max());
        if (got.size() < seen) {
          ++bad;
        }
        for (std::size_t i = 0; i < got.size(); ++i) {
          if (got[i].payload.at("n") != static_cast<int>(i)) {
            ++bad;
          }
        }
        seen = got.size();
      }
    });
  }
  for (int i = 0; i < 300; ++i) {
    h.append(make(RecordKind::reading, simulation_epoch() + std::chrono::milliseconds{ i }, i));
  }
  writing = false;
  readers.clear();
  CHECK(bad == 0);
}

TEST_CASE("unparseable lines in the middle are skipped")
{
  TempDir dir;
  auto const path = dir / "h.jsonl";
  {
    HistoryStore h(path, fast());
    h.append(make(RecordKind::reading, simulation_epoch(), 0));
  }
  {
    std::ofstream out(path, std::ios::app);
    out << "not json\n";
  }
  HistoryStore h(path, fast());
  h.append(make(RecordKind::reading, simulation_epoch() + 1s, 1));
  CHECK(h.query(Timestamp::min(), Timestamp::max()).size() == 2);
}

TEST_CASE("record json round trip")
{
  auto const r = make(RecordKind::transition, simulation_epoch() + 123456us, 9);
  CHECK(record_from_json(to_json(r)) == r);
  CHECK_THROWS_AS(record_from_json(nlohmann::json{ { "kind", "nope" }, { "ts", "2025-01-01T00:00:00Z" } }), ParseError);
  CHECK_THROWS_AS(record_from_json(nlohmann::json{ { "kind", "reading" }, { "ts", "x" } }), ParseError);
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hydrad/time.hpp"

namespace hydrad::history {

enum class RecordKind : std::uint8_t
{
  reading,
  watering,
  transition,
  error
};

std::string_view to_string(RecordKind kind);
/// Throws DomainError for an unknown name.
RecordKind record_kind_from_string(std::string_view text);

/// Small bit set over RecordKind.
class KindSet
{
public:
  constexpr KindSet() = default;
  constexpr KindSet(std::initializer_list<RecordKind> kinds)
  {
    for (auto k : kinds) {
      insert(k);
    }
  }

  static constexpr KindSet all()
  {
    return { RecordKind::reading, RecordKind::watering, RecordKind::transition, RecordKind::error };
  }

  constexpr void insert(RecordKind k) { bits_ |= bit(k); }
  constexpr bool contains(RecordKind k) const { return (bits_ & bit(k)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }

  /// Comma-separated kind names. Empty text yields all().
  static KindSet parse(std::string_view text);

private:
  static constexpr std::uint8_t bit(RecordKind k) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(k)); }
  std::uint8_t bits_ = 0;
};

struct HistoryRecord
{
  RecordKind kind = RecordKind::reading;
  Timestamp ts{};
  nlohmann::json payload = nlohmann::json::object();

  bool operator==(const HistoryRecord&) const = default;
};

nlohmann::json to_json(const HistoryRecord& record);
/// Throws ParseError.
HistoryRecord record_from_json(const nlohmann::json& doc);

/// Destination for controller events.
class HistorySink
{
public:
  virtual ~HistorySink() = default;
  virtual void append(const HistoryRecord& record) = 0;
};

struct HistoryOptions
{
  std::uintmax_t rotate_bytes = 10u * 1024u * 1024u;
  int keep_files = 5;  ///< live file plus rotated generations
  bool fsync = true;
};

/// Append-only JSON-lines log.
///
/// The first line of every file is a header {"schema":"hydrad-history",
/// "version":1}; each following line is one {kind, ts, payload} record.
/// When the live file reaches rotate_bytes it becomes `<path>.1`, older
/// generations shift up and anything past keep_files is deleted.
///
/// Opening recovers from a crash mid-append: an unterminated last line is
/// moved to `<path>.quarantine` and the live file is truncated back to the
/// last complete record.
class HistoryStore final : public HistorySink
{
public:
  explicit HistoryStore(std::filesystem::path path, HistoryOptions options = {});
  ~HistoryStore() override;

  HistoryStore(const HistoryStore&) = delete;
  HistoryStore& operator=(const HistoryStore&) = delete;

  /// Throws OrderingError when record.ts precedes the newest stored record,
  /// StorageError on I/O failure.
  void append(const HistoryRecord& record) override;

  /// Records with from <= ts <= to and a kind in `kinds`, oldest first.
  /// Throws DomainError when from > to.
  std::vector<HistoryRecord> query(Timestamp from, Timestamp to, KindSet kinds = KindSet::all()) const;

  std::optional<Timestamp> last_timestamp() const;

  /// Bytes moved to quarantine during the last open.
  std::uintmax_t quarantined_bytes() const { return quarantined_bytes_; }

  const std::filesystem::path& path() const { return path_; }

private:
  void open_live_file();
  void recover();
  void rotate_locked();
  std::filesystem::path generation(int index) const;

  std::filesystem::path path_;
  HistoryOptions options_;
  mutable std::shared_mutex mutex_;
  int fd_ = -1;
  std::uintmax_t live_bytes_ = 0;
  std::optional<Timestamp> last_ts_;
  std::uintmax_t quarantined_bytes_ = 0;
};

}  // namespace hydrad::history

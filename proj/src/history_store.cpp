#include "hydrad/history_store.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hydrad/error.hpp"
#include "hydrad/file_util.hpp"

namespace hydrad::history {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view schema_name = "hydrad-history";
constexpr int schema_version = 1;

std::string header_line()
{
  return json{ { "schema", schema_name }, { "version", schema_version } }.dump() + "\n";
}

bool is_header(const json& doc)
{
  return doc.is_object() && doc.contains("schema");
}

void write_all(int fd, std::string_view data, const fs::path& path)
{
  std::size_t written = 0;
  while (written < data.size()) {
    auto const n = ::write(fd, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw StorageError(fmt::format("cannot append to '{}': {}", path.string(), std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
}

/// Complete, parseable records of one file in file order.
std::vector<HistoryRecord> read_records(const fs::path& path)
{
  std::vector<HistoryRecord> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return out;
  }
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto const nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      break;  // unterminated tail: a write in progress elsewhere, or torn
    }
    std::string_view const line(content.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) {
      continue;
    }
    try {
      auto const doc = json::parse(line);
      if (is_header(doc)) {
        continue;
      }
      out.push_back(record_from_json(doc));
    } catch (const std::exception& e) {
      spdlog::warn("history: skipping unreadable line in {}: {}", path.string(), e.what());
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(RecordKind kind)
{
  switch (kind) {
    case RecordKind::reading:
      return "reading";
    case RecordKind::watering:
      return "watering";
    case RecordKind::transition:
      return "transition";
    case RecordKind::error:
      return "error";
  }
  return "unknown";
}

RecordKind record_kind_from_string(std::string_view text)
{
  for (auto k : { RecordKind::reading, RecordKind::watering, RecordKind::transition, RecordKind::error }) {
    if (to_string(k) == text) {
      return k;
    }
  }
  throw DomainError(fmt::format("unknown record kind '{}'", text));
}

KindSet KindSet::parse(std::string_view text)
{
  if (text.empty()) {
    return all();
  }
  KindSet set;
  while (!text.empty()) {
    auto const comma = text.find(',');
    auto const item = text.substr(0, comma);
    set.insert(record_kind_from_string(item));
    if (comma == std::string_view::npos) {
      break;
    }
    text.remove_prefix(comma + 1);
  }
  return set;
}

json to_json(const HistoryRecord& record)
{
  return json{ { "kind", to_string(record.kind) }, { "ts", format_iso8601(record.ts) }, { "payload", record.payload } };
}

HistoryRecord record_from_json(const json& doc)
{
  if (!doc.is_object()) {
    throw ParseError("record", "expected an object");
  }
  HistoryRecord record;
  try {
    record.kind = record_kind_from_string(doc.at("kind").get<std::string>());
  } catch (const std::exception& e) {
    throw ParseError("kind", e.what());
  }
  try {
    record.ts = parse_iso8601(doc.at("ts").get<std::string>());
  } catch (const std::exception& e) {
    throw ParseError("ts", e.what());
  }
  if (auto const it = doc.find("payload"); it != doc.end()) {
    record.payload = *it;
  }
  return record;
}

HistoryStore::HistoryStore(fs::path path, HistoryOptions options)
  : path_(std::move(path))
  , options_(options)
{
  if (options_.keep_files < 1) {
    throw DomainError("keep_files must be at least 1");
  }
  if (path_.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path_.parent_path(), ec);
  }
  recover();
  open_live_file();

  for (int gen = 0; gen < options_.keep_files && !last_ts_; ++gen) {
    auto const records = read_records(generation(gen));
    if (!records.empty()) {
      last_ts_ = records.back().ts;
    }
  }
}

HistoryStore::~HistoryStore()
{
  if (fd_ >= 0) {
    ::close(fd_);
  }
}

fs::path HistoryStore::generation(int index) const
{
  if (index == 0) {
    return path_;
  }
  auto p = path_;
  p += fmt::format(".{}", index);
  return p;
}

void HistoryStore::recover()
{
  std::error_code ec;
  if (!fs::exists(path_, ec)) {
    return;
  }
  std::string const content = read_file(path_);
  if (content.empty() || content.back() == '\n') {
    return;
  }
  auto const last_nl = content.rfind('\n');
  std::size_t const keep = last_nl == std::string::npos ? 0 : last_nl + 1;
  std::string_view const torn(content.data() + keep, content.size() - keep);

  auto quarantine = path_;
  quarantine += ".quarantine";
  {
    std::ofstream q(quarantine, std::ios::binary | std::ios::app);
    q << torn << '\n';
    if (!q) {
      throw StorageError(fmt::format("cannot write quarantine file '{}'", quarantine.string()));
    }
  }
  fs::resize_file(path_, keep, ec);
  if (ec) {
    throw StorageError(fmt::format("cannot truncate '{}': {}", path_.string(), ec.message()));
  }
  quarantined_bytes_ = torn.size();
  spdlog::warn("history: quarantined {} torn bytes from {}", torn.size(), path_.string());
}

void HistoryStore::open_live_file()
{
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw StorageError(fmt::format("cannot open history '{}': {}", path_.string(), std::strerror(errno)));
  }
  std::error_code ec;
  live_bytes_ = fs::file_size(path_, ec);
  if (ec) {
    live_bytes_ = 0;
  }
  if (live_bytes_ == 0) {
    auto const header = header_line();
    write_all(fd_, header, path_);
    live_bytes_ = header.size();
  }
}

void HistoryStore::rotate_locked()
{
  ::close(fd_);
  fd_ = -1;
  std::error_code ec;
  fs::remove(generation(options_.keep_files - 1), ec);
  for (int gen = options_.keep_files - 2; gen >= 0; --gen) {
    if (fs::exists(generation(gen), ec)) {
      fs::rename(generation(gen), generation(gen + 1), ec);
      if (ec) {
        throw StorageError(fmt::format("cannot rotate '{}': {}", generation(gen).string(), ec.message()));
      }
    }
  }
  open_live_file();
}

void HistoryStore::append(const HistoryRecord& record)
{
  auto const line = to_json(record).dump() + "\n";
  std::unique_lock lock(mutex_);
  if (last_ts_ && record.ts < *last_ts_) {
    throw OrderingError(fmt::format("record at {} precedes newest stored record at {}",
                                    format_iso8601(record.ts),
                                    format_iso8601(*last_ts_)));
  }
  if (fd_ < 0) {
    open_live_file();
  }
  write_all(fd_, line, path_);
  if (options_.fsync && ::fdatasync(fd_) != 0) {
    throw StorageError(fmt::format("cannot sync '{}': {}", path_.string(), std::strerror(errno)));
  }
  live_bytes_ += line.size();
  last_ts_ = record.ts;
  if (live_bytes_ >= options_.rotate_bytes) {
    rotate_locked();
  }
}

std::vector<HistoryRecord> HistoryStore::query(Timestamp from, Timestamp to, KindSet kinds) const
{
  if (from > to) {
    throw DomainError("query window start is after its end");
  }
  std::shared_lock lock(mutex_);
  std::vector<HistoryRecord> out;
  for (int gen = options_.keep_files - 1; gen >= 0; --gen) {
    for (auto& record : read_records(generation(gen))) {
      if (record.ts >= from && record.ts <= to && kinds.contains(record.kind)) {
        out.push_back(std::move(record));
      }
    }
  }
  return out;
}

std::optional<Timestamp> HistoryStore::last_timestamp() const
{
  std::shared_lock lock(mutex_);
  return last_ts_;
}

}  // namespace hydrad::history

#pragma once

// Loading, validation, deduplication and per-passenger partitioning of POI
// and bus-trajectory CSV files.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>

#include "poitrav/csv.hpp"
#include "poitrav/error.hpp"
#include "poitrav/geo.hpp"
#include "poitrav/labels.hpp"

namespace poitrav {

struct PoiRecord {
  GeoPoint location;
  std::string name;
  PoiLabel label = PoiLabel::food;
  std::string city;
  std::string area;
  std::string address;

  friend bool operator==(const PoiRecord&, const PoiRecord&) = default;
};

/// Naive local wall-clock time, whole seconds since 1970-01-01 00:00:00.
struct Timestamp {
  std::int64_t seconds = 0;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// Parses "YYYY/M/D HH:MM:SS" (month, day and hour may be one digit).
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, se = 0;
  auto take = [&s](auto& out, char sep) {
    const auto pos = sep ? s.find(sep) : s.size();
    if (pos == std::string_view::npos) return false;
    if (!csv::parse_int(s.substr(0, pos), out)) return false;
    s.remove_prefix(pos == s.size() ? pos : pos + 1);
    return true;
  };
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!take(y, '/') || !take(mo, '/') || !take(d, ' ')) return std::nullopt;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  if (!take(h, ':') || !take(mi, ':') || !take(se, '\0')) return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return Timestamp{static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + se};
}

inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_count = static_cast<int>(
      t.seconds >= 0 ? t.seconds / 86400 : (t.seconds - 86399) / 86400);
  const std::int64_t rem = t.seconds - static_cast<std::int64_t>(day_count) * 86400;
  const year_month_day ymd{sys_days{days{day_count}}};
  return fmt::format("{}/{}/{} {:02}:{:02}:{:02}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     rem / 3600, (rem / 60) % 60, rem % 60);
}

struct TrajectoryRecord {
  std::string uid;
  GeoPoint location;
  Timestamp up_time;

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

/// Rows discarded while loading, counted by reason.
struct DropReport {
  std::map<std::string, std::size_t> counts;
  std::vector<std::string> messages;

  void add(const std::string& reason, std::size_t line) {
    ++counts[reason];
    messages.push_back(fmt::format("line {}: {}", line, reason));
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [_, c] : counts) n += c;
    return n;
  }
};

template <class Record>
struct LoadResult {
  std::vector<Record> records;
  DropReport dropped;
};

namespace detail {

// Maps each required/optional column to its position in the header row.
template <std::size_t N>
std::array<int, N> resolve_header(const csv::Row& header,
                                  const std::array<std::vector<std::string_view>, N>& names,
                                  std::size_t n_required) {
  std::array<int, N> pos;
  pos.fill(-1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string h = normalize_token(header[c]);
    for (std::size_t k = 0; k < N; ++k) {
      if (std::find(names[k].begin(), names[k].end(), h) != names[k].end()) {
        if (pos[k] != -1) throw InputError("duplicate column '" + header[c] + "'");
        pos[k] = static_cast<int>(c);
      }
    }
  }
  for (std::size_t k = 0; k < n_required; ++k) {
    if (pos[k] == -1) {
      throw InputError(fmt::format("malformed header: missing column '{}'", names[k].front()));
    }
  }
  return pos;
}

inline std::string_view cell(const csv::Row& row, int pos) {
  if (pos < 0 || static_cast<std::size_t>(pos) >= row.size()) return {};
  return row[static_cast<std::size_t>(pos)];
}

inline bool blank(std::string_view s) {
  return s.find_first_not_of(" \t") == std::string_view::npos;
}

inline std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Parses POI CSV text with header columns lat,lng,name,label,city,area,address
/// in any order and case. Rows with an empty mandatory field (lat, lng, name,
/// label) count as "null"; excluded categories as "excluded_label"; anything
/// else that fails to parse is "malformed" or "unknown_label".
inline LoadResult<PoiRecord> parse_poi_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw InputError("malformed header: empty POI file");
  const std::array<std::vector<std::string_view>, 7> names = {{
      {"lat", "latitude"},
      {"lng", "lon", "longitude"},
      {"name"},
      {"label"},
      {"city"},
      {"area"},
      {"address"},
  }};
  const auto pos = detail::resolve_header(rows.front(), names, 4);

  LoadResult<PoiRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    const auto lat_s = detail::cell(row, pos[0]);
    const auto lng_s = detail::cell(row, pos[1]);
    const auto name_s = detail::cell(row, pos[2]);
    const auto label_s = detail::cell(row, pos[3]);
    if (detail::blank(lat_s) || detail::blank(lng_s) || detail::blank(name_s) ||
        detail::blank(label_s)) {
      out.dropped.add("null", line);
      continue;
    }
    PoiRecord rec;
    if (!csv::parse_double(lat_s, rec.location.lat) ||
        !csv::parse_double(lng_s, rec.location.lng) || !is_valid(rec.location)) {
      out.dropped.add("malformed", line);
      continue;
    }
    const auto parsed = parse_label(label_s);
    if (parsed.status == LabelParse::excluded) {
      out.dropped.add("excluded_label", line);
      continue;
    }
    if (parsed.status == LabelParse::unknown) {
      out.dropped.add("unknown_label", line);
      continue;
    }
    rec.label = parsed.label;
    rec.name = detail::trimmed(name_s);
    rec.city = detail::trimmed(detail::cell(row, pos[4]));
    rec.area = detail::trimmed(detail::cell(row, pos[5]));
    rec.address = detail::trimmed(detail::cell(row, pos[6]));
    out.records.push_back(std::move(rec));
  }
  return out;
}

inline LoadResult<PoiRecord> load_poi_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("missing file " + path.string());
  return parse_poi_csv(csv::read_file(path));
}

/// Parses trajectory CSV text with header uid,lng,lat,up_time (any order).
inline LoadResult<TrajectoryRecord> parse_trajectory_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw InputError("malformed header: empty trajectory file");
  const std::array<std::vector<std::string_view>, 4> names = {{
      {"uid"},
      {"lng", "lon", "longitude"},
      {"lat", "latitude"},
      {"up_time", "uptime", "time"},
  }};
  const auto pos = detail::resolve_header(rows.front(), names, 4);

  LoadResult<TrajectoryRecord> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    const auto uid_s = detail::cell(row, pos[0]);
    const auto lng_s = detail::cell(row, pos[1]);
    const auto lat_s = detail::cell(row, pos[2]);
    const auto time_s = detail::cell(row, pos[3]);
    if (detail::blank(uid_s) || detail::blank(lng_s) || detail::blank(lat_s) ||
        detail::blank(time_s)) {
      out.dropped.add("null", line);
      continue;
    }
    TrajectoryRecord rec;
    rec.uid = detail::trimmed(uid_s);
    const auto ts = parse_timestamp(time_s);
    if (!csv::parse_double(lat_s, rec.location.lat) ||
        !csv::parse_double(lng_s, rec.location.lng) || !is_valid(rec.location) || !ts) {
      out.dropped.add("malformed", line);
      continue;
    }
    rec.up_time = *ts;
    out.records.push_back(std::move(rec));
  }
  return out;
}

inline LoadResult<TrajectoryRecord> load_trajectory_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("missing file " + path.string());
  return parse_trajectory_csv(csv::read_file(path));
}

inline std::string to_csv(const std::vector<PoiRecord>& pois) {
  csv::Writer w;
  w.row({"lat", "lng", "name", "label", "city", "area", "address"});
  for (const auto& p : pois) {
    w.row({fmt::format("{}", p.location.lat), fmt::format("{}", p.location.lng), p.name,
           std::string(label_name(p.label)), p.city, p.area, p.address});
  }
  return w.str();
}

inline std::string to_csv(const std::vector<TrajectoryRecord>& records) {
  csv::Writer w;
  w.row({"uid", "lng", "lat", "up_time"});
  for (const auto& r : records) {
    w.row({r.uid, fmt::format("{}", r.location.lng), fmt::format("{}", r.location.lat),
           format_timestamp(r.up_time)});
  }
  return w.str();
}

/// Collapses records sharing (name, lng, lat) with coordinates rounded to
/// 1e-6 degrees. The label is not part of the key, so a POI filed under two
/// categories keeps its first-seen label. Order is otherwise preserved.
inline std::vector<PoiRecord> dedup_poi(const std::vector<PoiRecord>& records) {
  using Key = std::tuple<std::string, long long, long long>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::size_t h = std::hash<std::string>{}(std::get<0>(k));
      h ^= std::hash<long long>{}(std::get<1>(k)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h ^= std::hash<long long>{}(std::get<2>(k)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      return h;
    }
  };
  std::unordered_set<Key, KeyHash> seen;
  std::vector<PoiRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Key key{r.name, std::llround(r.location.lng * 1e6), std::llround(r.location.lat * 1e6)};
    if (seen.insert(std::move(key)).second) out.push_back(r);
  }
  return out;
}

using Partition = std::map<std::string, std::vector<TrajectoryRecord>>;

/// Groups records by passenger, each list sorted by up_time (stable).
inline Partition partition_by_uid(const std::vector<TrajectoryRecord>& records) {
  Partition out;
  for (const auto& r : records) out[r.uid].push_back(r);
  for (auto& [_, list] : out) {
    std::stable_sort(list.begin(), list.end(),
                     [](const auto& a, const auto& b) { return a.up_time < b.up_time; });
  }
  return out;
}

/// Keeps passengers with strictly more than `threshold` records.
inline Partition filter_min_records(const Partition& partition, std::size_t threshold = 100) {
  Partition out;
  for (const auto& [uid, list] : partition) {
    if (list.size() > threshold) out.emplace(uid, list);
  }
  return out;
}

}  // namespace poitrav

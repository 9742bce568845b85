#include "trisim/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>

#include "trisim/errors.hpp"

namespace trisim {

void validate_item_id(std::string_view id) {
  if (id.empty()) throw DataError("item id must be non-empty");
  for (char ch : id) {
    if (ch == ',' || ch == '\n' || ch == '\r') {
      throw DataError("item id '" + std::string(id) +
                      "' contains a comma or line break");
    }
  }
}

IdIndex build_id_index(std::span<const ItemId> ids) {
  IdIndex index;
  index.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!index.emplace(ids[i], i).second) {
      throw DataError("duplicate id '" + ids[i] + "'");
    }
  }
  return index;
}

std::size_t WoundMask::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1));
}

const WoundMask* FeatureContainer::find_wound(std::string_view wound_id) const {
  for (const auto& w : wounds) {
    if (w.id == wound_id) return &w;
  }
  return nullptr;
}

void FeatureContainer::validate() const {
  validate_item_id(item);
  if (channels == 0 || height == 0 || width == 0) {
    throw DataError("container '" + item + "': C, H, W must be positive");
  }
  const std::size_t expected =
      static_cast<std::size_t>(channels) * height * width;
  if (values.size() != expected) {
    throw DataError("container '" + item + "': expected " +
                    std::to_string(expected) + " values, got " +
                    std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("container '" + item + "': non-finite value at offset " +
                      std::to_string(i));
    }
  }
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (std::size_t w = 0; w < wounds.size(); ++w) {
    const auto& mask = wounds[w];
    if (mask.id.empty()) {
      throw DataError("container '" + item + "': wound " + std::to_string(w) +
                      " has an empty id");
    }
    if (mask.cells.size() != plane) {
      throw DataError("container '" + item + "', wound '" + mask.id +
                      "': mask size does not match H x W");
    }
    if (mask.count() == 0) {
      throw DataError("container '" + item + "', wound '" + mask.id +
                      "': empty mask");
    }
    for (std::size_t j = 0; j < w; ++j) {
      if (wounds[j].id == mask.id) {
        throw DataError("container '" + item + "': duplicate wound id '" +
                        mask.id + "'");
      }
    }
  }
}

void ViewPair::validate() const {
  view_a.validate();
  view_b.validate();
  if (view_a.item != item || view_b.item != item) {
    throw DataError("view pair '" + item + "': view item ids differ");
  }
  if (view_a.wounds.size() != view_b.wounds.size()) {
    throw DataError("view pair '" + item + "': wound counts differ across views");
  }
  for (std::size_t w = 0; w < view_a.wounds.size(); ++w) {
    if (view_a.wounds[w].id != view_b.wounds[w].id) {
      throw DataError("view pair '" + item + "': wound id '" +
                      view_a.wounds[w].id + "' has no counterpart '" +
                      view_b.wounds[w].id + "' in the second view");
    }
  }
  if (view_a.channels != view_b.channels) {
    throw DataError("view pair '" + item + "': channel counts differ");
  }
}

void EmbeddingSet::validate() const {
  if (static_cast<std::size_t>(coords.rows()) != ids.size()) {
    throw DataError("embedding set: " + std::to_string(ids.size()) +
                    " ids but " + std::to_string(coords.rows()) + " rows");
  }
  if (coords.cols() < 1) throw DataError("embedding set: dimension must be >= 1");
  for (const auto& id : ids) validate_item_id(id);
  build_id_index(ids);
  if (!coords.allFinite()) throw DataError("embedding set: non-finite coordinate");
}

void DistanceMatrix::validate(double tolerance) const {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (values.rows() != n || values.cols() != n) {
    throw DataError("distance matrix: shape does not match id count");
  }
  build_id_index(ids);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (values(i, i) != 0.0) {
      throw DataError("distance matrix: nonzero diagonal at '" + ids[i] + "'");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = values(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw DataError("distance matrix: invalid entry at (" + ids[i] + ", " +
                        ids[j] + ")");
      }
      if (std::abs(v - values(j, i)) > tolerance) {
        throw DataError("distance matrix: asymmetric at (" + ids[i] + ", " +
                        ids[j] + ")");
      }
    }
  }
}

void TripletJudgment::validate() const {
  validate_item_id(anchor);
  validate_item_id(left);
  validate_item_id(right);
  if (anchor == left || anchor == right || left == right) {
    throw DataError("triplet (" + anchor + ", " + left + ", " + right +
                    "): items must be pairwise distinct");
  }
}

std::string_view to_string(Choice c) {
  switch (c) {
    case Choice::Left: return "left";
    case Choice::Right: return "right";
    case Choice::Skipped: return "skipped";
  }
  return "skipped";
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::Human: return "human";
    case Source::Oracle: return "oracle";
    case Source::Synthetic: return "synthetic";
  }
  return "synthetic";
}

Choice parse_choice_name(std::string_view s) {
  if (s == "left") return Choice::Left;
  if (s == "right") return Choice::Right;
  if (s == "skipped" || s == "skip") return Choice::Skipped;
  throw DataError("unknown choice '" + std::string(s) + "'");
}

Source parse_source_name(std::string_view s) {
  if (s == "human") return Source::Human;
  if (s == "oracle") return Source::Oracle;
  if (s == "synthetic") return Source::Synthetic;
  throw DataError("unknown source '" + std::string(s) + "'");
}

std::string format_rfc3339(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[40];
  const auto ms = hms.subseconds().count();
  if (ms == 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ",
                  static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()),
                  static_cast<long>(hms.minutes().count()),
                  static_cast<long long>(hms.seconds().count()));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lld.%03lldZ",
                  static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()),
                  static_cast<long>(hms.minutes().count()),
                  static_cast<long long>(hms.seconds().count()),
                  static_cast<long long>(ms));
  }
  return buf;
}

namespace {

int digits(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw DataError("truncated timestamp");
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
      throw DataError("malformed timestamp '" + std::string(s) + "'");
    }
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

void expect(std::string_view s, std::size_t pos, std::string_view options) {
  if (pos >= s.size() || options.find(s[pos]) == std::string_view::npos) {
    throw DataError("malformed timestamp '" + std::string(s) + "'");
  }
}

}  // namespace

Timestamp parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  const int y = digits(s, 0, 4);
  expect(s, 4, "-");
  const int mo = digits(s, 5, 2);
  expect(s, 7, "-");
  const int d = digits(s, 8, 2);
  expect(s, 10, "Tt ");
  const int hh = digits(s, 11, 2);
  expect(s, 13, ":");
  const int mm = digits(s, 14, 2);
  expect(s, 16, ":");
  const int ss = digits(s, 17, 2);
  std::size_t pos = 19;
  long long millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int scale = 100;
    const std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      millis += (s[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == start) throw DataError("malformed timestamp '" + std::string(s) + "'");
  }
  long long offset_minutes = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else {
    expect(s, pos, "+-");
    const int sign = s[pos] == '-' ? -1 : 1;
    const int oh = digits(s, pos + 1, 2);
    expect(s, pos + 3, ":");
    const int om = digits(s, pos + 4, 2);
    offset_minutes = sign * (oh * 60 + om);
    pos += 6;
  }
  if (pos != s.size()) throw DataError("malformed timestamp '" + std::string(s) + "'");
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) {
    throw DataError("invalid timestamp '" + std::string(s) + "'");
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} +
         milliseconds{millis} - minutes{offset_minutes};
}

Timestamp now_timestamp() {
  return std::chrono::floor<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
}

}  // namespace trisim

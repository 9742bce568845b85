#include "trisim/corpus_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "trisim/errors.hpp"

namespace trisim {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "feature container I/O assumes a little-endian host");

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc
                                 : std::ios::out | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string where(std::string_view source, std::size_t line_no) {
  return std::string(source) + ":" + std::to_string(line_no) + ": ";
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end || s.empty()) {
    throw DataError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

// ---------------------------------------------------------------- embeddings

EmbeddingSet read_embeddings(std::istream& in, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string(source) + ": empty file");
  const auto header = split(strip_cr(line), ',');
  if (header.size() != 2 || header[0] != "id" || header[1].substr(0, 4) != "dim=") {
    throw DataError(where(source, 1) + "malformed header, expected 'id,dim=<d>'");
  }
  long dim = 0;
  {
    const auto d = header[1].substr(4);
    const auto res = std::from_chars(d.data(), d.data() + d.size(), dim);
    if (res.ec != std::errc() || res.ptr != d.data() + d.size() || dim < 1) {
      throw DataError(where(source, 1) + "malformed header dimension");
    }
  }
  EmbeddingSet e;
  std::vector<double> flat;
  IdIndex seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = strip_cr(line);
    if (row.empty()) continue;
    const auto fields = split(row, ',');
    if (static_cast<long>(fields.size()) != dim + 1) {
      throw DataError(where(source, line_no) + "expected " + std::to_string(dim) +
                      " values, got " + std::to_string(fields.size() - 1));
    }
    ItemId id(fields[0]);
    try {
      validate_item_id(id);
    } catch (const DataError& err) {
      throw DataError(where(source, line_no) + err.what());
    }
    if (!seen.emplace(id, e.ids.size()).second) {
      throw DataError(where(source, line_no) + "duplicate id '" + id + "'");
    }
    for (long k = 1; k <= dim; ++k) {
      double v = 0.0;
      try {
        v = parse_double(fields[k]);
      } catch (const DataError& err) {
        throw DataError(where(source, line_no) + err.what());
      }
      if (!std::isfinite(v)) {
        throw DataError(where(source, line_no) + "non-finite value for '" + id + "'");
      }
      flat.push_back(v);
    }
    e.ids.push_back(std::move(id));
  }
  e.coords.resize(static_cast<Eigen::Index>(e.ids.size()), dim);
  for (std::size_t i = 0; i < e.ids.size(); ++i) {
    for (long k = 0; k < dim; ++k) e.coords(i, k) = flat[i * dim + k];
  }
  return e;
}

void write_embeddings(std::ostream& out, const EmbeddingSet& e) {
  e.validate();
  out << "id,dim=" << e.dim() << '\n';
  for (std::size_t i = 0; i < e.size(); ++i) {
    out << e.ids[i];
    for (Eigen::Index k = 0; k < e.coords.cols(); ++k) {
      out << ',' << format_double(e.coords(i, k));
    }
    out << '\n';
  }
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_embeddings(in, path.string());
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& e) {
  auto out = open_out(path);
  write_embeddings(out, e);
}

// ----------------------------------------------------------------- distances

DistanceMatrix read_distances(std::istream& in, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string(source) + ": empty file");
  DistanceMatrix d;
  for (auto f : split(strip_cr(line), ',')) d.ids.emplace_back(f);
  for (const auto& id : d.ids) {
    try {
      validate_item_id(id);
    } catch (const DataError& err) {
      throw DataError(where(source, 1) + err.what());
    }
  }
  build_id_index(d.ids);
  const auto n = static_cast<Eigen::Index>(d.ids.size());
  d.values.resize(n, n);
  Eigen::Index row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = strip_cr(line);
    if (text.empty()) continue;
    if (row >= n) throw DataError(where(source, line_no) + "more rows than ids");
    const auto fields = split(text, ',');
    if (static_cast<Eigen::Index>(fields.size()) != n) {
      throw DataError(where(source, line_no) + "expected " + std::to_string(n) +
                      " values, got " + std::to_string(fields.size()));
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      try {
        d.values(row, j) = parse_double(fields[j]);
      } catch (const DataError& err) {
        throw DataError(where(source, line_no) + err.what());
      }
    }
    ++row;
  }
  if (row != n) throw DataError(std::string(source) + ": expected " +
                                std::to_string(n) + " rows, got " + std::to_string(row));
  d.validate();
  return d;
}

void write_distances(std::ostream& out, const DistanceMatrix& d) {
  d.validate();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) out << ',';
    out << d.ids[i];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(d.values(i, j));
    }
    out << '\n';
  }
}

DistanceMatrix load_distances(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_distances(in, path.string());
}

void save_distances(const std::filesystem::path& path, const DistanceMatrix& d) {
  auto out = open_out(path);
  write_distances(out, d);
}

// ------------------------------------------------------------ feature files

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string_view source)
      : bytes_(bytes), source_(source) {}

  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(std::string(source_) + " @" + std::to_string(pos_) + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      fail("truncated file: need " + std::to_string(n) + " bytes, have " +
           std::to_string(remaining()));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::string_view source_;
  std::size_t pos_ = 0;
};

void encode_container(Writer& w, const FeatureContainer& fc) {
  fc.validate();
  w.str(fc.item);
  w.u32(fc.channels);
  w.u32(fc.height);
  w.u32(fc.width);
  w.u32(static_cast<std::uint32_t>(fc.wounds.size()));
  w.u64(static_cast<std::uint64_t>(fc.values.size()) * sizeof(float));
  w.raw(fc.values.data(), fc.values.size() * sizeof(float));
  const std::size_t row_bytes = (fc.width + 7) / 8;
  for (const auto& mask : fc.wounds) {
    w.str(mask.id);
    std::vector<std::uint8_t> packed(row_bytes * fc.height, 0);
    for (std::uint32_t y = 0; y < fc.height; ++y) {
      for (std::uint32_t x = 0; x < fc.width; ++x) {
        if (mask.cells[static_cast<std::size_t>(y) * fc.width + x]) {
          packed[y * row_bytes + x / 8] |= static_cast<std::uint8_t>(1u << (x % 8));
        }
      }
    }
    w.raw(packed.data(), packed.size());
  }
}

FeatureContainer decode_container(Reader& r) {
  FeatureContainer fc;
  fc.item = r.str();
  fc.channels = r.u32();
  fc.height = r.u32();
  fc.width = r.u32();
  const auto wound_count = r.u32();
  const auto declared = r.u64();
  if (fc.channels == 0 || fc.height == 0 || fc.width == 0) {
    r.fail("container '" + fc.item + "': C, H, W must be positive");
  }
  const std::uint64_t expected =
      std::uint64_t{fc.channels} * fc.height * fc.width * sizeof(float);
  if (declared != expected) {
    r.fail("container '" + fc.item + "': declared payload size " +
           std::to_string(declared) + " != C*H*W*4 = " + std::to_string(expected));
  }
  if (declared > r.remaining()) {
    r.fail("container '" + fc.item + "': declared payload size " +
           std::to_string(declared) + " exceeds remaining " +
           std::to_string(r.remaining()) + " bytes");
  }
  fc.values.resize(declared / sizeof(float));
  r.raw(fc.values.data(), declared);
  const std::size_t row_bytes = (fc.width + 7) / 8;
  std::vector<std::uint8_t> packed(row_bytes * fc.height);
  for (std::uint32_t w = 0; w < wound_count; ++w) {
    WoundMask mask;
    mask.id = r.str();
    r.raw(packed.data(), packed.size());
    mask.cells.assign(static_cast<std::size_t>(fc.height) * fc.width, 0);
    for (std::uint32_t y = 0; y < fc.height; ++y) {
      for (std::uint32_t x = 0; x < fc.width; ++x) {
        if (packed[y * row_bytes + x / 8] & (1u << (x % 8))) {
          mask.cells[static_cast<std::size_t>(y) * fc.width + x] = 1;
        }
      }
    }
    fc.wounds.push_back(std::move(mask));
  }
  fc.validate();
  return fc;
}

}  // namespace

std::vector<std::uint8_t> encode_feature_file(const FeatureFile& file) {
  Writer w;
  w.raw(kFeatureMagic.data(), kFeatureMagic.size());
  w.u32(file.paired ? 1u : 0u);
  if (file.paired) {
    w.u32(static_cast<std::uint32_t>(file.pairs.size()));
    for (const auto& p : file.pairs) {
      p.validate();
      encode_container(w, p.view_a);
      encode_container(w, p.view_b);
    }
  } else {
    w.u32(static_cast<std::uint32_t>(file.containers.size()));
    for (const auto& c : file.containers) encode_container(w, c);
  }
  return w.take();
}

FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes,
                                std::string_view source) {
  Reader r(bytes, source);
  char magic[8];
  if (bytes.size() < sizeof magic ||
      std::memcmp(bytes.data(), kFeatureMagic.data(), sizeof magic) != 0) {
    throw DataError(std::string(source) + ": magic number mismatch, not a feature file");
  }
  r.raw(magic, sizeof magic);
  const auto kind = r.u32();
  if (kind > 1) r.fail("unknown container kind " + std::to_string(kind));
  const auto count = r.u32();
  FeatureFile file;
  file.paired = kind == 1;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (file.paired) {
      ViewPair p;
      p.view_a = decode_container(r);
      p.view_b = decode_container(r);
      p.item = p.view_a.item;
      try {
        p.validate();
      } catch (const DataError& err) {
        throw DataError(std::string(source) + ": pairing error: " + err.what());
      }
      file.pairs.push_back(std::move(p));
    } else {
      file.containers.push_back(decode_container(r));
    }
  }
  if (r.remaining() != 0) {
    r.fail(std::to_string(r.remaining()) + " trailing bytes after last record");
  }
  std::vector<ItemId> ids;
  if (file.paired) {
    for (const auto& p : file.pairs) ids.push_back(p.item);
  } else {
    for (const auto& c : file.containers) ids.push_back(c.item);
  }
  try {
    build_id_index(ids);
  } catch (const DataError& err) {
    throw DataError(std::string(source) + ": " + err.what());
  }
  return file;
}

FeatureFile load_feature_file(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_feature_file(bytes, path.string());
}

namespace {
void write_bytes(const std::filesystem::path& path,
                 const std::vector<std::uint8_t>& bytes) {
  auto out = open_out(path, true);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}
}  // namespace

void save_feature_containers(const std::filesystem::path& path,
                             std::span<const FeatureContainer> containers) {
  FeatureFile f;
  f.containers.assign(containers.begin(), containers.end());
  write_bytes(path, encode_feature_file(f));
}

void save_view_pairs(const std::filesystem::path& path,
                     std::span<const ViewPair> pairs) {
  FeatureFile f;
  f.paired = true;
  f.pairs.assign(pairs.begin(), pairs.end());
  write_bytes(path, encode_feature_file(f));
}

// ----------------------------------------------------------------- judgments

std::string judgment_to_json_line(const TripletJudgment& j) {
  json obj = json::object();
  obj["anchor"] = j.anchor;
  obj["left"] = j.left;
  obj["right"] = j.right;
  obj["choice"] = std::string(to_string(j.choice));
  obj["source"] = std::string(to_string(j.source));
  obj["annotator"] = j.annotator ? json(*j.annotator) : json(nullptr);
  obj["created_at"] = format_rfc3339(j.created_at);
  return obj.dump();
}

TripletJudgment judgment_from_json_line(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& err) {
    throw DataError(std::string("invalid JSON: ") + err.what());
  }
  if (!obj.is_object()) throw DataError("judgment record must be a JSON object");
  auto get_str = [&](const char* key) -> std::string {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
      throw DataError(std::string("missing or non-string key '") + key + "'");
    }
    return it->get<std::string>();
  };
  TripletJudgment j;
  j.anchor = get_str("anchor");
  j.left = get_str("left");
  j.right = get_str("right");
  j.choice = parse_choice_name(get_str("choice"));
  j.source = parse_source_name(get_str("source"));
  if (const auto it = obj.find("annotator"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("'annotator' must be a string or null");
    j.annotator = it->get<std::string>();
  }
  j.created_at = parse_rfc3339(get_str("created_at"));
  j.validate();
  return j;
}

std::vector<TripletJudgment> read_judgments(std::istream& in, std::string_view source) {
  std::vector<TripletJudgment> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = strip_cr(line);
    if (text.find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      out.push_back(judgment_from_json_line(text));
    } catch (const DataError& err) {
      throw DataError(where(source, line_no) + err.what());
    }
  }
  return out;
}

void write_judgments(std::ostream& out, std::span<const TripletJudgment> judgments) {
  for (const auto& j : judgments) out << judgment_to_json_line(j) << '\n';
}

std::vector<TripletJudgment> load_judgments(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_judgments(in, path.string());
}

void save_judgments(const std::filesystem::path& path,
                    std::span<const TripletJudgment> judgments) {
  auto out = open_out(path);
  write_judgments(out, judgments);
}

// ----------------------------------------------------------------- item ids

std::vector<ItemId> load_item_ids(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<ItemId> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = strip_cr(line);
    if (text.empty()) continue;
    try {
      validate_item_id(text);
    } catch (const DataError& err) {
      throw DataError(where(path.string(), line_no) + err.what());
    }
    ids.emplace_back(text);
  }
  build_id_index(ids);
  return ids;
}

void save_item_ids(const std::filesystem::path& path, std::span<const ItemId> ids) {
  auto out = open_out(path);
  for (const auto& id : ids) out << id << '\n';
}

}  // namespace trisim

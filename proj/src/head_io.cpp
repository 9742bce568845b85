#include "trisim/head_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "trisim/corpus_io.hpp"
#include "trisim/errors.hpp"

namespace trisim {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

// Parses `key=value` fields, the first `skip` fields are positional.
std::map<std::string, std::string> key_values(const std::vector<std::string>& fields,
                                              std::size_t skip, std::string_view where) {
  std::map<std::string, std::string> kv;
  for (std::size_t i = skip; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string::npos) {
      throw DataError(std::string(where) + ": expected key=value, got '" + fields[i] + "'");
    }
    kv[fields[i].substr(0, eq)] = fields[i].substr(eq + 1);
  }
  return kv;
}

long to_long(const std::string& s, std::string_view where) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 1) {
    throw DataError(std::string(where) + ": bad integer '" + s + "'");
  }
  return v;
}

template <typename M>
void write_tensor(std::ostream& out, std::string_view name, const M& m, Eigen::Index rows,
                  Eigen::Index cols) {
  out << "tensor," << name << ",rows=" << rows << ",cols=" << cols << '\n';
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

}  // namespace

void write_head_params(std::ostream& out, const HeadParams& p) {
  p.validate();
  out << "head,channels=" << p.channels() << ",hidden=" << p.hidden()
      << ",dim=" << p.dim() << ",pooling=" << to_string(p.pooling)
      << ",ln_eps=" << format_double(p.ln_eps) << '\n';
  auto row = [](const Eigen::VectorXd& v) {
    return [&v](Eigen::Index, Eigen::Index c) { return v(c); };
  };
  write_tensor(out, "attn_w1", p.attn_w1, p.attn_w1.rows(), p.attn_w1.cols());
  write_tensor(out, "attn_b1", row(p.attn_b1), 1, p.attn_b1.size());
  write_tensor(out, "attn_w2", row(p.attn_w2), 1, p.attn_w2.size());
  const double b2 = p.attn_b2;
  write_tensor(out, "attn_b2", [b2](Eigen::Index, Eigen::Index) { return b2; }, 1, 1);
  write_tensor(out, "pred_w", p.pred_w, p.pred_w.rows(), p.pred_w.cols());
  write_tensor(out, "pred_b", row(p.pred_b), 1, p.pred_b.size());
  write_tensor(out, "ln_gain", row(p.ln_gain), 1, p.ln_gain.size());
  write_tensor(out, "ln_bias", row(p.ln_bias), 1, p.ln_bias.size());
}

HeadParams read_head_params(std::istream& in, std::string_view source) {
  std::string line;
  std::size_t line_no = 0;
  auto where = [&]() { return std::string(source) + ":" + std::to_string(line_no); };
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next()) throw DataError(std::string(source) + ": empty head file");
  const auto header = split(line, ',');
  if (header.empty() || header[0] != "head") {
    throw DataError(where() + ": expected 'head,...' header");
  }
  auto kv = key_values(header, 1, where());
  for (const char* key : {"channels", "hidden", "dim", "pooling", "ln_eps"}) {
    if (!kv.count(key)) throw DataError(where() + ": header lacks '" + key + "'");
  }
  const long c = to_long(kv["channels"], where());
  const long h = to_long(kv["hidden"], where());
  const long d = to_long(kv["dim"], where());
  HeadParams p;
  p.pooling = parse_pooling(kv["pooling"]);
  p.ln_eps = parse_double(kv["ln_eps"]);
  p.attn_w1.resize(c, h);
  p.attn_b1.resize(h);
  p.attn_w2.resize(h);
  p.pred_w.resize(c, d);
  p.pred_b.resize(d);
  p.ln_gain.resize(d);
  p.ln_bias.resize(d);
  Eigen::VectorXd b2(1);

  struct Slot {
    const char* name;
    double* data;
    Eigen::Index rows;
    Eigen::Index cols;
    bool col_major;
  };
  const Slot slots[] = {
      {"attn_w1", p.attn_w1.data(), c, h, true},
      {"attn_b1", p.attn_b1.data(), 1, h, false},
      {"attn_w2", p.attn_w2.data(), 1, h, false},
      {"attn_b2", b2.data(), 1, 1, false},
      {"pred_w", p.pred_w.data(), c, d, true},
      {"pred_b", p.pred_b.data(), 1, d, false},
      {"ln_gain", p.ln_gain.data(), 1, d, false},
      {"ln_bias", p.ln_bias.data(), 1, d, false},
  };
  for (const auto& slot : slots) {
    if (!next()) throw DataError(std::string(source) + ": missing tensor '" + slot.name + "'");
    const auto fields = split(line, ',');
    if (fields.size() < 2 || fields[0] != "tensor" || fields[1] != slot.name) {
      throw DataError(where() + ": expected section 'tensor," + slot.name + "'");
    }
    auto tkv = key_values(fields, 2, where());
    if (to_long(tkv["rows"], where()) != slot.rows ||
        to_long(tkv["cols"], where()) != slot.cols) {
      throw DataError(where() + ": tensor '" + slot.name + "' has unexpected shape");
    }
    for (Eigen::Index r = 0; r < slot.rows; ++r) {
      if (!next()) throw DataError(std::string(source) + ": truncated tensor '" + slot.name + "'");
      const auto vals = split(line, ',');
      if (static_cast<Eigen::Index>(vals.size()) != slot.cols) {
        throw DataError(where() + ": expected " + std::to_string(slot.cols) + " values");
      }
      for (Eigen::Index col = 0; col < slot.cols; ++col) {
        double v = 0.0;
        try {
          v = parse_double(vals[col]);
        } catch (const DataError& err) {
          throw DataError(where() + ": " + err.what());
        }
        const Eigen::Index idx = slot.col_major ? col * slot.rows + r : col;
        slot.data[idx] = v;
      }
    }
  }
  p.attn_b2 = b2(0);
  p.validate();
  return p;
}

void save_head_params(const std::filesystem::path& path, const HeadParams& p) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  write_head_params(out, p);
}

HeadParams load_head_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return read_head_params(in, path.string());
}

}  // namespace trisim

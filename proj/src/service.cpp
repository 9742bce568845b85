#include "trisim/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>

#include <json.hpp>

#include "trisim/corpus_io.hpp"
#include "trisim/errors.hpp"

namespace trisim {

using nlohmann::json;

std::vector<QueueTriplet> load_queue(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open queue file " + path.string());
  std::vector<QueueTriplet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    QueueTriplet t;
    t.id = out.size();
    try {
      t.anchor = j.at("anchor").get<std::string>();
      t.left = j.at("left").get<std::string>();
      t.right = j.at("right").get<std::string>();
      validate_item_id(t.anchor);
      validate_item_id(t.left);
      validate_item_id(t.right);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const std::exception&) {
      throw DataError(where + "expected string fields anchor, left, right");
    }
    if (t.anchor == t.left || t.anchor == t.right || t.left == t.right) {
      throw DataError(where + "triplet repeats an item");
    }
    out.push_back(std::move(t));
  }
  if (out.empty()) throw DataError("queue file " + path.string() + " holds no triplets");
  return out;
}

TripletService::TripletService(std::vector<QueueTriplet> queue, std::filesystem::path log_path,
                               ServiceConfig cfg)
    : queue_(std::move(queue)), log_path_(std::move(log_path)), cfg_(std::move(cfg)) {
  if (cfg_.lease_timeout.count() <= 0) throw ConfigError("lease timeout must be positive");
  if (!cfg_.clock) cfg_.clock = now_timestamp;
  for (std::size_t i = 0; i < queue_.size(); ++i) queue_[i].id = i;
  replay();
  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw DataError("cannot open judgment log " + log_path_.string() + ": " +
                    std::strerror(errno));
  }
}

TripletService::~TripletService() {
  if (fd_ >= 0) ::close(fd_);
}

void TripletService::replay() {
  std::ifstream in(log_path_, std::ios::binary);
  if (!in) return;
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) {
      std::cerr << "warning: dropping incomplete final record in " << log_path_.string() << '\n';
      std::filesystem::resize_file(log_path_, pos);
      break;
    }
    const std::string line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (line.empty()) continue;
    const auto where = log_path_.string() + ":" + std::to_string(lineno) + ": ";
    try {
      const auto j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "session") {
        apply_session(j.at("session").get<std::string>(), j.at("annotator").get<std::string>());
      } else if (type == "judgment") {
        Judgment r;
        r.sequence = j.at("sequence").get<std::uint64_t>();
        r.triplet_id = j.at("triplet_id").get<std::uint64_t>();
        r.session = j.at("session").get<std::string>();
        r.annotator = j.at("annotator").get<std::string>();
        r.choice = parse_choice_name(j.at("choice").get<std::string>());
        r.created_at = parse_rfc3339(j.at("created_at").get<std::string>());
        if (r.triplet_id >= queue_.size()) throw DataError("triplet id beyond the queue");
        const auto& q = queue_[r.triplet_id];
        if (j.at("anchor") != q.anchor || j.at("left") != q.left || j.at("right") != q.right) {
          throw DataError("logged triplet differs from the queue entry");
        }
        if (!sessions_.count(r.session)) throw DataError("judgment for unknown session");
        if (by_sequence_.count(r.sequence)) throw DataError("repeated sequence number");
        apply_judgment(std::move(r));
      } else if (type == "undo") {
        apply_undo(j.at("sequence").get<std::uint64_t>());
      } else {
        throw DataError("unknown record type '" + type + "'");
      }
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const std::exception& e) {
      throw DataError(where + "malformed log record (" + e.what() + ")");
    }
  }
}

void TripletService::append(const std::string& line) {
  const std::string rec = line + '\n';
  std::size_t done = 0;
  while (done < rec.size()) {
    const auto n = ::write(fd_, rec.data() + done, rec.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("judgment log write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) {
    throw std::runtime_error(std::string("judgment log fsync failed: ") + std::strerror(errno));
  }
}

void TripletService::apply_session(const std::string& session, const std::string& annotator) {
  sessions_[session] = annotator;
}

void TripletService::apply_judgment(Judgment j) {
  next_sequence_ = std::max(next_sequence_, j.sequence + 1);
  by_sequence_[j.sequence] = judgments_.size();
  by_triplet_session_[{j.triplet_id, j.session}] = judgments_.size();
  ++handled_[{j.annotator, j.triplet_id}];
  judgments_.push_back(std::move(j));
}

void TripletService::apply_undo(std::uint64_t sequence) {
  const auto it = by_sequence_.find(sequence);
  if (it == by_sequence_.end()) throw DataError("undo of unknown sequence");
  auto& j = judgments_[it->second];
  if (j.superseded) throw DataError("undo of an already superseded judgment");
  j.superseded = true;
  by_triplet_session_.erase({j.triplet_id, j.session});
  auto h = handled_.find({j.annotator, j.triplet_id});
  if (--h->second == 0) handled_.erase(h);
}

std::string TripletService::new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  for (;;) {
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng()),
                  static_cast<unsigned long long>(rng()));
    if (!sessions_.count(buf)) return buf;
  }
}

bool TripletService::lease_live(const Lease& l, Timestamp now) const { return now < l.expires; }

Task TripletService::lease_to(std::uint64_t triplet_id, const std::string& annotator,
                              const std::string& session, Timestamp now) {
  if (const auto held = lease_of_annotator_.find(annotator); held != lease_of_annotator_.end()) {
    if (held->second != triplet_id) leases_.erase(held->second);
  }
  if (const auto prev = leases_.find(triplet_id); prev != leases_.end()) {
    if (prev->second.annotator != annotator) lease_of_annotator_.erase(prev->second.annotator);
  }
  const auto expires = now + cfg_.lease_timeout;
  leases_[triplet_id] = Lease{annotator, session, expires};
  lease_of_annotator_[annotator] = triplet_id;
  return Task{queue_[triplet_id], session, expires};
}

const std::string& TripletService::annotator_of(const std::string& session) const {
  const auto it = sessions_.find(session);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + session + "'");
  return it->second;
}

SubmitAck TripletService::ack_of(const Judgment& j, bool duplicate) const {
  return SubmitAck{j.sequence, j.triplet_id, j.session, j.choice, j.created_at, duplicate};
}

NextTask TripletService::next_task(const std::string& annotator,
                                   const std::optional<std::string>& session) {
  if (annotator.empty() || annotator.size() > 128 ||
      annotator.find_first_of("\r\n") != std::string::npos) {
    throw ServiceError(400, "annotator must be a non-empty single-line name");
  }
  std::unique_lock lock(mu_);
  std::string sid;
  if (session) {
    if (annotator_of(*session) != annotator) {
      throw ServiceError(409, "session belongs to a different annotator");
    }
    sid = *session;
  } else {
    sid = new_session_id();
    append(json{{"type", "session"}, {"session", sid}, {"annotator", annotator}}.dump());
    apply_session(sid, annotator);
  }
  const Timestamp now = cfg_.clock();
  if (const auto held = lease_of_annotator_.find(annotator); held != lease_of_annotator_.end()) {
    const auto l = leases_.find(held->second);
    if (l != leases_.end() && lease_live(l->second, now)) {
      return NextTask{sid, lease_to(held->second, annotator, sid, now)};
    }
    if (l != leases_.end()) leases_.erase(l);
    lease_of_annotator_.erase(held);
  }
  for (const auto& q : queue_) {
    if (handled_.count({annotator, q.id})) continue;
    const auto l = leases_.find(q.id);
    if (l != leases_.end() && lease_live(l->second, now)) continue;
    return NextTask{sid, lease_to(q.id, annotator, sid, now)};
  }
  return NextTask{sid, std::nullopt};
}

SubmitAck TripletService::submit(const std::string& session, std::uint64_t triplet_id,
                                 Choice choice) {
  std::unique_lock lock(mu_);
  const std::string annotator = annotator_of(session);
  if (triplet_id >= queue_.size()) {
    throw ServiceError(404, "unknown triplet id " + std::to_string(triplet_id));
  }
  if (const auto it = by_triplet_session_.find({triplet_id, session});
      it != by_triplet_session_.end()) {
    return ack_of(judgments_[it->second], true);
  }
  if (handled_.count({annotator, triplet_id})) {
    throw ServiceError(409, "triplet " + std::to_string(triplet_id) +
                                " was already judged by this annotator in another session");
  }
  const Timestamp now = cfg_.clock();
  // A lapsed lease still counts while nobody else has taken the triplet.
  const auto lease = leases_.find(triplet_id);
  if (lease == leases_.end() || lease->second.session != session) {
    throw ServiceError(409, "stale or unknown lease: triplet " + std::to_string(triplet_id) +
                                " is not leased to this session");
  }
  Judgment j{next_sequence_, triplet_id, session, annotator, choice, now};
  const auto& q = queue_[triplet_id];
  append(json{{"type", "judgment"},
              {"sequence", j.sequence},
              {"triplet_id", triplet_id},
              {"anchor", q.anchor},
              {"left", q.left},
              {"right", q.right},
              {"session", session},
              {"annotator", annotator},
              {"choice", std::string(to_string(choice))},
              {"created_at", format_rfc3339(now)}}
             .dump());
  apply_judgment(j);
  leases_.erase(lease);
  lease_of_annotator_.erase(annotator);
  return ack_of(j, false);
}

UndoResult TripletService::undo(const std::string& session) {
  std::unique_lock lock(mu_);
  const std::string annotator = annotator_of(session);
  for (auto it = judgments_.rbegin(); it != judgments_.rend(); ++it) {
    if (it->session != session || it->superseded) continue;
    const Timestamp now = cfg_.clock();
    append(json{{"type", "undo"}, {"sequence", it->sequence}, {"created_at", format_rfc3339(now)}}
               .dump());
    const auto seq = it->sequence;
    const auto triplet = it->triplet_id;
    apply_undo(seq);
    return UndoResult{seq, lease_to(triplet, annotator, session, now)};
  }
  throw ServiceError(409, "nothing to undo in this session");
}

Progress TripletService::progress() const {
  std::shared_lock lock(mu_);
  Progress p;
  p.total = queue_.size();
  for (const auto& [sid, annotator] : sessions_) p.annotators[annotator];
  for (const auto& j : judgments_) {
    if (j.superseded) continue;
    ++p.active_judgments;
    auto& a = p.annotators[j.annotator];
    (j.choice == Choice::Skipped ? a.skipped : a.judged) += 1;
  }
  for (auto& [name, a] : p.annotators) a.remaining = p.total - a.judged - a.skipped;
  const Timestamp now = cfg_.clock();
  for (const auto& [id, l] : leases_) p.active_leases += lease_live(l, now) ? 1 : 0;
  return p;
}

std::vector<TripletJudgment> TripletService::export_judgments() const {
  std::shared_lock lock(mu_);
  std::vector<TripletJudgment> out;
  for (const auto& j : judgments_) {
    if (j.superseded) continue;
    const auto& q = queue_[j.triplet_id];
    out.push_back(TripletJudgment{q.anchor, q.left, q.right, j.choice, Source::Human,
                                  j.annotator, j.created_at});
  }
  return out;
}

std::string TripletService::export_jsonl() const {
  std::ostringstream out;
  write_judgments(out, export_judgments());
  return out.str();
}

}  // namespace trisim

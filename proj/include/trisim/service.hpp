#pragma once

// Triplet collection service: serves queued triplets to annotators, records
// judgments in an append-only log (fsync'd before acknowledging), supports
// undo, and exports the surviving judgments in corpus JSONL form.
//
// Every annotator works through the whole queue in order. A triplet is
// leased to at most one annotator at a time; a lease lapses after the
// configured timeout.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "trisim/corpus.hpp"

namespace trisim {

struct QueueTriplet {
  std::uint64_t id = 0;  // position in the queue file
  ItemId anchor;
  ItemId left;
  ItemId right;
};

// JSONL objects with at least string fields anchor, left, right (so a
// judgment file also works as a queue).
std::vector<QueueTriplet> load_queue(const std::filesystem::path& path);

struct Task {
  QueueTriplet triplet;
  std::string session;
  Timestamp lease_expires_at;
};

struct NextTask {
  std::string session;
  std::optional<Task> task;  // empty when the annotator has finished the queue
};

struct SubmitAck {
  std::uint64_t sequence = 0;
  std::uint64_t triplet_id = 0;
  std::string session;
  Choice choice = Choice::Skipped;
  Timestamp created_at;
  bool duplicate = false;
};

struct UndoResult {
  std::uint64_t undone_sequence = 0;
  Task task;  // the triplet, leased back to the session
};

struct AnnotatorProgress {
  std::size_t judged = 0;  // left or right
  std::size_t skipped = 0;
  std::size_t remaining = 0;
};

struct Progress {
  std::size_t total = 0;
  std::size_t active_judgments = 0;
  std::size_t active_leases = 0;
  std::map<std::string, AnnotatorProgress> annotators;
};

// Client-caused failures carry the HTTP status they map to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct ServiceConfig {
  std::chrono::milliseconds lease_timeout = std::chrono::minutes(10);
  std::function<Timestamp()> clock = now_timestamp;
};

class TripletService {
 public:
  // Replays an existing log. A torn final line (crash mid-write) is dropped
  // and truncated away; any other malformed line is a DataError.
  TripletService(std::vector<QueueTriplet> queue, std::filesystem::path log_path,
                 ServiceConfig cfg = {});
  ~TripletService();
  TripletService(const TripletService&) = delete;
  TripletService& operator=(const TripletService&) = delete;

  // Without a session a new one is created for the annotator. Returns the
  // annotator's current lease if it holds one.
  NextTask next_task(const std::string& annotator,
                     const std::optional<std::string>& session = std::nullopt);

  // Idempotent per (triplet, session): a repeat returns the original ack.
  SubmitAck submit(const std::string& session, std::uint64_t triplet_id, Choice choice);

  // Supersedes the session's most recent surviving judgment.
  UndoResult undo(const std::string& session);

  Progress progress() const;
  std::vector<TripletJudgment> export_judgments() const;
  std::string export_jsonl() const;

  const std::vector<QueueTriplet>& queue() const { return queue_; }

 private:
  struct Judgment {
    std::uint64_t sequence;
    std::uint64_t triplet_id;
    std::string session;
    std::string annotator;
    Choice choice;
    Timestamp created_at;
    bool superseded = false;
  };
  struct Lease {
    std::string annotator;
    std::string session;
    Timestamp expires;
  };

  void replay();
  void append(const std::string& line);
  void apply_session(const std::string& session, const std::string& annotator);
  void apply_judgment(Judgment j);
  void apply_undo(std::uint64_t sequence);
  std::string new_session_id();
  bool lease_live(const Lease& l, Timestamp now) const;
  Task lease_to(std::uint64_t triplet_id, const std::string& annotator,
                const std::string& session, Timestamp now);
  const std::string& annotator_of(const std::string& session) const;
  SubmitAck ack_of(const Judgment& j, bool duplicate) const;

  std::vector<QueueTriplet> queue_;
  std::filesystem::path log_path_;
  ServiceConfig cfg_;
  int fd_ = -1;

  mutable std::shared_mutex mu_;
  std::uint64_t next_sequence_ = 1;
  std::vector<Judgment> judgments_;  // submission order
  std::unordered_map<std::uint64_t, std::size_t> by_sequence_;
  std::unordered_map<std::string, std::string> sessions_;  // session -> annotator
  // (triplet, session) -> index of the surviving judgment
  std::map<std::pair<std::uint64_t, std::string>, std::size_t> by_triplet_session_;
  // (annotator, triplet) -> number of surviving judgments
  std::map<std::pair<std::string, std::uint64_t>, std::size_t> handled_;
  std::unordered_map<std::uint64_t, Lease> leases_;
  std::unordered_map<std::string, std::uint64_t> lease_of_annotator_;
};

}  // namespace trisim

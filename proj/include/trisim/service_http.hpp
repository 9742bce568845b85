#pragma once

// HTTP front end for TripletService.
//
//   GET  /api/tasks/next?annotator=NAME[&session=ID]
//   POST /api/judgments        {"session", "triplet_id", "choice"}
//   POST /api/judgments/undo   {"session"}
//   GET  /api/progress
//   GET  /api/export           corpus JSONL
//   GET  /assets/{item id}     asset file whose stem is the id
//
// Errors are JSON objects {"error": ..., "detail": ...}.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "trisim/service.hpp"

namespace httplib {
class Server;
}

namespace trisim {

// Maps item id -> asset file, built from the files directly in a directory.
class AssetStore {
 public:
  AssetStore() = default;
  explicit AssetStore(const std::filesystem::path& dir);
  std::optional<std::filesystem::path> find(const std::string& id) const;
  std::size_t size() const { return files_.size(); }

 private:
  std::map<std::string, std::filesystem::path> files_;
};

std::string content_type_for(const std::filesystem::path& file);

class ServiceHttp {
 public:
  ServiceHttp(TripletService& service, AssetStore assets,
              std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~ServiceHttp();
  ServiceHttp(const ServiceHttp&) = delete;
  ServiceHttp& operator=(const ServiceHttp&) = delete;

  // Port 0 picks a free port; returns the bound port.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void start();   // listen on a background thread
  void stop();
  int port() const { return port_; }

 private:
  void routes();

  TripletService& service_;
  AssetStore assets_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<std::thread> thread_;
  int port_ = -1;
};

}  // namespace trisim

#include "trisim/service_http.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "trisim/errors.hpp"

namespace trisim {

using nlohmann::json;

AssetStore::AssetStore(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw DataError("asset directory " + dir.string() + " does not exist");
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto stem = entry.path().stem().string();
    const auto [it, fresh] = files_.emplace(stem, entry.path());
    if (!fresh) {
      throw DataError("two assets share the id '" + stem + "': " + it->second.filename().string() +
                      " and " + entry.path().filename().string());
    }
  }
}

std::optional<std::filesystem::path> AssetStore::find(const std::string& id) const {
  const auto it = files_.find(id);
  if (it == files_.end()) return std::nullopt;
  return it->second;
}

std::string content_type_for(const std::filesystem::path& file) {
  auto ext = file.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".txt") return "text/plain";
  if (ext == ".json") return "application/json";
  return "application/octet-stream";
}

namespace {

void send_error(httplib::Response& res, int status, const std::string& error,
                const std::string& detail) {
  res.status = status;
  res.set_content(json{{"error", error}, {"detail", detail}}.dump(), "application/json");
}

std::string status_name(int status) {
  switch (status) {
    case 400: return "bad_request";
    case 404: return "not_found";
    case 409: return "conflict";
    default: return "internal_error";
  }
}

json task_json(const Task& t) {
  return {{"triplet_id", t.triplet.id},
          {"anchor", t.triplet.anchor},
          {"left", t.triplet.left},
          {"right", t.triplet.right},
          {"anchor_asset", "/assets/" + t.triplet.anchor},
          {"left_asset", "/assets/" + t.triplet.left},
          {"right_asset", "/assets/" + t.triplet.right},
          {"session", t.session},
          {"lease_expires_at", format_rfc3339(t.lease_expires_at)}};
}

json parse_body(const httplib::Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error&) {
    throw ServiceError(400, "request body is not valid JSON");
  }
  if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
  return body;
}

std::string string_field(const json& body, const char* name) {
  const auto it = body.find(name);
  if (it == body.end() || !it->is_string()) {
    throw ServiceError(400, std::string("missing string field '") + name + "'");
  }
  return it->get<std::string>();
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.status(), status_name(e.status()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal_error", e.what());
    }
  };
}

}  // namespace

ServiceHttp::ServiceHttp(TripletService& service, AssetStore assets,
                         std::optional<std::filesystem::path> static_dir)
    : service_(service), assets_(std::move(assets)),
      server_(std::make_unique<httplib::Server>()) {
  routes();
  if (static_dir && !server_->set_mount_point("/", static_dir->string())) {
    throw DataError("static directory " + static_dir->string() + " does not exist");
  }
}

ServiceHttp::~ServiceHttp() { stop(); }

void ServiceHttp::routes() {
  auto& s = *server_;
  s.Get("/api/tasks/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("annotator")) throw ServiceError(400, "missing query parameter 'annotator'");
    std::optional<std::string> session;
    if (req.has_param("session")) session = req.get_param_value("session");
    const auto next = service_.next_task(req.get_param_value("annotator"), session);
    json out{{"session", next.session}, {"done", !next.task.has_value()}};
    out["task"] = next.task ? task_json(*next.task) : json(nullptr);
    res.set_content(out.dump(), "application/json");
  }));

  s.Post("/api/judgments", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto session = string_field(body, "session");
    const auto id = body.find("triplet_id");
    if (id == body.end() || !id->is_number_unsigned()) {
      throw ServiceError(400, "missing non-negative integer field 'triplet_id'");
    }
    Choice choice;
    try {
      choice = parse_choice_name(string_field(body, "choice"));
    } catch (const DataError& e) {
      throw ServiceError(400, e.what());
    }
    const auto ack = service_.submit(session, id->get<std::uint64_t>(), choice);
    res.set_content(json{{"sequence", ack.sequence},
                         {"triplet_id", ack.triplet_id},
                         {"session", ack.session},
                         {"choice", std::string(to_string(ack.choice))},
                         {"created_at", format_rfc3339(ack.created_at)},
                         {"duplicate", ack.duplicate}}
                        .dump(),
                    "application/json");
  }));

  s.Post("/api/judgments/undo",
         guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto body = parse_body(req);
           const auto undone = service_.undo(string_field(body, "session"));
           res.set_content(
               json{{"undone_sequence", undone.undone_sequence}, {"task", task_json(undone.task)}}
                   .dump(),
               "application/json");
         }));

  s.Get("/api/progress", guarded([this](const httplib::Request&, httplib::Response& res) {
    const auto p = service_.progress();
    json annotators = json::object();
    for (const auto& [name, a] : p.annotators) {
      annotators[name] = {{"judged", a.judged}, {"skipped", a.skipped}, {"remaining", a.remaining}};
    }
    res.set_content(json{{"total", p.total},
                         {"active_judgments", p.active_judgments},
                         {"active_leases", p.active_leases},
                         {"annotators", annotators}}
                        .dump(),
                    "application/json");
  }));

  s.Get("/api/export", guarded([this](const httplib::Request&, httplib::Response& res) {
    res.set_content(service_.export_jsonl(), "application/x-ndjson");
  }));

  s.Get(R"(/assets/([^/]+))", guarded([this](const httplib::Request& req,
                                             httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto file = assets_.find(id);
    if (!file) throw ServiceError(404, "no asset for item '" + id + "'");
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read asset " + file->string());
    std::ostringstream buf;
    buf << in.rdbuf();
    res.set_content(buf.str(), content_type_for(*file));
  }));

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) {
      send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
    }
  });
}

int ServiceHttp::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void ServiceHttp::listen() { server_->listen_after_bind(); }

void ServiceHttp::start() {
  thread_ = std::make_unique<std::thread>([this] { listen(); });
  server_->wait_until_ready();
}

void ServiceHttp::stop() {
  if (server_) server_->stop();
  if (thread_ && thread_->joinable()) thread_->join();
  thread_.reset();
}

}  // namespace trisim

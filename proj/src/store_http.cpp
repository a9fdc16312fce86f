#include "parex/store_http.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "parex/filestore.hpp"
#include "parex/json_codec.hpp"

namespace parex {

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::not_found:
    case Errc::unknown_trial:
    case Errc::unknown_study:
      return 404;
    case Errc::study_config_mismatch:
    case Errc::illegal_transition:
      return 409;
    default:
      return 400;
  }
}

void reply_error(httplib::Response& res, const Error& e) {
  res.status = status_for(e.code());
  res.set_content(
      ojson{{"error", {{"code", errc_name(e.code())}, {"message", e.what()}}}}.dump(),
      "application/json");
}

void reply_json(httplib::Response& res, const ojson& body) {
  res.status = 200;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void handle(httplib::Response& res, Fn&& fn) {
  try {
    reply_json(res, fn());
  } catch (const Error& e) {
    reply_error(res, e);
  } catch (const std::exception& e) {
    reply_error(res, Error(Errc::store_io, e.what()));
  }
}

}  // namespace

struct StoreServer::Impl {
  StoreBackend& backend;
  httplib::Server server;
  std::thread thread;

  explicit Impl(StoreBackend& b) : backend(b) { register_routes(); }

  void register_routes() {
    server.Post("/v1/studies", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, [&]() {
        const ojson body = ojson::parse(req.body);
        const Study study = backend.create_or_open_study(
            body.at("study").get<std::string>(), space_from_json(body.at("space")),
            directions_from_json(body.at("directions")),
            body.at("metrics").get<std::vector<std::string>>(),
            body.at("samplers").get<std::vector<std::string>>());
        return study_to_json(study);
      });
    });

    server.Get("/v1/studies", [this](const httplib::Request&, httplib::Response& res) {
      handle(res, [&]() { return ojson{{"studies", backend.list_studies()}}; });
    });

    server.Get(R"(/v1/studies/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 handle(res, [&]() { return study_to_json(backend.get_study(req.matches[1])); });
               });

    server.Post(R"(/v1/studies/([^/]+)/trials)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle(res, [&]() {
                    const ojson body = ojson::parse(req.body);
                    const Trial t =
                        backend.begin_trial(req.matches[1], body.at("agent").get<int>(),
                                            params_from_json(body.at("params")));
                    return trial_to_json(t);
                  });
                });

    server.Get(R"(/v1/studies/([^/]+)/trials)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 handle(res, [&]() {
                   ojson trials = ojson::array();
                   for (const auto& t : backend.list_trials(req.matches[1]))
                     trials.push_back(trial_to_json(t));
                   return ojson{{"trials", std::move(trials)}};
                 });
               });

    server.Post(R"(/v1/studies/([^/]+)/trials/(\d+)/complete)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle(res, [&]() {
                    const ojson body = ojson::parse(req.body);
                    backend.complete_trial(req.matches[1], std::stoll(req.matches[2]),
                                           body.at("values").get<std::vector<double>>());
                    return ojson{{"ok", true}};
                  });
                });

    server.Post(R"(/v1/studies/([^/]+)/trials/(\d+)/fail)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle(res, [&]() {
                    const ojson body = ojson::parse(req.body);
                    backend.fail_trial(req.matches[1], std::stoll(req.matches[2]),
                                       body.at("reason").get<std::string>());
                    return ojson{{"ok", true}};
                  });
                });

    server.Post(R"(/v1/studies/([^/]+)/trials/(\d+)/attrs)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle(res, [&]() {
                    const ojson body = ojson::parse(req.body);
                    backend.set_trial_attr(req.matches[1], std::stoll(req.matches[2]),
                                           body.at("key").get<std::string>(),
                                           body.at("value").get<std::string>());
                    return ojson{{"ok", true}};
                  });
                });

    server.Post(R"(/v1/studies/([^/]+)/snapshots)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle(res, [&]() {
                    const ojson body = ojson::parse(req.body);
                    std::vector<ImportanceReport> reports;
                    for (const auto& r : body.at("reports"))
                      reports.push_back(report_from_json(r));
                    const bool appended = backend.append_snapshot(
                        req.matches[1], body.at("count").get<std::int64_t>(), reports);
                    return ojson{{"appended", appended}};
                  });
                });

    server.Get(R"(/v1/studies/([^/]+)/snapshots)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 handle(res, [&]() {
                   ojson snaps = ojson::array();
                   for (const auto& s : backend.list_snapshots(req.matches[1]))
                     snaps.push_back(snapshot_to_json(s));
                   return ojson{{"snapshots", std::move(snaps)}};
                 });
               });

    server.Post(R"(/v1/studies/([^/]+)/abandon)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle(res, [&]() {
                    return ojson{{"abandoned", backend.abandon_running(req.matches[1])}};
                  });
                });
  }
};

StoreServer::StoreServer(StoreBackend& backend) : impl_(std::make_unique<Impl>(backend)) {}

StoreServer::~StoreServer() { stop(); }

int StoreServer::start_async(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0)
      throw Error(Errc::store_unavailable, "cannot bind store server on " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw Error(Errc::store_unavailable,
                  "cannot bind store server on " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this]() { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void StoreServer::serve(const std::string& host, int port) {
  start_async(host, port);
  if (impl_->thread.joinable()) impl_->thread.join();
}

void StoreServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

struct RemoteStore::Impl {
  std::string base_url;
  int max_retries;

  explicit Impl(std::string url, int retries)
      : base_url(std::move(url)), max_retries(retries) {}

  ojson request(const std::string& method, const std::string& path, const ojson* body) {
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(25 * attempt));
      httplib::Client client(base_url);
      client.set_connection_timeout(5, 0);
      client.set_read_timeout(30, 0);
      httplib::Result res = method == "GET"
                                ? client.Get(path)
                                : client.Post(path, body ? body->dump() : "{}",
                                              "application/json");
      if (!res) {
        last_error = "transport failure (" + httplib::to_string(res.error()) + ")";
        continue;  // retry; ids are server-side so retries cannot fork state
      }
      ojson doc = ojson::parse(res->body, nullptr, false);
      if (doc.is_discarded())
        throw Error(Errc::malformed_response, "store server returned invalid JSON");
      if (res->status != 200) {
        const auto& err = doc.at("error");
        throw Error(errc_from_name(err.at("code").get<std::string>()),
                    err.at("message").get<std::string>());
      }
      return doc;
    }
    throw Error(Errc::store_unavailable,
                "store at " + base_url + " unreachable: " + last_error);
  }
};

RemoteStore::RemoteStore(const std::string& base_url, int max_retries)
    : impl_(std::make_unique<Impl>(base_url, max_retries)) {}

RemoteStore::~RemoteStore() = default;

Study RemoteStore::create_or_open_study(const std::string& name, const SearchSpace& space,
                                        const std::vector<Direction>& directions,
                                        const std::vector<std::string>& metric_names,
                                        const std::vector<std::string>& sampler_assignments) {
  const ojson body{{"study", name},
                   {"space", space_to_json(space)},
                   {"directions", directions_to_json(directions)},
                   {"metrics", metric_names},
                   {"samplers", sampler_assignments}};
  return study_from_json(impl_->request("POST", "/v1/studies", &body));
}

Study RemoteStore::get_study(const std::string& name) {
  return study_from_json(impl_->request("GET", "/v1/studies/" + name, nullptr));
}

std::vector<std::string> RemoteStore::list_studies() {
  return impl_->request("GET", "/v1/studies", nullptr)
      .at("studies")
      .get<std::vector<std::string>>();
}

Trial RemoteStore::begin_trial(const std::string& study, int agent_id,
                               const ParamMap& params) {
  const ojson body{{"agent", agent_id}, {"params", params_to_json(params)}};
  return trial_from_json(impl_->request("POST", "/v1/studies/" + study + "/trials", &body));
}

void RemoteStore::complete_trial(const std::string& study, std::int64_t id,
                                 const std::vector<double>& values) {
  const ojson body{{"values", values}};
  try {
    impl_->request("POST", "/v1/studies/" + study + "/trials/" + std::to_string(id) + "/complete",
                   &body);
  } catch (const Error& e) {
    // A lost response followed by a retry lands here: accept the transition
    // if the server already recorded it.
    if (e.code() != Errc::illegal_transition) throw;
    for (const auto& t : list_trials(study)) {
      if (t.id == id && t.state == TrialState::Complete && t.values == values) return;
    }
    throw;
  }
}

void RemoteStore::fail_trial(const std::string& study, std::int64_t id,
                             const std::string& reason) {
  const ojson body{{"reason", reason}};
  try {
    impl_->request("POST", "/v1/studies/" + study + "/trials/" + std::to_string(id) + "/fail",
                   &body);
  } catch (const Error& e) {
    if (e.code() != Errc::illegal_transition) throw;
    for (const auto& t : list_trials(study)) {
      if (t.id == id && t.state == TrialState::Failed) return;
    }
    throw;
  }
}

void RemoteStore::set_trial_attr(const std::string& study, std::int64_t id,
                                 const std::string& key, const std::string& value) {
  const ojson body{{"key", key}, {"value", value}};
  impl_->request("POST", "/v1/studies/" + study + "/trials/" + std::to_string(id) + "/attrs",
                 &body);
}

std::vector<Trial> RemoteStore::list_trials(const std::string& study) {
  std::vector<Trial> out;
  for (const auto& t :
       impl_->request("GET", "/v1/studies/" + study + "/trials", nullptr).at("trials"))
    out.push_back(trial_from_json(t));
  return out;
}

bool RemoteStore::append_snapshot(const std::string& study, std::int64_t trial_count,
                                  const std::vector<ImportanceReport>& reports) {
  ojson jreports = ojson::array();
  for (const auto& r : reports) jreports.push_back(report_to_json(r));
  const ojson body{{"count", trial_count}, {"reports", std::move(jreports)}};
  return impl_->request("POST", "/v1/studies/" + study + "/snapshots", &body)
      .at("appended")
      .get<bool>();
}

std::vector<ImportanceSnapshot> RemoteStore::list_snapshots(const std::string& study) {
  std::vector<ImportanceSnapshot> out;
  for (const auto& s :
       impl_->request("GET", "/v1/studies/" + study + "/snapshots", nullptr).at("snapshots"))
    out.push_back(snapshot_from_json(s));
  return out;
}

std::int64_t RemoteStore::abandon_running(const std::string& study) {
  return impl_->request("POST", "/v1/studies/" + study + "/abandon", nullptr)
      .at("abandoned")
      .get<std::int64_t>();
}

bool is_store_url(const std::string& locator) {
  return locator.rfind("http://", 0) == 0 || locator.rfind("https://", 0) == 0;
}

std::unique_ptr<StoreBackend> open_store(const std::string& locator) {
  if (is_store_url(locator)) return std::make_unique<RemoteStore>(locator);
  return std::make_unique<FileStore>(locator);
}

}  // namespace parex

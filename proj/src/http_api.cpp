#include "clausekit/http_api.hpp"

#include <httplib.h>

#include <cstdlib>

namespace clausekit {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, http_status(e.code()), error_body(e)); }

json request_json(const httplib::Request& req) {
    if (text::is_blank(req.body)) return json::object();
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "request", "body must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, "request", std::string("malformed JSON body: ") + e.what());
    }
}

template <class T>
T field(const json& j, const char* key, const char* stage) {
    if (!j.contains(key)) throw Error(ErrorCode::invalid_argument, stage, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::invalid_argument, stage, std::string("field '") + key + "' has the wrong type");
    }
}

std::optional<std::size_t> optional_size(const json& j, const char* key, const char* stage) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_number_integer() || j[key].get<long long>() < 1)
        throw Error(ErrorCode::invalid_argument, stage, std::string("'") + key + "' must be a positive integer");
    return j[key].get<std::size_t>();
}

}  // namespace

std::optional<std::string> api_token(const config::EngineConfig& config) {
    if (config.api_token_env.empty()) return std::nullopt;
    const char* v = std::getenv(config.api_token_env.c_str());
    if (v == nullptr || *v == '\0')
        throw Error(ErrorCode::config, "config", "environment variable " + config.api_token_env + " is not set");
    return std::string(v);
}

struct ApiServer::Impl {
    Engine& engine;
    std::optional<std::string> token;
    httplib::Server server;

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    Handler guarded(Handler h, bool needs_auth = true) {
        return [this, h = std::move(h), needs_auth](const httplib::Request& req, httplib::Response& res) {
            try {
                if (needs_auth && token && req.get_header_value("Authorization") != "Bearer " + *token)
                    throw Error(ErrorCode::auth, "api", "missing or invalid API token");
                h(req, res);
            } catch (const Error& e) {
                send_error(res, e);
            } catch (const json::exception& e) {
                send_error(res, Error(ErrorCode::invalid_argument, "request", e.what()));
            } catch (const std::exception& e) {
                send_error(res, Error(ErrorCode::io, "api", e.what()));
            }
        };
    }

    Impl(Engine& e, std::optional<std::string> t) : engine(e), token(std::move(t)) {
        server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
                       send_json(res, 200, {{"status", "ok"}});
                   },
                   false));

        server.Post("/documents", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        std::string body;
                        std::string filename = req.get_param_value("filename");
                        if (req.get_header_value("Content-Type").starts_with("application/json")) {
                            const auto j = request_json(req);
                            body = field<std::string>(j, "text", "ingest");
                            if (j.contains("filename")) filename = field<std::string>(j, "filename", "ingest");
                        } else {
                            body = req.body;
                        }
                        send_json(res, 201, engine.ingest(body, filename));
                    }));
        server.Get(R"(/documents/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, engine.document(req.matches[1]));
                   }));
        server.Get(R"(/documents/([^/]+)/chunks)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       res.status = 200;
                       res.set_content(engine.chunks_jsonl(req.matches[1]), "application/x-ndjson");
                   }));

        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto j = request_json(req);
                        send_json(res, 201, engine.create_session(field<std::string>(j, "document_id", "sessions")));
                    }));
        server.Post(R"(/sessions/([^/]+)/messages)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto j = request_json(req);
                        const bool finalize = j.contains("finalize") && field<bool>(j, "finalize", "archivist");
                        const std::string msg = j.contains("text") ? field<std::string>(j, "text", "archivist") : "";
                        send_json(res, 200, engine.post_message(req.matches[1], msg, finalize));
                    }));
        server.Post(R"(/sessions/([^/]+)/interrogate)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto j = request_json(req);
                        send_json(res, 202,
                                  engine.start_interrogation(req.matches[1], optional_size(j, "d_max", "interrogator")));
                    }));
        server.Get(R"(/sessions/([^/]+)/progress)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, engine.progress(req.matches[1]));
                   }));
        server.Get(R"(/sessions/([^/]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send_json(res, 200, engine.report(req.matches[1]));
                   }));

        server.Post("/eval", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        const auto j = request_json(req);
                        const auto dir = field<std::string>(j, "corpus_dir", "eval");
                        std::vector<std::size_t> grid;
                        if (j.contains("k")) {
                            if (j["k"].is_string()) grid = eval::parse_k_grid(j["k"].get<std::string>());
                            else grid = eval::parse_k_grid([&] {
                                std::string s;
                                for (const auto& v : field<std::vector<std::size_t>>(j, "k", "eval"))
                                    s += (s.empty() ? "" : ",") + std::to_string(v);
                                return s;
                            }());
                        }
                        std::optional<std::filesystem::path> out;
                        if (j.contains("out_dir")) out = field<std::string>(j, "out_dir", "eval");
                        send_json(res, 200, engine.evaluate(dir, grid, out));
                    }));
    }
};

ApiServer::ApiServer(Engine& engine, std::optional<std::string> token)
    : impl_(std::make_unique<Impl>(engine, std::move(token))) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) bound = impl_->server.bind_to_any_port(host);
    else if (!impl_->server.bind_to_port(host, port)) bound = -1;
    if (bound <= 0)
        throw Error(ErrorCode::bind, "serve", "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void ApiServer::run() { impl_->server.listen_after_bind(); }

void ApiServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace clausekit

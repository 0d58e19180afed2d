// clausekit command-line front end. Every subcommand goes through the same
// Engine methods as the HTTP API, so their JSON output matches.

#include "clausekit/engine.hpp"
#include "clausekit/http_api.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

using namespace clausekit;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitUpstream = 4;

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::config:
        case ErrorCode::bind: return kExitConfig;
        case ErrorCode::upstream:
        case ErrorCode::timeout:
        case ErrorCode::auth: return kExitUpstream;
        default: return 1;
    }
}

std::string read_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::not_found, "ingest", "cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int serve(Engine& engine, const std::string& host, int port) {
    // Block the shutdown signals here so that every thread inherits the mask,
    // then wait for them on a dedicated thread.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    ApiServer server(engine, api_token(engine.config()));
    const int bound = server.bind(host, port);
    std::cerr << "listening on http://" << host << ":" << bound << std::endl;
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        std::cerr << "shutting down" << std::endl;
        server.stop();
    });
    server.run();
    if (waiter.joinable()) {
        // run() can also end without a signal; wake the waiter.
        pthread_kill(waiter.native_handle(), SIGTERM);
        waiter.join();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contract analysis engine: ingest contracts, ask questions, evaluate retrieval."};
    app.require_subcommand(1);

    std::string config_file;
    std::string storage;
    app.add_option("-c,--config", config_file, "key = value configuration file");
    app.add_option("--storage", storage, "storage root (overrides config)");

    auto* ingest = app.add_subcommand("ingest", "parse, chunk and index a contract; prints its document id");
    std::string ingest_path;
    std::string ingest_name;
    ingest->add_option("file", ingest_path, "plain-text or markdown contract")->required();
    ingest->add_option("--name", ingest_name, "filename recorded for citations (default: the file's name)");

    auto* ask = app.add_subcommand("ask", "run a full interrogation and print the report");
    std::string ask_doc;
    std::string ask_question;
    std::size_t d_max = 0;
    bool ask_json = false;
    ask->add_option("doc_id", ask_doc, "document id from ingest")->required();
    ask->add_option("question", ask_question, "legal question")->required();
    ask->add_option("--d-max", d_max, "maximum interrogation turns")->check(CLI::PositiveNumber);
    ask->add_flag("--json", ask_json, "print the report JSON instead of markdown");

    auto* ev = app.add_subcommand("eval", "retrieval benchmark over a corpus directory");
    std::string corpus;
    std::string k_spec = "1,2,4,8,16,32,64";
    std::string out_dir = ".";
    bool eval_json = false;
    ev->add_option("corpus_dir", corpus, "directory with cases.jsonl and documents")->required();
    ev->add_option("--k", k_spec, "comma-separated k grid");
    ev->add_option("--out", out_dir, "where metrics.csv and metrics.json are written");
    ev->add_flag("--json", eval_json, "print metrics JSON instead of CSV");

    auto* srv = app.add_subcommand("serve", "run the HTTP API");
    std::string host;
    int port = -1;
    srv->add_option("--host", host, "bind address (overrides config)");
    srv->add_option("--port", port, "port, 0 for any free port (overrides config)");

    auto* chunks = app.add_subcommand("chunks", "dump a document's chunks as JSONL");
    std::string chunks_doc;
    chunks->add_option("doc_id", chunks_doc, "document id")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        auto cfg = config::load(config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_file));
        if (!storage.empty()) cfg.storage_root = storage;
        if (!host.empty()) cfg.host = host;
        if (port >= 0) cfg.port = port;
        Engine engine(cfg);

        if (*ingest) {
            const std::string name =
                ingest_name.empty() ? std::filesystem::path(ingest_path).filename().string() : ingest_name;
            std::cout << engine.ingest(read_input(ingest_path), name).dump(2) << "\n";
        } else if (*ask) {
            const auto r = engine.ask(ask_doc, ask_question, d_max ? std::optional<std::size_t>(d_max) : std::nullopt);
            if (ask_json) std::cout << r.dump(2) << "\n";
            else std::cout << r.at("markdown").get<std::string>();
        } else if (*ev) {
            const auto grid = eval::parse_k_grid(k_spec);
            const auto metrics = engine.evaluate(corpus, grid, out_dir);
            if (eval_json) {
                std::cout << metrics.dump(2) << "\n";
            } else {
                std::ifstream csv(std::filesystem::path(out_dir) / "metrics.csv");
                std::cout << csv.rdbuf();
            }
            const auto& failures = metrics.at("failures");
            if (!failures.empty()) std::cerr << failures.size() << " case(s) failed; see metrics.json\n";
        } else if (*srv) {
            return serve(engine, cfg.host, cfg.port);
        } else if (*chunks) {
            std::cout << engine.chunks_jsonl(chunks_doc);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "] " << e.stage() << ": " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

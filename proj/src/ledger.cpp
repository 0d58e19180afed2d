#include "clausekit/llm.hpp"

#include <algorithm>

namespace clausekit::llm {

void CostLedger::append(CallRecord record) {
    std::lock_guard lock(mu_);
    records_.push_back(std::move(record));
}

std::vector<CallRecord> CostLedger::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::size_t CostLedger::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

std::size_t CostLedger::count(CallRole role) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [&](const CallRecord& r) { return r.role == role; }));
}

double CostLedger::total_wall_time_s() const {
    std::lock_guard lock(mu_);
    double t = 0;
    for (const auto& r : records_) t += r.wall_time_s;
    return t;
}

std::size_t expected_call_count(std::size_t n_turns, std::size_t d_int, bool llm_parsing, bool nl_response) {
    const std::size_t archivist = (n_turns + 1) + (llm_parsing ? 1 : 0);
    const std::size_t researcher = 1 + (nl_response ? 1 : 0);
    const std::size_t interrogator = d_int * (1 + researcher + 1);
    return archivist + interrogator;
}

std::string AccountedChat::ask(CallRole role, std::vector<Message> messages) {
    ChatRequest req;
    req.role = role;
    req.messages = std::move(messages);
    req.temperature = temperature_;
    const auto t0 = std::chrono::steady_clock::now();
    ChatResponse resp = client_->complete(req);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    ledger_->append({role, dt.count(), resp.prompt_tokens, resp.completion_tokens, client_->model_id()});
    return std::move(resp.text);
}

std::string AccountedChat::ask(CallRole role, std::string system, std::string user) {
    return ask(role, {{"system", std::move(system)}, {"user", std::move(user)}});
}

}  // namespace clausekit::llm

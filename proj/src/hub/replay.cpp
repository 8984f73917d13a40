#include "chairmon/hub/replay.hpp"

#include <set>

namespace chairmon::hub {

std::string replay_payload(const store::SampleRecord& rec) {
    return nlohmann::json{{"chairId", rec.chair_id}, {"data", rec.data}}.dump();
}

std::vector<AppDataMsg> replay_samples(const std::vector<store::SampleRecord>& samples, const HubConfig& cfg) {
    HubConfig c = cfg;
    std::set<ChairId> chairs(c.chairs.begin(), c.chairs.end());
    for (const auto& s : samples) chairs.insert(s.chair_id);
    c.chairs.assign(chairs.begin(), chairs.end());
    // Expiry already happened (or not) in the original run.
    c.session_timeout_secs = std::numeric_limits<double>::infinity();

    double now = 0.0;
    transport::MemoryBus bus([&] { return now; }, "replay");
    Hub hub(c, bus, nullptr, [&] { return now; });

    std::map<ChairId, Timestamp> open;
    std::vector<AppDataMsg> out;
    for (const auto& rec : samples) {
        if (!rec.session) continue;
        auto it = open.find(rec.chair_id);
        if (it == open.end() || it->second != *rec.session) {
            if (it != open.end()) {
                now = rec.ts;
                hub.handle_app_login({rec.chair_id, LoginQuery::Logout, "replay"});
            }
            now = *rec.session;
            hub.handle_app_login({rec.chair_id, LoginQuery::Login, "replay"});
            open[rec.chair_id] = *rec.session;
        }
        now = rec.ts;
        if (auto msg = hub.handle_pressure_payload(replay_payload(rec))) out.push_back(std::move(*msg));
    }
    return out;
}

}  // namespace chairmon::hub

#include "chairmon/scenario/scenario.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "chairmon/core/errors.hpp"
#include "chairmon/sim/sim_chair.hpp"

namespace chairmon::scenario {

namespace {

constexpr double kEps = 1e-9;

ActionKind parse_kind(const std::string& s) {
    if (s == "login") return ActionKind::Login;
    if (s == "logout") return ActionKind::Logout;
    if (s == "set_posture") return ActionKind::SetPosture;
    if (s == "drop_frames") return ActionKind::DropFrames;
    if (s == "expect_state") return ActionKind::ExpectState;
    if (s == "expect_command") return ActionKind::ExpectCommand;
    throw ConfigError("unknown action '" + s + "'");
}

sim::PostureProfile profile_for(const nlohmann::json& p, std::uint64_t seed) {
    if (p.is_number_integer()) return sim::default_profile(p.get<int>(), seed);
    if (p.is_object()) return sim::profile_from_json(p, seed);
    throw ConfigError("posture must be a number 1-9 or a profile object");
}

std::uint64_t chair_seed(std::uint64_t seed, ChairId chair) {
    // splitmix64 step so neighbouring chairs get unrelated streams
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (chair + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string fmt_t(double t) { return fmt::format("{:8.2f}", t); }

}  // namespace

std::string_view to_string(ActionKind k) noexcept {
    switch (k) {
        case ActionKind::Login: return "login";
        case ActionKind::Logout: return "logout";
        case ActionKind::SetPosture: return "set_posture";
        case ActionKind::DropFrames: return "drop_frames";
        case ActionKind::ExpectState: return "expect_state";
        case ActionKind::ExpectCommand: return "expect_command";
    }
    return "";
}

Scenario parse_scenario(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    Scenario sc;
    try {
        sc.name = j.value("name", "");
        if (auto c = j.find("chairs"); c != j.end()) sc.chairs = c->get<std::vector<ChairId>>();
        sc.seed = j.value("seed", sc.seed);
        sc.epoch = j.value("epoch", sc.epoch);
        sc.duration = j.value("duration", 0.0);
        if (auto h = j.find("hub"); h != j.end()) sc.hub = *h;

        const std::set<ChairId> chairs(sc.chairs.begin(), sc.chairs.end());
        std::set<ChairId> logged_in;
        double last = 0.0;
        const auto& script = j.at("script");
        if (!script.is_array()) throw ConfigError("script must be an array");
        for (std::size_t i = 0; i < script.size(); ++i) {
            const auto& e = script[i];
            const auto where = "script[" + std::to_string(i) + "]";
            Action a;
            a.at = e.at("at").get<double>();
            if (!(a.at >= 0.0)) throw ConfigError(where + ": 'at' must be >= 0");
            if (a.at < last) throw ConfigError(where + ": times must be non-decreasing");
            last = a.at;
            a.kind = parse_kind(e.at("action").get<std::string>());
            a.chair = e.value("chair", 1u);
            a.client = e.value("client", "client");
            switch (a.kind) {
                case ActionKind::Login:
                case ActionKind::Logout:
                    if (e.contains("expect_success")) a.expect_success = e.at("expect_success").get<bool>();
                    if (a.kind == ActionKind::Login) logged_in.insert(a.chair);
                    break;
                case ActionKind::SetPosture:
                    a.posture = e.at("posture");
                    if (!chairs.count(a.chair)) throw ConfigError(where + ": chair not simulated");
                    profile_for(a.posture, 0);
                    break;
                case ActionKind::DropFrames:
                    a.duration = e.at("duration").get<double>();
                    if (!(a.duration >= 0.0)) throw ConfigError(where + ": duration must be >= 0");
                    if (!chairs.count(a.chair)) throw ConfigError(where + ": chair not simulated");
                    break;
                case ActionKind::ExpectState: {
                    const auto s = parse_sitting_state(e.at("state").get<std::string>());
                    if (!s) throw ConfigError(where + ": unknown state");
                    a.state = *s;
                    a.within = e.value("within", 0.0);
                    if (!logged_in.count(a.chair)) throw ConfigError(where + ": expect_state before any login on the chair");
                    break;
                }
                case ActionKind::ExpectCommand: {
                    const auto c = e.at("command").get<std::string>();
                    if (c != "start" && c != "stop") throw ConfigError(where + ": command must be start or stop");
                    a.command = c == "start" ? CommandKind::Start : CommandKind::Stop;
                    a.within = e.value("within", 1.0);
                    break;
                }
            }
            if (a.within < 0.0) throw ConfigError(where + ": within must be >= 0");
            sc.timeline.push_back(std::move(a));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    if (sc.chairs.empty()) throw ConfigError("scenario simulates no chairs");
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError(path.string() + ": malformed JSON");
    return parse_scenario(j);
}

namespace {

struct Pending {
    std::size_t index;
    const Action* action;
    bool done = false;
};

struct Observed {
    double t;
    SittingState state;
};

class Runner {
public:
    Runner(const Scenario& sc, const RunOptions& opts) : sc_(sc), opts_(opts) {}

    ScenarioResult run() {
        const std::uint64_t seed = opts_.seed.value_or(sc_.seed);

        nlohmann::json hub_json = sc_.hub.is_object() ? sc_.hub : nlohmann::json::object();
        hub_json["chairs"] = sc_.chairs;
        const auto cfg = hub::parse_hub_config(hub_json);

        auto clock = [this] { return sc_.epoch + t_; };
        transport::MemoryBus bus(clock, "scenario");
        std::unique_ptr<store::NdjsonStore> st;
        if (opts_.store_dir) st = std::make_unique<store::NdjsonStore>(*opts_.store_dir);
        hub::Hub hub(cfg, bus, st.get(), clock);
        hub.start();

        const std::string p(kTopicPrefix);
        auto app_data = bus.subscribe(p + "+/appData", 1 << 20);
        auto status = bus.subscribe(p + "+/appStatus", 1 << 16);
        auto commands = bus.subscribe(p + "+/sendingEnabled", 1 << 16);

        std::map<ChairId, std::unique_ptr<sim::SimChair>> sims;
        for (ChairId c : sc_.chairs) {
            sims[c] = std::make_unique<sim::SimChair>(c, bus, sim::default_profile(1, chair_seed(seed, c)),
                                                      chair_seed(seed ^ 0x5eed, c));
        }

        double end = sc_.duration;
        for (const auto& a : sc_.timeline) end = std::max(end, a.at + a.within + opts_.tick);

        const auto wall_start = std::chrono::steady_clock::now();
        std::size_t next = 0;
        for (std::int64_t step = 0;; ++step) {
            t_ = static_cast<double>(step) * opts_.tick;
            if (t_ > end + kEps) break;

            while (next < sc_.timeline.size() && sc_.timeline[next].at <= t_ + kEps) {
                apply(next, bus, sims, seed);
                ++next;
            }
            hub.pump();
            for (auto& [c, s] : sims) s->step(sc_.epoch + t_);
            hub.pump();

            observe_status(*status);
            observe_commands(*commands);
            observe_app_data(*app_data);
            evaluate(false);

            if (opts_.speed > 0.0) {
                std::this_thread::sleep_until(wall_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                               std::chrono::duration<double>(t_ / opts_.speed)));
            }
        }
        evaluate(true);
        hub.stop();

        result_.hub_stats = hub.stats();
        result_.virtual_seconds = t_;
        std::sort(result_.expectations.begin(), result_.expectations.end(),
                  [](const auto& a, const auto& b) { return a.index < b.index; });
        for (const auto& e : result_.expectations) result_.passed = result_.passed && e.passed;
        return std::move(result_);
    }

private:
    void log(const std::string& line) { result_.log.push_back(fmt_t(t_) + "  " + line); }

    void apply(std::size_t idx, transport::Bus& bus, std::map<ChairId, std::unique_ptr<sim::SimChair>>& sims,
               std::uint64_t seed) {
        const Action& a = sc_.timeline[idx];
        switch (a.kind) {
            case ActionKind::Login:
            case ActionKind::Logout: {
                const LoginRequest req{a.chair, a.kind == ActionKind::Login ? LoginQuery::Login : LoginQuery::Logout,
                                       a.client};
                log(fmt::format("{} ch{} by {}", to_string(a.kind), a.chair, a.client));
                bus.publish(topic_for(a.chair, Channel::AppLogin), encode_login(req));
                if (a.expect_success) replies_.push_back({idx, &a});
                break;
            }
            case ActionKind::SetPosture: {
                auto& s = sims.at(a.chair);
                s->set_posture(profile_for(a.posture, chair_seed(seed, a.chair)));
                log(fmt::format("posture ch{} -> {} (back contact {})", a.chair, s->posture().posture_id,
                                s->posture().back_contact ? "yes" : "no"));
                break;
            }
            case ActionKind::DropFrames:
                sims.at(a.chair)->drop_frames_until(sc_.epoch + a.at + a.duration);
                log(fmt::format("dropping frames of ch{} for {:.2f} s", a.chair, a.duration));
                break;
            case ActionKind::ExpectState:
                states_.push_back({idx, &a});
                break;
            case ActionKind::ExpectCommand:
                commands_.push_back({idx, &a});
                break;
        }
    }

    void observe_status(transport::Subscription& sub) {
        for (const auto& m : sub.drain()) {
            AppStatusMsg st;
            try {
                st = parse_app_status(m.payload);
            } catch (const ValidationError&) {
                continue;
            }
            log(fmt::format("appStatus ch{} {} {} -> {}{}", st.chair_id, st.query, st.client_id,
                            st.success ? "ok" : "refused", st.reason.empty() ? "" : " (" + st.reason + ")"));
            for (auto& p : replies_) {
                if (p.done || p.action->chair != st.chair_id || p.action->client != st.client_id) continue;
                if (st.query != to_string(p.action->kind)) continue;
                p.done = true;
                const bool want = *p.action->expect_success;
                finish(p, st.success == want,
                       fmt::format("expected success:{} observed success:{}{}", want, st.success,
                                   st.reason.empty() ? "" : " (" + st.reason + ")"));
                break;
            }
        }
        // Replies are synchronous with the hub pump; a missing one is a failure.
        for (auto& p : replies_) {
            if (!p.done) {
                p.done = true;
                finish(p, false, "no appStatus reply");
            }
        }
    }

    void observe_commands(transport::Subscription& sub) {
        for (const auto& m : sub.drain()) {
            const auto parsed = parse_topic(m.topic);
            const auto cmd = parse_command(m.payload);
            if (!parsed || !parsed->chair_id || !cmd) continue;
            log(fmt::format("sendingEnabled ch{} {}", *parsed->chair_id, to_string(*cmd)));
            for (auto& p : commands_) {
                if (p.done || p.action->chair != *parsed->chair_id || p.action->command != *cmd) continue;
                p.done = true;
                finish(p, true, "");
            }
        }
    }

    void observe_app_data(transport::Subscription& sub) {
        for (auto& m : sub.drain()) {
            const auto msg = parse_app_data(m.payload);
            result_.app_data.push_back(std::move(m.payload));
            const ChairId c = msg.chair_id;
            const auto s = msg.chdata.actual_sitting_state;
            auto& hist = observed_[c];
            if (hist.empty() || hist.back().state != s) {
                log(fmt::format("state ch{} {}", c, to_string(s)));
            }
            hist.push_back({t_, s});
            const int seated = msg.chdata.actual_sitting_status;
            if (auto it = seated_.find(c); it == seated_.end() || it->second != seated) {
                if (it != seated_.end() || seated) log(fmt::format("ch{} {}", c, seated ? "seated" : "vacant"));
                seated_[c] = seated;
            }
            if (msg.chdata.long_sitting && !long_[c]) log(fmt::format("ch{} long sitting", c));
            long_[c] = msg.chdata.long_sitting != 0;
        }
    }

    std::string timeline_for(ChairId c, double from, double to) const {
        std::string out;
        auto it = observed_.find(c);
        if (it == observed_.end()) return "no appData observed";
        std::optional<SittingState> prev;
        for (const auto& o : it->second) {
            if (o.t < from - kEps) {
                prev = o.state;
                continue;
            }
            if (o.t > to + kEps) break;
            if (out.empty() || *prev != o.state) out += fmt::format("{}t={:.2f} {}", out.empty() ? "" : ", ", o.t, to_string(o.state));
            prev = o.state;
        }
        return out.empty() ? "no appData in window" : out;
    }

    void evaluate(bool final) {
        for (auto& p : states_) {
            if (p.done) continue;
            const Action& a = *p.action;
            const auto it = observed_.find(a.chair);
            bool hit = false;
            if (a.within <= 0.0) {
                // Latest state at the expectation time.
                if (it != observed_.end() && !it->second.empty()) hit = it->second.back().state == a.state;
                p.done = true;
                finish(p, hit,
                       fmt::format("expected {} at t={:.2f}; observed {}", to_string(a.state), a.at,
                                   it != observed_.end() && !it->second.empty()
                                       ? std::string(to_string(it->second.back().state))
                                       : std::string("nothing")));
                continue;
            }
            if (it != observed_.end()) {
                for (auto o = it->second.rbegin(); o != it->second.rend() && o->t >= a.at - kEps; ++o) {
                    if (o->t <= a.at + a.within + kEps && o->state == a.state) hit = true;
                }
            }
            if (hit) {
                p.done = true;
                finish(p, true, "");
            } else if (final || t_ > a.at + a.within + kEps) {
                p.done = true;
                finish(p, false,
                       fmt::format("expected {} within {:.2f} s of t={:.2f}; observed {}", to_string(a.state), a.within,
                                   a.at, timeline_for(a.chair, a.at, a.at + a.within)));
            }
        }
        for (auto& p : commands_) {
            if (p.done) continue;
            if (final || t_ > p.action->at + p.action->within + kEps) {
                p.done = true;
                finish(p, false,
                       fmt::format("expected {} on ch{} within {:.2f} s; none seen", to_string(p.action->command),
                                   p.action->chair, p.action->within));
            }
        }
    }

    void finish(const Pending& p, bool ok, const std::string& detail) {
        const Action& a = *p.action;
        std::string desc = fmt::format("t={:.2f} {} ch{}", a.at, to_string(a.kind), a.chair);
        switch (a.kind) {
            case ActionKind::ExpectState:
                desc += fmt::format(" {}", to_string(a.state));
                if (a.within > 0) desc += fmt::format(" within {:.2f} s", a.within);
                break;
            case ActionKind::ExpectCommand: desc += fmt::format(" {}", to_string(a.command)); break;
            case ActionKind::Login:
            case ActionKind::Logout:
                desc += fmt::format(" by {} expecting success:{}", a.client, *a.expect_success);
                break;
            default: break;
        }
        log(fmt::format("{} {}", ok ? "PASS" : "FAIL", desc));
        result_.expectations.push_back({p.index, desc, ok, ok ? "" : detail});
    }

    const Scenario& sc_;
    const RunOptions& opts_;
    double t_ = 0.0;
    ScenarioResult result_;
    std::vector<Pending> replies_;
    std::vector<Pending> states_;
    std::vector<Pending> commands_;
    std::map<ChairId, std::vector<Observed>> observed_;
    std::map<ChairId, int> seated_;
    std::map<ChairId, bool> long_;
};

}  // namespace

ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& opts) {
    if (!(opts.tick > 0.0)) throw ConfigError("tick must be positive");
    if (opts.speed < 0.0) throw ConfigError("speed must be >= 0");
    return Runner(scenario, opts).run();
}

}  // namespace chairmon::scenario

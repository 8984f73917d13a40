#include "chairmon/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <memory>
#include <ostream>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "chairmon/core/errors.hpp"
#include "chairmon/hub/hub.hpp"
#include "chairmon/hub/replay.hpp"
#include "chairmon/scenario/scenario.hpp"
#include "chairmon/sim/sim_chair.hpp"
#include "chairmon/store/store.hpp"
#include "chairmon/web/live_server.hpp"

namespace chairmon::cli {

namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailed;
    }
}

// Wall time scaled by `speed` from the moment of construction.
transport::Clock scaled_clock(double speed) {
    const auto wall0 = std::chrono::steady_clock::now();
    const Timestamp epoch = transport::wall_clock();
    return [=] {
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - wall0;
        return epoch + speed * dt.count();
    };
}

std::uint64_t sim_seed(std::uint64_t seed, ChairId chair) { return seed * 0x9e3779b97f4a7c15ULL + chair; }

std::unique_ptr<store::NdjsonStore> open_existing(const fs::path& dir, bool read_only) {
    if (!fs::is_directory(dir)) throw ConfigError("no store at " + dir.string());
    store::NdjsonOptions o;
    o.read_only = read_only;
    return std::make_unique<store::NdjsonStore>(dir, o);
}

void check_speed(double speed) {
    if (!(speed > 0.0)) throw ConfigError("--speed must be positive");
}

}  // namespace

int run_hub(const HubOptions& opts, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop) {
    return guarded(err, [&] {
        check_speed(opts.speed);
        hub::HubConfig cfg;
        if (opts.config) cfg = hub::load_hub_config(*opts.config);
        else cfg.chairs = opts.sim_chairs.empty() ? std::vector<ChairId>{1} : opts.sim_chairs;
        for (ChairId c : opts.sim_chairs) {
            if (std::find(cfg.chairs.begin(), cfg.chairs.end(), c) == cfg.chairs.end()) {
                throw ConfigError("simulated chair " + std::to_string(c) + " is not configured");
            }
        }

        const auto clock = scaled_clock(opts.speed);
        const Timestamp t0 = clock();
        transport::MqttConfig mqtt;
        mqtt.client_id = "chairmon-hub";
        auto bus = transport::make_bus(opts.bus, mqtt, clock);

        std::unique_ptr<store::NdjsonStore> st;
        if (opts.store_dir) st = std::make_unique<store::NdjsonStore>(*opts.store_dir);

        hub::Hub hub(cfg, *bus, st.get(), clock);
        hub.start();

        std::unique_ptr<web::LiveServer> server;
        if (opts.ws_port >= 0) {
            web::ServerOptions so;
            so.address = opts.ws_address;
            so.port = static_cast<std::uint16_t>(opts.ws_port);
            server = std::make_unique<web::LiveServer>(hub, so);
            server->start();
            out << "web: http://" << so.address << ":" << server->port() << "\n" << std::flush;
        }

        std::vector<std::unique_ptr<sim::SimChair>> sims;
        for (ChairId c : opts.sim_chairs) {
            sims.push_back(std::make_unique<sim::SimChair>(c, *bus, sim::default_profile(opts.sim_posture, sim_seed(opts.seed, c)),
                                                           sim_seed(opts.seed ^ 0x5eed, c)));
        }

        // Four loop turns per virtual second, capped at 100 Hz of wall time.
        const auto wait = std::chrono::duration_cast<std::chrono::microseconds>(
            std::chrono::duration<double>(std::min(0.01, 0.25 / opts.speed)));
        spdlog::info("hub: chairs {}, bus {}, speed {}x", cfg.chairs.size(), opts.bus, opts.speed);
        while (!stop.load()) {
            hub.pump_for(std::chrono::duration_cast<std::chrono::milliseconds>(wait));
            if (wait < 1ms) hub.pump();
            for (auto& s : sims) s->step(clock());
            if (opts.duration > 0.0 && clock() - t0 >= opts.duration) break;
        }

        if (server) server->stop();
        hub.stop();
        sims.clear();
        bus->shutdown();
        const auto s = hub.stats();
        out << "frames " << s.frames << ", appData " << s.app_data << ", malformed " << s.malformed << ", expired "
            << s.expired << "\n";
        return kOk;
    });
}

int run_sim(const SimOptions& opts, std::ostream& out, std::ostream& err, const std::atomic<bool>& stop) {
    return guarded(err, [&] {
        if (!(opts.rate > 0.0)) throw ConfigError("--rate must be positive");
        if (opts.chairs.empty()) throw ConfigError("no chairs to simulate");
        transport::MqttConfig mqtt;
        mqtt.client_id = "chairmon-sim";
        auto bus = transport::make_bus(opts.bus, mqtt);

        std::vector<std::unique_ptr<sim::SimChair>> sims;
        for (ChairId c : opts.chairs) {
            auto s = std::make_unique<sim::SimChair>(c, *bus, sim::default_profile(opts.posture, sim_seed(opts.seed, c)),
                                                     sim_seed(opts.seed ^ 0x5eed, c));
            s->firmware().publish_interval = 1.0 / opts.rate;
            sims.push_back(std::move(s));
        }
        const Timestamp t0 = transport::wall_clock();
        while (!stop.load()) {
            const Timestamp now = transport::wall_clock();
            for (auto& s : sims) s->step(now);
            if (opts.duration > 0.0 && now - t0 >= opts.duration) break;
            std::this_thread::sleep_for(10ms);
        }
        for (const auto& s : sims) {
            out << "ch" << s->firmware().chair_id << ": published " << s->published() << "\n";
        }
        sims.clear();
        bus->shutdown();
        return kOk;
    });
}

int run_scenario_file(const ScenarioOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opts.bus != "memory") throw ConfigError("scenarios run on the memory bus only");
        if (opts.speed < 0.0) throw ConfigError("--speed must be >= 0");
        const auto sc = scenario::load_scenario(opts.file);
        scenario::RunOptions ro;
        ro.seed = opts.seed;
        ro.speed = opts.speed;
        ro.store_dir = opts.store_dir;
        const auto res = scenario::run_scenario(sc, ro);
        if (opts.verbose) {
            for (const auto& line : res.log) out << line << "\n";
        }
        std::size_t passed = 0;
        for (const auto& e : res.expectations) {
            out << (e.passed ? "PASS " : "FAIL ") << e.description;
            if (!e.passed && !e.detail.empty()) out << "\n     " << e.detail;
            out << "\n";
            passed += e.passed;
        }
        out << (sc.name.empty() ? opts.file.filename().string() : sc.name) << ": " << passed << "/"
            << res.expectations.size() << " expectations passed over " << res.virtual_seconds << " virtual s\n";
        return res.exit_code();
    });
}

int run_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto [d0, d1] = store::day_bounds(opts.day);
        auto st = open_existing(opts.store_dir, true);
        hub::HubConfig cfg;
        if (opts.config) cfg = hub::load_hub_config(*opts.config);
        const auto chairs = opts.chair ? std::vector<ChairId>{opts.chair} : st->chairs();
        std::set<ChairId> all(cfg.chairs.begin(), cfg.chairs.end());
        all.insert(chairs.begin(), chairs.end());
        cfg.chairs.assign(all.begin(), all.end());

        std::size_t total = 0;
        for (ChairId c : chairs) {
            for (const auto& msg : hub::replay_samples(st->query(c, d0, d1), cfg)) {
                out << encode(msg) << "\n";
                ++total;
            }
        }
        err << "replayed " << total << " appData messages for " << chairs.size() << " chair(s)\n";
        return kOk;
    });
}

int run_report(const ReportOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const std::string day = opts.day.empty() ? store::utc_day(transport::wall_clock()) : opts.day;
        store::day_bounds(day);
        auto st = open_existing(opts.store_dir, true);
        auto j = to_json(st->report(opts.chair, day));
        j["chair"] = opts.chair;
        j["day"] = day;
        out << j.dump(2) << "\n";
        return kOk;
    });
}

int run_compact(const CompactOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opts.keep_days < 0) throw ConfigError("--days must be >= 0");
        auto st = open_existing(opts.store_dir, false);
        const auto removed = st->compact(opts.keep_days, transport::wall_clock());
        out << "removed " << removed << " sample segment(s)\n";
        return kOk;
    });
}

}  // namespace chairmon::cli

#include "chairmon/store/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>

#include "chairmon/core/errors.hpp"

namespace chairmon::store {

namespace fs = std::filesystem;

nlohmann::json to_json(const SampleRecord& r) {
    nlohmann::json j{{"chairId", r.chair_id}, {"data", r.data}, {"sum", r.sum}, {"ts", r.ts}};
    if (r.session) j["session"] = *r.session;
    return j;
}

SampleRecord sample_record_from_json(const nlohmann::json& j) {
    SampleRecord r;
    r.chair_id = j.at("chairId").get<ChairId>();
    const auto& d = j.at("data");
    if (!d.is_array() || d.size() != kSensors) throw ValidationError("data", "expected 6 readings");
    for (std::size_t i = 0; i < kSensors; ++i) r.data[i] = d[i].get<double>();
    r.sum = j.at("sum").get<double>();
    r.ts = j.at("ts").get<double>();
    if (auto it = j.find("session"); it != j.end() && !it->is_null()) r.session = it->get<double>();
    return r;
}

std::string utc_day(Timestamp ts) {
    const auto secs = static_cast<std::time_t>(std::floor(ts));
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
}

std::pair<Timestamp, Timestamp> day_bounds(std::string_view day) {
    std::tm tm{};
    const std::string s(day);
    const char* end = s.size() == 10 ? strptime(s.c_str(), "%Y-%m-%d", &tm) : nullptr;
    if (!end || *end != '\0') throw ValidationError("day", "expected YYYY-MM-DD, got '" + s + "'");
    const auto start = static_cast<Timestamp>(timegm(&tm));
    if (utc_day(start) != s) throw ValidationError("day", "no such date '" + s + "'");
    return {start, start + 86400.0};
}

Report Store::report(ChairId chair, std::string_view day) const {
    const auto recs = sessions(chair, day);
    return daily_report(recs);
}

NdjsonStore::NdjsonStore(fs::path root, NdjsonOptions opts) : root_(std::move(root)), opts_(opts) {
    if (opts_.read_only) {
        if (!fs::is_directory(root_ / "samples")) throw StorageError("no store at " + root_.string());
    } else {
        std::error_code ec;
        fs::create_directories(root_ / "samples", ec);
        if (!ec) fs::create_directories(root_ / "sessions", ec);
        if (ec) throw StorageError("cannot create store at " + root_.string() + ": " + ec.message());
    }
    load_index();
}

NdjsonStore::~NdjsonStore() {
    std::lock_guard lock(mu_);
    for (auto& [p, fd] : fds_) ::close(fd);
    if (index_dirty_ && !opts_.read_only) {
        try {
            save_index();
        } catch (const StorageError&) {
        }
    }
}

fs::path NdjsonStore::sample_path(ChairId chair, const std::string& day) const {
    return root_ / "samples" / ("ch" + std::to_string(chair)) / (day + ".ndjson");
}

fs::path NdjsonStore::session_path(const std::string& day) const { return root_ / "sessions" / (day + ".ndjson"); }

void NdjsonStore::append_line(const fs::path& path, const std::string& line) {
    auto it = fds_.find(path);
    if (it == fds_.end()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (fd < 0) throw StorageError("open " + path.string() + ": " + std::strerror(errno));
        // A crash can leave a torn last line; start ours on a fresh one.
        if (const auto size = ::lseek(fd, 0, SEEK_END); size > 0) {
            char last = '\n';
            const int rfd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
            if (rfd >= 0) {
                if (::pread(rfd, &last, 1, size - 1) != 1) last = '\n';
                ::close(rfd);
            }
            if (last != '\n' && ::write(fd, "\n", 1) != 1) {
                ::close(fd);
                throw StorageError("write " + path.string() + ": " + std::strerror(errno));
            }
        }
        it = fds_.emplace(path, fd).first;
    }
    const std::string buf = line + "\n";
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
        const auto n = ::write(it->second, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw StorageError("write " + path.string() + ": " + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (opts_.sync && ::fdatasync(it->second) != 0) {
        throw StorageError("fdatasync " + path.string() + ": " + std::strerror(errno));
    }
}

void NdjsonStore::append_sample(const SampleRecord& rec) {
    if (opts_.read_only) throw StorageError("store opened read-only");
    const std::string day = utc_day(rec.ts);
    const std::string line = to_json(rec).dump();
    std::lock_guard lock(mu_);
    append_line(sample_path(rec.chair_id, day), line);
    auto [it, fresh] = samples_[rec.chair_id].try_emplace(day);
    Segment& seg = it->second;
    if (seg.lines == 0) {
        seg.min_ts = seg.max_ts = rec.ts;
    } else {
        seg.min_ts = std::min(seg.min_ts, rec.ts);
        seg.max_ts = std::max(seg.max_ts, rec.ts);
    }
    ++seg.lines;
    seg.bytes = fs::file_size(sample_path(rec.chair_id, day));
    index_dirty_ = true;
    if (fresh) save_index();
}

void NdjsonStore::close_session(const SessionRecord& rec) {
    if (opts_.read_only) throw StorageError("store opened read-only");
    if (rec.end_time < rec.start_time) throw ValidationError("end_time", "before start_time");
    const std::string line = chairmon::to_json(rec).dump();
    std::lock_guard lock(mu_);
    append_line(session_path(utc_day(rec.start_time)), line);
}

template <class F>
void NdjsonStore::read_lines(const fs::path& path, F&& on_json) const {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            on_json(nlohmann::json::parse(line));
        } catch (const std::exception&) {
            ++skipped_;
        }
    }
}

std::vector<SampleRecord> NdjsonStore::query(ChairId chair, Timestamp t0, Timestamp t1) const {
    if (t0 > t1) throw ValidationError("t0", "after t1");
    std::vector<SampleRecord> out;
    std::lock_guard lock(mu_);
    auto cit = samples_.find(chair);
    if (cit == samples_.end()) return out;
    for (const auto& [day, seg] : cit->second) {
        if (seg.lines == 0 || seg.max_ts < t0 || seg.min_ts > t1) continue;
        read_lines(sample_path(chair, day), [&](const nlohmann::json& j) {
            auto r = sample_record_from_json(j);
            if (r.ts >= t0 && r.ts <= t1) out.push_back(std::move(r));
        });
    }
    return out;
}

std::vector<SessionRecord> NdjsonStore::sessions(ChairId chair, std::string_view day) const {
    day_bounds(day);
    std::vector<SessionRecord> out;
    std::lock_guard lock(mu_);
    const auto path = session_path(std::string(day));
    if (!fs::exists(path)) return out;
    read_lines(path, [&](const nlohmann::json& j) {
        auto r = session_record_from_json(j);
        if (chair == 0 || r.chair_id == chair) out.push_back(std::move(r));
    });
    return out;
}

std::vector<ChairId> NdjsonStore::chairs() const {
    std::lock_guard lock(mu_);
    std::vector<ChairId> out;
    for (const auto& [chair, days] : samples_) {
        if (!days.empty()) out.push_back(chair);
    }
    return out;
}

std::size_t NdjsonStore::compact(int keep_days, Timestamp now) {
    if (opts_.read_only) throw StorageError("store opened read-only");
    if (keep_days < 0) throw ValidationError("days", "must be non-negative");
    const std::string cutoff = utc_day(now - 86400.0 * keep_days);
    std::size_t removed = 0;
    std::lock_guard lock(mu_);
    for (auto& [chair, days] : samples_) {
        for (auto it = days.begin(); it != days.end();) {
            // ISO dates order lexicographically.
            if (it->first >= cutoff) {
                ++it;
                continue;
            }
            const auto path = sample_path(chair, it->first);
            if (auto fit = fds_.find(path); fit != fds_.end()) {
                ::close(fit->second);
                fds_.erase(fit);
            }
            std::error_code ec;
            fs::remove(path, ec);
            if (ec) throw StorageError("remove " + path.string() + ": " + ec.message());
            it = days.erase(it);
            ++removed;
        }
    }
    save_index();
    return removed;
}

std::uint64_t NdjsonStore::skipped_lines() const {
    std::lock_guard lock(mu_);
    return skipped_;
}

NdjsonStore::Segment NdjsonStore::scan_segment(const fs::path& path) const {
    Segment seg;
    read_lines(path, [&](const nlohmann::json& j) {
        const double ts = j.at("ts").get<double>();
        if (seg.lines == 0) {
            seg.min_ts = seg.max_ts = ts;
        } else {
            seg.min_ts = std::min(seg.min_ts, ts);
            seg.max_ts = std::max(seg.max_ts, ts);
        }
        ++seg.lines;
    });
    seg.bytes = fs::file_size(path);
    return seg;
}

void NdjsonStore::load_index() {
    std::map<std::string, Segment> known;
    const auto index_path = root_ / "index.json";
    if (fs::exists(index_path)) {
        try {
            std::ifstream in(index_path);
            const auto j = nlohmann::json::parse(in);
            for (const auto& e : j.at("segments")) {
                known[e.at("file").get<std::string>()] = Segment{e.at("lines").get<std::uint64_t>(),
                                                                 e.at("bytes").get<std::uint64_t>(),
                                                                 e.at("min_ts").get<double>(),
                                                                 e.at("max_ts").get<double>()};
            }
        } catch (const std::exception&) {
            known.clear();  // rebuilt from the segments below
        }
    }

    for (const auto& dir : fs::directory_iterator(root_ / "samples")) {
        const auto name = dir.path().filename().string();
        if (!dir.is_directory() || !name.starts_with("ch")) continue;
        ChairId chair = 0;
        try {
            chair = static_cast<ChairId>(std::stoul(name.substr(2)));
        } catch (const std::exception&) {
            continue;
        }
        for (const auto& f : fs::directory_iterator(dir.path())) {
            if (f.path().extension() != ".ndjson") continue;
            const auto rel = fs::relative(f.path(), root_).string();
            auto it = known.find(rel);
            Segment seg;
            if (it != known.end() && it->second.bytes == fs::file_size(f.path())) {
                seg = it->second;
            } else {
                seg = scan_segment(f.path());
                index_dirty_ = true;
            }
            samples_[chair][f.path().stem().string()] = seg;
        }
    }
    if (index_dirty_ && !opts_.read_only) save_index();
}

void NdjsonStore::save_index() {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& [chair, days] : samples_) {
        for (const auto& [day, seg] : days) {
            segs.push_back({{"file", fs::relative(sample_path(chair, day), root_).string()},
                            {"chair", chair},
                            {"day", day},
                            {"lines", seg.lines},
                            {"bytes", seg.bytes},
                            {"min_ts", seg.min_ts},
                            {"max_ts", seg.max_ts}});
        }
    }
    const auto tmp = root_ / "index.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << nlohmann::json{{"segments", std::move(segs)}}.dump(1) << "\n";
        if (!out) throw StorageError("write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, root_ / "index.json", ec);
    if (ec) throw StorageError("rename index: " + ec.message());
    index_dirty_ = false;
}

}  // namespace chairmon::store

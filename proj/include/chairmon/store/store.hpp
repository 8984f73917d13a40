#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chairmon/core/report.hpp"

namespace chairmon::store {

/// One raw frame as received by the hub.
struct SampleRecord {
    ChairId chair_id = 0;
    std::array<double, kSensors> data{};
    double sum = 0.0;
    Timestamp ts = 0.0;
    // start_time of the session the frame was classified in; none if the chair was free.
    std::optional<Timestamp> session;

    bool operator==(const SampleRecord&) const = default;
};

nlohmann::json to_json(const SampleRecord& r);
SampleRecord sample_record_from_json(const nlohmann::json& j);

/// "YYYY-MM-DD" of a Unix timestamp, UTC.
std::string utc_day(Timestamp ts);

/// [start, end) of a UTC day. Throws ValidationError on a malformed date.
std::pair<Timestamp, Timestamp> day_bounds(std::string_view day);

/// Persistence adapter. Implementations are safe for concurrent use.
class Store {
public:
    virtual ~Store() = default;

    /// Durable on return. Throws StorageError.
    virtual void append_sample(const SampleRecord& rec) = 0;
    virtual void close_session(const SessionRecord& rec) = 0;

    /// Records with ts in [t0, t1], insertion order. Throws ValidationError if t0 > t1.
    virtual std::vector<SampleRecord> query(ChairId chair, Timestamp t0, Timestamp t1) const = 0;

    /// Sessions that started on `day`; chair 0 means every chair.
    virtual std::vector<SessionRecord> sessions(ChairId chair, std::string_view day) const = 0;

    Report report(ChairId chair, std::string_view day) const;
};

struct NdjsonOptions {
    // fdatasync after every append. Off only for throwaway stores.
    bool sync = true;
    // Never touch the directory: no index rewrite, writes throw StorageError.
    bool read_only = false;
};

/// Newline-delimited JSON segments:
///   samples/ch{ID}/{day}.ndjson, sessions/{day}.ndjson, index.json
///
/// The index records per-segment line count, byte size and ts range so queries
/// skip segments outside the range. It is rebuilt for any segment whose size on
/// disk no longer matches.
class NdjsonStore final : public Store {
public:
    explicit NdjsonStore(std::filesystem::path root, NdjsonOptions opts = {});
    ~NdjsonStore() override;

    NdjsonStore(const NdjsonStore&) = delete;
    NdjsonStore& operator=(const NdjsonStore&) = delete;

    void append_sample(const SampleRecord& rec) override;
    void close_session(const SessionRecord& rec) override;
    std::vector<SampleRecord> query(ChairId chair, Timestamp t0, Timestamp t1) const override;
    std::vector<SessionRecord> sessions(ChairId chair, std::string_view day) const override;

    /// Drop raw sample segments for days before `today - keep_days`. Sessions are kept.
    /// Returns the number of segments removed.
    std::size_t compact(int keep_days, Timestamp now);

    /// Chairs with at least one sample segment.
    std::vector<ChairId> chairs() const;

    /// Lines that failed to parse during reads (e.g. a torn tail after a crash).
    std::uint64_t skipped_lines() const;

    const std::filesystem::path& root() const { return root_; }

private:
    struct Segment {
        std::uint64_t lines = 0;
        std::uint64_t bytes = 0;
        Timestamp min_ts = 0.0;
        Timestamp max_ts = 0.0;
    };

    std::filesystem::path sample_path(ChairId chair, const std::string& day) const;
    std::filesystem::path session_path(const std::string& day) const;
    void append_line(const std::filesystem::path& path, const std::string& line);
    void load_index();
    void save_index();
    Segment scan_segment(const std::filesystem::path& path) const;
    template <class F>
    void read_lines(const std::filesystem::path& path, F&& on_json) const;

    std::filesystem::path root_;
    NdjsonOptions opts_;
    mutable std::mutex mu_;
    std::map<ChairId, std::map<std::string, Segment>> samples_;  // chair -> day -> segment
    std::map<std::filesystem::path, int> fds_;
    mutable std::uint64_t skipped_ = 0;
    bool index_dirty_ = false;
};

}  // namespace chairmon::store

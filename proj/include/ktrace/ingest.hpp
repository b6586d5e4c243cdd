#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ktrace/schema.hpp"

namespace ktrace::ingest {

// One fixed-header frame from a trace stream. Timestamps are 100 ns units
// since the stream epoch.
struct RawEvent {
    std::uint64_t timestamp = 0;
    schema::ProviderId provider;
    std::uint8_t opcode = 0;
    std::uint32_t pid = 0;
    std::uint32_t tid = 0;
    std::vector<std::uint8_t> payload;

    bool operator==(const RawEvent&) const = default;
};

class RawEventSource {
  public:
    virtual ~RawEventSource() = default;
    virtual std::optional<RawEvent> next() = 0;
};

// Replays a fixed event list; mostly a test convenience.
class VectorSource : public RawEventSource {
  public:
    explicit VectorSource(std::vector<RawEvent> events) : events_(std::move(events)) {}
    std::optional<RawEvent> next() override {
        if (index_ >= events_.size()) return std::nullopt;
        return events_[index_++];
    }

  private:
    std::vector<RawEvent> events_;
    std::size_t index_ = 0;
};

struct TraceError : std::runtime_error {
    explicit TraceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Trace container, little-endian:
//   header: magic "KTRC", version u32 (=1)
//   frame:  timestamp u64, provider 16 bytes, opcode u8, pad u8*3,
//           pid u32, tid u32, payload_len u32, payload bytes
inline constexpr char kTraceMagic[4] = {'K', 'T', 'R', 'C'};
inline constexpr std::uint32_t kTraceVersion = 1;

class TraceWriter {
  public:
    explicit TraceWriter(const std::string& path,
                         std::size_t max_frame_size = schema::kDefaultMaxFrameSize);
    ~TraceWriter();

    void write(const RawEvent& event);  // throws TraceError, keeps count on failure
    std::uint64_t close();              // flushes, returns frame count
    std::uint64_t count() const { return count_; }

  private:
    std::ofstream out_;
    std::string path_;
    std::size_t max_frame_size_;
    std::uint64_t count_ = 0;
    bool closed_ = false;
};

class TraceReader : public RawEventSource {
  public:
    explicit TraceReader(const std::string& path);

    std::optional<RawEvent> next() override;  // throws TraceError on truncation

    std::uint64_t count() const { return count_; }
    std::uint64_t out_of_order() const { return out_of_order_; }

  private:
    std::ifstream in_;
    std::string path_;
    std::uint64_t count_ = 0;
    std::uint64_t out_of_order_ = 0;
    std::uint64_t last_timestamp_ = 0;
    std::uint64_t offset_ = 0;
    bool done_ = false;
};

std::uint64_t write_trace(const std::string& path, std::span<const RawEvent> events);
std::vector<RawEvent> read_trace(const std::string& path);

struct ScriptError : std::runtime_error {
    ScriptError(int line_no, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
    int line;
};

// One scripted action; expands to exactly one RawEvent. Lines look like
//   at=120 action=file-create pid=300 fileobject=0xAB name=C:\tmp\a.txt
struct ScriptAction {
    std::uint64_t at_ms = 0;
    std::string kind;
    std::map<std::string, std::string> args;
    int line = 0;
};

struct ScenarioScript {
    std::vector<ScriptAction> actions;

    static ScenarioScript parse(std::string_view text);
    static ScenarioScript parse_file(const std::string& path);
};

// Deterministic expansion: identical script and seed give byte-identical
// events. Unknown action kinds fail before anything is emitted.
std::vector<RawEvent> expand(const ScenarioScript& script, std::uint64_t seed);

// Streams the script pattern at a fixed rate, cycling it as often as needed.
// Logical timestamps are index-spaced at the rate; with pace_to_wall_clock
// the stream also sleeps so wall delivery matches the rate.
class ScriptStream : public RawEventSource {
  public:
    struct Options {
        std::uint64_t seed = 0;
        double events_per_second = 0;  // > 0 required
        std::uint64_t max_events = 0;  // 0 = unlimited
        double duration_seconds = 0;   // 0 = unlimited (logical duration)
        bool pace_to_wall_clock = false;
    };

    ScriptStream(const ScenarioScript& script, Options options);

    std::optional<RawEvent> next() override;
    std::uint64_t produced() const { return produced_; }

  private:
    std::vector<RawEvent> pattern_;
    Options options_;
    std::uint64_t produced_ = 0;
    std::uint64_t interval_ticks_ = 0;
    std::uint64_t limit_ = 0;
    std::int64_t wall_start_ns_ = 0;
};

}  // namespace ktrace::ingest

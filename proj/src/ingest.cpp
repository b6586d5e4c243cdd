#include "ktrace/ingest.hpp"

#include <chrono>
#include <cstring>
#include <random>
#include <sstream>
#include <thread>

#include "ktrace/events_catalog.hpp"

namespace ktrace::ingest {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_utf8z(std::vector<std::uint8_t>& out, std::string_view s) {
    out.insert(out.end(), s.begin(), s.end());
    out.push_back(0);
}

// ASCII-range text is all the generator emits; each char becomes one UTF-16
// code unit.
void put_utf16z(std::vector<std::uint8_t>& out, std::string_view s) {
    for (char c : s) {
        put_u16(out, static_cast<std::uint16_t>(static_cast<unsigned char>(c)));
    }
    put_u16(out, 0);
}

void put_counted_bytes(std::vector<std::uint8_t>& out, const std::vector<std::uint8_t>& data) {
    put_u16(out, static_cast<std::uint16_t>(data.size()));
    out.insert(out.end(), data.begin(), data.end());
}

std::array<std::uint8_t, 4> u32_le(std::uint32_t v) {
    return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
            static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
}

std::array<std::uint8_t, 8> u64_le(std::uint64_t v) {
    std::array<std::uint8_t, 8> a{};
    for (int i = 0; i < 8; ++i) a[i] = static_cast<std::uint8_t>(v >> (8 * i));
    return a;
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint64_t read_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

constexpr std::size_t kFrameHeaderSize = 8 + 16 + 1 + 3 + 4 + 4 + 4;

}  // namespace

TraceWriter::TraceWriter(const std::string& path, std::size_t max_frame_size)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), max_frame_size_(max_frame_size) {
    if (!out_) throw TraceError("cannot open trace for writing: " + path);
    out_.write(kTraceMagic, 4);
    auto ver = u32_le(kTraceVersion);
    out_.write(reinterpret_cast<const char*>(ver.data()), 4);
    if (!out_) throw TraceError("failed writing trace header: " + path);
}

TraceWriter::~TraceWriter() {
    if (!closed_) {
        out_.flush();
    }
}

void TraceWriter::write(const RawEvent& event) {
    if (event.payload.size() > max_frame_size_) {
        throw TraceError("event payload of " + std::to_string(event.payload.size()) +
                         " bytes exceeds max frame size " + std::to_string(max_frame_size_) +
                         " after " + std::to_string(count_) + " frames");
    }
    std::vector<std::uint8_t> frame;
    frame.reserve(kFrameHeaderSize + event.payload.size());
    put_u64(frame, event.timestamp);
    frame.insert(frame.end(), event.provider.bytes.begin(), event.provider.bytes.end());
    frame.push_back(event.opcode);
    frame.push_back(0);
    frame.push_back(0);
    frame.push_back(0);
    put_u32(frame, event.pid);
    put_u32(frame, event.tid);
    put_u32(frame, static_cast<std::uint32_t>(event.payload.size()));
    frame.insert(frame.end(), event.payload.begin(), event.payload.end());

    out_.write(reinterpret_cast<const char*>(frame.data()),
               static_cast<std::streamsize>(frame.size()));
    if (!out_) {
        throw TraceError("write failed on " + path_ + " after " + std::to_string(count_) +
                         " frames");
    }
    ++count_;
}

std::uint64_t TraceWriter::close() {
    if (!closed_) {
        out_.flush();
        if (!out_) throw TraceError("flush failed on " + path_);
        out_.close();
        closed_ = true;
    }
    return count_;
}

TraceReader::TraceReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw TraceError("cannot open trace: " + path);
    char magic[4] = {};
    std::uint8_t ver_bytes[4] = {};
    in_.read(magic, 4);
    in_.read(reinterpret_cast<char*>(ver_bytes), 4);
    if (!in_ || std::memcmp(magic, kTraceMagic, 4) != 0) {
        throw TraceError("bad magic in " + path);
    }
    std::uint32_t version = read_u32(ver_bytes);
    if (version != kTraceVersion) {
        throw TraceError("unsupported trace version " + std::to_string(version) + " in " + path);
    }
    offset_ = 8;
}

std::optional<RawEvent> TraceReader::next() {
    if (done_) return std::nullopt;

    std::uint8_t header[kFrameHeaderSize];
    in_.read(reinterpret_cast<char*>(header), kFrameHeaderSize);
    auto got = in_.gcount();
    if (got == 0) {
        done_ = true;
        return std::nullopt;
    }
    if (got != static_cast<std::streamsize>(kFrameHeaderSize)) {
        throw TraceError("truncated frame header at byte offset " + std::to_string(offset_) +
                         " in " + path_);
    }

    RawEvent event;
    event.timestamp = read_u64(header);
    std::copy(header + 8, header + 24, event.provider.bytes.begin());
    event.opcode = header[24];
    event.pid = read_u32(header + 28);
    event.tid = read_u32(header + 32);
    std::uint32_t payload_len = read_u32(header + 36);
    if (payload_len > schema::kDefaultMaxFrameSize) {
        throw TraceError("frame at byte offset " + std::to_string(offset_) +
                         " declares oversized payload " + std::to_string(payload_len));
    }
    event.payload.resize(payload_len);
    if (payload_len > 0) {
        in_.read(reinterpret_cast<char*>(event.payload.data()), payload_len);
        if (in_.gcount() != static_cast<std::streamsize>(payload_len)) {
            throw TraceError("truncated payload at byte offset " +
                             std::to_string(offset_ + kFrameHeaderSize) + " in " + path_);
        }
    }
    offset_ += kFrameHeaderSize + payload_len;

    if (count_ > 0 && event.timestamp < last_timestamp_) {
        ++out_of_order_;  // flagged, never reordered
    }
    last_timestamp_ = event.timestamp;
    ++count_;
    return event;
}

std::uint64_t write_trace(const std::string& path, std::span<const RawEvent> events) {
    TraceWriter writer(path);
    for (const auto& e : events) writer.write(e);
    return writer.close();
}

std::vector<RawEvent> read_trace(const std::string& path) {
    TraceReader reader(path);
    std::vector<RawEvent> events;
    while (auto e = reader.next()) events.push_back(std::move(*e));
    return events;
}

namespace {

std::optional<std::uint64_t> parse_number(std::string_view text) {
    if (text.empty()) return std::nullopt;
    std::uint64_t v = 0;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        for (char c : text.substr(2)) {
            int d;
            if (c >= '0' && c <= '9') d = c - '0';
            else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
            else return std::nullopt;
            v = (v << 4) | static_cast<std::uint64_t>(d);
        }
        return v;
    }
    // Dotted quad renders into a big-endian u32.
    if (text.find('.') != std::string_view::npos) {
        std::uint32_t parts[4];
        int part = 0;
        std::uint32_t cur = 0;
        bool any = false;
        for (char c : text) {
            if (c == '.') {
                if (!any || part >= 3) return std::nullopt;
                parts[part++] = cur;
                cur = 0;
                any = false;
            } else if (c >= '0' && c <= '9') {
                cur = cur * 10 + static_cast<std::uint32_t>(c - '0');
                if (cur > 255) return std::nullopt;
                any = true;
            } else {
                return std::nullopt;
            }
        }
        if (!any || part != 3) return std::nullopt;
        parts[3] = cur;
        return (static_cast<std::uint64_t>(parts[0]) << 24) | (parts[1] << 16) | (parts[2] << 8) |
               parts[3];
    }
    for (char c : text) {
        if (c < '0' || c > '9') return std::nullopt;
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

class ActionArgs {
  public:
    ActionArgs(const ScriptAction& action) : action_(action) {}

    std::uint64_t num(const std::string& key) const {
        auto it = action_.args.find(key);
        if (it == action_.args.end()) {
            throw ScriptError(action_.line, "action '" + action_.kind + "' needs " + key + "=");
        }
        auto v = parse_number(it->second);
        if (!v) throw ScriptError(action_.line, "bad number for " + key + "=" + it->second);
        return *v;
    }

    std::uint64_t num_or(const std::string& key, std::uint64_t fallback) const {
        auto it = action_.args.find(key);
        if (it == action_.args.end()) return fallback;
        auto v = parse_number(it->second);
        if (!v) throw ScriptError(action_.line, "bad number for " + key + "=" + it->second);
        return *v;
    }

    std::string str(const std::string& key) const {
        auto it = action_.args.find(key);
        if (it == action_.args.end()) {
            throw ScriptError(action_.line, "action '" + action_.kind + "' needs " + key + "=");
        }
        return it->second;
    }

    std::string str_or(const std::string& key, std::string fallback) const {
        auto it = action_.args.find(key);
        return it == action_.args.end() ? std::move(fallback) : it->second;
    }

    bool has(const std::string& key) const { return action_.args.count(key) != 0; }

    std::vector<std::uint64_t> num_list_or(const std::string& key) const {
        std::vector<std::uint64_t> out;
        auto it = action_.args.find(key);
        if (it == action_.args.end()) return out;
        std::string_view text = it->second;
        while (!text.empty()) {
            auto sep = text.find(';');
            auto item = text.substr(0, sep);
            auto v = parse_number(item);
            if (!v) throw ScriptError(action_.line, "bad list item '" + std::string(item) + "'");
            out.push_back(*v);
            if (sep == std::string_view::npos) break;
            text.remove_prefix(sep + 1);
        }
        return out;
    }

  private:
    const ScriptAction& action_;
};

}  // namespace

ScenarioScript ScenarioScript::parse(std::string_view text) {
    ScenarioScript script;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        // strip comment and surrounding space
        if (auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) {
            line.remove_prefix(1);
        }
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
            line.remove_suffix(1);
        }
        if (line.empty()) continue;

        ScriptAction action;
        action.line = line_no;
        bool have_at = false, have_action = false;
        std::size_t p = 0;
        while (p < line.size()) {
            while (p < line.size() && std::isspace(static_cast<unsigned char>(line[p]))) ++p;
            if (p >= line.size()) break;
            auto end = p;
            while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) {
                ++end;
            }
            std::string_view token = line.substr(p, end - p);
            p = end;
            auto eq = token.find('=');
            if (eq == std::string_view::npos) {
                throw ScriptError(line_no, "expected key=value, got '" + std::string(token) + "'");
            }
            std::string key(token.substr(0, eq));
            std::string value(token.substr(eq + 1));
            if (key == "at") {
                auto v = parse_number(value);
                if (!v) throw ScriptError(line_no, "bad at=" + value);
                action.at_ms = *v;
                have_at = true;
            } else if (key == "action") {
                action.kind = value;
                have_action = true;
            } else {
                action.args[key] = value;
            }
        }
        if (!have_at || !have_action) {
            throw ScriptError(line_no, "each line needs at=<ms> and action=<kind>");
        }
        if (!script.actions.empty() && action.at_ms < script.actions.back().at_ms) {
            throw ScriptError(line_no, "at= must be non-decreasing");
        }
        script.actions.push_back(std::move(action));
    }
    return script;
}

ScenarioScript ScenarioScript::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScriptError(0, "cannot open script: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

namespace {

struct Expander {
    std::mt19937_64 rng;

    std::uint64_t ptr() { return 0xFFFF000000000000ull | (rng() & 0x0000FFFFFFFFF000ull); }

    RawEvent expand_action(const ScriptAction& action) {
        namespace ev = ktrace::events;
        ActionArgs args(action);
        RawEvent out;
        out.timestamp = action.at_ms * 10'000;  // ms to 100 ns ticks

        auto meta = [&](const char* guid, std::uint8_t opcode, std::uint32_t pid) {
            out.provider = schema::ProviderId::from_text(guid);
            out.opcode = opcode;
            out.pid = pid;
            out.tid = static_cast<std::uint32_t>(args.num_or("tid", pid * 10 + 1));
        };

        const std::string& kind = action.kind;
        if (kind == "process-start") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            auto ppid = static_cast<std::uint32_t>(args.num("ppid"));
            auto name = args.str("name");
            meta(ev::kProcessGuid, ev::opcode::kProcessStart, ppid);
            put_u64(out.payload, ptr());  // UniqueProcessKey
            put_u32(out.payload, pid);
            put_u32(out.payload, ppid);
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("session", 0)));
            put_utf8z(out.payload, name);
            put_utf16z(out.payload, args.str_or("cmd", name));
        } else if (kind == "process-stop") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kProcessGuid, ev::opcode::kProcessStop, pid);
            put_u64(out.payload, ptr());
            put_u32(out.payload, pid);
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("ppid", 0)));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("status", 0)));
            put_utf8z(out.payload, args.str_or("name", ""));
        } else if (kind == "thread-start") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kThreadGuid, ev::opcode::kThreadStart, pid);
            put_u32(out.payload, pid);
            put_u32(out.payload, static_cast<std::uint32_t>(args.num("tid")));
            put_u64(out.payload, ptr());  // Win32StartAddr
        } else if (kind == "thread-stop") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kThreadGuid, ev::opcode::kThreadStop, pid);
            put_u32(out.payload, pid);
            put_u32(out.payload, static_cast<std::uint32_t>(args.num("tid")));
        } else if (kind == "cswitch") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            auto tid = static_cast<std::uint32_t>(args.num("tid"));
            meta(ev::kThreadGuid, ev::opcode::kCSwitch, pid);
            out.tid = tid;
            put_u32(out.payload, tid);  // NewThreadId
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("old", 0)));
            out.payload.push_back(8);  // NewThreadPriority
            out.payload.push_back(8);  // OldThreadPriority
            out.payload.push_back(0);  // WaitReason
            out.payload.push_back(0);  // State
        } else if (kind == "file-name") {
            meta(ev::kFileIoGuid, ev::opcode::kFileIoName,
                 static_cast<std::uint32_t>(args.num_or("pid", 0)));
            put_u64(out.payload, args.num("key"));
            put_utf16z(out.payload, args.str("name"));
        } else if (kind == "file-create") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kFileIoGuid, ev::opcode::kFileIoCreate, pid);
            put_u64(out.payload, ptr());  // IrpPtr
            put_u64(out.payload, args.num("fileobject"));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("options", 0)));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("attrs", 0)));
            // Without name= the frame simply stops here; the parser reports
            // OpenPath as unresolved, which is the semantic gap the
            // enrichment stage exists for.
            if (args.has("name")) {
                put_utf16z(out.payload, args.str("name"));
            }
        } else if (kind == "file-read" || kind == "file-write") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kFileIoGuid,
                 kind == "file-read" ? ev::opcode::kFileIoRead : ev::opcode::kFileIoWrite, pid);
            put_u64(out.payload, args.num_or("offset", 0));
            put_u64(out.payload, ptr());  // IrpPtr
            put_u64(out.payload, args.num("fileobject"));
            put_u64(out.payload, args.num_or("key", 0));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("size", 4096)));
            put_u32(out.payload, 0);  // IoFlags; FileName never emitted
        } else if (kind == "disk-read") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kDiskIoGuid, ev::opcode::kDiskIoRead, pid);
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("disk", 0)));
            put_u32(out.payload, 0);
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("size", 512)));
            put_u64(out.payload, args.num_or("offset", 0));
        } else if (kind == "registry-create") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kRegistryGuid, ev::opcode::kRegistryCreate, pid);
            put_u64(out.payload, out.timestamp);  // InitialTime
            put_u16(out.payload, static_cast<std::uint16_t>(args.num_or("status", 0)));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("index", 0)));
            put_u64(out.payload, args.num("keyhandle"));
            put_u64(out.payload, args.num_or("elapsed", 0));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("flags", 0)));
        } else if (kind == "registry-read" || kind == "registry-write") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kRegistryGuid,
                 kind == "registry-read" ? ev::opcode::kRegistryRead : ev::opcode::kRegistryWrite,
                 pid);
            put_u64(out.payload, out.timestamp);
            put_u16(out.payload, static_cast<std::uint16_t>(args.num_or("status", 0)));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("index", 0)));
            put_u64(out.payload, args.num("keyhandle"));
            put_u64(out.payload, args.num_or("elapsed", 0));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("flags", 0)));
            put_utf16z(out.payload, args.str("key"));
        } else if (kind == "image-load" || kind == "image-unload") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kImageGuid,
                 kind == "image-load" ? ev::opcode::kImageLoad : ev::opcode::kImageUnload, pid);
            put_u64(out.payload, args.num("base"));
            put_u64(out.payload, args.num_or("size", 0x10000));
            put_u32(out.payload, pid);
            put_utf16z(out.payload, args.str("module"));
        } else if (kind == "tcp-connect" || kind == "tcp-send" || kind == "tcp-recv" ||
                   kind == "udp-send") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            std::uint8_t opcode = ev::opcode::kTcpIpConnect;
            const char* guid = ev::kTcpIpGuid;
            if (kind == "tcp-send") opcode = ev::opcode::kTcpIpSend;
            if (kind == "tcp-recv") opcode = ev::opcode::kTcpIpRecv;
            if (kind == "udp-send") {
                guid = ev::kUdpIpGuid;
                opcode = ev::opcode::kUdpIpSend;
            }
            meta(guid, opcode, pid);
            out.tid = ev::kMissingTid;  // the kernel never fills this in
            put_u32(out.payload, static_cast<std::uint32_t>(args.num("daddr")));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("saddr", 0x0A000002)));
            put_u16(out.payload, static_cast<std::uint16_t>(args.num("dport")));
            put_u16(out.payload, static_cast<std::uint16_t>(args.num_or("sport", 49152)));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("size", 0)));
        } else if (kind == "syscall") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kPerfInfoGuid, ev::opcode::kSysCallEnter, pid);
            put_u64(out.payload, args.num("addr"));
            std::vector<std::uint8_t> stack_bytes;
            for (auto frame : args.num_list_or("stack")) {
                put_u64(stack_bytes, frame);
            }
            put_counted_bytes(out.payload, stack_bytes);
            // SysCallName deliberately absent; map 11 supplies it.
        } else if (kind == "pagefault") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kPageFaultGuid, ev::opcode::kHardFault, pid);
            put_u64(out.payload, args.num_or("offset", 0));
            put_u64(out.payload, args.num_or("addr", 0x7FFE0000));
            put_u64(out.payload, args.num_or("fileobject", 0));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("tid", pid * 10 + 1)));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("bytes", 4096)));
        } else if (kind == "alpc-send") {
            auto pid = static_cast<std::uint32_t>(args.num("pid"));
            meta(ev::kAlpcGuid, ev::opcode::kAlpcSend, pid);
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("msgid", 1)));
        } else if (kind == "sysconfig") {
            meta(ev::kSystemConfigGuid, ev::opcode::kSystemConfigCpu,
                 static_cast<std::uint32_t>(args.num_or("pid", 0)));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("mhz", 2900)));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("cpus", 6)));
            put_u32(out.payload, static_cast<std::uint32_t>(args.num_or("mem", 32768)));
            put_utf16z(out.payload, args.str_or("name", "host"));
        } else if (kind == "volume-mount") {
            meta(ev::kDriverGuid, ev::opcode::kVolumeMount,
                 static_cast<std::uint32_t>(args.num_or("pid", 0)));
            put_utf16z(out.payload, args.str("device"));
            put_utf16z(out.payload, args.str("drive"));
        } else {
            throw ScriptError(action.line, "unknown action kind '" + kind + "'");
        }
        return out;
    }
};

}  // namespace

std::vector<RawEvent> expand(const ScenarioScript& script, std::uint64_t seed) {
    // Validate every action kind up front so nothing is emitted on error.
    Expander probe{std::mt19937_64(seed)};
    for (const auto& action : script.actions) {
        probe.expand_action(action);
    }

    Expander expander{std::mt19937_64(seed)};
    std::vector<RawEvent> events;
    events.reserve(script.actions.size());
    for (const auto& action : script.actions) {
        events.push_back(expander.expand_action(action));
    }
    return events;
}

ScriptStream::ScriptStream(const ScenarioScript& script, Options options)
    : pattern_(expand(script, options.seed)), options_(options) {
    if (options_.events_per_second <= 0) {
        throw ScriptError(0, "events_per_second must be > 0");
    }
    if (pattern_.empty()) {
        throw ScriptError(0, "script expands to no events");
    }
    interval_ticks_ = static_cast<std::uint64_t>(10'000'000.0 / options_.events_per_second);
    if (interval_ticks_ == 0) interval_ticks_ = 1;

    limit_ = options_.max_events;
    if (options_.duration_seconds > 0) {
        auto by_duration =
            static_cast<std::uint64_t>(options_.duration_seconds * options_.events_per_second);
        if (limit_ == 0 || by_duration < limit_) limit_ = by_duration;
    }
}

std::optional<RawEvent> ScriptStream::next() {
    if (limit_ != 0 && produced_ >= limit_) return std::nullopt;

    RawEvent event = pattern_[produced_ % pattern_.size()];
    event.timestamp = produced_ * interval_ticks_;

    if (options_.pace_to_wall_clock) {
        using clock = std::chrono::steady_clock;
        auto now_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                          clock::now().time_since_epoch())
                          .count();
        if (produced_ == 0) {
            wall_start_ns_ = now_ns;
        } else if ((produced_ & 0x3F) == 0) {
            std::int64_t due_ns = wall_start_ns_ + static_cast<std::int64_t>(
                                                       produced_ * interval_ticks_ * 100);
            if (now_ns < due_ns) {
                std::this_thread::sleep_for(std::chrono::nanoseconds(due_ns - now_ns));
            }
        }
    }

    ++produced_;
    return event;
}

}  // namespace ktrace::ingest

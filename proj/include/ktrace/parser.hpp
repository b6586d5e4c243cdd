#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ktrace/ingest.hpp"
#include "ktrace/schema.hpp"

namespace ktrace::parser {

struct PointerValue {
    std::uint64_t address = 0;
    auto operator<=>(const PointerValue&) const = default;
};

// Tagged value. Unresolved attributes hold the sentinel for their kind:
// zero for the numeric alternatives, empty for text and bytes.
using Value = std::variant<std::uint64_t, std::int64_t, PointerValue, std::string,
                           std::vector<std::uint8_t>>;

struct AttributeValue {
    std::string name;
    Value value;
    bool resolved = false;

    bool operator==(const AttributeValue&) const = default;
};

struct EventMeta {
    std::uint64_t timestamp = 0;
    schema::ProviderId provider;
    std::string provider_text;
    std::uint8_t opcode = 0;
    std::string event_name;
    std::uint32_t pid = 0;
    std::uint32_t tid = 0;

    bool operator==(const EventMeta&) const = default;
};

struct ParsedEvent {
    EventMeta meta;
    std::vector<AttributeValue> attrs;       // schema declaration order
    std::set<std::string> unresolved;        // names of attrs with resolved=false

    const AttributeValue* find_attr(std::string_view name) const;
    AttributeValue* find_attr(std::string_view name);

    // Convenience accessors; nullopt when absent or unresolved.
    std::optional<std::uint64_t> attr_u64(std::string_view name) const;
    std::optional<std::string> attr_text(std::string_view name) const;

    bool operator==(const ParsedEvent&) const = default;
};

struct ParseCounters {
    std::uint64_t unknown_events = 0;
    std::uint64_t short_payloads = 0;
    std::uint64_t trailing_bytes = 0;  // events with undeclared bytes past the last attribute
};

// Schema dispatch; nullptr is the skip marker and bumps the unknown counter.
const schema::EventSchema* distribute(const ingest::RawEvent& event,
                                      const schema::SchemaTable& table,
                                      ParseCounters& counters);

// Cursor decode across the payload: each attribute either pins the cursor to
// its declared offset or continues where the previous one stopped. A decode
// that would run past the payload end marks that attribute and every later
// one unresolved; the partial event is still produced.
ParsedEvent offset_parse(std::span<const std::uint8_t> payload,
                         const schema::EventSchema& schema, ParseCounters& counters);

std::optional<ParsedEvent> parse(const ingest::RawEvent& event, const schema::SchemaTable& table,
                                 ParseCounters& counters);

// Permissive UTF-16LE to UTF-8; unpaired surrogates become U+FFFD.
std::string utf16le_to_utf8(std::span<const std::uint8_t> bytes);

}  // namespace ktrace::parser

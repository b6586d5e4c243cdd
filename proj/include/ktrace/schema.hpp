#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ktrace::schema {

// 128-bit provider identifier. Config files may spell it either as an
// unsigned decimal ("2429279289") or as GUID text
// ("3d6fa8d0-fe05-11d0-9dda-00c04fd7ba7c"); both map onto the same 16-byte
// value and compare equal when they denote the same identifier.
struct ProviderId {
    std::array<std::uint8_t, 16> bytes{};

    static ProviderId from_text(std::string_view text);  // throws std::invalid_argument
    static std::optional<ProviderId> try_from_text(std::string_view text);
    std::string to_text() const;

    auto operator<=>(const ProviderId&) const = default;
};

struct ProviderIdHash {
    std::size_t operator()(const ProviderId& id) const noexcept;
};

enum class DecodeKind {
    UnsignedInt,
    SignedInt,
    Pointer,
    Utf16StringZ,
    Utf8StringZ,
    CountedBytes,  // u16 little-endian byte-count prefix
};

inline constexpr int kVariableWidth = -1;

struct TypeCode {
    int code = 0;
    std::string name;
    int width = 0;  // bytes, kVariableWidth for string/counted kinds
    DecodeKind kind = DecodeKind::UnsignedInt;

    bool fixed() const { return width != kVariableWidth; }
    bool operator==(const TypeCode&) const = default;
};

// The full code table. Only code 13 (PULONG, 8 bytes) is pinned by the
// original event dictionary; the rest round out the kinds the payloads use.
const std::map<int, TypeCode>& type_code_table();
const TypeCode* find_type_code(int code);

struct AttributeSpec {
    std::string name;
    int type_code = 0;
    std::optional<std::uint32_t> declared_offset;  // nullopt = SEQUENTIAL

    bool operator==(const AttributeSpec&) const = default;
};

struct EventSchema {
    ProviderId provider_id;
    std::string provider_text;  // canonical rendering of provider_id
    std::uint8_t opcode = 0;
    std::string event_name;
    std::vector<AttributeSpec> attributes;

    const AttributeSpec* find_attribute(std::string_view name) const;
    bool operator==(const EventSchema&) const = default;
};

struct EventKey {
    ProviderId provider;
    std::uint8_t opcode = 0;
    bool operator==(const EventKey&) const = default;
};

struct EventKeyHash {
    std::size_t operator()(const EventKey& k) const noexcept;
};

inline constexpr std::size_t kDefaultMaxFrameSize = 64 * 1024;

class SchemaTable {
  public:
    using EntryMap = std::unordered_map<EventKey, EventSchema, EventKeyHash>;

    // Absent keys yield nullptr; absence is a counted condition upstream,
    // never an error here.
    const EventSchema* lookup(const ProviderId& provider, std::uint8_t opcode) const;

    void insert(EventSchema schema);  // throws SchemaError on duplicate key
    const EntryMap& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t provider_group_count() const;
    const std::map<int, TypeCode>& type_codes() const { return type_code_table(); }

    bool operator==(const SchemaTable& other) const { return entries_ == other.entries_; }

  private:
    EntryMap entries_;
};

struct SchemaError : std::runtime_error {
    enum class Kind { Parse, UnknownType, Conflict, Layout };

    SchemaError(Kind k, int line_no, const std::string& msg)
        : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
          kind(k),
          line(line_no) {}

    Kind kind;
    int line;
};

// Parses the Event/Attribution config grammar:
//
//   <Event guid="DECIMAL-OR-GUID" opcode="UINT8" name="IDENT">
//     <Attribution name="IDENT" type="UINT" [offset="UINT"] />
//   </Event>
//
// Whitespace-insensitive, <!-- --> comments allowed. Attributes without an
// offset are SEQUENTIAL; explicit offsets are validated against the running
// cursor wherever the cursor is statically known.
SchemaTable load_schema(std::string_view config_text,
                        std::size_t max_frame_size = kDefaultMaxFrameSize);
SchemaTable load_schema_file(const std::string& path,
                             std::size_t max_frame_size = kDefaultMaxFrameSize);

// Canonical config rendering; load_schema(to_config_text(t)) == t.
std::string to_config_text(const SchemaTable& table);

// Sum of attribute widths for all-fixed schemas, nullopt when any attribute
// is variable-width.
std::optional<std::size_t> frame_width(const EventSchema& schema);

}  // namespace ktrace::schema

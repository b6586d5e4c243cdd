#include "ktrace/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace ktrace::schema {

namespace {

using u128 = unsigned __int128;

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

ProviderId ProviderId::from_text(std::string_view text) {
    auto id = try_from_text(text);
    if (!id) {
        throw std::invalid_argument("bad provider id: " + std::string(text));
    }
    return *id;
}

std::optional<ProviderId> ProviderId::try_from_text(std::string_view text) {
    ProviderId id;
    if (text.empty()) return std::nullopt;

    if (text.size() == 36 && text[8] == '-' && text[13] == '-' && text[18] == '-' &&
        text[23] == '-') {
        // GUID text, stored in the usual mixed-endian memory layout:
        // data1/data2/data3 little-endian, data4 as written.
        std::uint64_t groups[5] = {};
        const std::size_t spans[5][2] = {{0, 8}, {9, 4}, {14, 4}, {19, 4}, {24, 12}};
        for (int g = 0; g < 5; ++g) {
            std::uint64_t v = 0;
            for (std::size_t i = 0; i < spans[g][1]; ++i) {
                int d = hex_digit(text[spans[g][0] + i]);
                if (d < 0) return std::nullopt;
                v = (v << 4) | static_cast<std::uint64_t>(d);
            }
            groups[g] = v;
        }
        std::uint32_t d1 = static_cast<std::uint32_t>(groups[0]);
        std::uint16_t d2 = static_cast<std::uint16_t>(groups[1]);
        std::uint16_t d3 = static_cast<std::uint16_t>(groups[2]);
        id.bytes[0] = static_cast<std::uint8_t>(d1);
        id.bytes[1] = static_cast<std::uint8_t>(d1 >> 8);
        id.bytes[2] = static_cast<std::uint8_t>(d1 >> 16);
        id.bytes[3] = static_cast<std::uint8_t>(d1 >> 24);
        id.bytes[4] = static_cast<std::uint8_t>(d2);
        id.bytes[5] = static_cast<std::uint8_t>(d2 >> 8);
        id.bytes[6] = static_cast<std::uint8_t>(d3);
        id.bytes[7] = static_cast<std::uint8_t>(d3 >> 8);
        id.bytes[8] = static_cast<std::uint8_t>(groups[3] >> 8);
        id.bytes[9] = static_cast<std::uint8_t>(groups[3]);
        for (int i = 0; i < 6; ++i) {
            id.bytes[10 + i] = static_cast<std::uint8_t>(groups[4] >> (8 * (5 - i)));
        }
        return id;
    }

    // Unsigned decimal, up to 128 bits.
    u128 value = 0;
    for (char c : text) {
        if (c < '0' || c > '9') return std::nullopt;
        u128 next = value * 10 + static_cast<unsigned>(c - '0');
        if (next < value) return std::nullopt;  // wrapped
        value = next;
    }
    for (int i = 0; i < 16; ++i) {
        id.bytes[i] = static_cast<std::uint8_t>(value >> (8 * i));
    }
    return id;
}

std::string ProviderId::to_text() const {
    bool high_zero = true;
    for (int i = 8; i < 16; ++i) {
        if (bytes[i] != 0) high_zero = false;
    }
    if (high_zero) {
        u128 value = 0;
        for (int i = 7; i >= 0; --i) {
            value = (value << 8) | bytes[i];
        }
        if (value == 0) return "0";
        std::string out;
        while (value > 0) {
            out.push_back(static_cast<char>('0' + static_cast<unsigned>(value % 10)));
            value /= 10;
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

    static const char* hexd = "0123456789abcdef";
    auto hx = [&](std::uint8_t b, std::string& s) {
        s.push_back(hexd[b >> 4]);
        s.push_back(hexd[b & 0xF]);
    };
    std::string out;
    hx(bytes[3], out);
    hx(bytes[2], out);
    hx(bytes[1], out);
    hx(bytes[0], out);
    out.push_back('-');
    hx(bytes[5], out);
    hx(bytes[4], out);
    out.push_back('-');
    hx(bytes[7], out);
    hx(bytes[6], out);
    out.push_back('-');
    hx(bytes[8], out);
    hx(bytes[9], out);
    out.push_back('-');
    for (int i = 10; i < 16; ++i) hx(bytes[i], out);
    return out;
}

std::size_t ProviderIdHash::operator()(const ProviderId& id) const noexcept {
    // FNV-1a over the 16 bytes.
    std::size_t h = 1469598103934665603ull;
    for (auto b : id.bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::size_t EventKeyHash::operator()(const EventKey& k) const noexcept {
    return ProviderIdHash{}(k.provider) * 31 + k.opcode;
}

const std::map<int, TypeCode>& type_code_table() {
    static const std::map<int, TypeCode> table = {
        {1, {1, "UINT8", 1, DecodeKind::UnsignedInt}},
        {2, {2, "UINT16", 2, DecodeKind::UnsignedInt}},
        {3, {3, "UINT32", 4, DecodeKind::UnsignedInt}},
        {4, {4, "UINT64", 8, DecodeKind::UnsignedInt}},
        {5, {5, "INT32", 4, DecodeKind::SignedInt}},
        {6, {6, "INT64", 8, DecodeKind::SignedInt}},
        {13, {13, "PULONG", 8, DecodeKind::Pointer}},
        {14, {14, "PUSHORT", 2, DecodeKind::Pointer}},
        {20, {20, "UTF16SZ", kVariableWidth, DecodeKind::Utf16StringZ}},
        {21, {21, "UTF8SZ", kVariableWidth, DecodeKind::Utf8StringZ}},
        {22, {22, "BYTES16", kVariableWidth, DecodeKind::CountedBytes}},
    };
    return table;
}

const TypeCode* find_type_code(int code) {
    const auto& table = type_code_table();
    auto it = table.find(code);
    return it == table.end() ? nullptr : &it->second;
}

const AttributeSpec* EventSchema::find_attribute(std::string_view name) const {
    for (const auto& a : attributes) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

const EventSchema* SchemaTable::lookup(const ProviderId& provider, std::uint8_t opcode) const {
    auto it = entries_.find(EventKey{provider, opcode});
    return it == entries_.end() ? nullptr : &it->second;
}

void SchemaTable::insert(EventSchema schema) {
    EventKey key{schema.provider_id, schema.opcode};
    auto [it, inserted] = entries_.emplace(key, std::move(schema));
    if (!inserted) {
        throw SchemaError(SchemaError::Kind::Conflict, 0,
                          "duplicate event key (" + it->second.provider_text + ", " +
                              std::to_string(it->second.opcode) + ")");
    }
}

std::size_t SchemaTable::provider_group_count() const {
    std::vector<ProviderId> seen;
    for (const auto& [key, schema] : entries_) {
        if (std::find(seen.begin(), seen.end(), key.provider) == seen.end()) {
            seen.push_back(key.provider);
        }
    }
    return seen.size();
}

std::optional<std::size_t> frame_width(const EventSchema& schema) {
    std::size_t total = 0;
    for (const auto& attr : schema.attributes) {
        const TypeCode* tc = find_type_code(attr.type_code);
        if (tc == nullptr || !tc->fixed()) return std::nullopt;
        total += static_cast<std::size_t>(tc->width);
    }
    return total;
}

namespace {

// Minimal scanner for the Event/Attribution grammar. Tracks the line number
// so every error can name where it came from.
class Scanner {
  public:
    explicit Scanner(std::string_view text) : text_(text) {}

    void skip_space() {
        for (;;) {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
                if (text_[pos_] == '\n') ++line_;
                ++pos_;
            }
            if (remaining().starts_with("<!--")) {
                auto end = text_.find("-->", pos_ + 4);
                if (end == std::string_view::npos) {
                    fail("unterminated comment");
                }
                for (std::size_t i = pos_; i < end; ++i) {
                    if (text_[i] == '\n') ++line_;
                }
                pos_ = end + 3;
                continue;
            }
            return;
        }
    }

    bool eof() {
        skip_space();
        return pos_ >= text_.size();
    }

    bool try_literal(std::string_view lit) {
        skip_space();
        if (remaining().starts_with(lit)) {
            pos_ += lit.size();
            return true;
        }
        return false;
    }

    void expect_literal(std::string_view lit) {
        if (!try_literal(lit)) {
            fail("expected '" + std::string(lit) + "'");
        }
    }

    // name="value"
    std::pair<std::string, std::string> key_value() {
        skip_space();
        std::string key;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            key.push_back(text_[pos_++]);
        }
        if (key.empty()) fail("expected attribute name");
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != '=') fail("expected '=' after " + key);
        ++pos_;
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != '"') fail("expected quoted value for " + key);
        ++pos_;
        std::string value;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            if (text_[pos_] == '\n') ++line_;
            value.push_back(text_[pos_++]);
        }
        if (pos_ >= text_.size()) fail("unterminated value for " + key);
        ++pos_;
        return {key, value};
    }

    bool at_attr_name() {
        skip_space();
        return pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_');
    }

    int line() const { return line_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw SchemaError(SchemaError::Kind::Parse, line_, msg);
    }

  private:
    std::string_view remaining() const { return text_.substr(pos_); }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

std::uint64_t parse_uint(Scanner& sc, const std::string& text, const std::string& what,
                         std::uint64_t max) {
    if (text.empty()) sc.fail(what + " is empty");
    std::uint64_t v = 0;
    for (char c : text) {
        if (c < '0' || c > '9') sc.fail("bad " + what + " '" + text + "'");
        std::uint64_t next = v * 10 + static_cast<std::uint64_t>(c - '0');
        if (next < v || next > max) sc.fail(what + " out of range: " + text);
        v = next;
    }
    return v;
}

void validate_layout(const EventSchema& schema, std::size_t max_frame_size, int line) {
    // Walk the layout with a cursor while it is statically known (all prior
    // widths fixed); declared offsets must match the cursor there.
    std::size_t cursor = 0;
    bool cursor_known = true;
    std::optional<std::uint32_t> prev_declared;
    std::size_t sequential_fixed = 0;
    std::uint32_t max_declared = 0;

    for (const auto& attr : schema.attributes) {
        const TypeCode* tc = find_type_code(attr.type_code);
        if (attr.declared_offset) {
            if (prev_declared && *attr.declared_offset <= *prev_declared) {
                throw SchemaError(SchemaError::Kind::Layout, line,
                                  "declared offsets not strictly increasing at attribute '" +
                                      attr.name + "'");
            }
            prev_declared = attr.declared_offset;
            max_declared = std::max(max_declared, *attr.declared_offset);
            if (cursor_known && *attr.declared_offset != cursor) {
                throw SchemaError(SchemaError::Kind::Layout, line,
                                  "attribute '" + attr.name + "' declares offset " +
                                      std::to_string(*attr.declared_offset) +
                                      " but the cumulative layout places it at " +
                                      std::to_string(cursor));
            }
            cursor = *attr.declared_offset;
            cursor_known = true;
        } else if (tc->fixed()) {
            sequential_fixed += static_cast<std::size_t>(tc->width);
        }
        if (cursor_known && tc->fixed()) {
            cursor += static_cast<std::size_t>(tc->width);
        } else {
            cursor_known = false;
        }
    }

    if (sequential_fixed + max_declared > max_frame_size) {
        throw SchemaError(SchemaError::Kind::Layout, line,
                          "event '" + schema.event_name + "' layout exceeds max frame size " +
                              std::to_string(max_frame_size));
    }
}

}  // namespace

SchemaTable load_schema(std::string_view config_text, std::size_t max_frame_size) {
    Scanner sc(config_text);
    SchemaTable table;

    while (!sc.eof()) {
        int event_line = sc.line();
        sc.expect_literal("<Event");

        EventSchema schema;
        bool have_guid = false, have_opcode = false, have_name = false;
        while (sc.at_attr_name()) {
            auto [key, value] = sc.key_value();
            if (key == "guid") {
                auto id = ProviderId::try_from_text(value);
                if (!id) sc.fail("bad guid '" + value + "'");
                schema.provider_id = *id;
                have_guid = true;
            } else if (key == "opcode") {
                schema.opcode = static_cast<std::uint8_t>(parse_uint(sc, value, "opcode", 255));
                have_opcode = true;
            } else if (key == "name") {
                schema.event_name = value;
                have_name = true;
            } else {
                sc.fail("unknown Event attribute '" + key + "'");
            }
        }
        sc.expect_literal(">");
        if (!have_guid || !have_opcode || !have_name) {
            throw SchemaError(SchemaError::Kind::Parse, event_line,
                              "Event requires guid, opcode and name");
        }
        schema.provider_text = schema.provider_id.to_text();

        while (!sc.try_literal("</Event>")) {
            int attr_line = sc.line();
            sc.expect_literal("<Attribution");
            AttributeSpec spec;
            bool have_attr_name = false, have_type = false;
            while (sc.at_attr_name()) {
                auto [key, value] = sc.key_value();
                if (key == "name") {
                    spec.name = value;
                    have_attr_name = true;
                } else if (key == "type") {
                    spec.type_code = static_cast<int>(parse_uint(sc, value, "type", 1 << 30));
                    have_type = true;
                } else if (key == "offset") {
                    spec.declared_offset =
                        static_cast<std::uint32_t>(parse_uint(sc, value, "offset", 0xFFFFFFFFull));
                } else {
                    sc.fail("unknown Attribution attribute '" + key + "'");
                }
            }
            sc.expect_literal("/>");
            if (!have_attr_name || !have_type) {
                throw SchemaError(SchemaError::Kind::Parse, attr_line,
                                  "Attribution requires name and type");
            }
            if (find_type_code(spec.type_code) == nullptr) {
                throw SchemaError(SchemaError::Kind::UnknownType, attr_line,
                                  "unknown type code " + std::to_string(spec.type_code) +
                                      " for attribute '" + spec.name + "'");
            }
            for (const auto& existing : schema.attributes) {
                if (existing.name == spec.name) {
                    throw SchemaError(SchemaError::Kind::Parse, attr_line,
                                      "duplicate attribute '" + spec.name + "' in event '" +
                                          schema.event_name + "'");
                }
            }
            schema.attributes.push_back(std::move(spec));
        }

        validate_layout(schema, max_frame_size, event_line);
        try {
            table.insert(std::move(schema));
        } catch (const SchemaError& e) {
            throw SchemaError(e.kind, event_line, e.what());
        }
    }
    return table;
}

SchemaTable load_schema_file(const std::string& path, std::size_t max_frame_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SchemaError(SchemaError::Kind::Parse, 0, "cannot open schema config: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_schema(buf.str(), max_frame_size);
}

std::string to_config_text(const SchemaTable& table) {
    std::vector<const EventSchema*> schemas;
    schemas.reserve(table.size());
    for (const auto& [key, schema] : table.entries()) {
        schemas.push_back(&schema);
    }
    std::sort(schemas.begin(), schemas.end(), [](const EventSchema* a, const EventSchema* b) {
        if (a->provider_id != b->provider_id) return a->provider_id < b->provider_id;
        return a->opcode < b->opcode;
    });

    std::ostringstream out;
    for (const EventSchema* schema : schemas) {
        out << "<Event guid=\"" << schema->provider_text << "\" opcode=\""
            << static_cast<int>(schema->opcode) << "\" name=\"" << schema->event_name << "\">\n";
        for (const auto& attr : schema->attributes) {
            out << "  <Attribution name=\"" << attr.name << "\" type=\"" << attr.type_code << "\"";
            if (attr.declared_offset) {
                out << " offset=\"" << *attr.declared_offset << "\"";
            }
            out << " />\n";
        }
        out << "</Event>\n";
    }
    return out.str();
}

}  // namespace ktrace::schema

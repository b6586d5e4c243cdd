#include "ktrace/parser.hpp"

#include <algorithm>

namespace ktrace::parser {

namespace {

Value sentinel_for(schema::DecodeKind kind) {
    switch (kind) {
        case schema::DecodeKind::UnsignedInt: return std::uint64_t{0};
        case schema::DecodeKind::SignedInt: return std::int64_t{0};
        case schema::DecodeKind::Pointer: return PointerValue{};
        case schema::DecodeKind::Utf16StringZ:
        case schema::DecodeKind::Utf8StringZ: return std::string{};
        case schema::DecodeKind::CountedBytes: return std::vector<std::uint8_t>{};
    }
    return std::uint64_t{0};
}

std::uint64_t read_le(std::span<const std::uint8_t> bytes) {
    std::uint64_t v = 0;
    for (std::size_t i = bytes.size(); i-- > 0;) {
        v = (v << 8) | bytes[i];
    }
    return v;
}

std::int64_t sign_extend(std::uint64_t v, int width) {
    if (width >= 8) return static_cast<std::int64_t>(v);
    std::uint64_t sign_bit = 1ull << (width * 8 - 1);
    if (v & sign_bit) {
        v |= ~((sign_bit << 1) - 1);
    }
    return static_cast<std::int64_t>(v);
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

}  // namespace

std::string utf16le_to_utf8(std::span<const std::uint8_t> bytes) {
    std::string out;
    std::size_t units = bytes.size() / 2;
    for (std::size_t i = 0; i < units; ++i) {
        std::uint32_t u = static_cast<std::uint32_t>(bytes[2 * i]) |
                          (static_cast<std::uint32_t>(bytes[2 * i + 1]) << 8);
        if (u >= 0xD800 && u <= 0xDBFF) {
            if (i + 1 < units) {
                std::uint32_t lo = static_cast<std::uint32_t>(bytes[2 * (i + 1)]) |
                                   (static_cast<std::uint32_t>(bytes[2 * (i + 1) + 1]) << 8);
                if (lo >= 0xDC00 && lo <= 0xDFFF) {
                    append_utf8(out, 0x10000 + ((u - 0xD800) << 10) + (lo - 0xDC00));
                    ++i;
                    continue;
                }
            }
            append_utf8(out, 0xFFFD);
        } else if (u >= 0xDC00 && u <= 0xDFFF) {
            append_utf8(out, 0xFFFD);
        } else {
            append_utf8(out, u);
        }
    }
    return out;
}

const AttributeValue* ParsedEvent::find_attr(std::string_view name) const {
    for (const auto& a : attrs) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

AttributeValue* ParsedEvent::find_attr(std::string_view name) {
    for (auto& a : attrs) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

std::optional<std::uint64_t> ParsedEvent::attr_u64(std::string_view name) const {
    const AttributeValue* a = find_attr(name);
    if (a == nullptr || !a->resolved) return std::nullopt;
    if (const auto* u = std::get_if<std::uint64_t>(&a->value)) return *u;
    if (const auto* p = std::get_if<PointerValue>(&a->value)) return p->address;
    if (const auto* s = std::get_if<std::int64_t>(&a->value)) {
        return static_cast<std::uint64_t>(*s);
    }
    return std::nullopt;
}

std::optional<std::string> ParsedEvent::attr_text(std::string_view name) const {
    const AttributeValue* a = find_attr(name);
    if (a == nullptr || !a->resolved) return std::nullopt;
    if (const auto* s = std::get_if<std::string>(&a->value)) return *s;
    return std::nullopt;
}

const schema::EventSchema* distribute(const ingest::RawEvent& event,
                                      const schema::SchemaTable& table, ParseCounters& counters) {
    const schema::EventSchema* schema = table.lookup(event.provider, event.opcode);
    if (schema == nullptr) {
        ++counters.unknown_events;
    }
    return schema;
}

ParsedEvent offset_parse(std::span<const std::uint8_t> payload,
                         const schema::EventSchema& schema, ParseCounters& counters) {
    ParsedEvent out;
    out.attrs.reserve(schema.attributes.size());

    std::size_t cursor = 0;
    bool exhausted = false;

    for (const auto& spec : schema.attributes) {
        const schema::TypeCode* tc = schema::find_type_code(spec.type_code);
        AttributeValue attr;
        attr.name = spec.name;
        attr.value = sentinel_for(tc->kind);
        attr.resolved = false;

        if (!exhausted) {
            if (spec.declared_offset) {
                cursor = *spec.declared_offset;
            }
            std::size_t avail = cursor <= payload.size() ? payload.size() - cursor : 0;

            switch (tc->kind) {
                case schema::DecodeKind::UnsignedInt:
                case schema::DecodeKind::SignedInt:
                case schema::DecodeKind::Pointer: {
                    auto width = static_cast<std::size_t>(tc->width);
                    if (avail >= width) {
                        std::uint64_t raw = read_le(payload.subspan(cursor, width));
                        if (tc->kind == schema::DecodeKind::SignedInt) {
                            attr.value = sign_extend(raw, tc->width);
                        } else if (tc->kind == schema::DecodeKind::Pointer) {
                            attr.value = PointerValue{raw};
                        } else {
                            attr.value = raw;
                        }
                        attr.resolved = true;
                        cursor += width;
                    } else {
                        exhausted = true;
                    }
                    break;
                }
                case schema::DecodeKind::Utf16StringZ: {
                    std::size_t units = 0;
                    bool terminated = false;
                    while (cursor + 2 * units + 1 < payload.size()) {
                        std::uint16_t u =
                            static_cast<std::uint16_t>(payload[cursor + 2 * units]) |
                            (static_cast<std::uint16_t>(payload[cursor + 2 * units + 1]) << 8);
                        if (u == 0) {
                            terminated = true;
                            break;
                        }
                        ++units;
                    }
                    if (terminated) {
                        attr.value = utf16le_to_utf8(payload.subspan(cursor, 2 * units));
                        attr.resolved = true;
                        cursor += 2 * (units + 1);
                    } else {
                        exhausted = true;
                    }
                    break;
                }
                case schema::DecodeKind::Utf8StringZ: {
                    std::size_t len = 0;
                    bool terminated = false;
                    while (cursor + len < payload.size()) {
                        if (payload[cursor + len] == 0) {
                            terminated = true;
                            break;
                        }
                        ++len;
                    }
                    if (terminated) {
                        attr.value = std::string(
                            reinterpret_cast<const char*>(payload.data() + cursor), len);
                        attr.resolved = true;
                        cursor += len + 1;
                    } else {
                        exhausted = true;
                    }
                    break;
                }
                case schema::DecodeKind::CountedBytes: {
                    if (avail >= 2) {
                        std::size_t len = static_cast<std::size_t>(payload[cursor]) |
                                          (static_cast<std::size_t>(payload[cursor + 1]) << 8);
                        if (avail >= 2 + len) {
                            auto body = payload.subspan(cursor + 2, len);
                            attr.value = std::vector<std::uint8_t>(body.begin(), body.end());
                            attr.resolved = true;
                            cursor += 2 + len;
                        } else {
                            exhausted = true;
                        }
                    } else {
                        exhausted = true;
                    }
                    break;
                }
            }
        }

        if (!attr.resolved) {
            out.unresolved.insert(attr.name);
        }
        out.attrs.push_back(std::move(attr));
    }

    if (exhausted) {
        ++counters.short_payloads;
    } else if (cursor < payload.size()) {
        // The schema, not the payload, defines the attribute list; extra
        // bytes are counted and ignored.
        ++counters.trailing_bytes;
    }
    return out;
}

std::optional<ParsedEvent> parse(const ingest::RawEvent& event, const schema::SchemaTable& table,
                                 ParseCounters& counters) {
    const schema::EventSchema* schema = distribute(event, table, counters);
    if (schema == nullptr) return std::nullopt;

    ParsedEvent parsed = offset_parse(event.payload, *schema, counters);
    parsed.meta.timestamp = event.timestamp;
    parsed.meta.provider = event.provider;
    parsed.meta.provider_text = schema->provider_text;
    parsed.meta.opcode = event.opcode;
    parsed.meta.event_name = schema->event_name;
    parsed.meta.pid = event.pid;
    parsed.meta.tid = event.tid;
    return parsed;
}

}  // namespace ktrace::parser

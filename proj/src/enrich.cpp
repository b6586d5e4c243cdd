#include "ktrace/enrich.hpp"

#include <algorithm>
#include <sstream>

#include "ktrace/events_catalog.hpp"

namespace ktrace::enrich {

namespace ev = ktrace::events;

namespace {

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

std::string frame_text(const std::optional<mirror::Symbol>& sym, std::uint64_t address) {
    if (!sym) return hex(address);
    if (sym->api_name.empty()) {
        return sym->module_name + "+" + hex(sym->offset);
    }
    if (sym->offset == 0) return sym->module_name + "!" + sym->api_name;
    return sym->module_name + "!" + sym->api_name + "+" + hex(sym->offset);
}

std::vector<std::uint64_t> stack_addresses(const std::vector<std::uint8_t>& bytes) {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i + 8 <= bytes.size(); i += 8) {
        std::uint64_t v = 0;
        for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[i + static_cast<std::size_t>(b)];
        out.push_back(v);
    }
    return out;
}

const schema::ProviderId& tcpip_provider() {
    static const auto id = schema::ProviderId::from_text(ev::kTcpIpGuid);
    return id;
}

const schema::ProviderId& udpip_provider() {
    static const auto id = schema::ProviderId::from_text(ev::kUdpIpGuid);
    return id;
}

}  // namespace

std::optional<std::string> rewrite_device_path(const std::map<std::string, std::string>& volumes,
                                               const std::string& path) {
    // Longest matching device prefix wins; the match must end on a path
    // boundary so HarddiskVolume1 never claims HarddiskVolume10 paths.
    const std::string* best_prefix = nullptr;
    const std::string* best_drive = nullptr;
    for (const auto& [device, drive] : volumes) {
        if (path.size() < device.size() || path.compare(0, device.size(), device) != 0) continue;
        if (path.size() > device.size() && path[device.size()] != '\\') continue;
        if (best_prefix == nullptr || device.size() > best_prefix->size()) {
            best_prefix = &device;
            best_drive = &drive;
        }
    }
    if (best_prefix == nullptr) return std::nullopt;
    return *best_drive + path.substr(best_prefix->size());
}

MappingStore::MappingStore(const schema::SchemaTable& table, const mirror::ManifestSet& manifests)
    : table_(&table), manifests_(&manifests), api_index_(&manifests) {
    // Maps 15..18 mirror the loaded event dictionary and stay frozen.
    for (const auto& [key, schema] : table.entries()) {
        std::string event_key = schema.provider_text + "/" + std::to_string(schema.opcode);
        std::vector<std::string> names;
        std::ostringstream summary;
        summary << schema.event_name << ":";
        for (std::size_t i = 0; i < schema.attributes.size(); ++i) {
            const auto& attr = schema.attributes[i];
            names.push_back(attr.name);
            property_to_index_[event_key + "." + attr.name] = i;
            properties_.insert(attr.name);
            if (i > 0) summary << ",";
            summary << attr.name << ":" << attr.type_code;
        }
        event_properties_[event_key] = std::move(names);
        event_structs_[event_key] = summary.str();
    }
}

void MappingStore::update(const parser::ParsedEvent& event) {
    const std::string& name = event.meta.event_name;

    if (name == ev::name::kCSwitch) {
        if (auto tid = event.attr_u64("NewThreadId")) {
            auto t = static_cast<std::uint32_t>(*tid);
            pid_to_tid_[event.meta.pid] = t;
            tid_to_pid_[t] = event.meta.pid;
        }
    } else if (name == ev::name::kThreadStart) {
        auto tid = event.attr_u64("TThreadId");
        auto pid = event.attr_u64("ProcessId");
        if (tid && pid) {
            tid_to_pid_[static_cast<std::uint32_t>(*tid)] = static_cast<std::uint32_t>(*pid);
        }
    } else if (name == ev::name::kThreadStop) {
        if (auto tid = event.attr_u64("TThreadId")) {
            tid_to_pid_.erase(static_cast<std::uint32_t>(*tid));
        }
    } else if (name == ev::name::kProcessStart) {
        auto pid = event.attr_u64("ProcessId");
        auto image = event.attr_text("ImageFileName");
        if (pid && image && !image->empty()) {
            auto p = static_cast<std::uint32_t>(*pid);
            pid_to_process_name_[p] = *image;
            process_name_to_pid_[*image] = p;
        }
    } else if (name == ev::name::kProcessStop) {
        if (auto pid = event.attr_u64("ProcessId")) {
            auto p = static_cast<std::uint32_t>(*pid);
            auto it = pid_to_process_name_.find(p);
            if (it != pid_to_process_name_.end()) {
                auto nit = process_name_to_pid_.find(it->second);
                if (nit != process_name_to_pid_.end() && nit->second == p) {
                    process_name_to_pid_.erase(nit);
                }
                pid_to_process_name_.erase(it);
            }
        }
    } else if (name == ev::name::kFileIoCreate) {
        auto fo = event.attr_u64("FileObject");
        auto path = event.attr_text("OpenPath");
        if (fo && path && !path->empty()) {
            file_object_to_name_[*fo] = *path;
        }
    } else if (name == ev::name::kFileIoName) {
        auto fk = event.attr_u64("FileKey");
        auto path = event.attr_text("FileName");
        if (fk && path && !path->empty()) {
            file_key_to_name_[*fk] = *path;
        }
    } else if (name == ev::name::kImageLoad) {
        update_image(event, true);
    } else if (name == ev::name::kImageUnload) {
        update_image(event, false);
    } else if (name == ev::name::kVolumeMount) {
        auto device = event.attr_text("DeviceName");
        auto drive = event.attr_text("DriveLetter");
        if (device && drive && !device->empty() && !drive->empty()) {
            volume_to_disk_[*device] = *drive;
        }
    } else if (name == ev::name::kSysCallEnter) {
        update_syscall(event);
    }
    // Unknown kinds leave the store unchanged.
}

void MappingStore::update_image(const parser::ParsedEvent& event, bool load) {
    auto base = event.attr_u64("ImageBase");
    auto size = event.attr_u64("ImageSize");
    auto path = event.attr_text("FileName");
    if (!base) return;

    if (load) {
        if (!size || !path) return;
        std::string module = mirror::module_basename(*path);
        if (!api_index_.load_image(event.meta.pid, module, *base, *size)) {
            return;
        }
        pid_to_modules_[event.meta.pid].insert(module);
        const mirror::ImageManifest* manifest = manifests_->find(module);
        if (manifest != nullptr) {
            if (module_apis_.find(module) == module_apis_.end()) {
                std::vector<std::string> apis;
                apis.reserve(manifest->exports.size());
                for (const auto& e : manifest->exports) apis.push_back(e.api_name);
                module_apis_[module] = std::move(apis);
            }
            if (manifest->syscall_module()) {
                for (const auto& e : manifest->exports) {
                    syscall_names_[*base + e.rva] = e.api_name;
                }
            }
        }
        return;
    }

    // Unload: capture the image before removal so the syscall table and the
    // per-pid module set can be cleaned up.
    const mirror::LoadedImage* image = api_index_.find_image(event.meta.pid, *base);
    if (image != nullptr && image->base == *base) {
        if (image->manifest != nullptr && image->manifest->syscall_module()) {
            for (const auto& e : image->manifest->exports) {
                syscall_names_.erase(image->base + e.rva);
            }
        }
        auto mit = pid_to_modules_.find(event.meta.pid);
        if (mit != pid_to_modules_.end()) {
            mit->second.erase(image->module_name);
            if (mit->second.empty()) pid_to_modules_.erase(mit);
        }
    }
    api_index_.unload_image(event.meta.pid, *base);
}

std::vector<std::string> MappingStore::resolve_stack(std::uint32_t pid,
                                                     const std::vector<std::uint8_t>& stack_bytes,
                                                     bool record_usage) {
    std::vector<std::string> frames;
    for (std::uint64_t address : stack_addresses(stack_bytes)) {
        auto sym = api_index_.resolve(pid, address);
        frames.push_back(frame_text(sym, address));
        if (record_usage && sym && !sym->api_name.empty()) {
            used_module_apis_[sym->module_name].insert(sym->api_name);
        }
    }
    return frames;
}

void MappingStore::update_syscall(const parser::ParsedEvent& event) {
    if (auto addr = event.attr_u64("SysCallAddress")) {
        auto it = syscall_names_.find(*addr);
        if (it != syscall_names_.end()) {
            syscalls_used_[*addr] = it->second;
        }
    }
    const parser::AttributeValue* stack = event.find_attr("Stack");
    if (stack != nullptr && stack->resolved) {
        if (const auto* bytes = std::get_if<std::vector<std::uint8_t>>(&stack->value)) {
            if (!bytes->empty()) {
                auto frames = resolve_stack(event.meta.pid, *bytes, true);
                call_stacks_[{event.meta.pid, event.meta.timestamp}] = std::move(frames);
            }
        }
    }
}

EnrichedEvent MappingStore::correct(parser::ParsedEvent event) const {
    EnrichedEvent out;

    // Network events carry the kernel's placeholder thread id; the real one
    // comes from the latest CSwitch for this pid.
    if (event.meta.tid == ev::kMissingTid &&
        (event.meta.provider == tcpip_provider() || event.meta.provider == udpip_provider())) {
        auto it = pid_to_tid_.find(event.meta.pid);
        if (it != pid_to_tid_.end()) {
            event.meta.tid = it->second;
            out.corrections.push_back({"tid", 1});
        }
    }

    // Missing file names: FileObject first, then FileKey.
    for (const char* attr_name : {"FileName", "OpenPath"}) {
        parser::AttributeValue* attr = event.find_attr(attr_name);
        if (attr == nullptr || attr->resolved) continue;
        std::optional<std::string> filled;
        int source = 0;
        if (auto fo = event.attr_u64("FileObject")) {
            auto it = file_object_to_name_.find(*fo);
            if (it != file_object_to_name_.end()) {
                filled = it->second;
                source = 3;
            }
        }
        if (!filled) {
            if (auto fk = event.attr_u64("FileKey")) {
                auto it = file_key_to_name_.find(*fk);
                if (it != file_key_to_name_.end()) {
                    filled = it->second;
                    source = 4;
                }
            }
        }
        if (filled) {
            attr->value = *filled;
            attr->resolved = true;
            out.corrections.push_back({attr_name, source});
        }
    }

    // Syscall names come from the .sys export addresses.
    if (parser::AttributeValue* attr = event.find_attr("SysCallName");
        attr != nullptr && !attr->resolved) {
        if (auto addr = event.attr_u64("SysCallAddress")) {
            auto it = syscall_names_.find(*addr);
            if (it != syscall_names_.end()) {
                attr->value = it->second;
                attr->resolved = true;
                out.corrections.push_back({"SysCallName", 11});
            }
        }
    }

    // Raw stack addresses become symbol lists.
    if (parser::AttributeValue* attr = event.find_attr("Stack"); attr != nullptr && attr->resolved) {
        if (const auto* bytes = std::get_if<std::vector<std::uint8_t>>(&attr->value);
            bytes != nullptr && !bytes->empty()) {
            auto it = call_stacks_.find({event.meta.pid, event.meta.timestamp});
            if (it != call_stacks_.end()) {
                std::string joined;
                for (std::size_t i = 0; i < it->second.size(); ++i) {
                    if (i > 0) joined += ";";
                    joined += it->second[i];
                }
                attr->value = std::move(joined);
                out.corrections.push_back({"Stack", 5});
            }
        }
    }

    // Device-form paths get their drive-letter spelling.
    if (!volume_to_disk_.empty()) {
        for (auto& attr : event.attrs) {
            if (!attr.resolved) continue;
            auto* text = std::get_if<std::string>(&attr.value);
            if (text == nullptr || text->empty()) continue;
            if (auto rewritten = rewrite_device_path(volume_to_disk_, *text)) {
                attr.value = std::move(*rewritten);
                out.corrections.push_back({attr.name, 9});
            }
        }
    }

    event.unresolved.clear();
    for (const auto& attr : event.attrs) {
        if (!attr.resolved) event.unresolved.insert(attr.name);
    }
    out.still_unresolved = event.unresolved;
    out.event = std::move(event);
    return out;
}

std::optional<std::string> MappingStore::process_name(std::uint32_t pid) const {
    auto it = pid_to_process_name_.find(pid);
    if (it == pid_to_process_name_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::uint32_t> MappingStore::thread_for(std::uint32_t pid) const {
    auto it = pid_to_tid_.find(pid);
    if (it == pid_to_tid_.end()) return std::nullopt;
    return it->second;
}

std::string MappingStore::snapshot() const {
    std::vector<std::tuple<int, std::string, std::string>> lines;

    for (const auto& [pid, tid] : pid_to_tid_) {
        lines.emplace_back(1, std::to_string(pid), std::to_string(tid));
    }
    for (const auto& [tid, pid] : tid_to_pid_) {
        lines.emplace_back(2, std::to_string(tid), std::to_string(pid));
    }
    for (const auto& [fo, name] : file_object_to_name_) {
        lines.emplace_back(3, hex(fo), name);
    }
    for (const auto& [fk, name] : file_key_to_name_) {
        lines.emplace_back(4, hex(fk), name);
    }
    for (const auto* image : api_index_.images()) {
        lines.emplace_back(5, std::to_string(image->pid) + ":" + hex(image->base),
                           image->module_name + "+" + hex(image->size));
    }
    for (const auto& [name, pid] : process_name_to_pid_) {
        lines.emplace_back(6, name, std::to_string(pid));
    }
    for (const auto& [pid, name] : pid_to_process_name_) {
        lines.emplace_back(7, std::to_string(pid), name);
    }
    for (const auto& [pid, modules] : pid_to_modules_) {
        for (const auto& module : modules) {
            lines.emplace_back(8, std::to_string(pid), module);
        }
    }
    for (const auto& [device, drive] : volume_to_disk_) {
        lines.emplace_back(9, device, drive);
    }
    for (const auto& [key, frames] : call_stacks_) {
        std::string joined;
        for (std::size_t i = 0; i < frames.size(); ++i) {
            if (i > 0) joined += ";";
            joined += frames[i];
        }
        lines.emplace_back(10, std::to_string(key.first) + "@" + std::to_string(key.second),
                           joined);
    }
    for (const auto& [addr, name] : syscall_names_) {
        lines.emplace_back(11, hex(addr), name);
    }
    for (const auto& [addr, name] : syscalls_used_) {
        lines.emplace_back(12, hex(addr), name);
    }
    for (const auto& [module, apis] : module_apis_) {
        for (const auto& api : apis) {
            lines.emplace_back(13, module, api);
        }
    }
    for (const auto& [module, apis] : used_module_apis_) {
        for (const auto& api : apis) {
            lines.emplace_back(14, module, api);
        }
    }

    std::sort(lines.begin(), lines.end());
    std::ostringstream out;
    for (const auto& [index, key, value] : lines) {
        out << "map=" << index << " key=" << key << " value=" << value << "\n";
    }
    return out.str();
}

EnrichedEvent enrich_one(MappingStore& store, parser::ParsedEvent event) {
    store.update(event);
    return store.correct(std::move(event));
}

}  // namespace ktrace::enrich

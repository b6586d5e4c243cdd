#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ktrace/parser.hpp"

namespace ktrace::mirror {

struct ManifestError : std::runtime_error {
    ManifestError(const std::string& file, int line_no, const std::string& msg)
        : std::runtime_error(file + ":" + std::to_string(line_no) + ": " + msg) {}
};

struct ExportEntry {
    std::string api_name;
    std::uint64_t rva = 0;

    bool operator==(const ExportEntry&) const = default;
};

// Pre-extracted module export listing, the stand-in for reading a PE export
// table from disk. Format:
//   module <name> size <hex>
//   export <api_name> <hex rva>
struct ImageManifest {
    std::string module_name;
    std::uint64_t size = 0;
    std::vector<ExportEntry> exports;  // sorted ascending by rva, rvas unique

    // Exports of .sys modules double as the system-call name table.
    bool syscall_module() const;
};

class ManifestSet {
  public:
    void add(ImageManifest manifest);
    const ImageManifest* find(std::string_view module_name) const;
    std::size_t size() const { return manifests_.size(); }
    const std::map<std::string, ImageManifest>& all() const { return manifests_; }

  private:
    std::map<std::string, ImageManifest> manifests_;
};

ImageManifest parse_manifest(std::string_view text, const std::string& filename);
ManifestSet load_manifests(const std::string& directory);

struct LoadedImage {
    std::uint32_t pid = 0;
    std::string module_name;
    std::uint64_t base = 0;
    std::uint64_t size = 0;
    const ImageManifest* manifest = nullptr;  // may be null for unknown modules
};

struct Symbol {
    std::string module_name;
    std::string api_name;  // empty when the address precedes every export
    std::uint64_t offset = 0;

    bool operator==(const Symbol&) const = default;
};

// Per-pid interval index over loaded images plus export lookups. Mutated only
// by the enrichment stage that owns it.
class ApiIndex {
  public:
    explicit ApiIndex(const ManifestSet* manifests) : manifests_(manifests) {}

    // Overlapping loads are rejected and counted, the index is unchanged.
    bool load_image(std::uint32_t pid, const std::string& module_name, std::uint64_t base,
                    std::uint64_t size);
    // Unknown unloads are counted and leave the index unchanged.
    bool unload_image(std::uint32_t pid, std::uint64_t base);

    // Containing image, then greatest export rva <= (address - base).
    std::optional<Symbol> resolve(std::uint32_t pid, std::uint64_t address) const;

    // Current address of an api within a loaded (pid, module), if any.
    std::optional<std::uint64_t> api_address(std::uint32_t pid, std::string_view module_name,
                                             std::string_view api_name) const;

    const LoadedImage* find_image(std::uint32_t pid, std::uint64_t address) const;
    std::vector<const LoadedImage*> images() const;  // deterministic order

    std::uint64_t conflicting_loads() const { return conflicting_loads_; }
    std::uint64_t unknown_unloads() const { return unknown_unloads_; }

    bool operator==(const ApiIndex& other) const;

  private:
    const ManifestSet* manifests_;
    std::map<std::uint32_t, std::map<std::uint64_t, LoadedImage>> by_pid_;
    std::uint64_t conflicting_loads_ = 0;
    std::uint64_t unknown_unloads_ = 0;
};

// Applies an ImageLoad/ImageUnload event (attrs ImageBase, ImageSize,
// FileName). Returns false when the event was rejected or irrelevant.
bool on_image_event(ApiIndex& index, const parser::ParsedEvent& event);

// "C:\Windows\System32\KERNEL32.DLL" -> "kernel32.dll"
std::string module_basename(std::string_view path);

}  // namespace ktrace::mirror

#include "ktrace/mirror.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ktrace/events_catalog.hpp"

namespace ktrace::mirror {

namespace {

std::optional<std::uint64_t> parse_hex(std::string_view text) {
    if (text.starts_with("0x") || text.starts_with("0X")) text.remove_prefix(2);
    if (text.empty()) return std::nullopt;
    std::uint64_t v = 0;
    for (char c : text) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else return std::nullopt;
        v = (v << 4) | static_cast<std::uint64_t>(d);
    }
    return v;
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.emplace_back(line.substr(start, i - start));
    }
    return out;
}

}  // namespace

std::string module_basename(std::string_view path) {
    auto slash = path.find_last_of("\\/");
    if (slash != std::string_view::npos) path.remove_prefix(slash + 1);
    std::string out(path);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool ImageManifest::syscall_module() const {
    return module_name.ends_with(".sys");
}

void ManifestSet::add(ImageManifest manifest) {
    manifests_[manifest.module_name] = std::move(manifest);
}

const ImageManifest* ManifestSet::find(std::string_view module_name) const {
    auto it = manifests_.find(std::string(module_name));
    return it == manifests_.end() ? nullptr : &it->second;
}

ImageManifest parse_manifest(std::string_view text, const std::string& filename) {
    ImageManifest manifest;
    bool have_header = false;
    int line_no = 0;
    std::size_t pos = 0;

    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto tokens = split_ws(line);
        if (tokens.empty()) continue;

        if (tokens[0] == "module") {
            if (have_header) throw ManifestError(filename, line_no, "duplicate module line");
            if (tokens.size() != 4 || tokens[2] != "size") {
                throw ManifestError(filename, line_no, "expected: module <name> size <hex>");
            }
            auto size = parse_hex(tokens[3]);
            if (!size) throw ManifestError(filename, line_no, "bad size '" + tokens[3] + "'");
            manifest.module_name = module_basename(tokens[1]);
            manifest.size = *size;
            have_header = true;
        } else if (tokens[0] == "export") {
            if (!have_header) throw ManifestError(filename, line_no, "export before module line");
            if (tokens.size() != 3) {
                throw ManifestError(filename, line_no, "expected: export <api_name> <hex rva>");
            }
            auto rva = parse_hex(tokens[2]);
            if (!rva) throw ManifestError(filename, line_no, "bad rva '" + tokens[2] + "'");
            manifest.exports.push_back({tokens[1], *rva});
        } else {
            throw ManifestError(filename, line_no, "unknown directive '" + tokens[0] + "'");
        }
    }

    if (!have_header) throw ManifestError(filename, 1, "missing module line");
    std::sort(manifest.exports.begin(), manifest.exports.end(),
              [](const ExportEntry& a, const ExportEntry& b) { return a.rva < b.rva; });
    for (std::size_t i = 1; i < manifest.exports.size(); ++i) {
        if (manifest.exports[i].rva == manifest.exports[i - 1].rva) {
            throw ManifestError(filename, 0,
                                "duplicate rva 0x" + [&] {
                                    std::ostringstream os;
                                    os << std::hex << manifest.exports[i].rva;
                                    return os.str();
                                }());
        }
    }
    return manifest;
}

ManifestSet load_manifests(const std::string& directory) {
    namespace fs = std::filesystem;
    ManifestSet set;
    if (!fs::exists(directory)) {
        throw ManifestError(directory, 0, "no such directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ManifestError(path.string(), 0, "cannot open");
        std::ostringstream buf;
        buf << in.rdbuf();
        set.add(parse_manifest(buf.str(), path.string()));
    }
    return set;
}

bool ApiIndex::load_image(std::uint32_t pid, const std::string& module_name, std::uint64_t base,
                          std::uint64_t size) {
    auto& images = by_pid_[pid];

    // Reject any overlap with an existing [base, base+size) interval.
    auto it = images.upper_bound(base);
    if (it != images.begin()) {
        auto prev = std::prev(it);
        if (prev->second.base + prev->second.size > base) {
            ++conflicting_loads_;
            return false;
        }
    }
    if (it != images.end() && base + size > it->second.base) {
        ++conflicting_loads_;
        return false;
    }

    LoadedImage image;
    image.pid = pid;
    image.module_name = module_name;
    image.base = base;
    image.size = size;
    image.manifest = manifests_ ? manifests_->find(module_name) : nullptr;
    images.emplace(base, std::move(image));
    return true;
}

bool ApiIndex::unload_image(std::uint32_t pid, std::uint64_t base) {
    auto pit = by_pid_.find(pid);
    if (pit == by_pid_.end() || pit->second.erase(base) == 0) {
        ++unknown_unloads_;
        return false;
    }
    if (pit->second.empty()) by_pid_.erase(pit);
    return true;
}

const LoadedImage* ApiIndex::find_image(std::uint32_t pid, std::uint64_t address) const {
    auto pit = by_pid_.find(pid);
    if (pit == by_pid_.end()) return nullptr;
    const auto& images = pit->second;
    auto it = images.upper_bound(address);
    if (it == images.begin()) return nullptr;
    const LoadedImage& image = std::prev(it)->second;
    if (address >= image.base + image.size) return nullptr;
    return &image;
}

std::optional<Symbol> ApiIndex::resolve(std::uint32_t pid, std::uint64_t address) const {
    const LoadedImage* image = find_image(pid, address);
    if (image == nullptr) return std::nullopt;

    Symbol sym;
    sym.module_name = image->module_name;
    std::uint64_t delta = address - image->base;
    sym.offset = delta;
    if (image->manifest != nullptr && !image->manifest->exports.empty()) {
        const auto& exports = image->manifest->exports;
        auto it = std::upper_bound(exports.begin(), exports.end(), delta,
                                   [](std::uint64_t v, const ExportEntry& e) { return v < e.rva; });
        if (it != exports.begin()) {
            const ExportEntry& entry = *std::prev(it);
            sym.api_name = entry.api_name;
            sym.offset = delta - entry.rva;
        }
    }
    return sym;
}

std::optional<std::uint64_t> ApiIndex::api_address(std::uint32_t pid, std::string_view module_name,
                                                   std::string_view api_name) const {
    auto pit = by_pid_.find(pid);
    if (pit == by_pid_.end()) return std::nullopt;
    for (const auto& [base, image] : pit->second) {
        if (image.module_name != module_name || image.manifest == nullptr) continue;
        for (const auto& entry : image.manifest->exports) {
            if (entry.api_name == api_name) return image.base + entry.rva;
        }
    }
    return std::nullopt;
}

std::vector<const LoadedImage*> ApiIndex::images() const {
    std::vector<const LoadedImage*> out;
    for (const auto& [pid, images] : by_pid_) {
        for (const auto& [base, image] : images) {
            out.push_back(&image);
        }
    }
    return out;
}

bool ApiIndex::operator==(const ApiIndex& other) const {
    auto flatten = [](const ApiIndex& idx) {
        std::vector<std::tuple<std::uint32_t, std::uint64_t, std::uint64_t, std::string>> out;
        for (const auto* image : idx.images()) {
            out.emplace_back(image->pid, image->base, image->size, image->module_name);
        }
        return out;
    };
    return flatten(*this) == flatten(other);
}

bool on_image_event(ApiIndex& index, const parser::ParsedEvent& event) {
    namespace ev = ktrace::events;
    bool is_load = event.meta.event_name == ev::name::kImageLoad;
    bool is_unload = event.meta.event_name == ev::name::kImageUnload;
    if (!is_load && !is_unload) return false;

    auto base = event.attr_u64("ImageBase");
    if (!base) return false;
    if (is_load) {
        auto size = event.attr_u64("ImageSize");
        auto path = event.attr_text("FileName");
        if (!size || !path) return false;
        return index.load_image(event.meta.pid, module_basename(*path), *base, *size);
    }
    return index.unload_image(event.meta.pid, *base);
}

}  // namespace ktrace::mirror

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "ktrace/mirror.hpp"
#include "ktrace/parser.hpp"
#include "ktrace/schema.hpp"

namespace ktrace::enrich {

struct Correction {
    std::string attr;   // "tid" for the meta thread id
    int map_index = 0;  // which mapping table supplied the value

    bool operator==(const Correction&) const = default;
};

struct EnrichedEvent {
    parser::ParsedEvent event;
    std::vector<Correction> corrections;
    std::set<std::string> still_unresolved;
};

// The relational mapping tables, numbered 1..18. Events mutate 1..14; 15..18
// come from the schema config and never change after construction.
//
//   1 pid -> most recent tid        (CSwitch)
//   2 tid -> pid                    (Thread start/stop, CSwitch)
//   3 FileObject -> file name       (FileIO create)
//   4 FileKey -> file name          (FileIO name)
//   5 pid -> module address pairs   (ImageLoad/Unload, via mirror::ApiIndex)
//   6 process name -> pid           (Process start/stop)
//   7 pid -> process name           (Process start/stop)
//   8 pid -> loaded modules         (ImageLoad/Unload)
//   9 device prefix -> drive prefix (VolumeMount)
//  10 (pid, timestamp) -> resolved call stack   (SysCallEnter)
//  11 address -> syscall name       (exports of .sys modules at ImageLoad)
//  12 observed subset of 11         (SysCallEnter)
//  13 module -> exported apis       (first ImageLoad of the module)
//  14 module -> apis seen in stacks (SysCallEnter)
//  15 event key -> property names   (config)
//  16 "event.property" -> index     (config)
//  17 event key -> struct summary   (config)
//  18 all property names            (config)
//
// Owned by exactly one enrichment stage; no internal locking.
class MappingStore {
  public:
    MappingStore(const schema::SchemaTable& table, const mirror::ManifestSet& manifests);

    // Folds one event into the tables. Must run before correct() for the
    // same event; events arrive in timestamp order.
    void update(const parser::ParsedEvent& event);

    // Fills unresolved or sentinel-valued attributes from the tables.
    // Absence of a mapping is not an error; such attributes stay in
    // still_unresolved.
    EnrichedEvent correct(parser::ParsedEvent event) const;

    std::optional<std::string> process_name(std::uint32_t pid) const;
    std::optional<std::uint32_t> thread_for(std::uint32_t pid) const;

    // Canonical dump of the event-derived maps (1..14), one line per entry:
    //   map=<index> key=<text> value=<text>
    // sorted by (index, key, value).
    std::string snapshot() const;

    const mirror::ApiIndex& api_index() const { return api_index_; }
    std::uint64_t unknown_unloads() const { return api_index_.unknown_unloads(); }
    std::uint64_t conflicting_loads() const { return api_index_.conflicting_loads(); }

    const std::map<std::string, std::vector<std::string>>& event_properties() const {
        return event_properties_;
    }
    const std::map<std::string, std::size_t>& property_index() const { return property_to_index_; }
    const std::map<std::string, std::string>& event_structs() const { return event_structs_; }
    const std::set<std::string>& properties() const { return properties_; }

  private:
    void update_image(const parser::ParsedEvent& event, bool load);
    void update_syscall(const parser::ParsedEvent& event);
    std::vector<std::string> resolve_stack(std::uint32_t pid,
                                           const std::vector<std::uint8_t>& stack_bytes,
                                           bool record_usage);

    const mirror::ManifestSet* manifests_;

    std::unordered_map<std::uint32_t, std::uint32_t> pid_to_tid_;           // 1
    std::unordered_map<std::uint32_t, std::uint32_t> tid_to_pid_;           // 2
    std::unordered_map<std::uint64_t, std::string> file_object_to_name_;    // 3
    std::unordered_map<std::uint64_t, std::string> file_key_to_name_;       // 4
    mirror::ApiIndex api_index_;                                            // 5
    std::unordered_map<std::string, std::uint32_t> process_name_to_pid_;    // 6
    std::unordered_map<std::uint32_t, std::string> pid_to_process_name_;    // 7
    std::map<std::uint32_t, std::set<std::string>> pid_to_modules_;         // 8
    std::map<std::string, std::string> volume_to_disk_;                     // 9
    std::map<std::pair<std::uint32_t, std::uint64_t>, std::vector<std::string>> call_stacks_;  // 10
    std::map<std::uint64_t, std::string> syscall_names_;                    // 11
    std::map<std::uint64_t, std::string> syscalls_used_;                    // 12
    std::map<std::string, std::vector<std::string>> module_apis_;           // 13
    std::map<std::string, std::set<std::string>> used_module_apis_;         // 14

    // 15..18, immutable after construction.
    std::map<std::string, std::vector<std::string>> event_properties_;      // 15
    std::map<std::string, std::size_t> property_to_index_;                  // 16
    std::map<std::string, std::string> event_structs_;                      // 17
    std::set<std::string> properties_;                                      // 18
};

// update + correct in the contract order.
EnrichedEvent enrich_one(MappingStore& store, parser::ParsedEvent event);

// Rewrites a device-form path through the volume map; used by correct() and
// exposed for the brute-force test oracle.
std::optional<std::string> rewrite_device_path(const std::map<std::string, std::string>& volumes,
                                               const std::string& path);

}  // namespace ktrace::enrich
